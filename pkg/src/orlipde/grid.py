"""Uniform periodic grids on a cube and real-valued functions sampled on them.

Nodes sit at cell centers: along each axis x_i = center - d/2 + (i + 1/2) h
with h = d/N, so a masked sum of values times cell volume is the midpoint
rule over the cells whose centers are selected.  Index arithmetic is
periodic with period N per axis.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ResolutionError


class GridDomain:
    """Periodized cube [center - d/2, center + d/2)^n sampled by N^n cells.

    ``mask`` selects the nodes belonging to the working subdomain; it
    defaults to the whole cube.
    """

    def __init__(self, n, N, d, center=None, mask=None):
        if n not in (1, 2, 3):
            raise ValueError("dimension must be 1, 2 or 3")
        if N < 4:
            raise ValueError("need at least 4 points per axis")
        self.n = int(n)
        self.N = int(N)
        self.d = float(d)
        self.h = self.d / self.N
        self.cell_volume = self.h**self.n
        self.shape = (self.N,) * self.n
        self.center = np.zeros(self.n) if center is None else np.asarray(center, dtype=float)
        if self.center.shape != (self.n,):
            raise ValueError("center must have one entry per axis")
        if mask is None:
            mask = np.ones(self.shape, dtype=bool)
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != self.shape:
            raise ValueError("mask shape does not match the grid")
        if not mask.any():
            raise ValueError("mask selects no nodes")
        self.mask = mask
        self.mask.flags.writeable = False
        self._grids = None

    def axis_coords(self, a):
        return self.center[a] - self.d / 2 + (np.arange(self.N) + 0.5) * self.h

    def node_grids(self):
        """Meshgrid of node coordinates, one array per axis (cached)."""
        if self._grids is None:
            axes = [self.axis_coords(a) for a in range(self.n)]
            self._grids = np.meshgrid(*axes, indexing="ij")
        return self._grids

    def offset_lattice(self):
        """Pairwise node differences k*h, wrapped to [-d/2, d/2) per axis.

        Offset index 0 is the zero difference (the singular point of
        convolution kernels).
        """
        off = (np.arange(self.N) * self.h + self.d / 2) % self.d - self.d / 2
        return np.meshgrid(*([off] * self.n), indexing="ij")

    def ball_mask(self, center, radius):
        """Boolean mask of nodes inside the ball; the ball must fit in the cube."""
        center = np.asarray(center, dtype=float)
        if np.any(np.abs(center - self.center) + radius >= self.d / 2):
            raise ValueError("ball is not strictly inside the cube")
        grids = self.node_grids()
        r2 = sum((g - c) ** 2 for g, c in zip(grids, center))
        return r2 < radius**2

    def measure(self, mask=None):
        """Lebesgue measure of the masked cell union."""
        m = self.mask if mask is None else mask
        return float(np.count_nonzero(m)) * self.cell_volume

    def with_mask(self, mask):
        return GridDomain(self.n, self.N, self.d, center=self.center, mask=mask)

    def same_geometry(self, other):
        return (
            self.n == other.n
            and self.N == other.N
            and self.d == other.d
            and np.array_equal(self.center, other.center)
        )

    def __repr__(self):
        return f"GridDomain(n={self.n}, N={self.N}, d={self.d:g})"


class GridFunction:
    """Real samples on a GridDomain, indexed periodically."""

    def __init__(self, domain, values):
        values = np.asarray(values, dtype=float)
        if values.shape != domain.shape:
            raise ValueError("values shape does not match the grid")
        self.domain = domain
        self.values = values.copy()
        self.values.flags.writeable = False

    @classmethod
    def from_callable(cls, domain, fn, restrict=False):
        """Sample fn(*coordinate grids); optionally zero outside the mask."""
        vals = np.asarray(fn(*domain.node_grids()), dtype=float)
        vals = np.broadcast_to(vals, domain.shape).copy()
        if restrict:
            vals[~domain.mask] = 0.0
        return cls(domain, vals)

    @classmethod
    def zeros(cls, domain):
        return cls(domain, np.zeros(domain.shape))

    @classmethod
    def indicator(cls, domain, mask):
        return cls(domain, np.where(mask, 1.0, 0.0))

    def masked_values(self):
        return self.values[self.domain.mask]

    def restricted(self, mask=None):
        """Copy with values zeroed outside the given (or domain) mask."""
        m = self.domain.mask if mask is None else mask
        return GridFunction(self.domain, np.where(m, self.values, 0.0))

    def sup_norm(self, masked=True):
        vals = self.masked_values() if masked else self.values
        return float(np.max(np.abs(vals)))

    # arithmetic conveniences used heavily by callers and tests
    def _binary(self, other, op):
        if isinstance(other, GridFunction):
            if not self.domain.same_geometry(other.domain):
                raise ValueError("grid geometry mismatch")
            return GridFunction(self.domain, op(self.values, other.values))
        return GridFunction(self.domain, op(self.values, other))

    def __add__(self, other):
        return self._binary(other, np.add)

    def __radd__(self, other):
        return self._binary(other, lambda a, b: np.add(b, a))

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __rsub__(self, other):
        return self._binary(other, lambda a, b: np.subtract(b, a))

    def __mul__(self, other):
        return self._binary(other, np.multiply)

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(self.domain, -self.values)

    def __repr__(self):
        return f"GridFunction({self.domain!r}, sup={self.sup_norm(masked=False):g})"


@dataclass(frozen=True)
class ShiftVector:
    """A displacement, stored in physical units."""

    delta: tuple

    @classmethod
    def from_cells(cls, domain, cells):
        cells = np.atleast_1d(np.asarray(cells, dtype=float))
        if cells.size != domain.n:
            raise ValueError("one shift entry per axis required")
        return cls(tuple(float(c) * domain.h for c in cells))

    @classmethod
    def of(cls, *components):
        return cls(tuple(float(c) for c in components))

    def magnitude(self):
        return float(np.hypot.reduce(np.asarray(self.delta)))

    def reduced(self, domain):
        """Components reduced modulo the period d of the domain."""
        d = domain.d
        return tuple(((c + d / 2) % d) - d / 2 for c in self.delta)

    def cell_shifts(self, domain, tol=1e-9):
        """Integer cell counts when on-lattice, else None."""
        out = []
        for c in self.delta:
            s = c / domain.h
            si = round(s)
            if abs(s - si) > tol:
                return None
            out.append(int(si) % domain.N)
        return tuple(out)


def shift(f, delta):
    """Translate f by delta: result(x) = f(x + delta), periodically.

    On-lattice shifts (integer multiples of the cell width) are exact index
    rolls; off-lattice shifts fall back to linear interpolation and emit an
    off-lattice warning.
    """
    if not isinstance(delta, ShiftVector):
        delta = ShiftVector(tuple(np.atleast_1d(np.asarray(delta, dtype=float))))
    if len(delta.delta) != f.domain.n:
        raise ValueError("shift dimension mismatch")
    cells = delta.cell_shifts(f.domain)
    if cells is not None:
        out = f.values
        for axis, s in enumerate(cells):
            if s:
                out = np.roll(out, -s, axis=axis)
        return GridFunction(f.domain, out)
    warnings.warn("off-lattice shift: using linear interpolation", stacklevel=2)
    out = f.values
    for axis, c in enumerate(delta.delta):
        s = c / f.domain.h
        lo = int(np.floor(s))
        frac = s - lo
        a = np.roll(out, -lo, axis=axis)
        b = np.roll(out, -(lo + 1), axis=axis)
        out = (1.0 - frac) * a + frac * b
    return GridFunction(f.domain, out)


def _spectral_product(f, g):
    # symmetrized product keeps convolution commutative bit for bit
    F = np.fft.fftn(f)
    G = np.fft.fftn(g)
    return 0.5 * (F * G + G * F)


def convolve(f, g):
    """Periodic convolution over the cube, scaled by the cell volume.

    The returned samples live on the offset lattice (node differences); all
    norms are invariant under that half-cell relabeling, and kernel-type
    integrands should use the dedicated kernel paths instead.  Commutative
    bit for bit, linear in each argument to rounding.
    """
    if not f.domain.same_geometry(g.domain):
        raise ValueError("convolution requires identical grid geometry")
    vals = np.fft.ifftn(_spectral_product(f.values, g.values)).real
    return GridFunction(f.domain, vals * f.domain.cell_volume)


def kernel_convolve(kernel_values, f):
    """Convolve an offset-lattice kernel array with a grid function.

    ``kernel_values[m]`` must hold the kernel at the wrapped difference
    m*h, so the output lives on the original nodes.
    """
    vals = np.fft.ifftn(np.fft.fftn(kernel_values) * np.fft.fftn(f.values)).real
    return GridFunction(f.domain, vals * f.domain.cell_volume)


def kernel_convolve_direct(kernel_values, f):
    """Direct fixed-order convolution sum; bit-exact shift equivariance.

    Cost is O(N^(2n)); intended for principal-value kernels on desk-scale
    grids where exact lattice equivariance matters.
    """
    out = np.zeros(f.domain.shape)
    vals = f.values
    it = np.ndindex(*f.domain.shape)
    for m in it:
        w = kernel_values[m]
        if w == 0.0:
            continue
        rolled = vals
        for axis, s in enumerate(m):
            if s:
                rolled = np.roll(rolled, s, axis=axis)
        out += w * rolled
    return GridFunction(f.domain, out * f.domain.cell_volume)


def mollifier_kernel(domain, eps):
    """Compactly supported smooth bump on the offset lattice, unit discrete mass.

    The profile is exp(-eps^2 / (eps^2 - |z|^2)) inside |z| < eps and zero
    outside; the normalizing constant is fixed so the discrete integral is
    exactly one.
    """
    if eps < 2 * domain.h:
        raise ResolutionError(f"mollifier width {eps:g} under-resolved (h={domain.h:g})")
    if eps >= domain.d / 4:
        raise ResolutionError("mollifier width must stay below a quarter period")
    offs = domain.offset_lattice()
    r2 = sum(o**2 for o in offs)
    vals = np.zeros(domain.shape)
    inside = r2 < eps**2
    with np.errstate(divide="ignore", over="ignore"):
        vals[inside] = np.exp(-(eps**2) / (eps**2 - r2[inside]))
    mass = vals.sum() * domain.cell_volume
    return vals / mass


# -- text file format ---------------------------------------------------------


def write_grid_function(f, path):
    """Write header 'n,N,d' then one value per line in lexicographic order."""
    with open(path, "w") as fh:
        fh.write(f"{f.domain.n},{f.domain.N},{float(f.domain.d)!r}\n")
        for v in f.values.ravel(order="C"):
            fh.write(f"{float(v)!r}\n")


def read_grid_function(path, mask=None):
    with open(path) as fh:
        header = fh.readline().strip()
        try:
            n_s, N_s, d_s = header.split(",")
            n, N, d = int(n_s), int(N_s), float(d_s)
        except ValueError as exc:
            raise ConfigError(f"bad grid file header {header!r}") from exc
        values = np.loadtxt(fh, dtype=float, ndmin=1)
    if values.size != N**n:
        raise ConfigError(f"grid file holds {values.size} values, expected {N**n}")
    domain = GridDomain(n, N, d, mask=mask)
    return GridFunction(domain, values.reshape(domain.shape))


def write_mask(domain, path, mask=None):
    m = domain.mask if mask is None else mask
    with open(path, "w") as fh:
        fh.write(f"{domain.n},{domain.N},{float(domain.d)!r}\n")
        for v in np.asarray(m, dtype=int).ravel(order="C"):
            fh.write(f"{v}\n")


def read_mask(path):
    g = read_grid_function(path)
    return g.domain, g.values.astype(bool)
