"""Elliptic operators of even order on the periodic grid.

An operator is a coefficient map {multi-index p: a_p(.)} applied through
tensor-product second-order central differences.  The module also provides
the characteristic form, ellipticity and coefficient-regularity checks,
coefficient freezing at a point, and (weighted) Orlicz-Sobolev norms.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NotEllipticError
from .grid import GridFunction
from .space import luxemburg_norm


class MultiIndex(tuple):
    """Tuple of nonnegative integer exponents with a total order."""

    def __new__(cls, entries):
        entries = tuple(int(e) for e in entries)
        if any(e < 0 for e in entries):
            raise ValueError("multi-index entries must be nonnegative")
        return super().__new__(cls, entries)

    @property
    def order(self):
        return sum(self)


def multi_indices(n, max_order, min_order=0):
    """All multi-indices in n variables with min_order <= |p| <= max_order."""
    out = []
    for total in range(min_order, max_order + 1):
        for combo in itertools.product(range(total + 1), repeat=n):
            if sum(combo) == total:
                out.append(MultiIndex(combo))
    return out


# second-order central stencils for d^k/dx^k, as {offset: coefficient}
_STENCILS = {
    0: {0: 1.0},
    1: {-1: -0.5, 1: 0.5},
    2: {-1: 1.0, 0: -2.0, 1: 1.0},
    3: {-2: -0.5, -1: 1.0, 1: -1.0, 2: 0.5},
    4: {-2: 1.0, -1: -4.0, 0: 6.0, 1: -4.0, 2: 1.0},
}


def _axis_diff(values, k, axis, h):
    if k == 0:
        return values
    out = np.zeros_like(values)
    for off, c in _STENCILS[k].items():
        out += c * np.roll(values, -off, axis=axis)
    return out / h**k


def diff(u, p):
    """Central-difference derivative D^p u on the periodic lattice."""
    p = MultiIndex(p)
    if len(p) != u.domain.n:
        raise ValueError("multi-index dimension mismatch")
    if max(p) > 4:
        raise ValueError("stencils shipped up to fourth order per axis")
    vals = u.values
    for axis, k in enumerate(p):
        vals = _axis_diff(vals, k, axis, u.domain.h)
    return GridFunction(u.domain, vals)


class EllipticOperator:
    """Sum over |p| <= m of a_p(x) D^p with even order m.

    Coefficients are floats (constant) or callables of the node coordinate
    arrays; callables are sampled once per grid and cached.
    """

    def __init__(self, n, m, coeffs):
        if m % 2 != 0 or m < 2:
            raise ValueError("operator order must be even and >= 2")
        self.n = int(n)
        self.m = int(m)
        self.coeffs = {}
        for p, a in coeffs.items():
            p = MultiIndex(p)
            if len(p) != self.n:
                raise ValueError(f"coefficient index {p} has wrong dimension")
            if p.order > m:
                raise ValueError(f"coefficient index {p} exceeds order {m}")
            self.coeffs[p] = a
        if not any(p.order == m for p in self.coeffs):
            raise ValueError("no leading coefficient of full order present")
        self._fields = {}

    @property
    def half_order(self):
        return self.m // 2

    def leading_indices(self):
        return [p for p in sorted(self.coeffs) if p.order == self.m]

    def lower_indices(self):
        return [p for p in sorted(self.coeffs) if p.order < self.m]

    def is_constant(self):
        return all(not callable(a) for a in self.coeffs.values())

    def coeff_at(self, p, x):
        """Coefficient value at a point."""
        a = self.coeffs[MultiIndex(p)]
        if callable(a):
            return float(a(*np.asarray(x, dtype=float)))
        return float(a)

    def coeff_field(self, p, domain):
        """Coefficient sampled on the grid (cached per grid geometry)."""
        p = MultiIndex(p)
        key = (p, domain.N, round(domain.d, 15), tuple(domain.center))
        if key not in self._fields:
            a = self.coeffs[p]
            if callable(a):
                vals = np.broadcast_to(
                    np.asarray(a(*domain.node_grids()), dtype=float), domain.shape
                ).copy()
            else:
                vals = None  # constant fast path
            self._fields[key] = vals
        return self._fields[key]

    def apply(self, u):
        """Operator action by central differences; linear in u."""
        if u.domain.N < 4 * self.m:
            raise ValueError("grid too coarse for the difference stencils")
        out = np.zeros(u.domain.shape)
        for p, a in self.coeffs.items():
            dp = diff(u, p).values
            fld = self.coeff_field(p, u.domain)
            if fld is None:
                out += float(a) * dp
            else:
                out += fld * dp
        return GridFunction(u.domain, out)

    def scaled(self, factor):
        """Operator with every coefficient multiplied by a constant."""
        new = {}
        for p, a in self.coeffs.items():
            if callable(a):
                new[p] = (lambda fn: lambda *X: factor * np.asarray(fn(*X)))(a)
            else:
                new[p] = factor * a
        return EllipticOperator(self.n, self.m, new)

    def __repr__(self):
        kind = "constant" if self.is_constant() else "variable"
        return f"EllipticOperator(n={self.n}, m={self.m}, {kind}, {len(self.coeffs)} terms)"


def laplacian(n, sign=-1.0):
    """sign * sum of second derivatives (sign=-1 gives the positive form)."""
    coeffs = {}
    for a in range(n):
        p = [0] * n
        p[a] = 2
        coeffs[tuple(p)] = float(sign)
    return EllipticOperator(n, 2, coeffs)


def bilaplacian(n, scale=1.0):
    """Squared Laplacian: sum of fourth derivatives plus mixed terms."""
    coeffs = {}
    for a in range(n):
        p = [0] * n
        p[a] = 4
        coeffs[tuple(p)] = float(scale)
    for a in range(n):
        for b in range(a + 1, n):
            p = [0] * n
            p[a] = 2
            p[b] = 2
            coeffs[tuple(p)] = 2.0 * float(scale)
    return EllipticOperator(n, 4, coeffs)


def second_order(matrix):
    """Operator -sum b_ij d_i d_j from a symmetric positive-definite matrix."""
    B = np.asarray(matrix, dtype=float)
    n = B.shape[0]
    if B.shape != (n, n) or not np.allclose(B, B.T):
        raise ValueError("coefficient matrix must be square symmetric")
    coeffs = {}
    for i in range(n):
        p = [0] * n
        p[i] = 2
        coeffs[tuple(p)] = -float(B[i, i])
    for i in range(n):
        for j in range(i + 1, n):
            if B[i, j] != 0.0:
                p = [0] * n
                p[i] = 1
                p[j] = 1
                coeffs[tuple(p)] = -2.0 * float(B[i, j])
    return EllipticOperator(n, 2, coeffs)


def characteristic_form(L, x, eta):
    """Leading-symbol polynomial sum over |p| = m of a_p(x) eta^p."""
    eta = np.asarray(eta, dtype=float)
    total = 0.0
    for p in L.leading_indices():
        total += L.coeff_at(p, x) * float(np.prod(eta**np.asarray(p)))
    return total


def unit_directions(n, count=64, seed=0):
    """Quasi-uniform unit vectors: endpoints (1d), circle, or Fibonacci sphere."""
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        th = np.linspace(0.0, 2 * math.pi, count, endpoint=False)
        return np.column_stack([np.cos(th), np.sin(th)])
    k = np.arange(count)
    golden = (1 + math.sqrt(5)) / 2
    z = 1 - 2 * (k + 0.5) / count
    r = np.sqrt(np.maximum(0.0, 1 - z**2))
    phi = 2 * math.pi * k / golden
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


@dataclass
class EllipticityReport:
    passed: bool
    sign_flipped: bool
    ratio: float
    min_abs: float
    max_abs: float

    def describe(self):
        note = " (sign-flip normalization applied)" if self.sign_flipped else ""
        return f"elliptic{note}, ratio={self.ratio:.3g}"


def ellipticity_check(L, x_samples, eta_samples=None):
    """Verify a uniform sign of (-1)^(m/2) Q(x, eta) over sampled directions.

    A uniformly negative form passes with the sign-flip flag set (the solver
    then negates operator and data together); a sign change raises
    NotEllipticError.  Reports the ellipticity ratio min|Q|/max|Q|.
    """
    if eta_samples is None:
        eta_samples = unit_directions(L.n, max(64, 2 * L.n))
    eta_samples = np.atleast_2d(np.asarray(eta_samples, dtype=float))
    sgn = (-1.0) ** L.half_order
    vals = []
    for x in np.atleast_2d(np.asarray(x_samples, dtype=float)):
        for eta in eta_samples:
            vals.append(sgn * characteristic_form(L, x, eta))
    vals = np.asarray(vals)
    if np.all(vals > 0):
        flipped = False
    elif np.all(vals < 0):
        flipped = True
    else:
        raise NotEllipticError(
            f"characteristic form changes sign over samples "
            f"(min={vals.min():.3g}, max={vals.max():.3g})"
        )
    av = np.abs(vals)
    return EllipticityReport(
        passed=True,
        sign_flipped=flipped,
        ratio=float(av.min() / av.max()),
        min_abs=float(av.min()),
        max_abs=float(av.max()),
    )


def freeze_leading(L, x0):
    """Constant-coefficient operator: leading coefficients frozen at x0."""
    x0 = np.asarray(x0, dtype=float)
    coeffs = {p: L.coeff_at(p, x0) for p in L.leading_indices()}
    return EllipticOperator(L.n, L.m, coeffs)


def _ball_points(n, count, seed):
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((count, n))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    radii = rng.uniform(0.0, 1.0, size=count) ** (1.0 / n)
    return pts * radii[:, None]


@dataclass
class RegularityRow:
    radius: float
    sup_bound: float
    oscillation: float


@dataclass
class RegularityReport:
    rows: list
    passed: bool
    note: str = ""


def coefficient_continuity_check(L, x0, radii, samples=256, seed=0):
    """Boundedness of all coefficients near x0 and continuity of the leading ones.

    For each radius the report records the sampled sup of |a_p| over the
    ball and the leading-coefficient oscillation max |a_p(x) - a_p(x0)|.
    Passing requires finite sups and an oscillation that decays toward zero
    along the (decreasing) radius list; no rate is asserted.
    """
    x0 = np.asarray(x0, dtype=float)
    radii = list(radii)
    if any(r2 >= r1 for r1, r2 in zip(radii, radii[1:])):
        raise ValueError("radii must decrease")
    base = _ball_points(L.n, samples, seed)
    rows = []
    all_p = sorted(L.coeffs)
    lead = L.leading_indices()
    a0 = {p: L.coeff_at(p, x0) for p in lead}
    for r in radii:
        pts = x0[None, :] + r * base
        sup = 0.0
        osc = 0.0
        for p in all_p:
            vals = np.array([L.coeff_at(p, x) for x in pts])
            sup = max(sup, float(np.max(np.abs(vals))))
            if p in lead:
                osc = max(osc, float(np.max(np.abs(vals - a0[p]))))
        rows.append(RegularityRow(radius=r, sup_bound=sup, oscillation=osc))
    finite = all(math.isfinite(row.sup_bound) for row in rows)
    osc_first = rows[0].oscillation
    osc_last = rows[-1].oscillation
    if osc_first <= 1e-12:
        decays = True
    else:
        non_increasing = all(
            rows[i + 1].oscillation <= rows[i].oscillation * 1.05 for i in range(len(rows) - 1)
        )
        decays = non_increasing and osc_last <= 0.75 * osc_first
    passed = finite and decays
    note = "" if passed else "leading coefficient oscillation does not vanish"
    return RegularityReport(rows=rows, passed=passed, note=note)


@dataclass
class SobolevNorms:
    """Per-index gauge norms of D^p u with plain and diameter-weighted sums."""

    per_index: dict
    plain: float
    weighted: float
    d_omega: float


def sobolev_norms(u, m, M, d_omega):
    """Norms of all difference derivatives up to order m.

    plain = sum ||D^p u||_M; weighted scales the order-|p| term by
    d_omega^|p| (d_omega is the diameter of the working domain).
    """
    if u.domain.N < 4 * m:
        raise ValueError("grid too coarse for the difference stencils")
    per = {}
    plain = 0.0
    weighted = 0.0
    for p in multi_indices(u.domain.n, m):
        nrm = luxemburg_norm(diff(u, p), M)
        per[p] = nrm
        plain += nrm
        weighted += d_omega**p.order * nrm
    return SobolevNorms(per_index=per, plain=plain, weighted=weighted, d_omega=d_omega)
