"""Fundamental solutions, weakly singular potentials and principal-value integrals.

Shipped closed-form kernels cover the isotropic and anisotropic second-order
families in one to three dimensions and the squared-Laplacian family in two
and three dimensions.  Derivatives are produced symbolically and cached as
vectorized evaluators.  Convolution kernels are sampled on the offset
lattice; the singular cell is either replaced by its inscribed-ball average
(weakly singular regime) or excluded symmetrically (principal value), with
the local multiple of the identity calibrated against the exact inversion
identity of the generating operator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import sympy as sp

from .errors import CalibrationError, CapabilityError, InvalidKernelError, RangeError
from .grid import GridFunction, kernel_convolve, kernel_convolve_direct, mollifier_kernel
from .operators import EllipticOperator, MultiIndex, diff, multi_indices
from .space import luxemburg_norm, shift_modulus


def unit_ball_volume(n):
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


def sphere_area(n):
    return n * unit_ball_volume(n)


def ball_integral(alpha, r, n):
    """Integral of |y|^(-alpha) over the ball of radius r in n dimensions.

    Closed form n*|B1| * r^(n-alpha) / (n-alpha); the constant is pinned by
    direct polar-coordinate quadrature (surface area times the radial
    integral).  Diverges for alpha >= n.
    """
    if alpha >= n:
        raise RangeError(f"ball integral diverges for alpha={alpha:g} >= n={n}")
    if r <= 0:
        raise ValueError("radius must be positive")
    return sphere_area(n) * r ** (n - alpha) / (n - alpha)


def sphere_points(n, count=None):
    """Quadrature nodes and weights integrating over the unit sphere.

    1d: two endpoints.  2d: trapezoid on the circle (spectrally accurate).
    3d: Gauss-Legendre in the polar cosine times trapezoid in azimuth.
    """
    if n == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if n == 2:
        k = count or 256
        th = np.linspace(0.0, 2 * math.pi, k, endpoint=False)
        pts = np.column_stack([np.cos(th), np.sin(th)])
        return pts, np.full(k, 2 * math.pi / k)
    k_mu = 32
    k_phi = count or 64
    mu, w_mu = np.polynomial.legendre.leggauss(k_mu)
    phi = np.linspace(0.0, 2 * math.pi, k_phi, endpoint=False)
    MU, PHI = np.meshgrid(mu, phi, indexing="ij")
    s = np.sqrt(1 - MU**2)
    pts = np.column_stack([(s * np.cos(PHI)).ravel(), (s * np.sin(PHI)).ravel(), MU.ravel()])
    W = np.broadcast_to(w_mu[:, None] * (2 * math.pi / k_phi), MU.shape)
    return pts, W.ravel().copy()


def sphere_integral(n, fn, count=None):
    pts, w = sphere_points(n, count)
    vals = np.asarray(fn(pts), dtype=float)
    return float(np.dot(w, vals))


# -- closed-form families -----------------------------------------------------


def _sym_vars(n):
    return sp.symbols(f"x1:{n + 1}", real=True)


def _laplace_family_expr(n, Binv, det):
    """Kernel of -sum b_ij d_i d_j for symmetric positive-definite B."""
    X = _sym_vars(n)
    q = sum(
        sp.Float(Binv[i, j]) * X[i] * X[j] for i in range(n) for j in range(n)
    )
    if n == 1:
        return -sp.sqrt(q) / 2 / sp.sqrt(sp.Float(det)), X
    if n == 2:
        return -sp.log(q) / (4 * sp.pi) / sp.sqrt(sp.Float(det)), X
    return 1 / (4 * sp.pi * sp.sqrt(q)) / sp.sqrt(sp.Float(det)), X


def _bilaplace_expr(n):
    X = _sym_vars(n)
    q = sum(x**2 for x in X)
    if n == 2:
        return q * sp.log(q) / (16 * sp.pi), X
    if n == 3:
        return -sp.sqrt(q) / (8 * sp.pi), X
    raise CapabilityError(f"squared-Laplacian kernel not shipped for n={n}")


class FundamentalSolution:
    """Closed-form kernel inverting a constant-coefficient pure-order operator.

    ``branch`` is "power" when the kernel is positively homogeneous of
    degree m-n and "log" when a logarithmic factor is present (even n with
    n <= m).  Derivative evaluators are generated symbolically on demand.
    """

    def __init__(self, operator, expr, symbols, branch, name):
        self.operator = operator
        self.n = operator.n
        self.m = operator.m
        self.expr = expr
        self.symbols = symbols
        self.branch = branch
        self.name = name
        self._deriv_fns = {}
        self._grid_cache = {}
        self._local_cache = {}

    def _fn(self, p):
        p = MultiIndex(p)
        if p not in self._deriv_fns:
            e = self.expr
            for x, k in zip(self.symbols, p):
                if k:
                    e = sp.diff(e, x, k)
            # distributional point masses do not contribute away from zero
            e = e.replace(lambda t: isinstance(t, sp.DiracDelta), lambda t: sp.S.Zero)
            self._deriv_fns[p] = sp.lambdify(self.symbols, e, modules="numpy")
        return self._deriv_fns[p]

    def evaluate(self, *coords):
        return self.derivative((0,) * self.n, *coords)

    def derivative(self, p, *coords):
        """d^p of the kernel at nonzero points; vectorized over arrays."""
        arrs = [np.asarray(c, dtype=float) for c in coords]
        shape = np.broadcast_shapes(*[a.shape for a in arrs])
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = np.asarray(self._fn(p)(*arrs), dtype=float)
        if shape == ():
            return float(out)
        if out.shape != shape:
            out = np.broadcast_to(out, shape)
        return np.array(out)

    def decay_constant(self, orders=None):
        """Sampled sup of |d^p J(x)| |x|^(n+|p|-m) over the annulus 1e-3 <= |x| <= 1."""
        best = 0.0
        pts, _ = sphere_points(self.n, 64 if self.n == 2 else None)
        radii = np.logspace(-3, 0, 25)
        for p in multi_indices(self.n, self.m if orders is None else orders):
            for r in radii:
                X = [r * pts[:, a] for a in range(self.n)]
                vals = np.abs(self.derivative(p, *X))
                best = max(best, float(np.max(vals)) * r ** (self.n + p.order - self.m))
        return best

    def cell_average(self, p, h):
        """Mean of d^p J over the ball inscribed in the singular cell.

        Radial Gauss-Legendre times a sphere rule; valid in the weakly
        singular regime |p| < m.  Normalized by the cell volume so it can
        replace the kernel value at the zero offset.
        """
        rho = h / 2.0
        nodes, w_r = np.polynomial.legendre.leggauss(48)
        s = 0.5 * rho * (nodes + 1.0)
        w_s = 0.5 * rho * w_r
        pts, w_th = sphere_points(self.n)
        total = 0.0
        for si, wi in zip(s, w_s):
            X = [si * pts[:, a] for a in range(self.n)]
            vals = self.derivative(p, *X)
            total += wi * si ** (self.n - 1) * float(np.dot(w_th, vals))
        return total / h**self.n

    def kernel_array(self, domain, p, mode):
        """Offset-lattice samples of d^p J with the singular cell handled.

        mode "weak" replaces the zero-offset entry by the inscribed-ball
        average (|p| < m); mode "pv" zeroes it (symmetric exclusion).
        """
        p = MultiIndex(p)
        key = (p, mode, domain.N, round(domain.d, 12))
        if key in self._grid_cache:
            return self._grid_cache[key]
        offs = domain.offset_lattice()
        vals = self.derivative(p, *offs)
        origin = (0,) * domain.n
        if mode == "weak":
            vals[origin] = self.cell_average(p, domain.h)
        elif mode == "pv":
            vals[origin] = 0.0
        else:
            raise ValueError(f"unknown kernel mode {mode!r}")
        if not np.all(np.isfinite(vals)):
            raise CapabilityError("kernel samples are not finite off the origin")
        vals.flags.writeable = False
        self._grid_cache[key] = vals
        return vals

    def local_constants(self, domain):
        """Calibrated identity coefficients for the order-m derivative kernels."""
        key = (domain.N, round(domain.d, 12))
        if key not in self._local_cache:
            self._local_cache[key] = _calibrate_local_constants(self, domain)
        return self._local_cache[key]

    def __repr__(self):
        return f"FundamentalSolution({self.name}, n={self.n}, m={self.m}, {self.branch})"


def _second_order_matrix(L0):
    B = np.zeros((L0.n, L0.n))
    for p, a in L0.coeffs.items():
        nz = [i for i, e in enumerate(p) if e]
        if p.order != 2:
            raise CapabilityError("pure second-order operator expected")
        if len(nz) == 1:
            B[nz[0], nz[0]] = -float(a)
        else:
            i, j = nz
            B[i, j] = B[j, i] = -float(a) / 2.0
    return B


def _bilaplacian_scale(L0):
    scale = None
    for p, a in L0.coeffs.items():
        nz = sorted(e for e in p if e)
        if nz == [4]:
            c = float(a)
        elif nz == [2, 2]:
            c = float(a) / 2.0
        else:
            raise CapabilityError("fourth-order support is limited to the squared Laplacian")
        if scale is None:
            scale = c
        elif not math.isclose(scale, c, rel_tol=1e-12):
            raise CapabilityError("fourth-order support is limited to the squared Laplacian")
    # every squared-Laplacian term must be present: n pure plus n(n-1)/2 mixed
    if len(L0.coeffs) != L0.n + L0.n * (L0.n - 1) // 2:
        raise CapabilityError("fourth-order support is limited to the squared Laplacian")
    return scale


def fundamental_solution(L0):
    """Closed-form fundamental solution of a constant-coefficient operator.

    Supported: second order -sum b_ij d_i d_j with definite symmetric B in
    n = 1, 2, 3, and multiples of the squared Laplacian in n = 2, 3.  Signs
    are fixed so convolving the kernel with L0(phi) reproduces phi.  Raises
    CapabilityError for anything else.
    """
    if not L0.is_constant():
        raise CapabilityError("fundamental solutions require constant coefficients")
    if any(p.order < L0.m for p in L0.coeffs):
        raise CapabilityError("fundamental solutions require a pure-order operator")
    n = L0.n
    if L0.m == 2:
        B = _second_order_matrix(L0)
        eig = np.linalg.eigvalsh(B)
        sign = 1.0
        if np.all(eig < 0):
            B = -B
            sign = -1.0
        elif not np.all(eig > 0):
            raise CapabilityError("second-order coefficient matrix is not definite")
        Binv = np.linalg.inv(B)
        det = float(np.linalg.det(B))
        expr, X = _laplace_family_expr(n, Binv, det)
        expr = sp.Float(sign) * expr
        branch = "log" if n == 2 else "power"
        iso = np.allclose(B, B[0, 0] * np.eye(n))
        name = f"laplace{n}d" if iso else f"aniso{n}d"
        return FundamentalSolution(L0, expr, X, branch, name)
    if L0.m == 4 and n in (2, 3):
        scale = _bilaplacian_scale(L0)
        expr, X = _bilaplace_expr(n)
        expr = expr / sp.Float(scale)
        branch = "log" if n == 2 else "power"
        return FundamentalSolution(L0, expr, X, branch, f"biharmonic{n}d")
    raise CapabilityError(f"no fundamental solution shipped for (n={n}, m={L0.m})")


# -- potentials ---------------------------------------------------------------


def potential(J, psi, p=None):
    """Convolution of d^p J with psi over the masked domain, |p| < m.

    The singular cell uses the inscribed-ball average of the kernel, which
    removes the dominant quadrature error of the weakly singular integrand.
    Linear in psi.
    """
    p = MultiIndex(p if p is not None else (0,) * J.n)
    if p.order >= J.m:
        raise ValueError("order-m derivatives require singular_potential")
    ker = J.kernel_array(psi.domain, p, "weak")
    return kernel_convolve(ker, psi.restricted())


def singular_potential(J, psi, p, include_local=True):
    """Order-m derivative of the potential: principal value plus local term.

    The principal value excludes exactly the singular cell; the local
    multiple of psi uses the constants calibrated against the inversion
    identity of the generating operator.
    """
    p = MultiIndex(p)
    if p.order != J.m:
        raise ValueError("singular_potential handles exactly the order-m derivatives")
    ker = J.kernel_array(psi.domain, p, "pv")
    psi_r = psi.restricted()
    out = kernel_convolve(ker, psi_r)
    if include_local:
        consts = J.local_constants(psi.domain)
        out = out + psi_r * consts.constants[p]
    return out


@dataclass
class LocalConstants:
    constants: dict
    residual: float
    gamma: float


def _probe_bumps(domain, count=3):
    probes = []
    widths = [domain.d / 5.0, domain.d / 6.5, domain.d / 5.5]
    shifts = [(0,) * domain.n, None, None]
    grids = domain.node_grids()
    for i in range(count):
        eps = widths[i % len(widths)]
        center = np.array(domain.center, dtype=float)
        if i == 1:
            center = center + domain.h * 3
        if i == 2:
            center = center - domain.h * 2
        r2 = sum((g - c) ** 2 for g, c in zip(grids, center))
        vals = np.zeros(domain.shape)
        inside = r2 < eps**2
        with np.errstate(over="ignore"):
            vals[inside] = np.exp(-(eps**2) / (eps**2 - r2[inside]))
        if i == 2 and domain.n >= 1:
            vals *= 1.0 + 0.5 * np.sin(2 * np.pi * grids[0] / domain.d)
        probes.append(GridFunction(domain, vals))
    return probes


def _calibrate_local_constants(J, domain, threshold=0.05):
    """Fit the local identity coefficients of the order-m kernels.

    Stage 1 estimates each coefficient from the requirement that the
    principal value plus local term equals a difference derivative of the
    next-lower potential.  Stage 2 rescales all coefficients jointly by
    least squares so the operator applied to its own potential reproduces
    the density, and reports the held-out relative residual.
    """
    probes = _probe_bumps(domain, 3)
    fit_probes, holdout = probes[:2], probes[2]
    raw = {}
    for p in multi_indices(J.n, J.m, J.m):
        axis = next(i for i, e in enumerate(p) if e)
        q = list(p)
        q[axis] -= 1
        num = 0.0
        den = 0.0
        for psi in fit_probes:
            lower = potential(J, psi, q)
            target = diff(lower, tuple(1 if a == axis else 0 for a in range(J.n)))
            pv = kernel_convolve(J.kernel_array(domain, p, "pv"), psi)
            resid = target.values - pv.values
            num += float(np.sum(resid * psi.values))
            den += float(np.sum(psi.values**2))
        raw[MultiIndex(p)] = num / den
    # joint rescale against the inversion identity on the fit probes; the
    # identity involves only the operator's own leading indices
    a0 = {p: J.operator.coeff_at(p, np.zeros(J.n)) for p in J.operator.leading_indices()}
    csum = sum(a0[p] * raw[p] for p in a0)
    num = 0.0
    den = 0.0
    for psi in fit_probes:
        pv_total = np.zeros(domain.shape)
        for p in a0:
            pv_total += a0[p] * kernel_convolve(J.kernel_array(domain, p, "pv"), psi).values
        num += float(np.sum((psi.values - pv_total) * (csum * psi.values)))
        den += float(np.sum((csum * psi.values) ** 2))
    gamma = num / den
    constants = {p: gamma * raw[p] for p in raw}
    # held-out residual of the inversion identity
    pv_total = np.zeros(domain.shape)
    for p in a0:
        pv_total += a0[p] * kernel_convolve(J.kernel_array(domain, p, "pv"), holdout).values
    local = sum(a0[p] * constants[p] for p in a0)
    recon = pv_total + local * holdout.values
    residual = float(
        np.max(np.abs(recon - holdout.values)) / np.max(np.abs(holdout.values))
    )
    if residual > threshold:
        raise CalibrationError(
            f"kernel calibration failed: identity residual {residual:.3g} > {threshold:g}"
        )
    return LocalConstants(constants=constants, residual=residual, gamma=gamma)


@dataclass
class ReproductionRow:
    label: str
    error: float
    trivial: bool = False


@dataclass
class ReproductionReport:
    rows: list
    threshold: float

    @property
    def passed(self):
        return all(r.trivial or r.error <= self.threshold for r in self.rows)

    @property
    def max_error(self):
        errs = [r.error for r in self.rows if not r.trivial]
        return max(errs) if errs else 0.0


def verify_fundamental(J, phis, threshold=0.05):
    """Reproduction check: convolving the kernel with L0(phi) returns phi.

    The error is the masked sup-norm defect relative to sup|phi|; inputs
    with vanishing sup are reported as trivial.
    """
    rows = []
    for i, phi in enumerate(phis):
        sup = phi.sup_norm(masked=False)
        if sup == 0.0:
            rows.append(ReproductionRow(label=f"phi{i}", error=math.nan, trivial=True))
            continue
        lphi = J.operator.apply(phi)
        recon = potential(J, lphi, (0,) * J.n)
        err = float(np.max(np.abs((recon.values - phi.values)[phi.domain.mask]))) / sup
        rows.append(ReproductionRow(label=f"phi{i}", error=err))
    return ReproductionReport(rows=rows, threshold=threshold)


# -- singular kernels ---------------------------------------------------------


class SingularKernel:
    """Kernel omega(x/|x|) / |x|^n with smooth zero-mean angular part."""

    def __init__(self, n, omega, name="kernel"):
        self.n = n
        self.omega = omega
        self.name = name
        self.mean_zero_defect = abs(sphere_integral(n, lambda pts: np.asarray(omega(pts))))

    @classmethod
    def from_angle(cls, fn, name="kernel2d"):
        """2d kernel from a function of the polar angle."""

        def omega(pts):
            th = np.arctan2(pts[..., 1], pts[..., 0])
            return fn(th)

        return cls(2, omega, name=name)

    @classmethod
    def from_derivative(cls, J, p):
        """Angular part of an order-m kernel derivative (degree -n homogeneous)."""
        p = MultiIndex(p)
        if p.order != J.m:
            raise ValueError("critical homogeneity requires |p| = m")

        def omega(pts):
            X = [pts[..., a] for a in range(J.n)]
            return J.derivative(p, *X)

        return cls(J.n, omega, name=f"{J.name}:d{''.join(map(str, p))}")

    def evaluate(self, *coords):
        r = np.sqrt(sum(np.asarray(c, dtype=float) ** 2 for c in coords))
        with np.errstate(divide="ignore", invalid="ignore"):
            pts = np.stack([np.asarray(c, dtype=float) / r for c in coords], axis=-1)
            vals = np.asarray(self.omega(pts)) / r**self.n
        return vals

    def kernel_array(self, domain):
        offs = domain.offset_lattice()
        vals = self.evaluate(*offs)
        vals[(0,) * domain.n] = 0.0  # symmetric exclusion of the singular cell
        if not np.all(np.isfinite(vals)):
            raise InvalidKernelError("kernel samples are not finite off the origin")
        return vals


def singular_integral(k, f, tol=1e-8):
    """Principal-value convolution of a zero-mean critical kernel with f.

    Uses the direct fixed-order sum, so lattice shifts commute with the
    operator bit for bit.
    """
    if k.mean_zero_defect > tol:
        raise InvalidKernelError(
            f"kernel mean over the sphere is {k.mean_zero_defect:.3g}, beyond {tol:g}"
        )
    ker = k.kernel_array(f.domain)
    return kernel_convolve_direct(ker, f.restricted())


def shift_invariance_probe(k, f, M, deltas):
    """Shift modulus of the transformed function: rows (|delta|, modulus)."""
    kf = singular_integral(k, f)
    return shift_modulus(kf, M, deltas)
