"""Local solver built from frozen-coefficient potentials.

Around a point x0 the operator is split into its frozen leading part and a
remainder; convolving the remainder with the frozen kernel defines a
correction operator whose weighted-Sobolev norm shrinks with the ball
radius.  The fixed-point iteration u <- correction(u) + potential(f) then
converges to a local solution of the original equation for small radii.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError
from .grid import GridDomain, GridFunction
from .kernels import fundamental_solution, potential, singular_potential, verify_fundamental
from .operators import (
    EllipticOperator,
    ellipticity_check,
    freeze_leading,
    multi_indices,
    sobolev_norms,
)
from .space import luxemburg_norm, shift_modulus

DEFAULT_RADII = (0.4, 0.2, 0.1, 0.05)


def cap_bump(domain, radius, center=None, degree=None, rng=None):
    """Smooth compactly supported probe: a cap bump times a low-degree polynomial."""
    grids = domain.node_grids()
    c = np.asarray(domain.center if center is None else center, dtype=float)
    r2 = sum((g - ci) ** 2 for g, ci in zip(grids, c))
    vals = np.zeros(domain.shape)
    inside = r2 < radius**2
    with np.errstate(over="ignore"):
        vals[inside] = np.exp(-(radius**2) / (radius**2 - r2[inside]))
    if degree is not None and rng is not None:
        poly = np.zeros(domain.shape)
        for _ in range(degree + 1):
            term = np.ones(domain.shape)
            for g, ci in zip(grids, c):
                k = rng.integers(0, degree + 1)
                term = term * ((g - ci) / radius) ** k
            poly += rng.uniform(-1.0, 1.0) * term
        vals = vals * (1.0 + poly)
    return GridFunction(domain, vals)


class ParametrixOperator:
    """Frozen-kernel machinery for one ball B_r(x0) inside the padded cube.

    The cube side is pad*r so periodic images stay separated.  When the
    characteristic form is uniformly negative, the operator and any data
    are negated together (recorded in ``sign_flipped``), which leaves the
    solution set unchanged.
    """

    def __init__(self, L, x0, r, N=64, M=None, pad=4.0):
        x0 = np.asarray(x0, dtype=float)
        rep = ellipticity_check(L, [x0])
        self.sign_flipped = rep.sign_flipped
        self.ellipticity = rep
        self.L = L.scaled(-1.0) if rep.sign_flipped else L
        self.x0 = x0
        self.r = float(r)
        self.M = M
        d = pad * r
        dom = GridDomain(L.n, N, d, center=x0)
        self.domain = dom.with_mask(dom.ball_mask(x0, r))
        self.L_frozen = freeze_leading(self.L, x0)
        self.J = fundamental_solution(self.L_frozen)
        self.d_omega = 2.0 * self.r

    # -- operator pieces -----------------------------------------------------

    def remainder(self, phi):
        """(frozen - full) operator applied to phi, split by derivative order.

        Returns (psi1, psi2): the leading-order part driven by coefficient
        oscillation and the lower-order part, both restricted to the ball.
        """
        from .operators import diff  # local import to avoid a cycle at import time

        dom = phi.domain
        psi1 = np.zeros(dom.shape)
        for p in self.L.leading_indices():
            b = self.L_frozen.coeff_at(p, self.x0) - self._coeff_values(p, dom)
            psi1 += b * diff(phi, p).values
        psi2 = np.zeros(dom.shape)
        for p in self.L.lower_indices():
            psi2 -= self._coeff_values(p, dom) * diff(phi, p).values
        mask = dom.mask
        return (
            GridFunction(dom, np.where(mask, psi1, 0.0)),
            GridFunction(dom, np.where(mask, psi2, 0.0)),
        )

    def _coeff_values(self, p, dom):
        fld = self.L.coeff_field(p, dom)
        if fld is None:
            return float(self.L.coeffs[p])
        return fld

    def source_potential(self, f):
        """Convolution of the frozen kernel with f restricted to the ball."""
        return potential(self.J, f.restricted(), (0,) * self.L.n)

    def potential_channel(self, sigma, p):
        """Derivative channel d^p of the potential of a density.

        Order-m channels go through the calibrated principal-value kernels,
        so differentiation never amplifies cell-level quadrature noise.
        """
        if sum(p) == self.L.m:
            return singular_potential(self.J, sigma, p)
        return potential(self.J, sigma, p)

    def density_weighted_norm(self, sigma):
        """Weighted Sobolev norm of the potential of sigma, channel by channel."""
        total = 0.0
        for p in multi_indices(self.L.n, self.L.m):
            ch = self.potential_channel(sigma, p).restricted(self.domain.mask)
            total += self.d_omega**p.order * luxemburg_norm(ch, self.M)
        return total

    def correction_density(self, sigma):
        """Density of the correction applied to the potential of sigma.

        Returns (frozen - full) operator applied to S0 sigma, restricted to
        the ball: the next fixed-point density is this plus the data.
        """
        dom = self.domain
        out = np.zeros(dom.shape)
        for p in self.L.leading_indices():
            b = self.L_frozen.coeff_at(p, self.x0) - self._coeff_values(p, dom)
            out += b * self.potential_channel(sigma, p).values
        for p in self.L.lower_indices():
            out -= self._coeff_values(p, dom) * self.potential_channel(sigma, p).values
        return GridFunction(dom, np.where(dom.mask, out, 0.0))

    def correction(self, phi, return_split=False):
        """Correction operator on a grid function: potential of the remainder.

        phi is truncated to the ball mask (with a warning when that loses
        mass beyond rounding).
        """
        outside = np.abs(phi.values[~phi.domain.mask])
        if outside.size and outside.max() > 1e-12 * max(phi.sup_norm(masked=False), 1e-300):
            warnings.warn("probe support exceeds the working ball; truncating", stacklevel=2)
            phi = phi.restricted()
        psi1, psi2 = self.remainder(phi)
        chi = self.source_potential(psi1 + psi2)
        if return_split:
            return chi, psi1, psi2
        return chi

    def identity_defect(self, phi):
        """Relative sup defect of phi = correction(phi) + potential(L phi).

        Returns the masked sup-norm defect divided by sup|phi|; NaN for a
        vanishing probe.
        """
        sup = phi.sup_norm(masked=False)
        if sup == 0.0:
            return math.nan
        chi = self.correction(phi)
        rec = chi + self.source_potential(self.L.apply(phi))
        defect = np.abs((rec - phi).values[self.domain.mask])
        return float(np.max(defect)) / sup

    def weighted_norm(self, u):
        return sobolev_norms(u, self.L.m, self.M, self.d_omega).weighted

    def solution_error(self, sigma, reference):
        """Weighted-norm distance between the potential of sigma and a reference.

        The potential side uses kernel derivative channels; the reference is
        differenced directly (it is expected to be a smooth grid function).
        """
        from .operators import diff

        total = 0.0
        ref_total = 0.0
        for p in multi_indices(self.L.n, self.L.m):
            ch = self.potential_channel(sigma, p) - diff(reference, p)
            w = self.d_omega**p.order
            total += w * luxemburg_norm(ch.restricted(self.domain.mask), self.M)
            ref_total += w * luxemburg_norm(
                diff(reference, p).restricted(self.domain.mask), self.M
            )
        return total / ref_total if ref_total > 0 else total

    def solve(self, f, tol=1e-6, k_max=200):
        """Fixed-point iteration on source densities.

        The iterate is the potential of sigma_k with sigma_{k+1} =
        remainder(S0 sigma_k) + f.  Stops when the weighted-Sobolev step
        norm drops below tol times the iterate norm; three consecutive
        step-norm increases raise DivergenceError carrying the partial
        report.
        """
        if self.sign_flipped:
            f = -f
        f = f.restricted()
        rows = []
        sigma = f
        prev_step = math.inf
        increases = 0
        converged = False
        den_f = luxemburg_norm(f, self.M)
        for k in range(1, k_max + 1):
            sigma_next = self.correction_density(sigma) + f
            step = self.density_weighted_norm(sigma_next - sigma)
            u_norm = self.density_weighted_norm(sigma)
            residual = self._relative_residual(sigma, f, den_f)
            rows.append(IterationRow(k=k, norm=u_norm, step=step, residual=residual))
            if step > prev_step:
                increases += 1
                if increases >= 3:
                    raise DivergenceError(
                        f"step norms increased three times in a row at k={k}",
                        report=self._report(rows, False),
                    )
            else:
                increases = 0
            sigma = sigma_next
            if step <= tol * max(u_norm, 1e-300):
                converged = True
                break
            prev_step = step
        report = self._report(rows, converged)
        # fixed-point certificate: one more half-step of the density map
        defect = self.density_weighted_norm(self.correction_density(sigma) + f - sigma)
        norm = self.density_weighted_norm(sigma)
        report.certificate = defect / norm if norm > 0 else defect
        u = self.source_potential(sigma)
        report.sigma = sigma
        return u, report

    def _relative_residual(self, sigma, f, den_f):
        """||L u - f||_M / ||f||_M with L applied through the kernel channels."""
        dom = self.domain
        out = np.zeros(dom.shape)
        for p in sorted(self.L.coeffs):
            a = self._coeff_values(p, dom)
            out += a * self.potential_channel(sigma, p).values
        r = GridFunction(dom, out) - f
        num = luxemburg_norm(r.restricted(), self.M)
        return num / den_f if den_f > 0 else num

    def _report(self, rows, converged):
        ratios = [
            rows[i + 1].step / rows[i].step
            for i in range(len(rows) - 1)
            if rows[i].step > 0
        ]
        tail = ratios[-3:] if ratios else []
        emp = float(np.exp(np.mean(np.log(tail)))) if tail else 0.0
        return SolveReport(
            iterations=rows,
            converged=converged,
            empirical_ratio=emp,
            final_residual=rows[-1].residual if rows else math.nan,
            sign_flipped=self.sign_flipped,
        )


@dataclass
class IterationRow:
    k: int
    norm: float
    step: float
    residual: float


@dataclass
class SolveReport:
    iterations: list
    converged: bool
    empirical_ratio: float
    final_residual: float
    sign_flipped: bool
    certificate: float = math.nan
    sigma: object = None  # final source density; the solution is its potential

    def step_ratios(self, last=3):
        steps = [r.step for r in self.iterations if r.step > 0]
        if len(steps) < 2:
            return []
        ratios = [b / a for a, b in zip(steps, steps[1:])]
        return ratios[-last:]


def neumann_solve(L, f, x0, r, M, tol=1e-6, k_max=200, N=64, pad=4.0):
    """Build the parametrix machinery and run the fixed-point solve.

    f may be a callable of the node coordinates or a GridFunction on the
    solver grid.  A contraction factor above one is allowed but warned
    about; the iteration may then diverge.
    """
    P = ParametrixOperator(L, x0, r, N=N, M=M, pad=pad)
    if callable(f):
        f = GridFunction.from_callable(P.domain, f, restrict=True)
    elif not f.domain.same_geometry(P.domain):
        raise ValueError("data grid does not match the solver grid")
    u, report = P.solve(f, tol=tol, k_max=k_max)
    return u, report, P


@dataclass
class ContractionProfile:
    radii: list
    sigma_hat: list
    probe_count: int
    seed: int

    def monotone_within(self, slack=0.10):
        return all(
            s2 <= s1 * (1.0 + slack) for s1, s2 in zip(self.sigma_hat, self.sigma_hat[1:])
        )


def contraction_profile(L, x0, radii=DEFAULT_RADII, probes=8, seed=0, N=32, M=None, pad=4.0):
    """Empirical norm profile of the correction operator along a radius ladder.

    For every radius the ratio of weighted-Sobolev norms correction(phi) to
    phi is maximized over a seeded family of probe functions (cap bumps
    times random polynomials of degree at most three, supported inside the
    ball).  Deterministic for equal seeds; the estimate is a lower bound on
    the true operator norm.
    """
    if probes < 1:
        raise ValueError("need at least one probe")
    radii = list(radii)
    sigma = []
    for r in radii:
        rng = np.random.default_rng(seed)
        P = ParametrixOperator(L, x0, r, N=N, M=M, pad=pad)
        worst = 0.0
        for j in range(probes):
            if j == 0:
                phi = cap_bump(P.domain, 0.75 * r, center=x0)
            else:
                phi = cap_bump(P.domain, 0.75 * r, center=x0, degree=3, rng=rng)
            denom = P.weighted_norm(phi)
            if denom == 0.0:
                continue
            psi1, psi2 = P.remainder(phi)
            worst = max(worst, P.density_weighted_norm(psi1 + psi2) / denom)
        sigma.append(worst)
    return ContractionProfile(radii=radii, sigma_hat=sigma, probe_count=probes, seed=seed)


def bounded_multiplier_check(a, f, M, deltas):
    """Shift moduli of a product against the proof-style split.

    Rows: (|delta|, modulus of a*f, bounded-factor term, commutator term,
    bound = sup|a| * modulus(f) + commutator term).  The product modulus is
    dominated by the sum of the two split terms, and every column vanishes
    with the shift when f's modulus does.
    """
    from .grid import ShiftVector, shift

    sup_a = a.sup_norm(masked=False)
    rows = []
    for delta in deltas:
        if not isinstance(delta, ShiftVector):
            delta = ShiftVector(tuple(np.atleast_1d(np.asarray(delta, dtype=float))))
        ta, tf = shift(a, delta), shift(f, delta)
        prod_mod = luxemburg_norm(ta * tf - a * f, M)
        term1 = luxemburg_norm(ta * (tf - f), M)
        term2 = luxemburg_norm((ta - a) * f, M)
        f_mod = luxemburg_norm(tf - f, M)
        rows.append(
            MultiplierRow(
                magnitude=delta.magnitude(),
                product_modulus=prod_mod,
                bounded_term=term1,
                commutator_term=term2,
                bound=sup_a * f_mod + term2,
            )
        )
    return rows


@dataclass
class MultiplierRow:
    magnitude: float
    product_modulus: float
    bounded_term: float
    commutator_term: float
    bound: float
