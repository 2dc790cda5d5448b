"""Calculus of N-functions (Young functions).

An N-function is an even, continuous, convex function M with
M(u)/u -> 0 as u -> 0 and M(u)/u -> oo as u -> oo.  This module provides
the closed-form families used throughout the library, tabulated densities,
numerical convex conjugation, doubling (Delta-2) classification, inversion,
and Boyd index estimation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    EmbeddingWindowError,
    InvalidYoungFunctionError,
    RangeError,
    UnstableEstimateError,
    WindowOverflowError,
)

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class YoungFunction:
    """An N-function with evaluator, density and trusted evaluation range.

    ``kind`` is one of ``power``, ``power-log``, ``exp`` or
    ``density-sampled``.  ``density`` is the right-continuous nondecreasing
    derivative p with M(u) = int_0^|u| p(t) dt.  ``domain_cap`` is the
    largest |u| at which evaluation is numerically trusted.
    """

    def __init__(self, kind, evaluate, density, domain_cap, params=None, name=None):
        self.kind = kind
        self._evaluate = evaluate
        self._density = density
        self.domain_cap = float(domain_cap)
        self.params = dict(params or {})
        self.name = name or kind
        self._conjugate = None
        self._inverse_memo = {}

    def __call__(self, u):
        """Evaluate M(u); accepts scalars or arrays, even in u."""
        x = np.abs(np.asarray(u, dtype=float))
        with np.errstate(over="ignore", invalid="ignore"):
            out = self._evaluate(x)
        if np.isscalar(u) or np.ndim(u) == 0:
            return float(out)
        return out

    def density(self, t):
        """Right-continuous density p(t) on t >= 0."""
        x = np.asarray(t, dtype=float)
        with np.errstate(over="ignore", invalid="ignore"):
            out = self._density(x)
        if np.isscalar(t) or np.ndim(t) == 0:
            return float(out)
        return out

    def __repr__(self):
        return f"YoungFunction({self.name})"

    # -- inversion ---------------------------------------------------------

    def inverse(self, y, rtol=1e-10, max_iter=200):
        """Inverse of M on the positive half line, by bracketing + bisection.

        Vectorized over y.  Raises RangeError when y exceeds M(domain_cap).
        """
        ya = np.asarray(y, dtype=float)
        scalar = np.ndim(y) == 0
        ya = np.atleast_1d(ya)
        if np.any(ya < 0):
            raise RangeError("inverse requested at a negative value")
        cap_val = self(self.domain_cap)
        if np.any(ya > cap_val):
            raise RangeError(
                f"y={float(np.max(ya)):g} exceeds M(domain_cap)={cap_val:g}"
            )
        out = np.zeros_like(ya)
        pos = ya > 0
        if pos.any():
            target = ya[pos]
            hi = np.ones_like(target)
            # expand until M(hi) >= y, capped by the trusted range
            for _ in range(1200):
                vals = self(hi)
                need = vals < target
                if not need.any():
                    break
                hi[need] = np.minimum(hi[need] * 2.0, self.domain_cap)
            lo = np.zeros_like(target)
            for _ in range(max_iter):
                mid = 0.5 * (lo + hi)
                below = self(mid) < target
                lo[below] = mid[below]
                hi[~below] = mid[~below]
                if np.all(hi - lo <= rtol * np.maximum(hi, 1e-300)):
                    break
            out[pos] = 0.5 * (lo + hi)
        if scalar:
            return float(out[0])
        return out

    def complementary(self, v_grid=None):
        """Conjugate N-function, cached; see :func:`complementary`."""
        if self._conjugate is None:
            self._conjugate = complementary(self, v_grid=v_grid)
        return self._conjugate


# -- closed-form families ---------------------------------------------------


def power(p, coeff=1.0):
    """M(u) = coeff * |u|**p with p > 1."""
    if p <= 1.0:
        raise InvalidYoungFunctionError("power family requires p > 1")
    cap = (1e300 / coeff) ** (1.0 / p)
    return YoungFunction(
        kind="power",
        evaluate=lambda u: coeff * u**p,
        density=lambda t: coeff * p * t ** (p - 1.0),
        domain_cap=cap,
        params={"p": p, "coeff": coeff},
        name=f"power(p={p:g}" + (f",c={coeff:g})" if coeff != 1.0 else ")"),
    )


def power_log(p):
    """M(u) = |u|**p * log(e + |u|) with p > 1."""
    if p <= 1.0:
        raise InvalidYoungFunctionError("power-log family requires p > 1")
    e = math.e

    def evaluate(u):
        return u**p * np.log(e + u)

    def density(t):
        return p * t ** (p - 1.0) * np.log(e + t) + t**p / (e + t)

    return YoungFunction(
        kind="power-log",
        evaluate=evaluate,
        density=density,
        domain_cap=10.0 ** (250.0 / p),
        params={"p": p},
        name=f"power-log(p={p:g})",
    )


def exp_young():
    """M(u) = exp(|u|) - |u| - 1."""
    return YoungFunction(
        kind="exp",
        evaluate=lambda u: np.expm1(u) - u,
        density=lambda t: np.expm1(t),
        domain_cap=700.0,
        params={},
        name="exp",
    )


def from_density(ts, ps, name="table"):
    """Density-sampled N-function from samples (t_i, p(t_i)).

    The density is interpolated linearly (and extrapolated with the last
    slope), so M is piecewise quadratic; the trusted range ends at the last
    sample.
    """
    ts = np.asarray(ts, dtype=float)
    ps = np.asarray(ps, dtype=float)
    if ts.ndim != 1 or ts.shape != ps.shape or ts.size < 2:
        raise InvalidYoungFunctionError("density table needs matching 1-d samples")
    if np.any(np.diff(ts) <= 0) or ts[0] < 0:
        raise InvalidYoungFunctionError("density sample points must increase from >= 0")
    if np.any(ps < 0) or np.any(np.diff(ps) < -1e-12 * max(1.0, ps.max())):
        raise InvalidYoungFunctionError("density must be nonnegative and nondecreasing")
    if ts[0] > 0:
        ts = np.concatenate([[0.0], ts])
        ps = np.concatenate([[0.0], ps])
    if ps[0] != 0.0:
        raise InvalidYoungFunctionError("density must vanish at t = 0")
    # cumulative trapezoid: exact integral of the linear interpolant
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (ps[1:] + ps[:-1]) * np.diff(ts))])
    last_slope = (ps[-1] - ps[-2]) / (ts[-1] - ts[-2]) if ps[-1] > ps[-2] else 0.0

    def density(t):
        t = np.asarray(t, dtype=float)
        inside = np.interp(t, ts, ps)
        out = np.where(t > ts[-1], ps[-1] + last_slope * (t - ts[-1]), inside)
        return out

    def evaluate(u):
        u = np.asarray(u, dtype=float)
        idx = np.clip(np.searchsorted(ts, u, side="right") - 1, 0, ts.size - 2)
        t0 = ts[idx]
        p0 = ps[idx]
        slope = (ps[idx + 1] - ps[idx]) / (ts[idx + 1] - ts[idx])
        du = u - t0
        inside = cum[idx] + p0 * du + 0.5 * slope * du**2
        over = u - ts[-1]
        tail = cum[-1] + ps[-1] * over + 0.5 * last_slope * over**2
        return np.where(u > ts[-1], tail, inside)

    return YoungFunction(
        kind="density-sampled",
        evaluate=evaluate,
        density=density,
        domain_cap=float(ts[-1]),
        params={"samples": ts.size},
        name=name,
    )


# -- convex conjugation ------------------------------------------------------

_DEFAULT_U_WINDOW = (1e-14, 1e14)
_COARSE_PER_DECADE = 16


def _conjugate_core(M, u_window, refine_iters=60):
    """Build vectorized (value, argmax) evaluators for sup_u { u v - M(u) }."""
    lo, hi = u_window
    decades = math.log10(hi) - math.log10(lo)
    grid = np.logspace(math.log10(lo), math.log10(hi), int(decades * _COARSE_PER_DECADE))
    with np.errstate(over="ignore", invalid="ignore"):
        Mgrid = np.where(np.isfinite(M(grid)), M(grid), np.inf)
    log_grid = np.log(grid)

    def solve(v):
        av = np.abs(np.asarray(v, dtype=float))
        flat = np.atleast_1d(av).ravel()
        values = np.zeros_like(flat)
        argmax = np.zeros_like(flat)
        pos = flat > 0
        if pos.any():
            V = flat[pos]
            scores = grid[:, None] * V[None, :] - Mgrid[:, None]
            j = np.argmax(scores, axis=0)
            edge = j >= grid.size - 1
            if edge.any():
                raise WindowOverflowError(float(V[edge][0]), u_window)
            a = log_grid[np.maximum(j - 1, 0)]
            b = log_grid[j + 1]
            # trisection on log u; the objective is concave in u, hence
            # unimodal in log u
            for _ in range(refine_iters):
                m1 = a + (b - a) / 3.0
                m2 = b - (b - a) / 3.0
                u1 = np.exp(m1)
                u2 = np.exp(m2)
                f1 = u1 * V - M(u1)
                f2 = u2 * V - M(u2)
                take_right = f2 >= f1
                a = np.where(take_right, m1, a)
                b = np.where(take_right, b, m2)
            ustar = np.exp(0.5 * (a + b))
            vals = ustar * V - M(ustar)
            coarse = scores[j, np.arange(V.size)]
            better = coarse > vals
            vals = np.where(better, coarse, vals)
            ustar = np.where(better, grid[j], ustar)
            values[pos] = np.maximum(vals, 0.0)
            argmax[pos] = ustar
        shape = np.shape(av)
        return values.reshape(shape), argmax.reshape(shape)

    return solve


def complementary(M, v_grid=None, u_window=_DEFAULT_U_WINDOW):
    """Conjugate N-function N(v) = sup_{u >= 0} ( u |v| - M(u) ).

    The supremum is located on a log-spaced window and refined by local
    maximization; the density of N is the maximizer itself (envelope
    identity), which equals sup{ t : p(t) <= s }.  Raises
    WindowOverflowError when a maximizer lands on the window edge.
    """
    solve = _conjugate_core(M, u_window)
    if v_grid is None:
        v_grid = np.logspace(-6, 6, 121)
    v_grid = np.asarray(v_grid, dtype=float)
    if v_grid.ndim != 1 or np.any(np.diff(v_grid) <= 0) or np.any(v_grid <= 0):
        raise InvalidYoungFunctionError("v_grid must be strictly increasing and positive")
    sample_values, sample_arg = solve(v_grid)  # also validates the window

    def evaluate(v):
        return solve(v)[0]

    def density(s):
        return solve(s)[1]

    # the conjugate is trusted while its maximizer p_M^{-1}(v) stays inside
    # the u window; probe the density at a safe interior point
    u_probe = u_window[1] * 0.1
    cap = math.inf
    for _ in range(40):
        cap = float(M.density(u_probe))
        if math.isfinite(cap):
            break
        u_probe /= 10.0
    cap = min(cap, 1e300)

    N = YoungFunction(
        kind="density-sampled",
        evaluate=evaluate,
        density=density,
        domain_cap=max(cap, float(v_grid[-1])),
        params={"conjugate_of": M.name},
        name=f"conjugate[{M.name}]",
    )
    N.samples = np.column_stack([v_grid, sample_values])
    return N


# -- Delta-2 classification ----------------------------------------------------


@dataclass
class Delta2Report:
    """Outcome of the doubling check M(2u) <= k M(u) on [u0, u_max]."""

    satisfied: bool
    k_hat: float
    u0_used: float
    worst_ratio_trace: np.ndarray  # columns (u, M(2u)/M(u))

    def ratio_near(self, u):
        """Trace ratio at the sample point closest to u."""
        idx = int(np.argmin(np.abs(self.worst_ratio_trace[:, 0] - u)))
        return float(self.worst_ratio_trace[idx, 1])


def check_delta2(M, u0=1.0, u_max=1e6, samples=240):
    """Classify doubling behaviour of M for large arguments.

    k_hat is the sampled sup of M(2u)/M(u) on log-spaced points of
    [u0, u_max].  The verdict is "satisfied" when the trace is finite and
    non-diverging: the sup over the last decade must stay within 10% of the
    sup over the earlier samples.  (A diverging ratio always attains its sup
    in the last decade, so comparing against the overall sup would be
    vacuous.)
    """
    if not (0 < u0 < u_max):
        raise ValueError("need 0 < u0 < u_max")
    if 2 * u_max > M.domain_cap:
        raise ValueError("u_max exceeds half the trusted range of M")
    us = np.logspace(math.log10(u0), math.log10(u_max), samples)
    m1 = M(us)
    if np.any(m1 == 0):
        raise InvalidYoungFunctionError("M vanishes at a positive sample point")
    m2 = M(2 * us)
    with np.errstate(over="ignore", invalid="ignore"):
        ratios = m2 / m1
    trace = np.column_stack([us, ratios])
    finite = np.all(np.isfinite(ratios))
    k_hat = float(np.max(ratios)) if finite else math.inf
    last = us >= u_max / 10.0
    if last.all() or not last.any():
        satisfied = finite
    else:
        sup_last = float(np.max(ratios[last]))
        sup_early = float(np.max(ratios[~last]))
        satisfied = finite and sup_last <= 1.10 * sup_early
    return Delta2Report(satisfied=satisfied, k_hat=k_hat, u0_used=u0, worst_ratio_trace=trace)


# -- Boyd indices --------------------------------------------------------------


@dataclass
class BoydIndices:
    """Estimated Boyd indices with the sampled dilation trace and fit residual."""

    alpha: float
    beta: float
    h_samples: np.ndarray  # columns (t, h_hat(t))
    fit_residual: float

    def as_tuple(self):
        return (self.alpha, self.beta)


def boyd_indices(M, x_window=(1e3, 1e9), x_samples=25, monotone_tol=0.05):
    """Estimate the Boyd indices of the Orlicz space generated by M.

    h_hat(t) approximates limsup_x M^{-1}(x) / M^{-1}(t x) by a max over a
    log-spaced x window; the indices are least-squares slopes of
    log h_hat(t) against log t over fixed decades (t in 1e2..1e6 for the
    upper index, 1e-6..1e-2 for the lower one).  The fit residual is
    reported rather than asserting that the defining limits exist.
    """
    xs = np.logspace(math.log10(x_window[0]), math.log10(x_window[1]), x_samples)
    inv_x = M.inverse(xs)
    t_upper = np.logspace(2, 6, 5)
    t_lower = np.logspace(-6, -2, 5)
    all_t = np.concatenate([t_lower, t_upper])

    def h_hat(t):
        return float(np.max(inv_x / M.inverse(t * xs)))

    hs = np.array([h_hat(t) for t in all_t])
    order = np.argsort(all_t)
    h_sorted = hs[order]
    # h is nonincreasing in t; reject noisy traces
    rel_increase = np.diff(h_sorted) / h_sorted[:-1]
    if np.any(rel_increase > monotone_tol):
        raise UnstableEstimateError(
            "unstable limsup estimate: non-monotone dilation trace",
            trace=np.column_stack([all_t[order], h_sorted]),
        )

    def fit(ts):
        sel = np.isin(all_t, ts)
        lt = np.log(all_t[sel])
        lh = np.log(hs[sel])
        slope, intercept = np.polyfit(lt, lh, 1)
        resid = float(np.sqrt(np.mean((lh - (slope * lt + intercept)) ** 2)))
        return -slope, resid

    a_raw, res_a = fit(t_upper)
    b_raw, res_b = fit(t_lower)
    a = min(max(a_raw, 0.0), 1.0)
    b = min(max(b_raw, 0.0), 1.0)
    alpha, beta = min(a, b), max(a, b)
    return BoydIndices(
        alpha=alpha,
        beta=beta,
        h_samples=np.column_stack([all_t, hs]),
        fit_residual=max(res_a, res_b),
    )


def embedding_exponents(M, margin=0.05, indices=None):
    """Lebesgue exponents (p, q) with L_q inside L_M inside L_p, from Boyd indices.

    Raises EmbeddingWindowError in the non-reflexive regime (lower index
    estimate near 0 or upper estimate near 1), where no such window exists.
    """
    bi = indices if indices is not None else boyd_indices(M)
    if bi.alpha < margin or bi.beta > 1.0 - margin:
        raise EmbeddingWindowError(
            f"no reflexive embedding window: index estimates "
            f"({bi.alpha:.3f}, {bi.beta:.3f}) touch the range edge"
        )
    p = max(1.0, (1.0 / bi.beta) * (1.0 - margin))
    q = (1.0 / bi.alpha) * (1.0 + margin)
    return p, q
