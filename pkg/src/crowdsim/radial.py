"""Inviscid radial analysis: characteristic ODEs, transport invariant,
closed/implicit radius solutions, and shock detection from crossing paths.

Radially symmetric densities moving away from the origin in dimension d
obey, along characteristics,

    dr/dt   = 1 - 2 rho,
    drho/dt = -(d - 1) rho (1 - rho) / r,

with the transported invariant V(rho) = rho (1 - rho) = (r0 / r)^(d-1) V0.
Inverting V splits into regime 1 (rho <= 1/2) and regime 2 (rho > 1/2).
In d = 3 the radius has the closed form
r(t) = sqrt(t^2 + 2 r0 (1 - 2 rho0) t + r0^2); in d = 2 only implicit
log/sqrt relations are available and are solved by bracketed root finding.
Shocks are detected as the first ordering inversion of adjacent
characteristics, refined by bisection; in d = 3 the envelope time
t* = -r0 / (1 - 2 rho0 - 2 r0 rho0') provides an analytic cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

R_MIN_LAUNCH = 1e-3  # characteristics are not launched closer to the origin


class ConsistencyError(RuntimeError):
    """The transported invariant left its admissible range along a path."""


class ValidityWindowError(ValueError):
    """Requested time lies outside an implicit relation's validity window."""


def v_of_rho(rho):
    """Transport invariant V(rho) = rho (1 - rho)."""
    rho = np.asarray(rho, dtype=float)
    out = rho * (1.0 - rho)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class RadialProfile:
    """Initial density samples rho0(r0) in spatial dimension d.

    rho0 values lie in [0, 1); zero samples free-stream (V0 = 0).  The
    support must stay away from r = 0 unless the density vanishes there,
    because the (d-1)/r transport term is singular at the origin.
    ``rho0_deriv``, when given, supplies the exact derivative used by the
    analytic shock criterion; otherwise centred differences are used.
    """

    dimension: int
    r0_samples: np.ndarray
    rho0_samples: np.ndarray
    rho0_deriv: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self) -> None:
        if self.dimension not in (2, 3):
            raise ValueError("dimension must be 2 or 3")
        r0 = np.asarray(self.r0_samples, dtype=float)
        rho0 = np.asarray(self.rho0_samples, dtype=float)
        if r0.shape != rho0.shape or r0.ndim != 1 or r0.size < 2:
            raise ValueError("need aligned 1D sample arrays with at least 2 points")
        if np.any(np.diff(r0) <= 0):
            raise ValueError("initial radii must be strictly increasing")
        if np.any(rho0 < 0) or np.any(rho0 >= 1):
            raise ValueError("initial densities must lie in [0, 1)")
        if r0[0] <= 0 and rho0[0] * (1 - rho0[0]) != 0:
            raise ValueError("support must avoid r = 0 unless the density vanishes there")
        object.__setattr__(self, "r0_samples", r0)
        object.__setattr__(self, "rho0_samples", rho0)

    def deriv_samples(self) -> np.ndarray:
        if self.rho0_deriv is not None:
            return np.asarray(self.rho0_deriv(self.r0_samples), dtype=float)
        return np.gradient(self.rho0_samples, self.r0_samples)


@dataclass
class Characteristic:
    r0: float
    rho0: float
    dimension: int
    regime: int  # 1 if rho0 <= 1/2 else 2
    times: np.ndarray
    r_values: np.ndarray
    rho_values: np.ndarray
    terminated_early: bool = False

    def v_invariant_error(self) -> float:
        v0 = v_of_rho(self.rho0)
        transported = (self.r0 / self.r_values) ** (self.dimension - 1) * v0
        return float(np.max(np.abs(v_of_rho(self.rho_values) - transported)))


def _characteristic_rhs(d: int):
    dm1 = d - 1

    def rhs(_t, y):
        r, rho = y
        return (1.0 - 2.0 * rho, -dm1 * rho * (1.0 - rho) / r)

    return rhs


def integrate_characteristic(
    r0: float, rho0: float, d: int, t_end: float, dt: float
) -> Characteristic:
    """Integrate one characteristic on a fixed output grid with spacing dt.

    The raw system is smooth through the regime-2 turning point (where the
    square root in the reduced radius equation degenerates), so paths
    continue across it; integration stops early only if r falls to zero.
    The transported invariant is verified a posteriori.
    """
    if d not in (2, 3):
        raise ValueError("dimension must be 2 or 3")
    if r0 <= 0:
        raise ValueError("r0 must be positive")
    if not 0.0 <= rho0 < 1.0:
        raise ValueError("rho0 must lie in [0, 1)")
    if t_end <= 0 or dt <= 0:
        raise ValueError("t_end and dt must be positive")

    times = np.arange(0.0, t_end + 0.5 * dt, dt)
    times[-1] = min(times[-1], t_end)

    def hit_origin(_t, y):
        return y[0] - 1e-12

    hit_origin.terminal = True
    sol = solve_ivp(
        _characteristic_rhs(d),
        (0.0, t_end),
        [float(r0), float(rho0)],
        method="DOP853",
        t_eval=times,
        rtol=1e-11,
        atol=1e-13,
        events=hit_origin,
    )
    terminated = sol.status == 1
    r_vals, rho_vals = sol.y
    t_vals = sol.t

    v0 = v_of_rho(rho0)
    arg = 1.0 - 4.0 * v0 * (r0 / r_vals) ** (d - 1)
    if np.any(arg < -1e-12):
        raise ConsistencyError(
            f"square-root argument reached {arg.min():.3e} along the path from r0={r0}"
        )

    return Characteristic(
        r0=float(r0),
        rho0=float(rho0),
        dimension=d,
        regime=1 if rho0 <= 0.5 else 2,
        times=t_vals,
        r_values=r_vals,
        rho_values=rho_vals,
        terminated_early=terminated,
    )


def closed_form_3d(r0: float, rho0: float, t):
    """Exact d=3 solution: radius and density at time(s) t.

    r(t) = sqrt(t^2 + 2 r0 (1 - 2 rho0) t + r0^2),
    rho(t) = (1 - (t + r0 (1 - 2 rho0)) / r(t)) / 2.
    """
    t = np.asarray(t, dtype=float)
    c = r0 * (1.0 - 2.0 * rho0)
    r_sq = t * t + 2.0 * c * t + r0 * r0
    if np.any(r_sq <= 0):
        raise ZeroDivisionError(
            f"radius pole at t = {-c:g} (free-streaming inward path reached the origin)"
        )
    r = np.sqrt(r_sq)
    rho = 0.5 * (1.0 - (t + c) / r)
    if r.ndim == 0:
        return float(r), float(rho)
    return r, rho


def _implicit_profile_value(r: float, r0: float, v0: float) -> float:
    # Antiderivative of 1/sqrt(1 - 4 r0 V0 / r): equals
    # 2 r0 V0 log(2 r (1 + s) - 4 r0 V0) + r s with s = sqrt(1 - 4 r0 V0 / r).
    c = 4.0 * r0 * v0
    if r < c * (1.0 - 1e-14):
        raise ValidityWindowError(f"radius {r:g} below the turning radius {c:g}")
    s = math.sqrt(max(1.0 - c / r, 0.0))
    inner = 2.0 * r * (1.0 + s) - c
    return 0.5 * c * math.log(inner) + r * s


def turning_time_2d(r0: float, rho0: float) -> float:
    """Time at which a regime-2 path's square root degenerates (d = 2)."""
    if rho0 <= 0.5:
        return math.inf
    v0 = v_of_rho(rho0)
    return _implicit_profile_value(r0, r0, v0) - _implicit_profile_value(4.0 * r0 * v0, r0, v0)


def solve_2d_implicit(r0: float, rho0: float, t: float, regime: Optional[int] = None) -> float:
    """Radius at time t from the d=2 implicit log/sqrt relations.

    Regime 1 paths satisfy F(r) = t + F(r0), regime 2 paths F(r) = -t + F(r0)
    (valid until the turning time), where F is the antiderivative above with
    the natural logarithm.  Solved by bracketed root finding; the residual of
    the printed relation at the returned radius is at most 1e-10.
    """
    if r0 <= 0 or not 0.0 < rho0 < 1.0:
        raise ValueError("need r0 > 0 and rho0 in (0, 1)")
    if t < 0:
        raise ValueError("t must be >= 0")
    if regime is None:
        regime = 1 if rho0 <= 0.5 else 2
    v0 = v_of_rho(rho0)
    f0 = _implicit_profile_value(r0, r0, v0)

    if regime == 1:
        target = t + f0
        lo, hi = r0, r0 + t + 1e-12
    elif regime == 2:
        t_turn = turning_time_2d(r0, rho0)
        if t > t_turn:
            raise ValidityWindowError(
                f"t = {t:g} beyond the regime-2 turning time {t_turn:g}"
            )
        target = -t + f0
        lo, hi = 4.0 * r0 * v0, r0
    else:
        raise ValueError("regime must be 1 or 2")

    if t == 0.0:
        return float(r0)

    def gap(r: float) -> float:
        return _implicit_profile_value(r, r0, v0) - target

    g_lo, g_hi = gap(lo), gap(hi)
    if g_lo > 0 or g_hi < 0:
        raise ValidityWindowError(
            f"no bracket for t = {t:g} (regime {regime}, r0 = {r0:g}, rho0 = {rho0:g})"
        )
    r = brentq(gap, lo, hi, xtol=1e-15, rtol=8.9e-16, maxiter=200)
    if abs(gap(r)) > 1e-10 * max(1.0, abs(target)):
        raise RuntimeError(f"implicit relation residual {gap(r):.3e} too large")
    return float(r)


def rho_from_radius(r0: float, rho0: float, d: int, r, regime: Optional[int] = None):
    """Recover rho at radius r from the transported invariant.

    Regime 1 takes the lower root (1 - sqrt(1 - 4V))/2, regime 2 the upper.
    """
    if regime is None:
        regime = 1 if rho0 <= 0.5 else 2
    v = (np.asarray(r0) / np.asarray(r)) ** (d - 1) * v_of_rho(rho0)
    disc = np.sqrt(np.maximum(1.0 - 4.0 * v, 0.0))
    rho = 0.5 * (1.0 - disc) if regime == 1 else 0.5 * (1.0 + disc)
    return float(rho) if np.ndim(rho) == 0 else rho


@dataclass
class ShockReport:
    shock_detected: bool
    shock_time_estimate: Optional[float] = None
    shock_radius_estimate: Optional[float] = None
    crossing_pair: Optional[tuple[float, float]] = None
    analytic_time_estimate: Optional[float] = None  # d=3 envelope cross-check


def analytic_shock_time_3d(profile: RadialProfile) -> Optional[float]:
    """Envelope time min over samples of -r0 / (1 - 2 rho0 - 2 r0 rho0').

    Differentiating the d=3 closed form in r0 and setting dr/dr0 = 0 gives
    this crossing time wherever the denominator is negative; vacuum or
    everywhere-expanding profiles yield None.
    """
    r0 = profile.r0_samples
    rho0 = profile.rho0_samples
    denom = 1.0 - 2.0 * rho0 - 2.0 * r0 * profile.deriv_samples()
    mask = denom < 0
    if not mask.any():
        return None
    return float(np.min(-r0[mask] / denom[mask]))


def detect_shock(
    profile: RadialProfile,
    t_end: float,
    scan_points: int = 1200,
    refine_tol: float = 1e-9,
) -> ShockReport:
    """First crossing of adjacent characteristics launched from the samples.

    All paths are integrated as one system with dense output; the earliest
    time at which the radial ordering of an adjacent pair inverts is refined
    by bisection on the dense solution.  For d = 3 the analytic envelope
    estimate is attached for cross-checking.
    """
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    r0 = profile.r0_samples
    rho0 = profile.rho0_samples
    keep = r0 >= R_MIN_LAUNCH
    r0 = r0[keep]
    rho0 = rho0[keep]
    m = r0.size
    if m < 2:
        raise ValueError("need at least two launch radii at or beyond the launch floor")
    d = profile.dimension
    dm1 = d - 1

    def rhs(_t, y):
        r = y[:m]
        rho = y[m:]
        return np.concatenate((1.0 - 2.0 * rho, -dm1 * rho * (1.0 - rho) / r))

    sol = solve_ivp(
        rhs,
        (0.0, t_end),
        np.concatenate((r0, rho0)),
        method="DOP853",
        dense_output=True,
        rtol=1e-10,
        atol=1e-12,
    )
    if not sol.success:
        raise RuntimeError(f"characteristic bundle integration failed: {sol.message}")

    analytic = analytic_shock_time_3d(profile) if d == 3 else None

    ts = np.linspace(0.0, t_end, scan_points)
    gaps = np.diff(sol.sol(ts)[:m, :], axis=0)  # adjacent radius gaps per time
    crossed = gaps <= 0.0
    if not crossed.any():
        return ShockReport(shock_detected=False, analytic_time_estimate=analytic)

    col = int(np.flatnonzero(crossed.any(axis=0))[0])  # earliest scan time with a crossing
    pairs = np.flatnonzero(crossed[:, col])

    best_t = math.inf
    best_pair = None
    # Refine every pair already crossed at the first flagged scan time; the
    # true earliest crossing may belong to any of them.
    for i in pairs:
        lo_t = ts[col - 1] if col > 0 else 0.0
        hi_t = ts[col]

        def pair_gap(t, i=i):
            y = sol.sol(t)
            return y[i + 1] - y[i]

        if pair_gap(lo_t) <= 0:
            t_cross = lo_t
        else:
            t_cross = brentq(pair_gap, lo_t, hi_t, xtol=refine_tol)
        if t_cross < best_t:
            best_t = t_cross
            best_pair = int(i)

    y = sol.sol(best_t)
    return ShockReport(
        shock_detected=True,
        shock_time_estimate=float(best_t),
        shock_radius_estimate=float(y[best_pair]),
        crossing_pair=(float(r0[best_pair]), float(r0[best_pair + 1])),
        analytic_time_estimate=analytic,
    )


def _bump(r, peak: float, left: float, right: float, height: float, sharpness: float = 2.0):
    """C1 bump with support [left, right], maximum ``height`` at ``peak``.

    ``sharpness`` concentrates the mass around the peak without changing the
    support or the maximum.
    """
    r = np.asarray(r, dtype=float)
    width = np.where(r < peak, peak - left, right - peak)
    s = (r - peak) / width
    out = np.zeros_like(r)
    inside = np.abs(s) < 1.0
    si = s[inside]
    out[inside] = height * np.exp(sharpness * (1.0 - 1.0 / (1.0 - si * si)))
    return out


def _bump_deriv(r, peak: float, left: float, right: float, height: float, sharpness: float = 2.0):
    r = np.asarray(r, dtype=float)
    width = np.where(r < peak, peak - left, right - peak)
    s = (r - peak) / width
    out = np.zeros_like(r)
    inside = np.abs(s) < 1.0
    si = s[inside]
    core = np.exp(sharpness * (1.0 - 1.0 / (1.0 - si * si)))
    out[inside] = height * core * sharpness * (-2.0 * si / (1.0 - si * si) ** 2) / width[inside]
    return out


_CASE_PARAMS = {
    # (left, right, peak, height) reconstructed from the reported supports,
    # concentration radii, and maxima of the three experiment profiles.
    1: (0.0, 0.6, 0.2, 0.35),
    2: (0.5, 1.0, 0.75, 0.8),
    3: (0.0, 1.0, 0.5, 0.4),
}


def case_profile(case: int, dimension: int, n_samples: int = 161) -> RadialProfile:
    """Reconstructed experiment profiles 1-3: smooth bumps concentrated
    around the reported radii, with the reported supports and maxima."""
    if case not in _CASE_PARAMS:
        raise ValueError(f"unknown case {case}; choose 1, 2 or 3")
    left, right, peak, height = _CASE_PARAMS[case]
    lo = max(left, R_MIN_LAUNCH)
    r0 = np.linspace(lo, right, n_samples)
    return RadialProfile(
        dimension=dimension,
        r0_samples=r0,
        rho0_samples=_bump(r0, peak, left, right, height),
        rho0_deriv=lambda r: _bump_deriv(r, peak, left, right, height),
    )


def vacuum_profile(dimension: int, n_samples: int = 41) -> RadialProfile:
    """Zero density on [1/2, 1]: every characteristic free-streams."""
    r0 = np.linspace(0.5, 1.0, n_samples)
    return RadialProfile(dimension, r0, np.zeros(n_samples))
