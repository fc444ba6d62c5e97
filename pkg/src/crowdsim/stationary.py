"""Stationary flow problem on [0, 1]: the Riccati boundary-value problem

    eps rho_x + rho^2 - rho = j,    rho(1) = 0,

integrated backward from the exit, plus critical-current computation.

Two orientations of the current coexist.  The literal coefficient form above
(``inlet=False``) admits the closed-form solution
rho(x) = 1/2 + c tanh(c (x - x*) / eps) with c = sqrt(1/4 + j); its
solutions dip below zero at the inlet and never congest.  The congestion
results (density exceeding one for large current, the critical current
j_c(eps)) belong to the inlet orientation (``inlet=True``), where j is the
current flowing toward the exit and the equation reads
eps rho_x = rho - rho^2 - j.  Both reduce to the same integrator with a
signed coefficient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .grid import DensityField, Grid1D, build_grid

_ESCAPE_LO = -1.0
_ESCAPE_HI = 10.0
_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(5)


class BracketError(RuntimeError):
    """The critical-current map behaved non-monotonically while bracketing."""


@dataclass(frozen=True)
class StationaryProblem:
    """A (viscosity, current) pair.

    inlet=False: literal coefficient form eps rho_x = j + rho - rho^2.
    inlet=True:  current toward the exit,  eps rho_x = rho - rho^2 - j.
    """

    epsilon: float
    j: float
    inlet: bool = False

    def __post_init__(self) -> None:
        if self.epsilon <= 0:
            raise ValueError("viscosity must be positive (eps=0 is handled separately)")
        if self.j < 0:
            raise ValueError("current must be >= 0")

    @property
    def coefficient(self) -> float:
        return -self.j if self.inlet else self.j


@dataclass
class StationarySolution:
    epsilon: float
    j: float
    inlet: bool
    grid: Grid1D
    rho: DensityField
    rho_at_0: float
    supercritical: bool
    escaped_at: Optional[float] = None  # x where the blow-up guard tripped

    @property
    def values(self) -> np.ndarray:
        return self.rho.values


def _integrate_riccati(epsilon: float, coefficient: float):
    """Backward dense solution of eps rho_x = coefficient + rho - rho^2, rho(1)=0."""

    def rhs(_x, y):
        return (coefficient + y - y * y) / epsilon

    def escape(_x, y):
        return min(y[0] - _ESCAPE_LO, _ESCAPE_HI - y[0])

    escape.terminal = True
    sol = solve_ivp(
        rhs,
        (1.0, 0.0),
        [0.0],
        method="DOP853",
        dense_output=True,
        rtol=1e-12,
        atol=1e-14,
        events=escape,
    )
    if not sol.success and sol.status != 1:
        raise RuntimeError(f"stationary integration failed: {sol.message}")
    escaped_at = float(sol.t_events[0][0]) if sol.t_events[0].size else None
    return sol, escaped_at


def _sample_dense(sol, escaped_at: Optional[float], xs: np.ndarray) -> np.ndarray:
    if escaped_at is None:
        return sol.sol(xs)[0]
    vals = np.empty_like(xs)
    reached = xs >= escaped_at
    vals[reached] = sol.sol(xs[reached])[0]
    # Beyond the guard the value is pinned at the ceiling it escaped through.
    vals[~reached] = float(sol.sol(escaped_at)[0])
    return vals


def residual_norm(sol, epsilon: float, coefficient: float, xs: np.ndarray) -> float:
    """A-posteriori consistency of the dense solution on each grid interval.

    Checks rho(x_{k+1}) - rho(x_k) against a 5-point Gauss-Legendre quadrature
    of the right-hand side, normalised by the interval length; this bounds
    the pointwise ODE residual of the returned profile.
    """
    worst = 0.0
    for a, b in zip(xs[:-1], xs[1:]):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        pts = mid + half * _GAUSS_NODES
        vals = sol.sol(pts)[0]
        integral = half * float(np.dot(_GAUSS_WEIGHTS, (coefficient + vals - vals * vals) / epsilon))
        lhs = float(sol.sol(b)[0] - sol.sol(a)[0])
        worst = max(worst, abs(lhs - integral) / (b - a))
    return worst


def solve_stationary(p: StationaryProblem, n: int) -> StationarySolution:
    """Integrate the problem backward from x=1 and resample on an n-node grid."""
    grid = build_grid(0.0, 1.0, n)
    sol, escaped_at = _integrate_riccati(p.epsilon, p.coefficient)
    values = _sample_dense(sol, escaped_at, grid.nodes)
    values[-1] = 0.0  # exit datum holds exactly
    rho = DensityField(grid, values)
    rho_at_0 = math.inf if escaped_at is not None else float(values[0])
    return StationarySolution(
        epsilon=p.epsilon,
        j=p.j,
        inlet=p.inlet,
        grid=grid,
        rho=rho,
        rho_at_0=rho_at_0,
        supercritical=bool(rho_at_0 > 1.0 or np.max(values) > 1.0),
        escaped_at=escaped_at,
    )


def riccati_closed_form(epsilon: float, j: float) -> Callable[[np.ndarray], np.ndarray]:
    """Closed-form solution of the literal orientation, used as a test oracle.

    Completing the square gives rho(x) = 1/2 + c tanh(c (x - x*) / eps) with
    c = sqrt(1/4 + j) and x* fixed by rho(1) = 0.
    """
    c = math.sqrt(0.25 + j)
    x_star = 1.0 + (epsilon / c) * math.atanh(1.0 / (2.0 * c))

    def rho(x):
        return 0.5 + c * np.tanh(c * (np.asarray(x) - x_star) / epsilon)

    return rho


def inlet_rho_at_origin(epsilon: float, j: float) -> float:
    """rho(0) for the inlet orientation, from the dense backward solve."""
    sol, escaped_at = _integrate_riccati(epsilon, -j)
    if escaped_at is not None:
        return math.inf
    return float(sol.sol(0.0)[0])


def critical_current_exact(epsilon: float) -> float:
    """Root of (2 eps / kappa) atan(1/(2 kappa)) = 1 with kappa = sqrt(j-1/4).

    For the inlet orientation the backward solution is separable, so the
    current at which rho(0) reaches one solves this transcendental equation
    exactly; serves as the independent oracle for critical_current.
    """

    def gap(kappa):
        return 2.0 * epsilon * math.atan(1.0 / (2.0 * kappa)) / kappa - 1.0

    kappa = brentq(gap, 1e-8, 1e3, xtol=1e-14, rtol=1e-15)
    return 0.25 + kappa * kappa


def critical_current(epsilon: float, tol: float = 1e-4, full_output: bool = False):
    """Largest inlet current keeping the stationary density <= 1.

    Bisection on j of rho(0; j, eps) - 1, bracketed from [0, j_hi] with j_hi
    doubled until supercritical; the map is monotone increasing in j.
    """
    if epsilon <= 0 or tol <= 0:
        raise ValueError("need eps > 0 and tol > 0")

    def excess(j: float) -> float:
        return inlet_rho_at_origin(epsilon, j) - 1.0

    lo, f_lo = 0.0, excess(0.0)
    if f_lo > 0:
        raise BracketError("rho(0) exceeds 1 at zero current")
    hi = 1.0
    f_hi = excess(hi)
    last = f_lo
    while f_hi <= 0:
        if f_hi < last - tol:
            raise BracketError("rho(0; j) decreased while growing the bracket")
        last = f_hi
        lo = hi
        hi *= 2.0
        if hi > 1e6:
            raise BracketError("no supercritical current found below 1e6")
        f_hi = excess(hi)

    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0:
            hi = mid
        else:
            lo = mid
    j_c = 0.5 * (lo + hi)
    if full_output:
        return j_c, (lo, hi)
    return j_c


def solve_stationary_inviscid(j: float, n: int, inlet: bool = True) -> StationarySolution:
    """eps = 0 outer solution: the constant root of rho (1 - rho) = j.

    Exists (subcritical branch rho <= 1/2) only for j <= 1/4; beyond that the
    inviscid problem carries no admissible stationary profile and the result
    is flagged supercritical.  The exit datum is met through a boundary jump
    that the outer solution does not resolve.
    """
    if not inlet:
        raise ValueError("the inviscid outer solution is defined for the inlet orientation")
    grid = build_grid(0.0, 1.0, n)
    if j <= 0.25:
        root = 0.5 * (1.0 - math.sqrt(1.0 - 4.0 * j))
        values = np.full(n, root)
        supercritical = False
    else:
        values = np.full(n, 1.0)
        supercritical = True
    rho = DensityField(grid, values)
    return StationarySolution(
        epsilon=0.0,
        j=j,
        inlet=True,
        grid=grid,
        rho=rho,
        rho_at_0=float(values[0]),
        supercritical=supercritical,
    )


def sweep_currents(
    epsilon: float, j_values: Sequence[float], n: int, inlet: bool = True
) -> list[StationarySolution]:
    """Elementwise solve for each current, preserving input order."""
    out = []
    for j in j_values:
        if epsilon == 0.0:
            out.append(solve_stationary_inviscid(float(j), n, inlet=inlet))
        else:
            out.append(solve_stationary(StationaryProblem(epsilon, float(j), inlet=inlet), n))
    return out


def sweep_viscosities(
    j: float, epsilon_values: Sequence[float], n: int, inlet: bool = True
) -> list[StationarySolution]:
    """Elementwise solve for each viscosity at fixed current, order preserved."""
    out = []
    for eps in epsilon_values:
        if eps == 0.0:
            out.append(solve_stationary_inviscid(float(j), n, inlet=inlet))
        else:
            out.append(solve_stationary(StationaryProblem(float(eps), j, inlet=inlet), n))
    return out


def match_current_to_left_value(epsilon: float, rho_left: float, j_max: float = 4.0) -> float:
    """Literal-orientation current whose stationary profile hits rho_left at x=0.

    rho(0; j) is strictly decreasing in j for the literal form, so a bracketed
    root find recovers the current carried by a steady state with Dirichlet
    data (rho_left, 0).
    """

    def gap(j: float) -> float:
        sol, escaped_at = _integrate_riccati(epsilon, j)
        if escaped_at is not None:
            return -math.inf
        return float(sol.sol(0.0)[0]) - rho_left

    if gap(0.0) < 0:
        raise ValueError("rho_left is above the zero-current profile; no j >= 0 matches")
    return brentq(gap, 0.0, j_max, xtol=1e-13, rtol=1e-15)
