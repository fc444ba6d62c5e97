"""Monotone upwind discretisation of |u_x|^2 = 1/(1-rho)^2 and a fast-sweeping solver.

Two residuals live here.  ``hj_residual`` is the upwind operator

    N_k(u) = max(u_k - u_{k-1}, 0)^2 / (2 h^2)
           + max(u_k - u_{k+1}, 0)^2 / (2 h^2)
           - 1 / (1 - rho_k)^2,

kept verbatim as the scheme diagnostic.  The solver drives the consistently
scaled form of the same stencil,

    R_k(u) = [max(...)^2 + max(...)^2] / (2 h^2) - 1 / (2 (1 - rho_k)^2),

whose exact solutions carry slope 1/(1-rho): with rho = 0 and exits at both
ends the solved u is the distance function min(x - x_min, x_max - x), which
is what every downstream oracle (and the transport coupling) relies on.

The solve alternates fully relaxed left-to-right / right-to-left one-sided
sweeps (a running-minimum cumulative pass is exactly the converged
Gauss-Seidel sweep for the one-sided branch) with a vectorised two-sided
local solve, and iterates until the residual tolerance holds at every
non-Dirichlet node.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import DensityField, DirichletValue, ReflectingValue, UCondition, ValueField

DEFAULT_RHO_CAP = 1.0 - 1e-6


class NoExitError(ValueError):
    """Raised when no endpoint carries a Dirichlet value: u would be undetermined."""


class EikonalConvergenceError(RuntimeError):
    def __init__(self, iterations: int, residual: float):
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            f"eikonal sweeps did not converge in {iterations} iterations "
            f"(final residual {residual:.3e})"
        )


@dataclass(frozen=True)
class EikonalConfig:
    max_iterations: int = 10_000
    residual_tolerance: float = 1e-10
    rho_cap: float = DEFAULT_RHO_CAP

    def __post_init__(self) -> None:
        if self.residual_tolerance <= 0:
            raise ValueError("residual tolerance must be positive")
        if not 0.0 < self.rho_cap < 1.0:
            raise ValueError("rho_cap must lie in (0, 1)")


DEFAULT_CONFIG = EikonalConfig()


def congestion_mask(rho: DensityField, rho_cap: float = DEFAULT_RHO_CAP) -> np.ndarray:
    """Nodes where rho exceeds the regularisation ceiling (capping events)."""
    return rho.values > rho_cap


def slowness(rho_values: np.ndarray, rho_cap: float = DEFAULT_RHO_CAP) -> np.ndarray:
    """1/(1 - rho) with rho capped at rho_cap so the right-hand side stays finite."""
    return 1.0 / (1.0 - np.minimum(rho_values, rho_cap))


def _neighbor_arrays(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Mirror ghosts at both ends: the reflecting closure, and harmless at
    # Dirichlet nodes because those are never updated or residual-checked.
    a = np.empty_like(u)
    b = np.empty_like(u)
    a[1:] = u[:-1]
    a[0] = u[1]
    b[:-1] = u[1:]
    b[-1] = u[-2]
    return a, b


def hj_residual(u: ValueField, rho: DensityField, k: int, cfg: EikonalConfig = DEFAULT_CONFIG) -> float:
    """Upwind operator value at node k, mirror ghosts at the endpoints."""
    uv = u.values
    n = uv.size
    if not 0 <= k < n:
        raise IndexError(f"node {k} outside grid of {n} nodes")
    h = u.grid.h
    left = uv[k - 1] if k > 0 else uv[1]
    right = uv[k + 1] if k < n - 1 else uv[n - 2]
    f = slowness(rho.values[k : k + 1], cfg.rho_cap)[0]
    up = max(uv[k] - left, 0.0) ** 2 + max(uv[k] - right, 0.0) ** 2
    return up / (2.0 * h * h) - f * f


def solver_residual(u_values: np.ndarray, f: np.ndarray, h: float) -> np.ndarray:
    """Residual of the consistently scaled stencil at every node."""
    a, b = _neighbor_arrays(u_values)
    up = np.maximum(u_values - a, 0.0) ** 2 + np.maximum(u_values - b, 0.0) ** 2
    return up / (2.0 * h * h) - 0.5 * f * f


def _one_sided_pass(u: np.ndarray, hf: np.ndarray, free: np.ndarray, reverse: bool) -> np.ndarray:
    # Fully relaxed directional sweep: u_k <- min over upstream a of
    # u_a + sum of link costs, with link cost h*f at the target node.
    if reverse:
        return _one_sided_pass(u[::-1], hf[::-1], free[::-1], False)[::-1]
    s = np.concatenate(([0.0], np.cumsum(hf[1:])))
    runmin = np.minimum.accumulate(u - s)
    cand = np.full_like(u, np.inf)
    cand[1:] = runmin[:-1] + s[1:]
    return np.where(free, np.minimum(u, cand), u)


def _two_sided_pass(u: np.ndarray, hf: np.ndarray, free: np.ndarray) -> np.ndarray:
    # Exact local solve of the scaled stencil given both neighbours; the
    # one-sided candidate applies whenever it does not overshoot the larger
    # neighbour, otherwise both upwind branches are active.
    a, b = _neighbor_arrays(u)
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    one = lo + hf
    disc = 2.0 * hf * hf - (a - b) ** 2
    two = 0.5 * ((a + b) + np.sqrt(np.maximum(disc, 0.0)))
    t = np.where(one <= hi, one, two)
    return np.where(free, np.minimum(u, t), u)


def solve_eikonal(
    rho: DensityField,
    bc: tuple[UCondition, UCondition],
    cfg: EikonalConfig = DEFAULT_CONFIG,
) -> ValueField:
    """Solve the discrete eikonal problem for the given density.

    ``bc`` holds the (left, right) conditions for u; at least one endpoint
    must be a DirichletValue exit.  Dirichlet nodes keep their prescribed
    values exactly; reflecting endpoints use the mirror-ghost closure.
    """
    left, right = bc
    for c in (left, right):
        if not isinstance(c, (DirichletValue, ReflectingValue)):
            raise TypeError(f"unsupported u boundary condition {c!r}")
    if not isinstance(left, DirichletValue) and not isinstance(right, DirichletValue):
        raise NoExitError("at least one endpoint must prescribe u (an exit)")

    grid = rho.grid
    n = grid.n
    h = grid.h
    f = slowness(rho.values, cfg.rho_cap)
    hf = h * f

    free = np.ones(n, dtype=bool)
    exit_values = []
    if isinstance(left, DirichletValue):
        free[0] = False
        exit_values.append(float(left.value))
    if isinstance(right, DirichletValue):
        free[-1] = False
        exit_values.append(float(right.value))
    big = 2.0 * (grid.span * float(f.max()) + max(abs(v) for v in exit_values) + 1.0)
    u = np.full(n, big)
    if isinstance(left, DirichletValue):
        u[0] = left.value
    if isinstance(right, DirichletValue):
        u[-1] = right.value

    # Convergence is judged on the residual relative to the local right-hand
    # side: with capped slowness (f up to 1e6) the absolute residual floor
    # set by float cancellation is far above any sane absolute tolerance.
    scale = np.maximum(1.0, 0.5 * f * f)
    last_residual = np.inf
    for _ in range(cfg.max_iterations):
        u = _one_sided_pass(u, hf, free, reverse=False)
        u = _one_sided_pass(u, hf, free, reverse=True)
        u = _two_sided_pass(u, hf, free)
        res = solver_residual(u, f, h) / scale
        last_residual = float(np.max(np.abs(res[free]))) if free.any() else 0.0
        if last_residual <= cfg.residual_tolerance:
            return ValueField(grid, u)
    raise EikonalConvergenceError(cfg.max_iterations, last_residual)
