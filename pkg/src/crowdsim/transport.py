"""Adjoint-structure transport: linearise the upwind Hamilton-Jacobi operator
with respect to u, transpose, and advance rho implicitly.

The operator discretising -u_t + (1-rho)^2 |u_x|^2 / 2 - eps u_xx at node k is

    Ntilde_k(u) = (1 - rho_k)^2 [max(u_k - u_{k-1}, 0)^2
                                 + max(u_k - u_{k+1}, 0)^2] / (2 h^2)
                  - eps (u_{k+1} - 2 u_k + u_{k-1}) / h^2,

closed with mirror ghosts at the endpoints.  The density then obeys
rho_t + (D_u Ntilde)^T rho = 0: transposing the analytic Jacobian of the
stencil yields, for free, a conservative upwind advection of rho with speed
(1-rho)^2 |u_x| plus the eps-Laplacian (which transposes to itself).  With
both ends closed every column of the assembled matrix sums to zero, so the
uniform-weight mass h * sum(rho) is conserved to solver roundoff, and the
implicit steps inherit positivity from the M-matrix structure.

Time stepping is fixed-step BDF2 with an implicit-Euler first step; each
step solves one tridiagonal system.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import solve_banded

from .eikonal import DEFAULT_RHO_CAP, EikonalConfig, slowness, solver_residual
from .grid import (
    DensityField,
    DirichletDensity,
    Grid1D,
    InfluxDensity,
    NoFlux,
    RhoCondition,
    ValueField,
)


class SingularSystemError(RuntimeError):
    def __init__(self, message: str, condition_estimate: float):
        self.condition_estimate = condition_estimate
        super().__init__(f"{message} (condition estimate {condition_estimate:.3e})")


class StaleSolutionError(ValueError):
    """u was not solved to tolerance for the density it is paired with."""


@dataclass(frozen=True)
class FluxSpec:
    """Per-endpoint closure of the transport operator.

    NoFlux keeps the mirror-ghost adjoint rows (closed wall), InfluxDensity
    imposes a prescribed current through the endpoint's flux balance, and
    DirichletDensity holds the endpoint value (outflow through an exit).
    Influx is only meaningful on the left, matching the flow problem.
    """

    left: RhoCondition
    right: RhoCondition

    def __post_init__(self) -> None:
        for side, cond in (("left", self.left), ("right", self.right)):
            if not isinstance(cond, (NoFlux, InfluxDensity, DirichletDensity)):
                raise TypeError(f"unsupported {side} density condition {cond!r}")
        if isinstance(self.right, InfluxDensity):
            raise ValueError("influx is only supported at the left endpoint")

    @classmethod
    def closed(cls) -> "FluxSpec":
        return cls(NoFlux(), NoFlux())


@dataclass
class TransportOperator:
    """Tridiagonal action of (D_u Ntilde)^T plus boundary closures.

    rho evolves by rho_t = -(lower/diag/upper) @ rho + source, with rows in
    dirichlet_mask replaced by prescribed values at step time.
    """

    grid: Grid1D
    epsilon: float
    diag: np.ndarray
    lower: np.ndarray  # sub-diagonal, entry k couples row k+1 to column k
    upper: np.ndarray  # super-diagonal, entry k couples row k to column k+1
    source: np.ndarray
    dirichlet_mask: np.ndarray
    congestion_flags: np.ndarray

    def as_dense(self) -> np.ndarray:
        n = self.grid.n
        m = np.zeros((n, n))
        m[np.arange(n), np.arange(n)] = self.diag
        m[np.arange(1, n), np.arange(n - 1)] = self.lower
        m[np.arange(n - 1), np.arange(1, n)] = self.upper
        return m

    def apply(self, rho_values: np.ndarray) -> np.ndarray:
        out = self.diag * rho_values
        out[1:] += self.lower * rho_values[:-1]
        out[:-1] += self.upper * rho_values[1:]
        return out


def hj_tilde_residual(u: ValueField, rho: DensityField, k: int, epsilon: float) -> float:
    """Value of the discretised operator at node k, mirror ghosts at the ends."""
    uv = u.values
    n = uv.size
    if not 0 <= k < n:
        raise IndexError(f"node {k} outside grid of {n} nodes")
    h = u.grid.h
    left = uv[k - 1] if k > 0 else uv[1]
    right = uv[k + 1] if k < n - 1 else uv[n - 2]
    up = max(uv[k] - left, 0.0) ** 2 + max(uv[k] - right, 0.0) ** 2
    lap = (right - 2.0 * uv[k] + left) / (h * h)
    return (1.0 - rho.values[k]) ** 2 * up / (2.0 * h * h) - epsilon * lap


def _upwind_weights(u: np.ndarray, rho: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    # beta_minus[k] and beta_plus[k]: derivative weights of the two upwind
    # branches of Ntilde_k, with mirror differences at the endpoints.
    amp = (1.0 - rho) ** 2 / (h * h)
    bm = np.empty_like(u)
    bp = np.empty_like(u)
    bm[1:] = np.maximum(u[1:] - u[:-1], 0.0)
    bm[0] = np.maximum(u[0] - u[1], 0.0)
    bp[:-1] = np.maximum(u[:-1] - u[1:], 0.0)
    bp[-1] = np.maximum(u[-1] - u[-2], 0.0)
    return amp * bm, amp * bp


def assemble_adjoint(
    u: ValueField,
    rho: DensityField,
    epsilon: float,
    flux: FluxSpec,
    *,
    influx_value: Optional[float] = None,
    stale_check: Optional[EikonalConfig] = None,
) -> TransportOperator:
    """Assemble the transposed Jacobian of the stencil at (u, rho).

    ``influx_value`` overrides the left influx current (for time-dependent
    data); ``stale_check`` verifies u solves the eikonal problem for this rho
    before assembling, raising StaleSolutionError otherwise.
    """
    if u.grid != rho.grid:
        raise ValueError("u and rho live on different grids")
    if epsilon < 0:
        raise ValueError("viscosity must be >= 0")
    grid = u.grid
    n, h = grid.n, grid.h

    if stale_check is not None:
        f = slowness(rho.values, stale_check.rho_cap)
        res = solver_residual(u.values, f, h)
        worst = float(np.max(np.abs(res[1:-1])))
        if worst > 10.0 * stale_check.residual_tolerance:
            raise StaleSolutionError(
                f"u is stale for this rho (interior residual {worst:.3e})"
            )

    bm, bp = _upwind_weights(u.values, rho.values, h)
    delta = epsilon / (h * h)

    diag = bm + bp + 2.0 * delta
    lower = -(bp[:-1] + delta)          # row k+1 receives what leaves node k rightward
    upper = -(bm[1:] + delta)           # row k receives what leaves node k+1 leftward
    source = np.zeros(n)
    mask = np.zeros(n, dtype=bool)

    lower = lower.copy()
    upper = upper.copy()

    if isinstance(flux.left, NoFlux):
        # Mirror-ghost adjoint row: both branches of Ntilde_0 see node 1.
        lower[0] = -(bm[0] + bp[0] + 2.0 * delta)
    elif isinstance(flux.left, InfluxDensity):
        j = float(flux.left.j if influx_value is None else influx_value)
        diag = diag.copy()
        diag[0] = bp[0] + delta
        source[0] = j / h
    else:  # DirichletDensity: hold the row, neighbour couples via interface flux
        mask[0] = True

    if isinstance(flux.right, NoFlux):
        upper[-1] = -(bm[-1] + bp[-1] + 2.0 * delta)
    else:  # DirichletDensity
        mask[-1] = True

    if mask.any():
        diag = diag.copy()
        diag[mask] = 0.0
        source[mask] = 0.0
        if mask[0]:
            upper[0] = 0.0
        if mask[-1]:
            lower[-1] = 0.0

    return TransportOperator(
        grid=grid,
        epsilon=float(epsilon),
        diag=diag,
        lower=lower,
        upper=upper,
        source=source,
        dirichlet_mask=mask,
        congestion_flags=rho.values > DEFAULT_RHO_CAP,
    )


def interface_fluxes(
    u: ValueField,
    rho: DensityField,
    epsilon: float,
    applied_to: Optional[DensityField] = None,
) -> np.ndarray:
    """Mass flux through each interior interface k+1/2, oriented left-to-right.

    F = h [ (beta_plus_k + eps/h^2) rho_k - (beta_minus_{k+1} + eps/h^2) rho_{k+1} ];
    the interior rows of the adjoint operator are exactly (F_{k-1/2} - F_{k+1/2})/h.
    The upwind weights come from (u, rho); ``applied_to`` selects the density
    the operator acts on (a linearly implicit step freezes the weights at the
    pre-step density but transports the post-step one).
    """
    h = u.grid.h
    bm, bp = _upwind_weights(u.values, rho.values, h)
    delta = epsilon / (h * h)
    r = (applied_to or rho).values
    return h * ((bp[:-1] + delta) * r[:-1] - (bm[1:] + delta) * r[1:])


def _solve_tridiagonal(diag: np.ndarray, lower: np.ndarray, upper: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    n = diag.size
    ab = np.zeros((3, n))
    ab[0, 1:] = upper
    ab[1, :] = diag
    ab[2, :-1] = lower
    try:
        return solve_banded((1, 1), ab, rhs)
    except np.linalg.LinAlgError as exc:
        dense = np.diag(diag) + np.diag(lower, -1) + np.diag(upper, 1)
        cond = float(np.linalg.cond(dense))
        raise SingularSystemError("implicit transport system is singular", cond) from exc


def step_transport(
    rho: DensityField,
    op: TransportOperator,
    dt: float,
    rho_prev: Optional[DensityField] = None,
    dirichlet_values: Optional[dict[int, float]] = None,
) -> DensityField:
    """Advance rho by one implicit step.

    Implicit Euler when no history is supplied, two-step BDF otherwise:

        (3/2 rho_new - 2 rho + 1/2 rho_prev) / dt = -M rho_new + source.

    Nodes in the operator's dirichlet mask are held at ``dirichlet_values``
    (default: their current values).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    n = rho.grid.n
    if rho_prev is None:
        alpha = 1.0 / dt
        rhs = rho.values / dt + op.source
    else:
        alpha = 1.5 / dt
        rhs = (2.0 * rho.values - 0.5 * rho_prev.values) / dt + op.source

    diag = op.diag + alpha
    lower = op.lower.copy()
    upper = op.upper.copy()
    rhs = rhs.copy()

    mask = op.dirichlet_mask
    if mask.any():
        held = dirichlet_values or {}
        for k in np.flatnonzero(mask):
            k = int(k)
            diag[k] = 1.0
            if k + 1 < n:
                upper[k] = 0.0
            if k - 1 >= 0:
                lower[k - 1] = 0.0
            rhs[k] = held.get(k, float(rho.values[k]))

    return DensityField(rho.grid, _solve_tridiagonal(diag, lower, upper, rhs))


@dataclass
class BdfStepper:
    """Fixed-step stiff stepper: implicit Euler startup, then BDF2."""

    order: int = 2
    _prev: Optional[DensityField] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.order not in (1, 2):
            raise ValueError("only orders 1 and 2 are supported")

    def reset(self) -> None:
        self._prev = None

    def step(
        self,
        rho: DensityField,
        op: TransportOperator,
        dt: float,
        dirichlet_values: Optional[dict[int, float]] = None,
    ) -> DensityField:
        prev = self._prev if self.order == 2 else None
        new = step_transport(rho, op, dt, rho_prev=prev, dirichlet_values=dirichlet_values)
        self._prev = rho
        return new
