"""Coupled evolution: per step, solve the eikonal for u given rho, assemble
the adjoint transport operator, and advance rho implicitly.

Every recorded snapshot pairs rho with the u solved against that same rho,
so diagnostics and figures never re-solve.  A run halts early with status
"breakdown" once max rho exceeds 1 + breakdown_tol: congestion beyond the
maximal density is a reportable model outcome, not a numerical fault.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .eikonal import DEFAULT_CONFIG, EikonalConfig, solve_eikonal
from .grid import (
    DensityField,
    DirichletDensity,
    DirichletValue,
    Grid1D,
    InfluxDensity,
    NoFlux,
    ReflectingValue,
    RhoCondition,
    UCondition,
    ValueField,
    total_mass,
)
from .transport import BdfStepper, FluxSpec, assemble_adjoint, interface_fluxes


class SimulationAborted(RuntimeError):
    """A numerical failure mid-run; carries the partial record."""

    def __init__(self, message: str, record: "SimulationRecord"):
        self.record = record
        super().__init__(message)


@dataclass
class Scenario:
    grid: Grid1D
    rho_initial: DensityField
    bc_rho: tuple[RhoCondition, RhoCondition]
    bc_u: tuple[UCondition, UCondition]
    epsilon: float
    t_end: float
    dt: float
    record_every: int = 1
    eikonal: EikonalConfig = field(default_factory=lambda: DEFAULT_CONFIG)
    breakdown_tol: float = 1e-3

    def __post_init__(self) -> None:
        if self.rho_initial.grid != self.grid:
            raise ValueError("initial density lives on a different grid")
        if self.t_end < 0:
            raise ValueError("t_end must be >= 0")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.epsilon < 0:
            raise ValueError("viscosity must be >= 0")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        left_rho, right_rho = self.bc_rho
        for cond in (left_rho, right_rho):
            if not isinstance(cond, (DirichletDensity, NoFlux, InfluxDensity)):
                raise TypeError(f"unsupported rho condition {cond!r}")
        if isinstance(right_rho, InfluxDensity):
            raise ValueError("influx is only supported at the left endpoint")
        left_u, right_u = self.bc_u
        if not isinstance(left_u, DirichletValue) and not isinstance(right_u, DirichletValue):
            raise ValueError("u needs at least one Dirichlet exit endpoint")
        for cond in (left_u, right_u):
            if not isinstance(cond, (DirichletValue, ReflectingValue)):
                raise TypeError(f"unsupported u condition {cond!r}")

    @property
    def flux(self) -> FluxSpec:
        return FluxSpec(self.bc_rho[0], self.bc_rho[1])

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass
class SimulationRecord:
    scenario: Scenario
    times: np.ndarray
    rho_snapshots: list[DensityField]
    u_snapshots: list[ValueField]
    mass_series: np.ndarray
    min_rho_series: np.ndarray
    max_rho_series: np.ndarray
    influx_series: np.ndarray
    outflux_series: np.ndarray
    congestion_events: list[tuple[float, int]]
    status: str
    global_min_rho: float
    global_max_rho: float

    @property
    def grid(self) -> Grid1D:
        return self.scenario.grid

    @property
    def final_rho(self) -> DensityField:
        return self.rho_snapshots[-1]


def _dirichlet_rho_values(bc_rho, n: int, t: float) -> dict[int, float]:
    values: dict[int, float] = {}
    left, right = bc_rho
    if isinstance(left, DirichletDensity):
        values[0] = left.at(t)
    if isinstance(right, DirichletDensity):
        values[n - 1] = right.at(t)
    return values


def _boundary_fluxes(scenario: Scenario, u: ValueField, rho: DensityField) -> tuple[float, float]:
    """Instantaneous current entering and leaving through the endpoints."""
    fluxes = interface_fluxes(u, rho, scenario.epsilon)
    influx = 0.0
    outflux = 0.0
    left, right = scenario.bc_rho
    if isinstance(left, InfluxDensity):
        influx += left.j
    elif isinstance(left, DirichletDensity):
        outflux += -float(fluxes[0])  # leftward flow through the left exit
    if isinstance(right, DirichletDensity):
        outflux += float(fluxes[-1])
    return influx, outflux


def run_scenario(s: Scenario) -> SimulationRecord:
    """March the coupled system to t_end, recording every record_every steps."""
    times: list[float] = []
    rhos: list[DensityField] = []
    us: list[ValueField] = []
    masses: list[float] = []
    mins: list[float] = []
    maxs: list[float] = []
    ins: list[float] = []
    outs: list[float] = []
    events: list[tuple[float, int]] = []
    status = "completed"
    global_min = math.inf
    global_max = -math.inf

    stepper = BdfStepper(order=2)
    rho = s.rho_initial
    n_steps = s.n_steps

    def partial_record() -> SimulationRecord:
        return SimulationRecord(
            scenario=s,
            times=np.asarray(times),
            rho_snapshots=rhos,
            u_snapshots=us,
            mass_series=np.asarray(masses),
            min_rho_series=np.asarray(mins),
            max_rho_series=np.asarray(maxs),
            influx_series=np.asarray(ins),
            outflux_series=np.asarray(outs),
            congestion_events=events,
            status=status,
            global_min_rho=global_min,
            global_max_rho=global_max,
        )

    def record(t: float, rho_f: DensityField, u_f: ValueField) -> None:
        times.append(t)
        rhos.append(rho_f)
        us.append(u_f)
        masses.append(total_mass(rho_f))
        mins.append(float(rho_f.values.min()))
        maxs.append(float(rho_f.values.max()))
        fin, fout = _boundary_fluxes(s, u_f, rho_f)
        ins.append(fin)
        outs.append(fout)

    step = 0
    while True:
        t = step * s.dt
        try:
            u = solve_eikonal(rho, s.bc_u, s.eikonal)
        except Exception as exc:
            status = "aborted"
            raise SimulationAborted(f"eikonal solve failed at t={t:g}: {exc}", partial_record()) from exc

        global_min = min(global_min, float(rho.values.min()))
        global_max = max(global_max, float(rho.values.max()))

        if step % s.record_every == 0 or step == n_steps:
            record(t, rho, u)
        if step >= n_steps:
            break

        op = assemble_adjoint(u, rho, s.epsilon, s.flux)
        if op.congestion_flags.any() and len(events) < 100_000:
            events.extend((t, int(k)) for k in np.flatnonzero(op.congestion_flags))

        t_new = (step + 1) * s.dt
        held = _dirichlet_rho_values(s.bc_rho, s.grid.n, t_new)
        try:
            rho = stepper.step(rho, op, s.dt, dirichlet_values=held)
        except Exception as exc:
            status = "aborted"
            raise SimulationAborted(f"transport step failed at t={t_new:g}: {exc}", partial_record()) from exc
        step += 1

        if float(rho.values.max()) > 1.0 + s.breakdown_tol:
            status = "breakdown"
            global_min = min(global_min, float(rho.values.min()))
            global_max = max(global_max, float(rho.values.max()))
            u = solve_eikonal(rho, s.bc_u, s.eikonal)
            t_halt = step * s.dt
            events.extend(
                (t_halt, int(k)) for k in np.flatnonzero(congestion_mask(rho, s.eikonal.rho_cap))
            )
            record(t_halt, rho, u)
            break

    return partial_record()


def distance_to_stationary(rec: SimulationRecord, stat: DensityField) -> np.ndarray:
    """Sup-norm distance of every recorded density to a stationary profile."""
    if stat.grid != rec.grid:
        raise ValueError("stationary profile lives on a different grid")
    return np.asarray(
        [float(np.max(np.abs(r.values - stat.values))) for r in rec.rho_snapshots]
    )


def discrete_flow_steady_state(
    grid: Grid1D,
    epsilon: float,
    rho_left: float,
    rho_right: float = 0.0,
    wall_at_left: bool = True,
) -> tuple[DensityField, float]:
    """Stationary profile of the discrete scheme itself for a rightward flow.

    For a run with Dirichlet densities at both ends, a single exit for u at
    x=1 (u strictly decreasing), the semi-discrete steady state satisfies
    flux constancy across every interface:

        g(rho_k) + (eps/h)(rho_k - rho_{k+1}) = q,   g(rho) = rho (1 - rho),

    except that the first link carries g(rho_0)/sqrt(2) when the left wall is
    reflecting for u (the two-sided update halves the one-sided slope there).
    The recursion runs backward from the exit datum, where it is contractive
    (the forward direction amplifies roundoff exponentially): given rho_{k+1},
    flux constancy is a scalar quadratic for rho_k, and the remaining first
    link equation is closed by a bracketed root find over q.  Returns
    (profile, q).
    """
    if epsilon <= 0:
        raise ValueError("needs positive viscosity")
    n, h = grid.n, grid.h
    c = epsilon / h

    def profile_for(q: float) -> np.ndarray:
        rho = np.empty(n)
        rho[-1] = rho_right
        for k in range(n - 2, 0, -1):
            # g(rho_k) + c (rho_k - rho_{k+1}) = q, smaller quadratic root
            b = 1.0 + c
            disc = b * b - 4.0 * (q + c * rho[k + 1])
            if disc < 0:
                raise ValueError(f"no real steady profile for current q={q:g}")
            rho[k] = 0.5 * (b - math.sqrt(disc))
        rho[0] = rho_left
        return rho

    def first_link_gap(q: float) -> float:
        try:
            rho = profile_for(q)
        except ValueError:
            # q too large to support a steady profile; the gap is decreasing
            # in q, so steer the bracket downward.
            return -1e9
        g0 = rho_left * (1.0 - rho_left)
        if wall_at_left:
            g0 /= math.sqrt(2.0)
        return g0 + c * (rho_left - rho[1]) - q

    q = brentq(first_link_gap, -1.0, 0.999, xtol=1e-15, rtol=8.9e-16)
    return DensityField(grid, profile_for(q)), q
