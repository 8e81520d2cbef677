"""Time marching: one linearised Crank-Nicolson solve pair per step."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .assembly import (Discretization, Forcing, Params, SchemeOptions, State, assemble_momentum,
                       assemble_steady, assemble_temperature, extrapolate)
from .boundary_conditions import BcCombo
from .linalg import LuSolver, SingularMatrixError

log = logging.getLogger(__name__)


class DivergenceError(RuntimeError):
    """A step produced non-finite values."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


@dataclass(frozen=True)
class RunConfig:
    re: float = 3.0
    pr: float = 1.0
    gr: float = 1000.0
    t_end: float = 1.0
    n_steps: int = 100
    bc: BcCombo = BcCombo("dn", "n")
    record: Union[str, int] = "final"  # "final" or record every m steps
    options: SchemeOptions = SchemeOptions()
    forcing: Optional[Forcing] = None

    def __post_init__(self):
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps!r}")
        if not self.t_end > 0:
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if self.record != "final" and not (isinstance(self.record, int) and self.record >= 1):
            raise ValueError(f"record must be 'final' or a positive step interval, got {self.record!r}")
        Params(self.re, self.pr, self.gr, self.k)

    @property
    def k(self) -> float:
        return self.t_end / self.n_steps

    @property
    def params(self) -> Params:
        return Params(self.re, self.pr, self.gr, self.k)

    def echo(self) -> dict:
        return {
            "re": self.re, "pr": self.pr, "gr": self.gr, "t_end": self.t_end, "n_steps": self.n_steps,
            "k": self.k, "bc_v": self.bc.velocity, "bc_u": self.bc.temperature,
            "weak_form": self.options.weak_form, "buoyancy": self.options.buoyancy,
            "convection": self.options.convection,
        }


@dataclass
class Transient:
    final: State
    recorded: list
    metadata: dict = field(default_factory=dict)

    def __iter__(self):
        return iter((self.final, self.recorded))


def initial_state(disc: Discretization, t: float = 0.0) -> State:
    """Quiescent start: zero fields with the Dirichlet values embedded."""
    v = np.zeros(disc.dofmap.n_velocity)
    u = np.zeros(disc.n)
    p = np.zeros(disc.np)
    vel, temp, pin = disc.dirichlet(t)
    v[vel.ids] = vel.values
    u[temp.ids] = temp.values
    p[pin.ids] = pin.values
    return State(v, p, u, t)


def _solve(system, what, step, solvers=None):
    solver = solvers.setdefault(what, LuSolver()) if solvers is not None else LuSolver()
    try:
        x = solver.solve(system.matrix, system.rhs, system.ordering)
    except SingularMatrixError as err:
        raise SingularMatrixError(f"step {step}: {what} system: {err}", row=err.row) from err
    if not np.all(np.isfinite(x)):
        raise DivergenceError(f"step {step}: non-finite {what} solution", step=step)
    return x


def advance(state_n: State, state_nm1: Optional[State], config: RunConfig, disc: Discretization,
            step: int = 0, solvers: Optional[dict] = None) -> State:
    """Advance one step: extrapolate, solve temperature, then velocity and pressure.

    Without a previous state (first step) the extrapolation falls back to
    ``v~ = v^n``.  ``solvers`` keeps one :class:`LuSolver` per system across
    steps so that unchanged matrices are not factorised again.
    """
    if state_nm1 is None:
        v_tilde = state_n.v
    else:
        v_tilde, _ = extrapolate(state_n, state_nm1)
    params = config.params
    temp_sys = assemble_temperature(state_n, v_tilde, params, config.bc, disc, config.forcing, config.options)
    u_new = _solve(temp_sys, "temperature", step, solvers)
    flow_sys = assemble_momentum(state_n, v_tilde, u_new, params, config.bc, disc, config.forcing,
                                 config.options)
    x = _solve(flow_sys, "momentum", step, solvers)
    nv = disc.dofmap.n_velocity
    return State(x[:nv], x[nv:], u_new, state_n.t + params.k)


def run_transient(initial: State, config: RunConfig, disc: Discretization, previous: Optional[State] = None,
                  callback=None) -> Transient:
    """March ``config.n_steps`` steps from ``initial``."""
    started = time.perf_counter()
    recorded = []
    prev, cur = previous, initial
    solvers: dict = {}
    for step in range(1, config.n_steps + 1):
        new = advance(cur, prev, config, disc, step, solvers)
        prev, cur = cur, new
        if config.record != "final" and step % config.record == 0:
            recorded.append(cur.copy())
        if callback is not None:
            callback(step, cur)
        log.debug("step %d/%d t=%.4f", step, config.n_steps, cur.t)
    if config.record == "final":
        recorded.append(cur.copy())
    mesh = disc.mesh
    metadata = {
        "config": config.echo(),
        "mesh": {"n_per_unit": mesh.n_per_unit, "vertices": mesh.n_vertices, "triangles": mesh.n_triangles,
                 "p2_nodes": mesh.n_p2_nodes, "flow_dofs": disc.dofmap.n_flow,
                 "temperature_dofs": disc.dofmap.n_temperature},
        "initial_condition": "quiescent: v=0, p=0, u=0 in the interior, boundary values imposed at t=0",
        "bootstrap": "first step extrapolates with v~ = v^0",
        "wall_time_s": time.perf_counter() - started,
    }
    return Transient(cur, recorded, metadata)


def solve_steady(disc: Discretization, config: RunConfig, tol: float = 1e-11, max_iter: int = 50,
                 initial: Optional[State] = None) -> State:
    """Steady state by Picard (Oseen) iteration on the coupled system."""
    state = initial.copy() if initial is not None else initial_state(disc)
    params = config.params
    nv = disc.dofmap.n_velocity
    for it in range(max_iter):
        ts = assemble_steady(state.v, None, params, config.bc, disc, config.forcing, "temperature", config.options)
        u = _solve(ts, "temperature", it)
        fs = assemble_steady(state.v, u, params, config.bc, disc, config.forcing, "flow", config.options)
        x = _solve(fs, "flow", it)
        change = max(np.abs(x[:nv] - state.v).max(), np.abs(u - state.u).max())
        state = State(x[:nv], x[nv:], u, 0.0)
        scale = max(1.0, np.abs(x[:nv]).max(), np.abs(u).max())
        if change <= tol * scale:
            return state
        if not config.options.convection and it >= 1:
            return state
    raise RuntimeError(f"Picard iteration did not converge in {max_iter} iterations (last change {change:.3e})")
