"""Code verification: manufactured solutions, temporal order, energy law, invariants.

Each study returns a small report object with the measured numbers and a
``passed`` flag computed against the thresholds given as arguments.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from . import fem
from .assembly import Discretization, Forcing, SchemeOptions, SparseSystem, State, apply_dirichlet
from .boundary_conditions import BETA1, BETA2, BcCombo, beta1, beta2
from .benchmark import compute_res_gamma, compute_res_omega
from .linalg import solve_direct
from .mesh import (CAVITY, GAMMA_D, GAMMA_I, GAMMA_N, build_structured_mesh, cavity_mesh,
                   tag_boundaries)
from .spaces import BoundaryData
from .timestepper import RunConfig, advance, run_transient, solve_steady


def _fit_order(h, err) -> float:
    """Least-squares slope of log(err) against log(h)."""
    return float(np.polyfit(np.log(h), np.log(err), 1)[0])


def _pairwise_orders(h, err) -> list:
    return [math.log(err[i] / err[i + 1]) / math.log(h[i] / h[i + 1]) for i in range(len(h) - 1)]


def _closed_square(n: int, temperature_dirichlet_everywhere: bool = False):
    """Unit square with Dirichlet velocity on every side.

    Temperature is Dirichlet on x=0 (or on every side) and Neumann elsewhere.
    """
    if temperature_dirichlet_everywhere:
        temp_rules = [(lambda x, y: True, GAMMA_D)]
    else:
        temp_rules = [(lambda x, y: abs(x) < 1e-9, GAMMA_D), (lambda x, y: abs(x) >= 1e-9, GAMMA_N)]
    rules = [(lambda x, y: True, GAMMA_I)] + temp_rules
    return tag_boundaries(build_structured_mesh(CAVITY, n), rules)


# ------------------------------------------------------------ error norms


def h1_seminorm_error(disc: Discretization, nodal: np.ndarray, grad_exact: Callable, t: float = 0.0) -> float:
    """``|grad(u_h - u)|_{L2}`` for a scalar P2 field and an exact gradient ``(ux, uy)``."""
    gh = np.einsum("tqkd,tk->tqd", disc.grad, nodal[disc.cells])
    x, y = disc.qpoints[..., 0], disc.qpoints[..., 1]
    gx, gy = grad_exact(x, y, t)
    d2 = (gh[..., 0] - gx) ** 2 + (gh[..., 1] - gy) ** 2
    return math.sqrt(float(np.sum(disc.wdet * d2)))


def pressure_l2_error(disc: Discretization, p: np.ndarray, p_exact: Callable, t: float = 0.0) -> float:
    """L2 error of a P1 pressure after removing the difference of means."""
    ph = np.einsum("qm,tm->tq", disc.psi, p[disc.dofmap.p1_cells])
    x, y = disc.qpoints[..., 0], disc.qpoints[..., 1]
    d = ph - np.broadcast_to(p_exact(x, y, t), ph.shape)
    area = float(np.sum(disc.wdet))
    d = d - float(np.sum(disc.wdet * d)) / area
    return math.sqrt(float(np.sum(disc.wdet * d ** 2)))


# -------------------------------------------------- steady manufactured flow

@dataclass(frozen=True)
class SteadyManufactured:
    """Smooth steady solution of the coupled problem with hand-derived sources.

    velocity ``(-sin x sin y, -cos x cos y)`` (divergence free), pressure
    ``sin x cos y``, temperature ``1 + cos(pi x) cos(pi y) / 2`` (zero normal
    derivative on the sides x=1, y=0, y=1).
    """

    re: float = 1.0
    pr: float = 1.0
    gr: float = 1.0

    @staticmethod
    def velocity(x, y, t=0.0):
        return -np.sin(x) * np.sin(y), -np.cos(x) * np.cos(y)

    @staticmethod
    def velocity_grad(x, y, t=0.0):
        """((dvx/dx, dvx/dy), (dvy/dx, dvy/dy))."""
        return ((-np.cos(x) * np.sin(y), -np.sin(x) * np.cos(y)),
                (np.sin(x) * np.cos(y), np.cos(x) * np.sin(y)))

    @staticmethod
    def pressure(x, y, t=0.0):
        return np.sin(x) * np.cos(y)

    @staticmethod
    def temperature(x, y, t=0.0):
        return 1.0 + 0.5 * np.cos(np.pi * x) * np.cos(np.pi * y)

    @staticmethod
    def temperature_grad(x, y, t=0.0):
        return (-0.5 * np.pi * np.sin(np.pi * x) * np.cos(np.pi * y),
                -0.5 * np.pi * np.cos(np.pi * x) * np.sin(np.pi * y))

    def momentum_source(self, x, y, t=0.0):
        # (v.grad)v - lap(v)/Re + grad p - Gr/Re^2 u e_y
        conv_x = np.sin(x) * np.cos(x)
        conv_y = -np.sin(y) * np.cos(y)
        lap_x = 2.0 * np.sin(x) * np.sin(y)
        lap_y = 2.0 * np.cos(x) * np.cos(y)
        gx = conv_x - lap_x / self.re + np.cos(x) * np.cos(y)
        gy = conv_y - lap_y / self.re - np.sin(x) * np.sin(y) - self.gr / self.re ** 2 * self.temperature(x, y)
        return gx, gy

    def heat_source(self, x, y, t=0.0):
        vx, vy = self.velocity(x, y)
        ux, uy = self.temperature_grad(x, y)
        lap = -np.pi ** 2 * np.cos(np.pi * x) * np.cos(np.pi * y)
        return vx * ux + vy * uy - lap / (self.re * self.pr)


@dataclass
class ConvergenceReport:
    ns: list
    errors: dict                       # field -> list of errors per n
    orders: dict = field(default_factory=dict)   # field -> pairwise orders
    fitted: dict = field(default_factory=dict)   # field -> least-squares order
    threshold: float = 1.9
    runtime: float = 0.0

    @property
    def passed(self) -> bool:
        return all(min(o) >= self.threshold for o in self.orders.values())

    def lines(self) -> list:
        out = [f"{'field':<22}" + "".join(f"n={n:<10d}" for n in self.ns) + "orders"]
        for name, errs in self.errors.items():
            orders = ", ".join(f"{o:.3f}" for o in self.orders[name])
            out.append(f"{name:<22}" + "".join(f"{e:<12.4e}" for e in errs) + orders)
        return out


def mms_steady(ns: Sequence[int] = (8, 16, 32), problem: SteadyManufactured = SteadyManufactured(),
               threshold: float = 1.9) -> ConvergenceReport:
    """Spatial convergence of the steady coupled solver on the unit square."""
    started = time.perf_counter()
    errors = {"velocity_h1": [], "temperature_h1": [], "pressure_l2": []}
    forcing = Forcing(momentum=problem.momentum_source, heat=problem.heat_source)
    config = RunConfig(re=problem.re, pr=problem.pr, gr=problem.gr, forcing=forcing)
    for n in ns:
        data = BoundaryData(velocity={GAMMA_I: problem.velocity}, temperature={GAMMA_D: problem.temperature},
                            pressure_pin=((0.0, 0.0), problem.pressure))
        disc = Discretization(_closed_square(n), data)
        state = solve_steady(disc, config)
        nn = disc.n
        (gxx, gxy), (gyx, gyy) = _split_grad(problem.velocity_grad)
        ev = math.hypot(h1_seminorm_error(disc, state.v[:nn], lambda x, y, t: (gxx(x, y), gxy(x, y))),
                        h1_seminorm_error(disc, state.v[nn:], lambda x, y, t: (gyx(x, y), gyy(x, y))))
        errors["velocity_h1"].append(ev)
        errors["temperature_h1"].append(h1_seminorm_error(disc, state.u, problem.temperature_grad))
        errors["pressure_l2"].append(pressure_l2_error(disc, state.p, problem.pressure))
    h = [1.0 / n for n in ns]
    report = ConvergenceReport(list(ns), errors, threshold=threshold)
    for name, errs in errors.items():
        report.orders[name] = _pairwise_orders(h, errs)
        report.fitted[name] = _fit_order(h, errs)
    report.runtime = time.perf_counter() - started
    return report


def _split_grad(grad):
    return ((lambda x, y: grad(x, y)[0][0], lambda x, y: grad(x, y)[0][1]),
            (lambda x, y: grad(x, y)[1][0], lambda x, y: grad(x, y)[1][1]))


# ------------------------------------------------ transient manufactured flow

@dataclass(frozen=True)
class TransientManufactured:
    """Transient solution that lies in the discrete spaces.

    ``v = a(t) (x^2, -2xy)``, ``p = c(t) (x + y)``, ``u = b(t) (x^2 + y)``,
    so the spatial discretisation is exact and only the time error remains.
    The default Re = 100 keeps the diffusive modes mildly stiff; at Re = 1
    the Crank-Nicolson local error reaches its k^3 regime only for very
    small k.
    """

    re: float = 100.0
    pr: float = 1.0
    gr: float = 1.0

    @staticmethod
    def a(t):
        return 1.0 + 0.5 * np.sin(2.0 * t)

    @staticmethod
    def da(t):
        return np.cos(2.0 * t)

    @staticmethod
    def b(t):
        return np.exp(-t) * np.cos(t)

    @staticmethod
    def db(t):
        return -np.exp(-t) * (np.cos(t) + np.sin(t))

    @staticmethod
    def c(t):
        return np.cos(3.0 * t)

    def velocity(self, x, y, t):
        return self.a(t) * x ** 2, -2.0 * self.a(t) * x * y

    def pressure(self, x, y, t):
        return self.c(t) * (x + y)

    def temperature(self, x, y, t):
        return self.b(t) * (x ** 2 + y)

    def momentum_source(self, x, y, t):
        a, da, c = self.a(t), self.da(t), self.c(t)
        u = self.temperature(x, y, t)
        gx = da * x ** 2 + 2.0 * a * a * x ** 3 - 2.0 * a / self.re + c
        gy = -2.0 * da * x * y + 2.0 * a * a * x ** 2 * y + c - self.gr / self.re ** 2 * u
        return gx, gy

    def heat_source(self, x, y, t):
        a, b, db = self.a(t), self.b(t), self.db(t)
        return db * (x ** 2 + y) + 2.0 * a * b * x ** 3 - 2.0 * a * b * x * y - 2.0 * b / (self.re * self.pr)

    def state(self, disc: Discretization, t: float) -> State:
        return State(disc.interpolate_velocity(self.velocity, t), disc.interpolate_pressure(self.pressure, t),
                     disc.interpolate_scalar(self.temperature, t), t)


@dataclass
class TemporalReport:
    steps: list
    local_errors: list
    global_errors: list
    local_order: float
    global_order: float
    local_threshold: float = 2.8
    global_threshold: float = 1.9
    runtime: float = 0.0

    @property
    def passed(self) -> bool:
        return self.local_order >= self.local_threshold and self.global_order >= self.global_threshold

    def lines(self) -> list:
        out = [f"{'k':<12}{'local error':<16}{'global error':<16}"]
        for k, el, eg in zip(self.steps, self.local_errors, self.global_errors):
            out.append(f"{k:<12.5g}{el:<16.4e}{eg:<16.4e}")
        out.append(f"fitted order: local {self.local_order:.3f}, global {self.global_order:.3f}")
        return out


def _state_error(disc, a: State, b: State) -> float:
    n = disc.n
    m = disc.mass
    total = 0.0
    for d in (a.v[:n] - b.v[:n], a.v[n:] - b.v[n:], a.u - b.u):
        total += float(d @ (m @ d))
    return math.sqrt(total)


def temporal_richardson(k0: float = 0.1, levels: int = 4, t_end: float = 1.0, t_local: float = 0.5,
                        n_mesh: int = 4, problem: TransientManufactured = TransientManufactured(),
                        local_threshold: float = 2.8, global_threshold: float = 1.9) -> TemporalReport:
    """Observed temporal orders of the trapezoid scheme with extrapolated convection.

    Local: one step from exact states at ``t_local - k`` and ``t_local``.
    Global: march from ``t = 0`` to ``t_end`` with ``t_end / k`` steps.
    """
    started = time.perf_counter()
    data = BoundaryData(velocity={GAMMA_I: problem.velocity}, temperature={GAMMA_D: problem.temperature},
                        pressure_pin=((0.0, 0.0), problem.pressure))
    disc = Discretization(_closed_square(n_mesh, temperature_dirichlet_everywhere=True), data)
    forcing = Forcing(momentum=problem.momentum_source, heat=problem.heat_source)
    steps, loc, glob = [], [], []
    for level in range(levels):
        k = k0 / 2 ** level
        n_steps = int(round(t_end / k))
        config = RunConfig(re=problem.re, pr=problem.pr, gr=problem.gr, t_end=t_end, n_steps=n_steps,
                           forcing=forcing)
        prev = problem.state(disc, t_local - k)
        cur = problem.state(disc, t_local)
        one = advance(cur, prev, config, disc)
        loc.append(_state_error(disc, one, problem.state(disc, t_local + k)))
        final = run_transient(problem.state(disc, 0.0), config, disc).final
        glob.append(_state_error(disc, final, problem.state(disc, t_end)))
        steps.append(k)
    return TemporalReport(steps, loc, glob, _fit_order(steps, loc), _fit_order(steps, glob),
                          local_threshold, global_threshold, time.perf_counter() - started)


# ----------------------------------------------------------- Stokes energy


@dataclass
class EnergyReport:
    n_states: int
    n_steps: int
    max_relative_increase: float
    slack: float
    runtime: float = 0.0

    @property
    def passed(self) -> bool:
        return self.max_relative_increase <= self.slack


def project_divergence_free(disc: Discretization, r: np.ndarray) -> np.ndarray:
    """Discretely divergence-free velocity nearest to ``r`` in the mass norm.

    Solves ``M v + B^T l = M r, B v = 0`` with homogeneous velocity
    Dirichlet values.
    """
    n, m = disc.n, disc.mass
    bx, by = disc.div_x, disc.div_y
    a = sp.bmat([[m, None, bx.T], [None, m, by.T], [bx, by, None]], format="csr")
    rhs = np.concatenate([m @ r[:n], m @ r[n:], np.zeros(disc.np)])
    vel, _, _ = disc.dirichlet(0.0)
    vel = replace(vel, values=np.zeros_like(vel.values)) if len(vel) else vel
    sysm = apply_dirichlet(SparseSystem(a, rhs, ordering=disc.flow_ordering), vel)
    return solve_direct(sysm.matrix, sysm.rhs, sysm.ordering)[: 2 * n]


def energy_law(n_mesh: int = 8, n_states: int = 20, n_steps: int = 100, k: float = 0.01, seed: int = 0,
               slack: float = 1e-10, re: float = 1.0) -> EnergyReport:
    """Non-increase of the discrete kinetic energy for the Stokes sub-problem.

    Convection and buoyancy are switched off; the cavity keeps its walls and
    its do-nothing open side, which contributes no boundary term.
    """
    started = time.perf_counter()
    disc = Discretization(cavity_mesh(n_mesh))
    config = RunConfig(re=re, gr=0.0, t_end=n_steps * k, n_steps=n_steps, bc=BcCombo("dn", "n"),
                       options=SchemeOptions(convection=False))
    rng = np.random.default_rng(seed)
    n = disc.n
    m = disc.mass
    worst = -math.inf

    def energy(v):
        return math.sqrt(float(v[:n] @ (m @ v[:n]) + v[n:] @ (m @ v[n:])))

    for _ in range(n_states):
        v0 = project_divergence_free(disc, rng.standard_normal(2 * n))
        state = State(v0, np.zeros(disc.np), np.zeros(n), 0.0)
        history = [energy(v0)]
        run_transient(state, config, disc, callback=lambda step, s: history.append(energy(s.v)))
        h = np.array(history)
        worst = max(worst, float(np.max((h[1:] - h[:-1]) / h[0])))
    return EnergyReport(n_states, n_steps, worst, slack, time.perf_counter() - started)


# ------------------------------------------------------------- invariants


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


def _monomial_integral(a: int, b: int) -> float:
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


def invariant_suite(seed: int = 0) -> list:
    """Structural identities that must hold to rounding."""
    rng = np.random.default_rng(seed)
    checks = []

    worst = 0.0
    for degree in (1, 2, 4, 5):
        rule = fem.triangle_quadrature(degree)
        x, y = rule.points[:, 0], rule.points[:, 1]
        for a in range(degree + 1):
            for b in range(degree + 1 - a):
                worst = max(worst, abs(np.dot(rule.weights, x ** a * y ** b) - _monomial_integral(a, b)))
    checks.append(Check("triangle quadrature exactness", worst < 1e-14, f"max error {worst:.2e}"))

    worst = 0.0
    for degree in (1, 3, 5, 7):
        rule = fem.edge_quadrature(degree)
        for p in range(degree + 1):
            worst = max(worst, abs(np.dot(rule.weights, rule.points ** p) - 1.0 / (p + 1)))
    checks.append(Check("edge quadrature exactness", worst < 1e-14, f"max error {worst:.2e}"))

    pts = rng.random((100, 2))
    pts = np.where(pts.sum(axis=1, keepdims=True) > 1, 1 - pts, pts)
    worst = 0.0
    for family in (fem.P1, fem.P2):
        worst = max(worst, np.abs(fem.basis_values(family, pts).sum(axis=1) - 1).max(),
                    np.abs(fem.basis_gradients(family, pts).sum(axis=1)).max())
    checks.append(Check("partition of unity", worst < 1e-13, f"max deviation {worst:.2e}"))

    disc = Discretization(cavity_mesh(4))
    ones = np.ones(disc.n)
    total = float(ones @ (disc.mass @ ones))
    checks.append(Check("mass matrix total equals area", abs(total - 1.0) < 1e-13, f"{total:.16g}"))
    kc = np.abs(disc.stiffness @ ones).max()
    checks.append(Check("stiffness annihilates constants", kc < 1e-12, f"max |K 1| {kc:.2e}"))

    s = np.linspace(-5, 5, 101)
    ok = (beta1(0.0) == 0.5 and np.abs(beta1(s) + beta1(-s) - 1).max() < 1e-15
          and beta2(-1.0) == 0.5 and beta2(0.0) == 0.0 and beta2(1.0) == 0.0)
    checks.append(Check("beta identities", bool(ok), "beta1(0)=1/2, beta1(s)+beta1(-s)=1, beta2 step"))
    ok_bounds = bool(np.all(np.abs(BETA1(s)) <= BETA1.bound) and np.all(np.abs(BETA2(s)) <= BETA2.bound))
    checks.append(Check("beta bounds", ok_bounds))

    st = State(rng.standard_normal(2 * disc.n), rng.standard_normal(disc.np), rng.standard_normal(disc.n), 1.0)
    r0 = compute_res_omega(st, st, None, disc)
    r1 = compute_res_gamma(st, st, None, disc)
    checks.append(Check("res(x, x) = 0", r0 == 0.0 and r1 == 0.0, f"{r0}, {r1}"))

    outflow = disc.interpolate_velocity(lambda x, y, t: (1.0 + 0.0 * x, 0.0 * y))
    g = disc.open_velocity_term(outflow)
    checks.append(Check("DDN term vanishes under pure outflow", g.nnz == 0 or np.abs(g.data).max() == 0.0,
                        f"nnz={g.nnz}"))
    inflow = -outflow
    h2 = disc.open_heat_term(inflow, BETA2)
    row = float(np.ones(disc.n) @ (h2 @ np.ones(disc.n)))
    checks.append(Check("N_beta2 term under unit inflow", abs(row + 0.5) < 1e-13, f"{row:.16g}"))
    return checks
