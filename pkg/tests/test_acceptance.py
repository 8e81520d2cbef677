"""Acceptance criteria; each test prints one PASS/FAIL line.

Set ``OPENCAVITY_FULL_GRID=1`` to also run the full Re x Gr grid at
n_per_unit=40 (about 1.5 hours on one core).
"""

import math
import os
import time

import pytest

from conftest import report
from opencavity import verification as ver
from opencavity.benchmark import (BENCH_GR, BENCH_RE, TARGET_TABLE_RE3_GR1000, check_ordering, run_cell, sweep,
                                  table)
from opencavity.boundary_conditions import BcCombo
from opencavity.timestepper import RunConfig

BASE = RunConfig(pr=1.0, t_end=1.0, n_steps=100)
FULL_GRID = os.environ.get("OPENCAVITY_FULL_GRID") == "1"


def _line(capsys, ok: bool, text: str, details=()):
    line = f"[{'PASS' if ok else 'FAIL'}] {text}"
    report(line)
    for d in details:
        report("       " + d)
    with capsys.disabled():
        print("\n" + line)
        for d in details:
            print("       " + d)


def _ordering_details(results):
    bad = []
    for (re, gr), c in check_ordering(results).items():
        if not all(c.values()):
            bad.append(f"Re={re:g} Gr={gr:g}: " + ", ".join(k for k, v in c.items() if not v))
    return bad


def _monotone_in_gr(results):
    rows = table(results, "res_omega")
    bad = []
    for re in sorted({k[0] for k in rows}):
        grs = sorted(gr for (r, gr) in rows if r == re)
        for label in rows[(re, grs[0])]:
            vals = [rows[(re, gr)][label] for gr in grs]
            if not all(a < b for a, b in zip(vals, vals[1:])):
                bad.append(f"Re={re:g} {label}: " + ", ".join(f"{v:.4g}" for v in vals))
    return bad


@pytest.fixture(scope="session")
def ci_grid():
    started = time.perf_counter()
    results = sweep([2.0, 3.0], [500.0, 1000.0], BASE, 20)
    return results, time.perf_counter() - started


@pytest.fixture(scope="session")
def cell_re3_gr1000():
    started = time.perf_counter()
    cell = run_cell(3.0, 1000.0, BASE, 40)
    return cell, time.perf_counter() - started


def test_criterion_1_ordering_ci_grid(ci_grid, capsys):
    results, elapsed = ci_grid
    bad = _ordering_details(results)
    ok = not bad and all(r.ok for r in results) and elapsed <= 600
    _line(capsys, ok, f"criterion 1 (CI grid Re{{2,3}} x Gr{{500,1000}}, n=20): DDN-N_beta1 row minimum of "
                       f"res_omega and res_gamma, DN-N row maximum of res_omega in all 4 rows; {elapsed:.0f}s "
                       f"(limit 600s)", bad)
    assert ok


def test_criterion_1_monotone_in_gr(ci_grid, capsys):
    bad = _monotone_in_gr(ci_grid[0])
    _line(capsys, not bad, "criterion 1 (CI grid): res_omega increases with Gr for every Re and combination", bad)
    assert not bad


@pytest.mark.skipif(not FULL_GRID, reason="set OPENCAVITY_FULL_GRID=1 for the full grid at n=40")
def test_criterion_1_ordering_full_grid(capsys):
    started = time.perf_counter()
    results = sweep(BENCH_RE, BENCH_GR, BASE, 40)
    elapsed = time.perf_counter() - started
    bad = _ordering_details(results) + _monotone_in_gr(results)
    ok = not bad and all(r.ok for r in results)
    _line(capsys, ok, f"criterion 1 (full grid 4 x 3, n=40): ordering and Gr monotonicity in all 12 rows; "
                       f"{elapsed:.0f}s", bad)
    assert ok


def test_criterion_2_table_values(cell_re3_gr1000, capsys):
    cell, elapsed = cell_re3_gr1000
    labels = [BcCombo(v, t).label for v, t in (("dn", "n"), ("ddn", "n"), ("dn", "n_beta1"), ("ddn", "n_beta1"))]
    got = {r.bc.label: r for r in cell.results}
    details, ok = [], True
    for metric in ("res_omega", "res_gamma"):
        for label in labels:
            target = TARGET_TABLE_RE3_GR1000[metric][label]
            value = getattr(got[label], metric)
            rel = (value - target) / target
            hit = math.isfinite(value) and abs(rel) <= 0.25
            ok &= hit
            details.append(f"{metric:<10} {label:<12} {value:9.4f} target {target:8.4f} "
                           f"rel {rel:+7.1%} {'ok' if hit else 'OUTSIDE 25%'}")
    _line(capsys, ok, f"criterion 2 (Re=3, Gr=1000, n=40): res_omega and res_gamma within 25% of the target "
                       f"tables; {elapsed:.0f}s", details)
    assert ok


def test_self_convergence_re3_gr1000(ci_grid, cell_re3_gr1000, capsys):
    coarse = {r.bc.label: r for r in ci_grid[0] if (r.re, r.gr) == (3.0, 1000.0)}
    fine = {r.bc.label: r for r in cell_re3_gr1000[0].results}
    details, worst = [], 0.0
    for label, f in fine.items():
        for metric in ("res_omega", "res_gamma"):
            a, b = getattr(coarse[label], metric), getattr(f, metric)
            worst = max(worst, abs(a - b) / abs(b))
            details.append(f"{metric:<10} {label:<12} n=20 {a:9.4f} n=40 {b:9.4f}")
    ok = worst < 0.25
    _line(capsys, ok, f"mesh doubling 20 -> 40 changes every residual at Re=3, Gr=1000 by < 25% "
                       f"(largest {worst:.1%})", details)
    assert ok


def test_criterion_3_manufactured_convergence(capsys):
    rep = ver.mms_steady(ns=(8, 16, 32))
    ok = rep.passed and rep.runtime <= 120
    _line(capsys, ok, f"criterion 3: steady manufactured solution, orders >= 1.9 over n=8,16,32; "
                       f"{rep.runtime:.1f}s (limit 120s)", rep.lines())
    assert ok


def test_criterion_4_stokes_energy(capsys):
    rep = ver.energy_law(n_states=20, n_steps=100, slack=1e-10)
    ok = rep.passed and rep.runtime <= 30
    _line(capsys, ok, f"criterion 4: Stokes kinetic energy non-increasing over {rep.n_steps} steps from "
                       f"{rep.n_states} random states, max relative increase {rep.max_relative_increase:.2e} "
                       f"(slack 1e-10); {rep.runtime:.1f}s (limit 30s)")
    assert ok


def test_criterion_5_invariants(capsys):
    started = time.perf_counter()
    checks = ver.invariant_suite()
    elapsed = time.perf_counter() - started
    failing = [f"{c.name}: {c.detail}" for c in checks if not c.passed]
    ok = not failing and elapsed <= 60
    _line(capsys, ok, f"criterion 5: invariant suite, {len(checks) - len(failing)}/{len(checks)} checks pass; "
                       f"{elapsed:.1f}s (limit 60s)", failing)
    assert ok


def test_criterion_6_temporal_order(capsys):
    rep = ver.temporal_richardson()
    ok = rep.passed and rep.runtime <= 120
    _line(capsys, ok, f"criterion 6: temporal order local {rep.local_order:.3f} (>= 2.8), global "
                       f"{rep.global_order:.3f} (>= 1.9); {rep.runtime:.1f}s (limit 120s)", rep.lines())
    assert ok
