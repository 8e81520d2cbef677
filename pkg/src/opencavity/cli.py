"""Command-line entry point: ``opencavity {run,bench,sweep,profile,verify}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import io
from .benchmark import (REFERENCE_LABEL, check_ordering, extended_discretization, run_cell, sweep, table)
from .boundary_conditions import BcCombo
from .io import Config, ConfigError

log = logging.getLogger("opencavity")

SUBCOMMANDS = ("run", "bench", "sweep", "profile", "verify")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", metavar="PATH", help="YAML configuration file")
    p.add_argument("--re", type=float, help="Reynolds number")
    p.add_argument("--gr", type=float, help="Grashof number")
    p.add_argument("--pr", type=float, help="Prandtl number")
    p.add_argument("--t-end", type=float, help="final time")
    p.add_argument("--steps", type=int, help="number of time steps")
    p.add_argument("--mesh-n", type=int, help="mesh cells per unit length")
    p.add_argument("--bc-v", choices=("dn", "ddn"), help="velocity condition on the open side")
    p.add_argument("--bc-u", choices=("n", "n_beta1", "n_beta2"), help="temperature condition on the open side")
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("--workers", type=int, help="parallel sweep cells")
    p.add_argument("--weak-form", choices=("semidiscrete", "paper-literal"), help="momentum weak form variant")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="opencavity",
                                     description="Boussinesq open-cavity solver and boundary-condition benchmark.")
    sub = parser.add_subparsers(dest="command", metavar="{run,bench,sweep,profile,verify}")
    helps = {
        "run": "single transient run on the configured geometry",
        "bench": "reference plus the six open-boundary combinations for one (Re, Gr)",
        "sweep": "benchmark over a grid of Re and Gr values",
        "profile": "normal velocity and temperature profiles along the open side",
        "verify": "manufactured-solution convergence study and invariant suite",
    }
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def load_config(args) -> Config:
    cfg = io.load_config(args.config) if args.config else Config()
    over = {
        ("params", "re"): args.re, ("params", "gr"): args.gr, ("params", "pr"): args.pr,
        ("time", "t_end"): args.t_end, ("time", "n_steps"): args.steps,
        ("mesh", "n_per_unit"): args.mesh_n, ("bc", "velocity"): args.bc_v,
        ("bc", "temperature"): args.bc_u, ("output", "directory"): args.out,
        ("sweep", "workers"): args.workers, ("flags", "weak_form"): args.weak_form,
    }
    for (section, key), value in over.items():
        if value is not None:
            setattr(getattr(cfg, section), key, value)
    if args.command == "sweep":
        if args.re is not None:
            cfg.sweep.re = [args.re]
        if args.gr is not None:
            cfg.sweep.gr = [args.gr]
    return io.validate(cfg)


def _wants(cfg: Config, fmt: str) -> bool:
    return fmt in cfg.output.formats


def cmd_run(cfg: Config, out: Path) -> int:
    from .assembly import Discretization
    from .benchmark import extract_profile
    from .timestepper import initial_state, run_transient

    disc = Discretization(cfg.build_mesh())
    rc = cfg.run_config()
    echo = cfg.echo()
    run = run_transient(initial_state(disc), rc, disc)
    print(f"run: {disc.mesh.n_p2_nodes} P2 nodes, {rc.n_steps} steps, wall time {run.metadata['wall_time_s']:.1f}s")
    snaps = run.recorded if rc.record != "final" else [run.final]
    if _wants(cfg, "vtk"):
        for i, st in enumerate(snaps):
            name = "fields.vtk" if rc.record == "final" else f"fields_{i:04d}.vtk"
            io.write_vtk(st, disc, out / name, title=_vtk_title(cfg, st.t))
    if len(disc.open_nodes) and _wants(cfg, "csv"):
        x1 = float(disc.mesh.p2_coordinates[disc.open_nodes[0, 0], 0])
        try:
            prof = extract_profile(run.final, disc, x1, cfg.output.profile_samples)
            io.write_profiles_csv({rc.bc.label: prof}, out / "profiles.csv", echo)
        except ValueError as err:
            log.info("no profile written: %s", err)
    if _wants(cfg, "csv"):
        (out / "run_metadata.json").write_text(json.dumps({"schema": io.SCHEMA_VERSION, "config": cfg.to_dict(),
                                                           "run": run.metadata}, indent=2, default=str))
    if _wants(cfg, "png"):
        from .plotting import plot_fields
        plot_fields(run.final, disc, out / "fields.png", f"t={run.final.t:.3g}", echo)
    return 0


def _vtk_title(cfg: Config, t: float) -> str:
    p = cfg.params
    return (f"opencavity schema {io.SCHEMA_VERSION} t={t:.6g} re={p.re:g} gr={p.gr:g} pr={p.pr:g} "
            f"n={cfg.mesh.n_per_unit} steps={cfg.time.n_steps} t_end={cfg.time.t_end:g} "
            f"bc={cfg.bc.velocity}-{cfg.bc.temperature} weak_form={cfg.flags.weak_form} "
            f"buoyancy={cfg.flags.buoyancy}")


def _cell(cfg: Config, combos, keep_states: bool):
    p = cfg.params
    return run_cell(p.re, p.gr, cfg.run_config(), cfg.mesh.n_per_unit, combos, cfg.output.profile_samples,
                    keep_states=keep_states)


def _print_table(results):
    print(f"{'combination':<14}{'res_omega':>14}{'res_gamma':>14}{'time [s]':>10}")
    for r in results:
        status = "" if r.ok else f"  FAILED: {r.error}"
        print(f"{r.bc.label:<14}{r.res_omega:>14.5g}{r.res_gamma:>14.5g}{r.runtime:>10.1f}{status}")


def cmd_bench(cfg: Config, out: Path) -> int:
    echo = cfg.echo()
    cell = _cell(cfg, cfg.combos(), keep_states=_wants(cfg, "vtk"))
    _print_table(cell.results)
    if _wants(cfg, "csv"):
        io.write_results_csv(cell.results, out / "results.csv", echo)
        io.write_profiles_csv(cell.profiles, out / "profiles.csv", echo)
    if _wants(cfg, "vtk"):
        from .benchmark import cavity_discretization
        cav = cavity_discretization(cfg.mesh.n_per_unit)
        for label, st in cell.states.items():
            disc = extended_discretization(cfg.mesh.n_per_unit) if label == "reference_extended" else cav
            io.write_vtk(st, disc, out / f"{label}.vtk", title=_vtk_title(cfg, st.t))
    if _wants(cfg, "png"):
        from .plotting import plot_profiles, plot_residual_bars
        title = f"Re={cfg.params.re:g}, Gr={cfg.params.gr:g}"
        plot_profiles(cell.profiles, out / "profiles.png", title, echo)
        plot_residual_bars(cell.results, out / "residuals.png", title, echo)
    return 0 if all(r.ok for r in cell.results) else 1


def cmd_profile(cfg: Config, out: Path, explicit_bc: bool) -> int:
    echo = cfg.echo()
    combos = [BcCombo(cfg.bc.velocity, cfg.bc.temperature)] if explicit_bc else cfg.combos()
    cell = _cell(cfg, combos, keep_states=False)
    for label, (x2, vn, u) in cell.profiles.items():
        top = vn[x2 >= 0.5].mean()
        print(f"{label:<14} mean v.n on upper half {top:+.4f}, u range [{u.min():.4f}, {u.max():.4f}]")
    if _wants(cfg, "csv"):
        io.write_profiles_csv(cell.profiles, out / "profiles.csv", echo)
    if _wants(cfg, "png"):
        from .plotting import plot_profiles
        plot_profiles(cell.profiles, out / "profiles.png", f"Re={cfg.params.re:g}, Gr={cfg.params.gr:g}", echo)
    return 0 if all(r.ok for r in cell.results) else 1


def cmd_sweep(cfg: Config, out: Path) -> int:
    echo = cfg.echo()
    started = time.perf_counter()
    results = sweep(cfg.sweep.re, cfg.sweep.gr, cfg.run_config(), cfg.mesh.n_per_unit, cfg.combos(),
                    cfg.sweep.workers)
    for metric in ("res_omega", "res_gamma"):
        rows = table(results, metric)
        labels = list(next(iter(rows.values())))
        print(f"\n{metric}")
        print(f"{'Re':>5}{'Gr':>7}" + "".join(f"{lab:>13}" for lab in labels))
        for (re, gr), row in rows.items():
            print(f"{re:>5g}{gr:>7g}" + "".join(f"{row[lab]:>13.5g}" for lab in labels))
    if len(cfg.combos()) == 6:
        checks = check_ordering(results)
        ok = all(all(c.values()) for c in checks.values())
        print(f"\nordering (DDN-N_beta1 row minimum, DN-N row maximum of res_omega): {'holds' if ok else 'VIOLATED'}")
        for key, c in checks.items():
            if not all(c.values()):
                print(f"  Re={key[0]:g} Gr={key[1]:g}: {c}")
    print(f"sweep wall time {time.perf_counter() - started:.1f}s")
    if _wants(cfg, "csv"):
        io.write_results_csv(results, out / "results.csv", echo)
    if _wants(cfg, "png"):
        from .plotting import plot_sweep
        plot_sweep(results, out / "sweep.png", echo)
    return 0 if all(r.ok for r in results) else 1


def cmd_verify(cfg: Config, out: Path) -> int:
    from . import verification as ver
    echo = cfg.echo()
    ok = True
    rows = []
    print("invariant suite")
    for c in ver.invariant_suite():
        ok &= bool(c.passed)
        rows.append(("invariant", c.name, "", bool(c.passed)))
        print(f"  [{'PASS' if c.passed else 'FAIL'}] {c.name} {c.detail}")
    mms = ver.mms_steady()
    print("\nmanufactured steady solution (unit square)")
    for line in mms.lines():
        print("  " + line)
    print(f"  orders >= {mms.threshold}: {'PASS' if mms.passed else 'FAIL'} ({mms.runtime:.1f}s)")
    ok &= mms.passed
    for name, orders in mms.orders.items():
        rows.append(("mms_order", name, min(orders), min(orders) >= mms.threshold))
    tr = ver.temporal_richardson()
    print("\ntemporal order (manufactured transient)")
    for line in tr.lines():
        print("  " + line)
    print(f"  local >= {tr.local_threshold}, global >= {tr.global_threshold}: {'PASS' if tr.passed else 'FAIL'}")
    ok &= tr.passed
    rows.append(("time_order", "local", tr.local_order, tr.local_order >= tr.local_threshold))
    rows.append(("time_order", "global", tr.global_order, tr.global_order >= tr.global_threshold))
    en = ver.energy_law()
    print(f"\nStokes energy law: max relative increase {en.max_relative_increase:.3e} "
          f"(slack {en.slack:g}) over {en.n_states} states x {en.n_steps} steps: {'PASS' if en.passed else 'FAIL'}")
    ok &= en.passed
    rows.append(("energy", "max_relative_increase", en.max_relative_increase, en.passed))
    if _wants(cfg, "csv"):
        import csv
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "verify.csv", "w", newline="") as fh:
            fh.write(f"# schema: opencavity-verify/{io.SCHEMA_VERSION}\n# config: {echo}\n")
            w = csv.writer(fh)
            w.writerow(("study", "quantity", "value", "passed"))
            w.writerows(rows)
    if _wants(cfg, "png"):
        from .plotting import plot_convergence
        plot_convergence(mms, out / "convergence.png", echo)
    return 0 if ok else 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        print("opencavity: error: a subcommand is required", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    try:
        cfg = load_config(args)
    except ConfigError as err:
        print(f"opencavity: configuration error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"opencavity: cannot read configuration: {err}", file=sys.stderr)
        return 2
    out = Path(cfg.output.directory)
    try:
        if args.command == "run":
            return cmd_run(cfg, out)
        if args.command == "bench":
            return cmd_bench(cfg, out)
        if args.command == "profile":
            return cmd_profile(cfg, out, explicit_bc=args.bc_v is not None or args.bc_u is not None)
        if args.command == "sweep":
            return cmd_sweep(cfg, out)
        return cmd_verify(cfg, out)
    except (ValueError, RuntimeError, OSError) as err:
        print(f"opencavity {args.command}: {type(err).__name__}: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
