"""Configuration documents and output files (CSV tables, profiles, legacy VTK).

Configuration is YAML with fixed sections; unknown keys are rejected::

    problem:  {geometry: cavity}          # cavity | cavity_extended | custom
    params:   {re: 3, gr: 1000, pr: 1}
    time:     {t_end: 1, n_steps: 100}
    mesh:     {n_per_unit: 40}
    bc:       {velocity: dn, temperature: n}
    output:   {directory: out, formats: [csv, vtk, png], record: final}
    flags:    {weak_form: semidiscrete, buoyancy: trapezoid, deterministic: true}
    sweep:    {re: [2, 3, 4, 5], gr: [500, 1000, 2000], combos: all, workers: 1}

A custom geometry lists rectangles and tag rules; each rule tags boundary
edges whose midpoint lies on a line (``x`` or ``y``), optionally limited to a
range of the other coordinate, or every still-untagged edge (``rest``)::

    problem:
      geometry: custom
      rects: [[0, 1, 0, 1]]
      tags:
        - {tag: Gamma_o, x: 1}
        - {tag: Gamma_w, rest: true}
        - {tag: Gamma_d, x: 0}
        - {tag: Gamma_n, rest: true}
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .assembly import Discretization, SchemeOptions, State
from .boundary_conditions import BENCHMARK_COMBOS, BcCombo
from .mesh import (CAVITY, CAVITY_EXTENDED, TEMPERATURE_TAGS, VELOCITY_TAGS, RectUnion, TaggedMesh,
                   build_structured_mesh, cavity_rules, extended_cavity_rules, tag_boundaries)
from .timestepper import RunConfig

SCHEMA_VERSION = 1
RESULTS_COLUMNS = ("re", "gr", "bc_v", "bc_u", "res_omega", "res_gamma", "wall_time_s")
PROFILE_COLUMNS = ("series", "x2", "vn", "u")


class ConfigError(ValueError):
    """Invalid configuration document; ``field`` names the offending entry."""

    def __init__(self, message, field=None, line=None, column=None):
        super().__init__(message)
        self.field = field
        self.line = line
        self.column = column


@dataclass
class ProblemSection:
    geometry: str = "cavity"
    rects: Optional[list] = None
    tags: Optional[list] = None


@dataclass
class ParamsSection:
    re: float = 3.0
    gr: float = 1000.0
    pr: float = 1.0


@dataclass
class TimeSection:
    t_end: float = 1.0
    n_steps: int = 100


@dataclass
class MeshSection:
    n_per_unit: int = 40


@dataclass
class BcSection:
    velocity: str = "dn"
    temperature: str = "n"


@dataclass
class OutputSection:
    directory: str = "out"
    formats: list = field(default_factory=lambda: ["csv", "vtk", "png"])
    record: object = "final"
    profile_samples: int = 101


@dataclass
class FlagsSection:
    weak_form: str = "semidiscrete"
    buoyancy: str = "trapezoid"
    deterministic: bool = True


@dataclass
class SweepSection:
    re: list = field(default_factory=lambda: [2.0, 3.0, 4.0, 5.0])
    gr: list = field(default_factory=lambda: [500.0, 1000.0, 2000.0])
    combos: object = "all"
    workers: int = 1


@dataclass
class Config:
    problem: ProblemSection = field(default_factory=ProblemSection)
    params: ParamsSection = field(default_factory=ParamsSection)
    time: TimeSection = field(default_factory=TimeSection)
    mesh: MeshSection = field(default_factory=MeshSection)
    bc: BcSection = field(default_factory=BcSection)
    output: OutputSection = field(default_factory=OutputSection)
    flags: FlagsSection = field(default_factory=FlagsSection)
    sweep: SweepSection = field(default_factory=SweepSection)

    def run_config(self) -> RunConfig:
        record = self.output.record
        return RunConfig(
            re=self.params.re, pr=self.params.pr, gr=self.params.gr,
            t_end=self.time.t_end, n_steps=self.time.n_steps,
            bc=BcCombo(self.bc.velocity, self.bc.temperature),
            record=record,
            options=SchemeOptions(weak_form=self.flags.weak_form, buoyancy=self.flags.buoyancy,
                                  deterministic=self.flags.deterministic),
        )

    def combos(self) -> list:
        if self.sweep.combos == "all":
            return list(BENCHMARK_COMBOS)
        return [BcCombo.parse(c) for c in self.sweep.combos]

    def build_mesh(self) -> TaggedMesh:
        n = self.mesh.n_per_unit
        geo = self.problem.geometry
        if geo == "cavity":
            return tag_boundaries(build_structured_mesh(CAVITY, n), cavity_rules())
        if geo == "cavity_extended":
            return tag_boundaries(build_structured_mesh(CAVITY_EXTENDED, n), extended_cavity_rules())
        domain = RectUnion(self.problem.rects)
        return tag_boundaries(build_structured_mesh(domain, n), _custom_rules(self.problem.tags))

    def to_dict(self) -> dict:
        return asdict(self)

    def echo(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def _custom_rules(spec):
    rules = []
    if not spec:
        raise ConfigError("custom geometry needs tag rules", field="problem.tags")
    decomposition_of = {t: ("velocity" if t in VELOCITY_TAGS else "") + ("temperature" if t in TEMPERATURE_TAGS else "")
                        for t in set(VELOCITY_TAGS) | set(TEMPERATURE_TAGS)}
    claimed: dict = {"velocity": [], "temperature": []}
    for i, item in enumerate(spec):
        where = f"problem.tags[{i}]"
        if not isinstance(item, dict) or "tag" not in item:
            raise ConfigError("tag rule must be a mapping with a 'tag' key", field=where)
        unknown = set(item) - {"tag", "x", "y", "min", "max", "rest"}
        if unknown:
            raise ConfigError(f"unknown key(s) {sorted(unknown)} in tag rule", field=where)
        tag = item["tag"]
        if tag not in decomposition_of:
            raise ConfigError(f"unknown tag {tag!r}", field=where)
        lo, hi = float(item.get("min", -math.inf)), float(item.get("max", math.inf))
        if item.get("rest"):
            groups = [g for g in ("velocity", "temperature") if g in decomposition_of[tag]]
            taken = [r for g in groups for r in claimed[g]]
            pred = (lambda taken: lambda x, y: not any(p(x, y) for p in taken))(list(taken))
        elif "x" in item:
            x0 = float(item["x"])
            pred = (lambda x0, lo, hi: lambda x, y: abs(x - x0) < 1e-9 and lo < y < hi)(x0, lo, hi)
        elif "y" in item:
            y0 = float(item["y"])
            pred = (lambda y0, lo, hi: lambda x, y: abs(y - y0) < 1e-9 and lo < x < hi)(y0, lo, hi)
        else:
            raise ConfigError("tag rule needs 'x', 'y' or 'rest'", field=where)
        for g in ("velocity", "temperature"):
            if g in decomposition_of[tag]:
                claimed[g].append(pred)
        rules.append((pred, tag))
    return rules


_SECTIONS = {f.name: f.type for f in fields(Config)}
_SECTION_TYPES = {
    "problem": ProblemSection, "params": ParamsSection, "time": TimeSection, "mesh": MeshSection,
    "bc": BcSection, "output": OutputSection, "flags": FlagsSection, "sweep": SweepSection,
}


def _number(value, name, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number, got {value!r}", field=name)
    if integer and int(value) != value:
        raise ConfigError(f"{name} must be an integer, got {value!r}", field=name)
    return int(value) if integer else float(value)


def validate(cfg: Config) -> Config:
    p = cfg.params
    p.re = _number(p.re, "params.re")
    p.gr = _number(p.gr, "params.gr")
    p.pr = _number(p.pr, "params.pr")
    if not p.re > 0:
        raise ConfigError(f"params.re must be positive, got {p.re}", field="params.re")
    if not p.pr > 0:
        raise ConfigError(f"params.pr must be positive, got {p.pr}", field="params.pr")
    if not p.gr >= 0:
        raise ConfigError(f"params.gr must be non-negative, got {p.gr}", field="params.gr")
    cfg.time.t_end = _number(cfg.time.t_end, "time.t_end")
    if not cfg.time.t_end > 0:
        raise ConfigError("time.t_end must be positive", field="time.t_end")
    cfg.time.n_steps = _number(cfg.time.n_steps, "time.n_steps", integer=True)
    if cfg.time.n_steps < 1:
        raise ConfigError("time.n_steps must be at least 1", field="time.n_steps")
    cfg.mesh.n_per_unit = _number(cfg.mesh.n_per_unit, "mesh.n_per_unit", integer=True)
    if cfg.mesh.n_per_unit < 1:
        raise ConfigError("mesh.n_per_unit must be at least 1", field="mesh.n_per_unit")
    if cfg.problem.geometry not in ("cavity", "cavity_extended", "custom"):
        raise ConfigError(f"unknown geometry {cfg.problem.geometry!r}", field="problem.geometry")
    if cfg.problem.geometry == "custom" and not cfg.problem.rects:
        raise ConfigError("custom geometry needs rects", field="problem.rects")
    if cfg.bc.velocity not in ("dn", "ddn"):
        raise ConfigError(f"bc.velocity must be dn or ddn, got {cfg.bc.velocity!r}", field="bc.velocity")
    if cfg.bc.temperature not in ("n", "n_beta1", "n_beta2"):
        raise ConfigError(f"bc.temperature must be n, n_beta1 or n_beta2, got {cfg.bc.temperature!r}",
                          field="bc.temperature")
    if cfg.flags.weak_form not in ("semidiscrete", "paper-literal"):
        raise ConfigError(f"unknown weak_form {cfg.flags.weak_form!r}", field="flags.weak_form")
    if cfg.flags.buoyancy not in ("trapezoid", "implicit"):
        raise ConfigError(f"unknown buoyancy mode {cfg.flags.buoyancy!r}", field="flags.buoyancy")
    rec = cfg.output.record
    if rec != "final" and not (isinstance(rec, int) and not isinstance(rec, bool) and rec >= 1):
        raise ConfigError("output.record must be 'final' or a positive integer", field="output.record")
    bad = set(cfg.output.formats) - {"csv", "vtk", "png"}
    if bad:
        raise ConfigError(f"output.formats: unknown format(s) {sorted(bad)}", field="output.formats")
    cfg.sweep.re = [_number(v, "sweep.re") for v in cfg.sweep.re]
    cfg.sweep.gr = [_number(v, "sweep.gr") for v in cfg.sweep.gr]
    if not cfg.sweep.re or not cfg.sweep.gr:
        raise ConfigError("sweep grid must not be empty", field="sweep")
    cfg.sweep.workers = _number(cfg.sweep.workers, "sweep.workers", integer=True)
    try:
        cfg.combos()
    except ValueError as err:
        raise ConfigError(f"sweep.combos: {err}", field="sweep.combos") from None
    return cfg


def parse_config(text: str) -> Config:
    """Parse and validate a YAML configuration document (strict keys)."""
    try:
        doc = yaml.safe_load(text) if text.strip() else {}
    except yaml.YAMLError as err:
        mark = getattr(err, "problem_mark", None)
        line = mark.line + 1 if mark else None
        col = mark.column + 1 if mark else None
        raise ConfigError(f"config parse error at line {line}, column {col}: {getattr(err, 'problem', err)}",
                          line=line, column=col) from None
    doc = doc or {}
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a mapping")
    cfg = Config()
    for section, body in doc.items():
        if section not in _SECTION_TYPES:
            raise ConfigError(f"unknown section {section!r}", field=section)
        if body is None:
            continue
        if not isinstance(body, dict):
            raise ConfigError(f"section {section!r} must be a mapping", field=section)
        cls = _SECTION_TYPES[section]
        allowed = {f.name for f in fields(cls)}
        target = getattr(cfg, section)
        for key, value in body.items():
            if key not in allowed:
                raise ConfigError(f"unknown key {section}.{key}", field=f"{section}.{key}")
            setattr(target, key, value)
    return validate(cfg)


def load_config(path) -> Config:
    return parse_config(Path(path).read_text())


# ------------------------------------------------------------------ CSV


def _header_lines(kind: str, config_echo: Optional[str]):
    lines = [f"# schema: opencavity-{kind}/{SCHEMA_VERSION}"]
    if config_echo:
        lines.append(f"# config: {config_echo}")
    return lines


def write_results_csv(results, path, config_echo: Optional[str] = None) -> Path:
    """One row per truncated run; floats are written with ``repr`` so they re-parse exactly."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        for line in _header_lines("results", config_echo):
            fh.write(line + "\n")
        w = csv.writer(fh)
        w.writerow(RESULTS_COLUMNS)
        for r in results:
            w.writerow([repr(float(r.re)), repr(float(r.gr)), r.bc.velocity, r.bc.temperature,
                        repr(float(r.res_omega)), repr(float(r.res_gamma)), repr(float(r.runtime))])
    return path


def read_results_csv(path) -> list:
    """Rows of a results table as dicts with numeric fields converted."""
    rows = []
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    if tuple(reader.fieldnames or ()) != RESULTS_COLUMNS:
        raise ValueError(f"unexpected results columns {reader.fieldnames}")
    for row in reader:
        for key in ("re", "gr", "res_omega", "res_gamma", "wall_time_s"):
            row[key] = float(row[key])
        rows.append(row)
    return rows


def read_header(path) -> dict:
    out = {}
    with open(path) as fh:
        for ln in fh:
            if not ln.startswith("#"):
                break
            key, _, value = ln[1:].strip().partition(": ")
            out[key] = value
    return out


def write_profiles_csv(profiles: dict, path, config_echo: Optional[str] = None) -> Path:
    """Long-format profiles: one row per (series, sample)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        for line in _header_lines("profiles", config_echo):
            fh.write(line + "\n")
        w = csv.writer(fh)
        w.writerow(PROFILE_COLUMNS)
        for label, (x2, vn, u) in profiles.items():
            for a, b, c in zip(x2, vn, u):
                w.writerow([label, repr(float(a)), repr(float(b)), repr(float(c))])
    return path


def read_profiles_csv(path) -> dict:
    out: dict = {}
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    for row in csv.DictReader(lines):
        out.setdefault(row["series"], []).append((float(row["x2"]), float(row["vn"]), float(row["u"])))
    return {k: tuple(np.array(c) for c in zip(*v)) for k, v in out.items()}


# ------------------------------------------------------------------ VTK

VTK_QUADRATIC_TRIANGLE = 22


def write_vtk(state: State, disc: Discretization, path, title: Optional[str] = None) -> Path:
    """Legacy ASCII unstructured grid with quadratic triangles.

    Points are all P2 nodes.  Pressure is P1; at edge midpoints it is written
    as the mean of the two edge vertices (its exact linear value).
    """
    path = Path(path)
    mesh = disc.mesh
    n = disc.n
    xy = mesh.p2_coordinates
    cells = mesh.p2_cells
    p_mid = 0.5 * (state.p[mesh.edges[:, 0]] + state.p[mesh.edges[:, 1]])
    pressure = np.concatenate([state.p, p_mid])
    header = title or f"opencavity schema {SCHEMA_VERSION} t={state.t:.6g}"
    header = header.replace("\n", " ")[:255]
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            fh.write("# vtk DataFile Version 3.0\n")
            fh.write(header + "\n")
            fh.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
            fh.write(f"POINTS {n} double\n")
            np.savetxt(fh, np.column_stack([xy, np.zeros(n)]), fmt="%.17g")
            fh.write(f"CELLS {len(cells)} {7 * len(cells)}\n")
            np.savetxt(fh, np.column_stack([np.full(len(cells), 6), cells]), fmt="%d")
            fh.write(f"CELL_TYPES {len(cells)}\n")
            np.savetxt(fh, np.full(len(cells), VTK_QUADRATIC_TRIANGLE), fmt="%d")
            fh.write(f"POINT_DATA {n}\n")
            fh.write("VECTORS velocity double\n")
            np.savetxt(fh, np.column_stack([state.v[:n], state.v[n:], np.zeros(n)]), fmt="%.17g")
            fh.write("SCALARS pressure double 1\nLOOKUP_TABLE default\n")
            np.savetxt(fh, pressure, fmt="%.17g")
            fh.write("SCALARS temperature double 1\nLOOKUP_TABLE default\n")
            np.savetxt(fh, state.u, fmt="%.17g")
    except OSError as err:
        raise OSError(f"cannot write VTK file {path}: {err}") from err
    return path


def read_vtk_summary(path) -> dict:
    """Counts and point-data arrays of a file written by :func:`write_vtk`."""
    lines = Path(path).read_text().splitlines()
    out: dict = {"title": lines[1]}
    i = 0
    while i < len(lines):
        parts = lines[i].split()
        if not parts:
            i += 1
            continue
        if parts[0] == "POINTS":
            out["n_points"] = int(parts[1])
        elif parts[0] == "CELLS":
            out["n_cells"] = int(parts[1])
        elif parts[0] == "CELL_TYPES":
            out["cell_types"] = sorted({int(v) for v in lines[i + 1:i + 1 + int(parts[1])]})
        elif parts[0] == "SCALARS":
            npts = out["n_points"]
            out[parts[1]] = np.array([float(v) for v in lines[i + 2:i + 2 + npts]])
            i += 2 + npts
            continue
        elif parts[0] == "VECTORS":
            npts = out["n_points"]
            out[parts[1]] = np.array([[float(c) for c in v.split()] for v in lines[i + 1:i + 1 + npts]])
            i += 1 + npts
            continue
        i += 1
    return out
