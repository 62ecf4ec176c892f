"""Config ingestion, subcommand orchestration, and result persistence.

Config format: line-oriented text with bracketed sections and ``key = value``
pairs.  ``#`` starts a comment.  Sections and keys:

    [domain]   kind = interval|rectangle|disk
               bounds = a b            (interval)
               bounds = ax bx ay by    (rectangle)
               center = cx cy ; radius = r   (disk)
               n = nodes per axis
    [system]   m, epsilon, alpha = [..], A = [..]
    [boundary.i]  piece = "<selector>: <expr>"   (repeatable)
    [solver]   tol_linear, tol_fp, max_sweeps

Subcommands: validate, solve, limit, compare, rate, interfaces.  All output
is data-only CSV plus a run manifest; identical config and flags produce
identical data files.

Exit codes: 0 success, 2 config error, 3 solver failure, 4 internal error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import analysis, epsilon_solver, limit_solver
from .elliptic_core import DEFAULT_TOL, ScalarField
from .errors import ConfigError, SolverError
from .geometry import DomainSpec, Grid, build_grid, format_grid
from .problem_data import (
    BoundaryDatum,
    CouplingWeights,
    Exponents,
    Piece,
    ProblemData,
)

VERSION = "0.1.0"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_INTERNAL = 4

_KNOWN_KEYS = {
    "domain": {"kind", "bounds", "center", "radius", "n"},
    "system": {"m", "epsilon", "alpha", "A"},
    # standalone aliases for the [system] alpha / A keys
    "exponents": {"alpha"},
    "coupling": {"A"},
    "solver": {"tol_linear", "tol_fp", "max_sweeps"},
}


@dataclass
class SystemConfig:
    domain: DomainSpec
    n: int
    data: ProblemData
    epsilon: float
    tol_linear: float
    tol_fp: float
    max_sweeps: int
    config_hash: str
    source: str = ""

    def build_grid(self) -> Grid:
        return build_grid(self.domain, self.n)


def _tokenize(text: str) -> list[tuple[str, str, str]]:
    """(section, key, value) triples in file order; duplicates preserved."""
    entries = []
    section = ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        entries.append((section, key.strip(), value.strip()))
    return entries


def _config_hash(entries: list[tuple[str, str, str]]) -> str:
    canon = "\n".join(f"{s}|{k}|{' '.join(v.split())}" for s, k, v in entries)
    return hashlib.sha256(canon.encode()).hexdigest()


def _parse_list(value: str, count: int, what: str, problems: list[str]) -> list[float]:
    v = value.strip()
    if v.startswith("[") and v.endswith("]"):
        v = v[1:-1]
    parts = [p for p in v.replace(",", " ").split() if p]
    try:
        out = [float(p) for p in parts]
    except ValueError:
        problems.append(f"{what}: cannot parse list {value!r}")
        return []
    if count and len(out) != count:
        problems.append(f"{what}: expected {count} entries, got {len(out)}")
    return out


def parse_config(path) -> SystemConfig:
    """Parse and fully validate a config file.

    All problems (schema, unknown keys, assumption violations) are reported
    at once in a single ConfigError.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    entries = _tokenize(path.read_text())
    problems: list[str] = []
    sections: dict[str, dict[str, str]] = {}
    boundary_pieces: dict[int, list[str]] = {}
    for section, key, value in entries:
        if section.startswith("boundary."):
            try:
                comp = int(section.split(".", 1)[1])
            except ValueError:
                problems.append(f"bad boundary section [{section}]")
                continue
            if key != "piece":
                problems.append(f"[{section}]: unknown key {key!r}")
                continue
            boundary_pieces.setdefault(comp, []).append(value.strip().strip('"'))
        elif section in _KNOWN_KEYS:
            if key not in _KNOWN_KEYS[section]:
                problems.append(f"[{section}]: unknown key {key!r}")
                continue
            if key in sections.setdefault(section, {}):
                problems.append(f"[{section}]: duplicate key {key!r}")
            sections.setdefault(section, {})[key] = value
        else:
            problems.append(f"unknown section [{section}]")

    dom = sections.get("domain", {})
    sysc = sections.get("system", {})
    solv = sections.get("solver", {})
    for alias, key in (("exponents", "alpha"), ("coupling", "A")):
        if key in sections.get(alias, {}):
            if key in sysc:
                problems.append(f"{key!r} given in both [system] and [{alias}]")
            sysc.setdefault(key, sections[alias][key])

    domain = None
    n = 0
    kind = dom.get("kind", "")
    try:
        n = int(dom.get("n", "0"))
    except ValueError:
        problems.append(f"[domain] n: not an integer: {dom.get('n')!r}")
    if kind == "interval":
        b = _parse_list(dom.get("bounds", ""), 2, "[domain] bounds", problems)
        if len(b) == 2:
            domain = DomainSpec.interval(*b)
    elif kind == "rectangle":
        b = _parse_list(dom.get("bounds", ""), 4, "[domain] bounds", problems)
        if len(b) == 4:
            domain = DomainSpec.rectangle(*b)
    elif kind == "disk":
        c = _parse_list(dom.get("center", "0 0"), 2, "[domain] center", problems)
        try:
            r = float(dom.get("radius", "nan"))
        except ValueError:
            r = math.nan
        if math.isnan(r):
            problems.append("[domain] radius: missing or not a number")
        elif len(c) == 2:
            domain = DomainSpec.disk(c[0], c[1], r)
    else:
        problems.append(f"[domain] kind: expected interval|rectangle|disk, got {kind!r}")
    if n < 3:
        problems.append(f"[domain] n: need n >= 3, got {n}")

    try:
        m = int(sysc.get("m", "0"))
    except ValueError:
        m = 0
        problems.append(f"[system] m: not an integer: {sysc.get('m')!r}")
    if m < 2:
        problems.append(f"[system] m: need m >= 2, got {m}")

    def _float(section_map, key, default, label):
        try:
            return float(section_map.get(key, default))
        except ValueError:
            problems.append(f"{label} {key}: not a number: {section_map.get(key)!r}")
            return float(default)

    epsilon = _float(sysc, "epsilon", "1e-8", "[system]")
    alphas = _parse_list(sysc["alpha"], m, "[system] alpha", problems) if "alpha" in sysc else [1.0] * max(m, 0)
    A = _parse_list(sysc["A"], m, "[system] A", problems) if "A" in sysc else [1.0] * max(m, 0)

    tol_linear = _float(solv, "tol_linear", "1e-10", "[solver]")
    tol_fp = _float(solv, "tol_fp", "1e-8", "[solver]")
    try:
        max_sweeps = int(solv.get("max_sweeps", "500"))
    except ValueError:
        max_sweeps = 500
        problems.append(f"[solver] max_sweeps: not an integer: {solv.get('max_sweeps')!r}")

    data = None
    if m >= 2:
        missing = [i for i in range(1, m + 1) if i not in boundary_pieces]
        extra = [i for i in boundary_pieces if not 1 <= i <= m]
        if missing:
            problems.append(f"missing boundary sections for components {missing}")
        if extra:
            problems.append(f"boundary sections for unknown components {extra}")
        if not missing and not extra and not problems:
            try:
                boundary = tuple(
                    BoundaryDatum(i, tuple(Piece.parse(p) for p in boundary_pieces[i]))
                    for i in range(1, m + 1)
                )
                data = ProblemData(boundary, CouplingWeights(np.array(A)), Exponents(tuple(alphas)))
            except ConfigError as exc:
                problems.extend(exc.problems)

    if problems:
        raise ConfigError(*problems)

    cfg = SystemConfig(
        domain, n, data, epsilon, tol_linear, tol_fp, max_sweeps,
        _config_hash(entries), str(path),
    )

    # assumption checks on the actual grid, with node locations
    g = cfg.build_grid()
    report = data.validate(g)
    for pt, prod in report["segregation"][:20]:
        problems.append(
            f"partial segregation violated at boundary node {pt.index} "
            f"(coord {tuple(round(c, 6) for c in pt.coord)}): product {prod:g}"
        )
    if len(report["segregation"]) > 20:
        problems.append(f"... and {len(report['segregation']) - 20} more segregation violations")
    for v in report["coupling"]:
        where = f" at node {v['node']}" if "node" in v else ""
        problems.append(
            f"coupling assumption violated for A_{v['component']} ({v['kind']}){where}"
        )
    # reject negative boundary values outright (evaluation already raises)
    try:
        data.boundary_arrays(g)
    except ConfigError as exc:
        problems.extend(exc.problems)
    if problems:
        raise ConfigError(*problems)
    return cfg


# ---------------------------------------------------------------------------
# output writers


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_fields_csv(path: Path, g: Grid, fields: tuple[ScalarField, ...]) -> None:
    m = len(fields)
    cols = ["x"] + (["y"] if g.ndim == 2 else []) + [f"u{i+1}" for i in range(m)]
    coords = g.node_coords()
    with path.open("w") as fh:
        fh.write(",".join(cols) + "\n")
        if g.ndim == 1:
            x = coords[0]
            for k in range(g.dims[0]):
                row = [x[k]] + [f.values[k] for f in fields]
                fh.write(",".join(_fmt(v) for v in row) + "\n")
        else:
            X, Y = coords
            for iy in range(g.dims[1]):
                for ix in range(g.dims[0]):
                    row = [X[iy, ix], Y[iy, ix]] + [f.values[iy, ix] for f in fields]
                    fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_interfaces_csv(path: Path, iset: analysis.InterfaceSet) -> None:
    g = iset.grid
    with path.open("w") as fh:
        if g.ndim == 1:
            fh.write("pair_i,pair_j,x,nx\n")
        else:
            fh.write("pair_i,pair_j,x,y,nx,ny\n")
        for (i, j), edges in sorted(iset.pairs.items()):
            for e in edges:
                vals = list(e.midpoint) + list(e.normal)
                fh.write(f"{i},{j}," + ",".join(_fmt(v) for v in vals) + "\n")
        if iset.degenerate:
            fh.write("# degenerate: some pair's zero sets cover the whole interior\n")


def write_rate_csv(path: Path, table: analysis.RateTable) -> None:
    with path.open("w") as fh:
        fh.write("epsilon,comp,lmp1_dist,sup_dist\n")
        for row in table.rows:
            if row.failed:
                fh.write(f"{_fmt(row.epsilon)},-,failed,failed\n")
                continue
            for i, (a, b) in enumerate(zip(row.lmp1, row.sup), start=1):
                fh.write(f"{_fmt(row.epsilon)},{i},{_fmt(a)},{_fmt(b)}\n")
        slope = "nan" if table.slope is None else _fmt(table.slope)
        resid = "nan" if table.fit_residual is None else _fmt(table.fit_residual)
        fh.write(f"# slope={slope} fit_residual={resid}\n")
        if table.slope is None:
            fh.write("# slope undefined: fewer than two usable points\n")
        if table.dropped_largest:
            fh.write("# largest epsilon dropped from fit (pre-asymptotic)\n")


def write_distance_csv(path: Path, distances: list[dict]) -> None:
    with path.open("w") as fh:
        fh.write("comp,lmp1_dist,sup_dist\n")
        for d in distances:
            fh.write(f"{d['component']},{_fmt(d['lmp1'])},{_fmt(d['sup'])}\n")


def write_jump_report(path: Path, reports) -> None:
    with path.open("w") as fh:
        fh.write("pair_i,pair_j,edges,skipped,max_balance,max_transfer\n")
        for (i, j), rep in sorted(reports.items()):
            fh.write(
                f"{i},{j},{rep.edges},{rep.skipped},"
                f"{_fmt(rep.max_balance)},{_fmt(rep.max_transfer)}\n"
            )


class RunWriter:
    """Collects emitted files and writes the run manifest."""

    def __init__(self, out_dir: Path, subcommand: str, cfg: SystemConfig, flags: dict):
        self.out = out_dir
        self.out.mkdir(parents=True, exist_ok=True)
        self.subcommand = subcommand
        self.cfg = cfg
        self.flags = flags
        self.files: list[str] = []
        self.stages: dict = {}
        self.t0 = time.perf_counter()

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.out / name

    def finish(self, **extra) -> Path:
        manifest = {
            "tool": f"seglimit {VERSION}",
            "subcommand": self.subcommand,
            "config": self.cfg.source,
            "config_hash": self.cfg.config_hash,
            "flags": self.flags,
            "files": sorted(self.files),
            "stages": self.stages,
            # volatile keys; excluded from byte-level determinism comparisons
            "created": datetime.now(timezone.utc).isoformat(),
            "wall_time_s": time.perf_counter() - self.t0,
        }
        manifest.update(extra)
        p = self.out / "manifest.json"
        p.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return p


# ---------------------------------------------------------------------------
# subcommands


def _limit_label(cfg: SystemConfig) -> str:
    # the explicit construction is proven only for equal weights; anything
    # else is a candidate, not the limit
    return "limit" if cfg.data.weights.all_equal() else "candidate"


def _stats_summary(stats) -> dict:
    return {
        "solves": len(stats),
        "max_iterations": max((s.iterations for s in stats), default=0),
        "max_residual": max((s.residual for s in stats), default=0.0),
    }


def cmd_validate(cfg: SystemConfig, out: Path, flags: dict) -> int:
    g = cfg.build_grid()
    report = cfg.data.validate(g)
    w = RunWriter(out, "validate", cfg, flags)
    with w.path("report.txt").open("w") as fh:
        fh.write(f"m = {cfg.data.m}\n")
        fh.write(f"segregation violations: {len(report['segregation'])}\n")
        for pt, prod in report["segregation"]:
            fh.write(f"  node {pt.index} coord {pt.coord} product {prod:g}\n")
        fh.write(f"coupling violations: {len(report['coupling'])}\n")
        for v in report["coupling"]:
            fh.write(f"  {v}\n")
    w.path("grid.txt").write_text(format_grid(g))
    ok = not report["segregation"] and not report["coupling"]
    w.finish(valid=ok)
    return EXIT_OK if ok else EXIT_CONFIG


def cmd_solve(cfg: SystemConfig, out: Path, flags: dict) -> int:
    g = cfg.build_grid()
    r = epsilon_solver.solve_epsilon(
        g, cfg.data, flags.get("epsilon") or cfg.epsilon,
        cfg.tol_fp, cfg.max_sweeps, cfg.tol_linear,
    )
    w = RunWriter(out, "solve", cfg, flags)
    w.stages["solve"] = {
        "epsilon": r.epsilon, "sweeps": r.sweeps, "gap": r.gap,
        "linear": _stats_summary(r.linear_stats),
    }
    write_fields_csv(w.path("solve_fields.csv"), g, r.fields)
    w.path("grid.txt").write_text(format_grid(g))
    w.finish()
    return EXIT_OK


def _build_limit(cfg: SystemConfig, g: Grid, flags: dict):
    pivot = flags.get("pivot") or 1
    return limit_solver.solve_limit(g, cfg.data, pivot, cfg.tol_linear)


def cmd_limit(cfg: SystemConfig, out: Path, flags: dict) -> int:
    g = cfg.build_grid()
    L = _build_limit(cfg, g, flags)
    label = _limit_label(cfg)
    w = RunWriter(out, "limit", cfg, flags)
    w.stages["limit"] = {"pivot": L.pivot, "linear": _stats_summary(L.linear_stats)}
    write_fields_csv(w.path(f"{label}_fields.csv"), g, L.fields)
    delta = flags.get("delta") or analysis.default_zero_threshold(
        g, max(cfg.data.max_boundary_value(g), 1e-300), cfg.tol_linear
    )
    iset = analysis.extract_supports_and_interfaces(L.fields, delta)
    write_interfaces_csv(w.path("interfaces.csv"), iset)
    w.path("grid.txt").write_text(format_grid(g))
    w.finish(label=label, delta=delta)
    return EXIT_OK


def cmd_compare(cfg: SystemConfig, out: Path, flags: dict) -> int:
    g = cfg.build_grid()
    L = _build_limit(cfg, g, flags)
    r = epsilon_solver.solve_epsilon(
        g, cfg.data, flags.get("epsilon") or cfg.epsilon,
        cfg.tol_fp, cfg.max_sweeps, cfg.tol_linear,
    )
    w = RunWriter(out, "compare", cfg, flags)
    label = _limit_label(cfg)
    w.stages["solve"] = {"epsilon": r.epsilon, "sweeps": r.sweeps, "gap": r.gap}
    w.stages["limit"] = {"pivot": L.pivot}
    write_fields_csv(w.path("solve_fields.csv"), g, r.fields)
    write_fields_csv(w.path(f"{label}_fields.csv"), g, L.fields)
    write_distance_csv(w.path("distance.csv"), analysis.solve_vs_limit_distances(r, L))
    w.path("grid.txt").write_text(format_grid(g))
    w.finish(label=label)
    return EXIT_OK


def cmd_rate(cfg: SystemConfig, out: Path, flags: dict) -> int:
    g = cfg.build_grid()
    L = _build_limit(cfg, g, flags)
    start = flags.get("start") or 1e-2
    stop = flags.get("stop") or 1e-6
    count = flags.get("count") or 5
    eps_list = list(np.geomspace(start, stop, count))
    table = analysis.rate_study(
        g, cfg.data, eps_list, L,
        tol_fp=cfg.tol_fp, max_sweeps=cfg.max_sweeps, tol_linear=cfg.tol_linear,
        threads=flags.get("threads") or 1,
    )
    w = RunWriter(out, "rate", cfg, flags)
    w.stages["rate"] = {"slope": table.slope, "fit_residual": table.fit_residual,
                        "dropped_largest": table.dropped_largest}
    write_rate_csv(w.path("rate.csv"), table)
    w.finish()
    return EXIT_OK


def cmd_interfaces(cfg: SystemConfig, out: Path, flags: dict) -> int:
    g = cfg.build_grid()
    L = _build_limit(cfg, g, flags)
    delta = flags.get("delta") or analysis.default_zero_threshold(
        g, max(cfg.data.max_boundary_value(g), 1e-300), cfg.tol_linear
    )
    iset = analysis.extract_supports_and_interfaces(L.fields, delta)
    reports = analysis.jump_condition_check(L, iset)
    w = RunWriter(out, "interfaces", cfg, flags)
    write_interfaces_csv(w.path("interfaces.csv"), iset)
    measures = tuple(analysis.laplacian_measure(f, g) for f in L.fields)
    write_fields_csv(w.path("laplacian_measure.csv"), g, measures)
    write_jump_report(w.path("jump_report.csv"), reports)
    w.path("grid.txt").write_text(format_grid(g))
    w.finish(label=_limit_label(cfg), delta=delta)
    return EXIT_OK


_COMMANDS = {
    "validate": cmd_validate,
    "solve": cmd_solve,
    "limit": cmd_limit,
    "compare": cmd_compare,
    "rate": cmd_rate,
    "interfaces": cmd_interfaces,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seglimit",
        description="Solver and analysis toolkit for singularly perturbed "
        "elliptic systems with asymptotic phase segregation.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config_pos", nargs="?", help="config file path")
        p.add_argument("--config", dest="config_flag", help="config file path")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--epsilon", type=float, help="override config epsilon")
        p.add_argument("--pivot", type=int, help="pivot component (1-based)")
        p.add_argument("--delta", type=float, help="zero-set threshold")
        if name == "rate":
            p.add_argument("--start", type=float, default=1e-2)
            p.add_argument("--stop", type=float, default=1e-6)
            p.add_argument("--count", type=int, default=5)
            p.add_argument("--threads", type=int, default=1)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config_path = args.config_flag or args.config_pos
        if not config_path:
            print("error: no config file given", file=sys.stderr)
            return EXIT_CONFIG
        cfg = parse_config(config_path)
        flags = {
            "epsilon": getattr(args, "epsilon", None),
            "pivot": getattr(args, "pivot", None),
            "delta": getattr(args, "delta", None),
            "start": getattr(args, "start", None),
            "stop": getattr(args, "stop", None),
            "count": getattr(args, "count", None),
            "threads": getattr(args, "threads", None),
        }
        return _COMMANDS[args.subcommand](cfg, Path(args.out), flags)
    except ConfigError as exc:
        for p in exc.problems or [str(exc)]:
            print(f"config error: {p}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver failure in stage {args.subcommand!r}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    raise SystemExit(main())
