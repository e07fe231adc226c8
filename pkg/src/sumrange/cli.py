"""Command line front end.

Exit codes: 0 success, 1 a verification or suite failure, 2 a
configuration problem, 3 a file that could not be parsed.

Every flag can also be supplied through `--config FILE`, a flat
key=value text file whose keys match the flag names; explicit flags
win.  All outputs are deterministic for a fixed config and seed, and
files are written atomically.
"""

from __future__ import annotations

import argparse
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from fractions import Fraction
from pathlib import Path

from .families import (
    ConfigError,
    StructuralError,
    apply_transform,
    build_kadets,
    build_multipoint,
    build_three_kadets,
    cube_label,
    expected_sum_range,
    parse_term_id,
)
from .schedules import (
    Schedule,
    random_schedule,
    run_trace,
    schedule_custom,
    schedule_divergent,
    schedule_point,
    schedule_sigma,
    schedule_tau,
    schedule_three_point,
)
from .serialize import (
    ParseError,
    atomic_write_lines,
    dump_family,
    load_family,
    load_matrix,
)
from .stepfn import DomainError, as_fraction

SUITE_NAMES = ("cross-variable", "fiber", "near-constancy", "drift")


@dataclass
class RunConfig:
    flavor: str = "kadets"
    levels: int = 4
    r: int = 4
    sizes: tuple[int, ...] | None = None
    schedule: str = "sigma"
    target: tuple[Fraction, ...] | None = None
    p: int = 1
    seed: int = 7
    cases: int = 500
    jobs: int = 1
    out: str | None = None
    family: str | None = None
    matrix: str | None = None
    order: str | None = None
    record: str = "steps"
    suite: str = "all"


def _int(text: str) -> int:
    try:
        return int(text)
    except ValueError as exc:
        raise ConfigError(f"expected an integer, got {text!r}") from exc


def _sizes(text: str) -> tuple[int, ...]:
    return tuple(_int(part) for part in text.replace(",", " ").split())


def _target(text: str) -> tuple[Fraction, ...]:
    try:
        return tuple(as_fraction(part) for part in text.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigError(f"bad target {text!r}: {exc}") from exc


_FIELD_PARSERS = {
    "flavor": str,
    "levels": _int,
    "r": _int,
    "sizes": _sizes,
    "schedule": str,
    "target": _target,
    "p": _int,
    "seed": _int,
    "cases": _int,
    "jobs": _int,
    "out": str,
    "family": str,
    "matrix": str,
    "order": str,
    "record": str,
    "suite": str,
}


def _read_config(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    out = {}
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise ConfigError(f"{path}:{ln}: expected key=value, got {line!r}")
        key = key.strip()
        if key not in _FIELD_PARSERS:
            raise ConfigError(f"{path}:{ln}: unknown key {key!r}")
        out[key] = _FIELD_PARSERS[key](value.strip())
    return out


def _merge(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        cfg = replace(cfg, **_read_config(args.config))
    overrides = {}
    for field in fields(RunConfig):
        raw = getattr(args, field.name, None)
        if raw is not None:
            overrides[field.name] = _FIELD_PARSERS[field.name](raw)
    cfg = replace(cfg, **overrides)
    if cfg.flavor == "multi":
        cfg = replace(cfg, flavor="multipoint")
    if cfg.flavor not in ("kadets", "three-kadets", "multipoint"):
        raise ConfigError(f"unknown flavor {cfg.flavor!r}")
    if cfg.record not in ("steps", "blocks"):
        raise ConfigError(f"record must be steps or blocks, got {cfg.record!r}")
    if cfg.suite != "all" and cfg.suite not in SUITE_NAMES:
        raise ConfigError(f"unknown suite {cfg.suite!r}; pick from {SUITE_NAMES}")
    for name in ("levels", "p", "cases", "jobs"):
        if getattr(cfg, name) < 1:
            raise ConfigError(f"{name} must be at least 1")
    return cfg


def _load_or_build(cfg: RunConfig):
    if cfg.family:
        return load_family(cfg.family)
    if cfg.flavor == "kadets":
        return build_kadets(cfg.levels, cfg.sizes)
    if cfg.flavor == "three-kadets":
        return build_three_kadets(cfg.levels, cfg.sizes)
    return build_multipoint(cfg.r, cfg.levels, cfg.sizes)


def _write_lines(path: str, lines) -> None:
    atomic_write_lines(path, [line + "\n" for line in lines])


# --- commands ---------------------------------------------------------------


def cmd_build(cfg: RunConfig) -> int:
    fam = _load_or_build(cfg)
    if not cfg.out:
        raise ConfigError("build needs --out FILE")
    dump_family(fam, cfg.out)
    cubes = ", ".join(cube_label(c) for c in fam.domain)
    print(f"wrote {cfg.out}: {fam.structure} depth {fam.depth}, "
          f"{fam.term_count()} terms, cubes {cubes}")
    return 0


def cmd_verify(cfg: RunConfig) -> int:
    if not cfg.family:
        raise ConfigError("verify needs --family FILE")
    from .verify import verify_family

    fam = load_family(cfg.family)
    report = verify_family(fam)
    for line in report.lines():
        print(line)
    if cfg.out:
        _write_lines(cfg.out, report.csv_lines())
    return 0 if report.ok else 1


def _make_schedule(fam, cfg: RunConfig) -> Schedule:
    label = cfg.schedule
    if label == "sigma":
        return schedule_sigma(fam)
    if label == "tau":
        return schedule_tau(fam)
    if label in ("p00", "p10", "p11"):
        return schedule_three_point(fam, label)
    if label == "divergent":
        return schedule_divergent(fam)
    if label == "custom":
        if not cfg.order:
            raise ConfigError("schedule custom needs --order FILE")
        return schedule_custom(fam, _read_order(cfg.order))
    if label == "random":
        return random_schedule(fam, cfg.seed)
    match = re.fullmatch(r"point(\d+)", label)
    if match:
        return schedule_point(fam, int(match.group(1)))
    raise ConfigError(
        f"unknown schedule {label!r}; known: sigma, tau, p00, p10, p11, "
        "divergent, point<i>, custom, random")


def _read_order(path: str) -> list:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    ids = []
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            ids.append(parse_term_id(line))
        except ValueError as exc:
            raise ParseError(f"{path}:{ln}: {exc}") from exc
    return ids


def _fmt_point(values) -> str:
    return "(" + ", ".join(str(v) for v in values) + ")"


def cmd_trace(cfg: RunConfig) -> int:
    fam = _load_or_build(cfg)
    sch = _make_schedule(fam, cfg)
    trace = run_trace(fam, sch, target=cfg.target, p=cfg.p, record=cfg.record)
    if cfg.out:
        _write_lines(cfg.out, trace.to_csv_lines())
    print(f"schedule {sch.label}: {sch.term_count} terms in "
          f"{len(trace.markers())} blocks, max marker deviation "
          f"{trace.max_marker_deviation()}, final "
          f"{_fmt_point(trace.final_deviations)}, box count peak "
          f"{trace.max_box_count()}")
    return 0


def _run_suite(name: str, cases: int, seed: int):
    from . import analysis

    if name == "cross-variable":
        return analysis.run_cross_variable_suite(cases, seed)
    if name == "fiber":
        return analysis.run_fiber_suite(cases, seed)
    if name == "near-constancy":
        return analysis.run_near_constancy_battery()
    if name == "drift":
        return analysis.run_drift_battery()
    raise ConfigError(f"unknown suite {name!r}")


def cmd_lemmas(cfg: RunConfig) -> int:
    names = list(SUITE_NAMES) if cfg.suite == "all" else [cfg.suite]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            futures = [pool.submit(_run_suite, n, cfg.cases, cfg.seed) for n in names]
            reports = [f.result() for f in futures]
    else:
        reports = [_run_suite(n, cfg.cases, cfg.seed) for n in names]
    for report in reports:
        for line in report.lines():
            print(line)
    if cfg.out:
        lines = ["suite,case,hypothesis_ok,conclusion_ok,witness"]
        for report in reports:
            for c in report.cases:
                witness = c.witness.replace('"', "'")
                lines.append(f'{report.name},{c.label},{int(c.hypothesis_ok)},'
                             f'{int(c.conclusion_ok)},"{witness}"')
        _write_lines(cfg.out, lines)
    ok = all(r.ok for r in reports)
    total = sum(len(r.cases) for r in reports)
    print(f"{'OK' if ok else 'FAILED'}: {total} cases across {len(reports)} suites")
    return 0 if ok else 1


def _convergent_schedules(fam) -> list[Schedule]:
    structure = fam.structure
    if structure == "kadets":
        return [schedule_sigma(fam), schedule_tau(fam)]
    if structure == "three-kadets":
        return [schedule_three_point(fam, name) for name in ("p00", "p10", "p11")]
    return [schedule_point(fam, i) for i in range(fam.points) if i <= fam.depth]


def _transform_point(payload) -> tuple[str, tuple[str, ...], tuple[str, ...]]:
    """Worker: rerun one convergent schedule on the transformed family.
    Everything crosses the process boundary as strings of rationals."""
    cfg_fields, matrix_path, index = payload
    cfg = RunConfig(**cfg_fields)
    fam = apply_transform(_load_or_build(cfg), load_matrix(matrix_path))
    sch = _convergent_schedules(fam)[index]
    trace = run_trace(fam, sch, record="blocks")
    final = tuple(str(d) for d in trace.final_deviations)
    return sch.label, tuple(str(x) for x in sch.target), final


def cmd_transform(cfg: RunConfig) -> int:
    if not cfg.matrix:
        raise ConfigError("transform needs --matrix FILE")
    base = _load_or_build(cfg)
    spec = load_matrix(cfg.matrix)
    fam = apply_transform(base, spec)
    if cfg.out:
        dump_family(fam, cfg.out)
        print(f"wrote {cfg.out}: transformed {base.structure} depth {fam.depth}")
    count = len(_convergent_schedules(fam))
    cfg_fields = {f.name: getattr(cfg, f.name) for f in fields(RunConfig)}
    payloads = [(cfg_fields, cfg.matrix, i) for i in range(count)]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_transform_point, payloads))
    else:
        results = [_transform_point(p) for p in payloads]
    shifted = expected_sum_range(fam)
    ok = True
    limits = []
    for (label, target, final), point in zip(results, shifted):
        hit = all(Fraction(d) == 0 for d in final)
        ok = ok and hit
        limits.append(tuple(Fraction(t) for t in target))
        assert tuple(Fraction(t) for t in target) == point
        status = "reached" if hit else "MISSED"
        print(f"{label}: limit {_fmt_point(point)} {status}")
    print(f"distinct limits: {len(set(limits))} of {len(limits)}")
    return 0 if ok else 1


def cmd_demo(cfg: RunConfig) -> int:
    from .acceptance import run_all

    results = run_all()
    for r in results:
        print(r.line())
    ok = all(r.passed for r in results)
    print("OK: all criteria passed" if ok else "FAILED: see lines above")
    return 0 if ok else 1


_HANDLERS = {
    "build": cmd_build,
    "verify": cmd_verify,
    "trace": cmd_trace,
    "lemmas": cmd_lemmas,
    "transform": cmd_transform,
    "demo": cmd_demo,
}


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    add = common.add_argument
    add("--config", metavar="FILE", help="flat key=value config; flags override")
    add("--flavor", metavar="NAME",
        help="kadets, three-kadets, or multipoint (alias: multi)")
    add("--levels", metavar="L", help="construction depth, at least 1")
    add("--r", metavar="R", help="number of limit points for multipoint")
    add("--sizes", metavar="N1,N2,...", help="index set sizes per level")
    add("--schedule", metavar="NAME",
        help="sigma, tau, p00, p10, p11, divergent, point<i>, custom, random")
    add("--target", metavar="V1,V2,...", help="per-cube target, rationals")
    add("--p", metavar="P", help="moment order for traces")
    add("--seed", metavar="N", help="seed for random schedules and suites")
    add("--cases", metavar="N", help="case count for seeded suites")
    add("--out", metavar="FILE", help="output file")
    add("--jobs", metavar="N", help="parallel workers for lemmas and transform")
    add("--family", metavar="FILE", help="load a family file instead of building")
    add("--matrix", metavar="FILE", help="transform matrix file")
    add("--order", metavar="FILE", help="term-id file for schedule custom")
    add("--record", metavar="MODE", help="trace granularity: steps or blocks")
    add("--suite", metavar="NAME",
        help="all, cross-variable, fiber, near-constancy, or drift")

    parser = argparse.ArgumentParser(
        prog="sumrange",
        description="Build, verify, and rearrange series of step functions "
                    "with exact rational arithmetic.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("build", parents=[common], help="build a family file")
    sub.add_parser("verify", parents=[common], help="check every axiom of a family file")
    sub.add_parser("trace", parents=[common], help="run a schedule and export the trace")
    sub.add_parser("lemmas", parents=[common], help="run the lemma property suites")
    sub.add_parser("transform", parents=[common],
                   help="apply an affine transform and recheck all limits")
    sub.add_parser("demo", parents=[common], help="run the full acceptance battery")
    return parser


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = _merge(args)
        return _HANDLERS[args.command](cfg)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, StructuralError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
