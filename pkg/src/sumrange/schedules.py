"""Rearrangement schedules and exact partial-sum traces.

A schedule fixes one traversal order for the truncated term set of a
family.  The convergent ones are organized in blocks: an optional ramp
whose partial sum lands exactly on the chosen limit point, then one
block per head term whose members cancel each other exactly, so the
running sum returns to the limit point at every block boundary.  The
divergent schedule instead pairs each head with child rows one level
down, which makes the running sum sweep away from and back toward a
point outside the attainable set.

Traces record, per step or per block boundary, the exact per-cube
moment of (partial sum - target) as a `Fraction`, plus the number of
boxes in the canonical deviation, which measures how complicated the
partial sum is at that moment.
"""

from __future__ import annotations

import random
from fractions import Fraction
from itertools import product
from typing import Iterable, Iterator, NamedTuple, Sequence

from .families import ConfigError, Family, StructuralError, TermId, cube_label, expected_sum_range
from .stepfn import ChunkedSum, Rational, StepFunction, as_fraction, cube_constants, sum_functions


class Block(NamedTuple):
    label: str
    level: int | None
    ids: tuple[TermId, ...]


class Schedule:
    """A labeled traversal of a family's terms, grouped into blocks."""

    def __init__(self, label: str, family: Family, target: tuple[Fraction, ...],
                 block_source, term_count: int):
        self.label = label
        self.family = family
        self.target = target
        self._block_source = block_source
        self._term_count = term_count

    def blocks(self) -> Iterator[Block]:
        return self._block_source()

    def term_ids(self) -> Iterator[TermId]:
        for block in self.blocks():
            yield from block.ids

    @property
    def term_count(self) -> int:
        return self._term_count

    def __repr__(self) -> str:
        return (f"Schedule({self.label!r}, {self.family.flavor}, "
                f"terms={self._term_count})")


def _as_target(fam: Family, values: Sequence[Rational]) -> tuple[Fraction, ...]:
    vals = tuple(as_fraction(v) for v in values)
    if len(vals) != len(fam.domain):
        raise ConfigError(
            f"target needs {len(fam.domain)} per-cube values, got {len(vals)}")
    return vals


# --- the convergent point schedules -----------------------------------------


def schedule_point(fam: Family, point: int) -> Schedule:
    """Blocks that converge to limit point number `point`.

    The ramp collects generation e at levels up to point-e; afterwards
    the block of head m at level n climbs through columns up to
    generation `point` and then sweeps the whole subtree below the
    matching group, so each block sums to zero on every cube.
    """
    r = fam.points
    if not 0 <= point <= r - 1:
        raise ConfigError(f"point must lie in 0..{r - 1}, got {point}")
    if fam.depth < point:
        raise ConfigError(
            f"depth {fam.depth} cannot reach point {point}; need depth >= {point}")
    target = expected_sum_range(fam)[point]
    kinds = fam.kinds

    def blocks() -> Iterator[Block]:
        if point >= 1:
            ramp = []
            for e in range(point):
                for lev in range(1, point - e + 1):
                    ramp.extend(TermId(kinds[e], lev, idx)
                                for idx in fam.index_tuples(e, lev))
            yield Block("ramp", None, tuple(ramp))
        for n in range(point + 1, fam.depth + 1):
            for m in range(1, fam.size(n) + 1):
                yield Block(f"({n},{m})", n, _point_block(fam, point, n, m))

    count = sum(fam.flat_size(e, lev)
                for e in range(point + 1)
                for lev in range(1, fam.depth - e + 1))
    count += sum(fam.flat_size(g, lev)
                 for g in range(point + 1, r)
                 for lev in range(1, fam.depth - point + 1))
    return Schedule(f"point{point}", fam, target, blocks, count)


def _point_block(fam: Family, point: int, n: int, m: int) -> tuple[TermId, ...]:
    kinds = fam.kinds
    out = [TermId(kinds[0], n, (m,))]
    members: list[tuple[int, ...]] = [(m,)]
    for e in range(1, point + 1):
        lev = n - e
        flats = {fam.flat_index(e - 1, lev + 1, idx) for idx in members}
        members = [idx for idx in fam.index_tuples(e, lev) if idx[-1] in flats]
        out.extend(TermId(kinds[e], lev, idx) for idx in members)
    lev = n - point
    for group in members:
        for g in range(point + 1, fam.points):
            tails = fam.index_ranges(g, lev)[point + 1:]
            out.extend(TermId(kinds[g], lev, group + suffix)
                       for suffix in product(*(range(1, s + 1) for s in tails)))
    return tuple(out)


def schedule_sigma(fam: Family) -> Schedule:
    if fam.structure != "kadets":
        raise StructuralError(f"sigma needs the two-kind structure, got {fam.structure!r}")
    sch = schedule_point(fam, 0)
    sch.label = "sigma"
    return sch


def schedule_tau(fam: Family) -> Schedule:
    if fam.structure != "kadets":
        raise StructuralError(f"tau needs the two-kind structure, got {fam.structure!r}")
    sch = schedule_point(fam, 1)
    sch.label = "tau"
    return sch


_THREE_POINTS = {"p00": 0, "p10": 1, "p11": 2}


def schedule_three_point(fam: Family, name: str) -> Schedule:
    if fam.structure != "three-kadets":
        raise StructuralError(
            f"{name!r} needs the three-kind structure, got {fam.structure!r}")
    try:
        point = _THREE_POINTS[name]
    except KeyError:
        raise ConfigError(f"unknown point name {name!r}; "
                          f"expected one of {sorted(_THREE_POINTS)}") from None
    sch = schedule_point(fam, point)
    sch.label = name
    return sch


# --- the divergent schedule -------------------------------------------------


def schedule_divergent(fam: Family) -> Schedule:
    """Heads with their child rows, plus the grandchild columns hanging
    under the previous level's rows.  Partial sums cross the gap between
    the head's own contribution and the lagging corrections, so the
    distance to (0, 1, 1) oscillates forever."""
    if fam.structure != "three-kadets":
        raise StructuralError(
            f"the divergent schedule needs the three-kind structure, got {fam.structure!r}")
    if fam.flavor == "transformed":
        raise StructuralError("the divergent schedule runs on untransformed families")
    target = (Fraction(0), Fraction(1), Fraction(1))
    kinds = fam.kinds

    def blocks() -> Iterator[Block]:
        for n in range(1, fam.depth + 1):
            for m in range(1, fam.size(n) + 1):
                ids = [TermId(kinds[0], n, (m,))]
                ids.extend(TermId(kinds[1], n, (m, j))
                           for j in range(1, fam.size(n + 1) + 1))
                if n >= 2:
                    for j in range(1, fam.size(n + 1) + 1):
                        kappa = fam.flat_index(1, n, (m, j))
                        ids.extend(TermId(kinds[2], n - 1, (mp, jp, kappa))
                                   for mp in range(1, fam.size(n - 1) + 1)
                                   for jp in range(1, fam.size(n) + 1))
                yield Block(f"({n},{m})", n, tuple(ids))

    count = sum(fam.flat_size(0, lev) + fam.flat_size(1, lev)
                for lev in range(1, fam.depth + 1))
    count += sum(fam.flat_size(2, lev) for lev in range(1, fam.depth))
    return Schedule("divergent", fam, target, blocks, count)


# --- explicit and randomized orders -----------------------------------------


def _validated_full_order(fam: Family, order: Iterable[TermId]) -> tuple[TermId, ...]:
    given = tuple(order)
    seen = set()
    for tid in given:
        if tid in seen:
            raise ConfigError(f"duplicate term {tid} in custom order")
        seen.add(tid)
    wanted = set(fam.term_ids())
    unknown = seen - wanted
    if unknown:
        raise ConfigError(f"term {sorted(unknown)[0]} does not belong to this family")
    missing = wanted - seen
    if missing:
        raise ConfigError(f"custom order misses {len(missing)} terms, "
                          f"first {sorted(missing)[0]}")
    return given


def schedule_custom(fam: Family, order: Iterable[TermId],
                    label: str = "custom") -> Schedule:
    """An explicit order over the full truncation.  The full term set
    sums to zero, so the natural target is the origin."""
    given = _validated_full_order(fam, order)
    target = tuple(Fraction(0) for _ in fam.domain)

    def blocks() -> Iterator[Block]:
        yield Block(label, None, given)

    return Schedule(label, fam, target, blocks, len(given))


def random_schedule(fam: Family, seed: int) -> Schedule:
    """A seeded shuffle of the full truncation."""
    ids = list(fam.term_ids())
    random.Random(seed).shuffle(ids)
    return schedule_custom(fam, ids, label=f"shuffled-{seed}")


# --- traces -----------------------------------------------------------------


class TraceRow(NamedTuple):
    step: int
    term: TermId
    block: str
    level: int | None
    is_marker: bool
    deviations: tuple[Fraction, ...]
    box_counts: tuple[int, ...]


class Trace:
    """Per-cube deviation history of one schedule run."""

    def __init__(self, schedule: Schedule, target: tuple[Fraction, ...], p: int,
                 record: str, rows: list[TraceRow]):
        self.schedule = schedule
        self.family = schedule.family
        self.target = target
        self.p = p
        self.record = record
        self.rows = rows

    def markers(self) -> list[TraceRow]:
        return [row for row in self.rows if row.is_marker]

    def marker(self, block: str) -> TraceRow:
        for row in self.rows:
            if row.is_marker and row.block == block:
                return row
        raise KeyError(f"no marker for block {block!r}")

    @property
    def final_deviations(self) -> tuple[Fraction, ...]:
        return self.rows[-1].deviations

    def max_marker_deviation(self) -> Fraction:
        worst = Fraction(0)
        for row in self.markers():
            worst = max(worst, *row.deviations)
        return worst

    def max_box_count(self) -> int:
        return max(max(row.box_counts) for row in self.rows)

    def to_csv_lines(self) -> list[str]:
        out = [
            "# deviation_float is advisory; deviation_num/deviation_den are exact",
            "k,term_id,cube,deviation_num,deviation_den,deviation_float,box_count,is_block_marker",
        ]
        cubes = self.family.domain
        for row in self.rows:
            for ci, c in enumerate(cubes):
                d = row.deviations[ci]
                out.append(f"{row.step},{row.term},{cube_label(c)},"
                           f"{d.numerator},{d.denominator},{float(d)!r},"
                           f"{row.box_counts[ci]},{int(row.is_marker)}")
        return out


def run_trace(fam: Family, schedule: Schedule,
              target: Sequence[Rational] | None = None,
              p: int = 1, record: str = "steps") -> Trace:
    """Accumulate the schedule exactly, measuring moment-`p` deviations.

    With record="steps" every term gets a row; with record="blocks" the
    partial sum is only canonicalized and measured at block boundaries,
    which keeps very large schedules affordable.
    """
    if schedule.family is not fam:
        raise ConfigError("schedule was built for a different family")
    if record not in ("steps", "blocks"):
        raise ConfigError(f"record must be 'steps' or 'blocks', got {record!r}")
    if not isinstance(p, int) or p < 1:
        raise ConfigError(f"moment order must be a positive integer, got {p!r}")
    goal = schedule.target if target is None else _as_target(fam, target)
    cubes = fam.domain
    diffs = {c: cube_constants((c,), {c: -goal[ci]}) for ci, c in enumerate(cubes)}
    rows: list[TraceRow] = []
    step = 0

    def measure(tid: TermId, block: Block, marker: bool) -> None:
        devs = tuple(diffs[c].moment(p) for c in cubes)
        boxes = tuple(len(diffs[c].terms) for c in cubes)
        rows.append(TraceRow(step, tid, block.label, block.level, marker, devs, boxes))

    for block in schedule.blocks():
        if record == "steps":
            last = len(block.ids) - 1
            for pos, tid in enumerate(block.ids):
                step += 1
                fn = fam.fn(tid)
                for c in {box.cube for box, _ in fn.terms}:
                    diffs[c] = diffs[c] + fn.restrict(c)
                measure(tid, block, pos == last)
        else:
            sums = {c: ChunkedSum((c,)) for c in cubes}
            for tid in block.ids:
                step += 1
                fn = fam.fn(tid)
                for c in {box.cube for box, _ in fn.terms}:
                    sums[c].add(fn.restrict(c))
            for c in cubes:
                sums[c].add(diffs[c])
                diffs[c] = sums[c].total()
            measure(tid, block, True)
    if not rows:
        raise ConfigError("schedule has no terms")
    return Trace(schedule, goal, p, record, rows)
