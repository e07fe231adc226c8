"""Exact verification of every structural identity a family promises.

Checks are grouped by role.  For each pair of consecutive generations
(e, e+1) there is a "product pair" living on one cube (cube 1 for e = 0,
cube 2e+1 otherwise): heads partition the cube into 0/1 cells of equal
measure, tails are negated products of consecutive-level heads, rows of
tails cancel their head, columns cancel the next-level head, and the full
level sums to the constant -1.  For each middle generation e there is a
"bridge" onto cubes 2e and 2e+1: level sums are the constants 1 and -1,
each term plus its children vanishes there, columns at one level couple
against rows one level up, row sums are 0/1 valued, integrals agree on
the paired cubes, and per-cube norms are the advertised reciprocals.

Every comparison is exact rational equality.  Failures carry a short
witness built from the offending difference; nothing is ever compared
with a tolerance.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, NamedTuple

from .families import Family, StructuralError, TermId, cube_label
from .stepfn import ChunkedSum, StepFunction, cube_constants, sum_functions

_FAIL_CAP = 25

F0 = Fraction(0)
F1 = Fraction(1)


class AxiomCheck(NamedTuple):
    check: str
    scope: str
    passed: bool
    witness: str | None


class AxiomReport:
    """All recorded checks, with failure listing capped per check id."""

    def __init__(self, checks: list[AxiomCheck], suppressed: dict[str, int]):
        self.checks = checks
        self.suppressed = suppressed

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks) and not self.suppressed

    def failures(self) -> list[AxiomCheck]:
        return [c for c in self.checks if not c.passed]

    def counts(self) -> tuple[int, int]:
        failed = len(self.failures()) + sum(self.suppressed.values())
        return len(self.checks) + sum(self.suppressed.values()), failed

    def lines(self) -> list[str]:
        out = []
        for c in self.checks:
            mark = "PASS" if c.passed else "FAIL"
            line = f"{mark} {c.check} [{c.scope}]"
            if c.witness:
                line += f": {c.witness}"
            out.append(line)
        for check, extra in sorted(self.suppressed.items()):
            out.append(f"FAIL {check}: {extra} further failures not listed")
        total, failed = self.counts()
        out.append(f"{'OK' if failed == 0 else 'FAILED'}: "
                   f"{total - failed}/{total} checks passed")
        return out

    def csv_lines(self) -> list[str]:
        out = ["check,scope,passed,witness"]
        for c in self.checks:
            witness = (c.witness or "").replace('"', "'")
            out.append(f'{c.check},"{c.scope}",{int(c.passed)},"{witness}"')
        return out


class _Recorder:
    def __init__(self):
        self._checks: list[AxiomCheck] = []
        self._fail_counts: dict[str, int] = {}
        self._suppressed: dict[str, int] = {}

    def record(self, check: str, scope: str, passed: bool, witness: str | None = None):
        if not passed:
            seen = self._fail_counts.get(check, 0)
            self._fail_counts[check] = seen + 1
            if seen >= _FAIL_CAP:
                self._suppressed[check] = self._suppressed.get(check, 0) + 1
                return
        self._checks.append(AxiomCheck(check, scope, passed, witness))

    def report(self) -> AxiomReport:
        return AxiomReport(self._checks, dict(self._suppressed))


def _describe_diff(diff: StepFunction) -> str:
    bits = []
    for c in diff.domain:
        m = diff.moment(1, cube=c)
        if m != 0:
            bits.append(f"off by moment {m} on {cube_label(c)}")
    if not bits:
        return "no difference"
    return "; ".join(bits[:3])


def _constant_on(cube: int, value: Fraction) -> StepFunction:
    return cube_constants((cube,), {cube: value})


# --- the verifier -----------------------------------------------------------


def verify_family(fam: Family) -> AxiomReport:
    """Run every applicable check on every level of the truncation."""
    if fam.flavor == "transformed":
        raise StructuralError(
            "verification applies to untransformed families; verify the base instead")
    rec = _Recorder()
    _check_growth(fam, rec)
    if fam.is_table_backed and not _check_table_complete(fam, rec):
        # missing terms would make every later lookup fail; stop here
        return rec.report()
    for n in range(1, fam.depth + 1):
        _verify_level(fam, n, rec)
    return rec.report()


def verify_kadets(fam: Family) -> AxiomReport:
    if fam.structure != "kadets":
        raise StructuralError(f"expected the two-kind structure, got {fam.structure!r}")
    return verify_family(fam)


def verify_three_kadets(fam: Family) -> AxiomReport:
    if fam.structure != "three-kadets":
        raise StructuralError(f"expected the three-kind structure, got {fam.structure!r}")
    return verify_family(fam)


def _check_growth(fam: Family, rec: _Recorder) -> None:
    last = fam.depth + 1
    vals = [fam.size(n) for n in range(1, last + 1)]
    ok = (all(v >= 1 for v in vals)
          and all(b >= a for a, b in zip(vals, vals[1:]))
          and (len(vals) < 2 or vals[-1] > vals[0]))
    rec.record("cell-count-growth", f"levels 1..{last}", ok,
               None if ok else f"sizes {vals} do not grow")


def _check_table_complete(fam: Family, rec: _Recorder) -> bool:
    wanted = set(fam.term_ids())
    have = set(fam.table_ids())
    missing = wanted - have
    extra = have - wanted
    for tid in sorted(missing)[:_FAIL_CAP]:
        rec.record("table-complete", str(tid), False, "term missing from table")
    if len(missing) > _FAIL_CAP:
        rec.record("table-complete", "remainder", False,
                   f"{len(missing) - _FAIL_CAP} more terms missing")
    for tid in sorted(extra)[:_FAIL_CAP]:
        rec.record("table-complete", str(tid), False, "unexpected term in table")
    if not missing and not extra:
        rec.record("table-complete", f"{len(wanted)} terms", True)
    return not missing


def _term_fn(fam: Family, g: int, n: int, index: tuple[int, ...]) -> StepFunction:
    if n <= fam.depth:
        return fam.fn(TermId(fam.kinds[g], n, index))
    return fam.reference_fn(g, n, index)


def _idx(index: tuple[int, ...]) -> str:
    return "(" + ",".join(str(i) for i in index) + ")"


def _allowed_cubes(fam: Family, g: int) -> frozenset[int]:
    if g == 0:
        return frozenset({1})
    cubes = {2 * g - 1}
    if g >= 2:
        cubes.add(2 * g - 2)
    if g <= fam.points - 2:
        cubes.update({2 * g, 2 * g + 1})
    return frozenset(cubes)


def _verify_level(fam: Family, n: int, rec: _Recorder) -> None:
    r = fam.points
    for e in range(r - 1):
        _verify_pair(fam, e, n, rec)


def _pair_cube(e: int) -> int:
    return 1 if e == 0 else 2 * e + 1


def _verify_pair(fam: Family, e: int, n: int, rec: _Recorder) -> None:
    """Pair (e, e+1) at level n, fused with the bridge checks that share
    its row and column iteration."""
    r = fam.points
    c = _pair_cube(e)
    qc = cube_label(c)
    g = e + 1
    head_kind, tail_kind = fam.kinds[e], fam.kinds[g]
    pair_name = f"({head_kind},{tail_kind})"
    s_here = fam.flat_size(e, n)
    s_next = fam.flat_size(e, n + 1)
    head_norm = Fraction(1, s_here)
    tail_norm = Fraction(1, fam.flat_size(g, n))
    mid = 2 * e if e >= 1 else None
    tail_mid = 2 * g if g <= r - 2 else None

    # heads: partition checks on the pair cube
    heads: dict[int, StepFunction] = {}
    head_ok = {"norm": True, "coord": True, "values": True, "support": True}
    support_total = F0
    head_acc = ChunkedSum((c,))
    for idx in fam.index_tuples(e, n):
        flat = fam.flat_index(e, n, idx)
        full = _term_fn(fam, e, n, idx)
        h = full.restrict(c)
        heads[flat] = h
        head_acc.add(h)
        if full.moment(1, cube=c) != head_norm:
            head_ok["norm"] = False
            rec.record("cell-norm", f"{head_kind}^{n}{_idx(idx)} on {qc}", False,
                       f"moment {full.moment(1, cube=c)} != {head_norm}")
        if not h.footprint() <= {(c, n)}:
            head_ok["coord"] = False
            rec.record("single-coordinate", f"{head_kind}^{n}{_idx(idx)} on {qc}", False,
                       f"depends on {sorted(h.footprint())}")
        if not h.term_values() <= {F1}:
            head_ok["values"] = False
            rec.record("zero-one-valued", f"{head_kind}^{n}{_idx(idx)} on {qc}", False,
                       f"values {sorted(h.term_values())}")
        support_total += h.support_measure(c)
        if e == 0 and not full.footprint() <= {(1, n)}:
            rec.record("cube-support", f"{head_kind}^{n}{_idx(idx)}", False,
                       f"leaks outside cube 1: {sorted(full.footprint())}")
    scope = f"level {n}, pair {pair_name} on {qc}"
    for key, check in (("norm", "cell-norm"), ("coord", "single-coordinate"),
                       ("values", "zero-one-valued")):
        if head_ok[key]:
            rec.record(check, scope, True)
    total = head_acc.total()
    ok = total == _constant_on(c, F1)
    rec.record("partition-sums-to-one", scope, ok,
               None if ok else _describe_diff(total - _constant_on(c, F1)))
    ok = support_total == 1
    rec.record("disjoint-cells", scope, ok,
               None if ok else f"cell measures sum to {support_total}")

    # next-level heads for products and columns
    _next_cache: dict[int, StepFunction] = {}

    def head_next(flat: int) -> StepFunction:
        got = _next_cache.get(flat)
        if got is None:
            got = _term_fn(fam, e, n + 1, fam.unflatten(e, n + 1, flat)).restrict(c)
            _next_cache[flat] = got
        return got

    allowed = _allowed_cubes(fam, g)
    mid_value = (Fraction(-1, fam.flat_size(g - 1, n + 1) * fam.flat_size(g - 2, n + 1))
                 if g >= 2 else None)
    ext_value = Fraction(1, s_next) if tail_mid is not None else None

    tail_ok = {k: True for k in ("product", "norm", "coords", "values", "support",
                                 "paired", "bnorm", "bvalues", "bcoord")}
    tail_support = F0
    level_acc = ChunkedSum((c,))
    mid15_acc = ChunkedSum((mid,)) if mid is not None else None
    mid14_acc = ChunkedSum((tail_mid,)) if tail_mid is not None else None
    row_ok = {"rows": True, "mid": True, "indicator": True}

    row_parent: tuple[int, ...] | None = None
    row_flat = 0
    row_fns: list[StepFunction] = []
    row_mid_fns: list[StepFunction] = []
    row_ext_fns: list[StepFunction] = []

    def close_row() -> None:
        if row_parent is None:
            return
        row_sum = sum_functions(row_fns, domain=(c,))
        want = heads[row_flat].scale(-1)
        if row_sum != want:
            row_ok["rows"] = False
            rec.record("row-cancellation", f"row {tail_kind}^{n}{_idx(row_parent)}+* on {qc}",
                       False, _describe_diff(row_sum - want))
        if mid is not None:
            mid_sum = sum_functions(row_mid_fns, domain=(mid,))
            parent_mid = _term_fn(fam, e, n, row_parent).restrict(mid)
            combo = mid_sum + parent_mid
            if combo.terms:
                row_ok["mid"] = False
                rec.record("bridge-row-cancellation",
                           f"row {tail_kind}^{n}{_idx(row_parent)}+* on {cube_label(mid)}",
                           False, _describe_diff(combo))
        if tail_mid is not None:
            ext_sum = sum_functions(row_ext_fns, domain=(tail_mid,))
            if not ext_sum.value_set() <= {F0, F1}:
                row_ok["indicator"] = False
                rec.record("bridge-row-indicator",
                           f"row {tail_kind}^{n}{_idx(row_parent)}+* on {cube_label(tail_mid)}",
                           False, f"values {sorted(ext_sum.value_set())}")

    for idx2 in fam.index_tuples(g, n):
        parent, last = idx2[:-1], idx2[-1]
        if parent != row_parent:
            close_row()
            row_parent = parent
            row_flat = fam.flat_index(e, n, parent)
            row_fns = []
            row_mid_fns = []
            row_ext_fns = []
        full = _term_fn(fam, g, n, idx2)
        t = full.restrict(c)
        row_fns.append(t)
        level_acc.add(t)
        name = f"{tail_kind}^{n}{_idx(idx2)}"

        bad = [cb for cb in full.domain
               if cb not in allowed and full.support_measure(cb) != 0]
        if bad:
            tail_ok["support"] = False
            rec.record("cube-support", name, False,
                       f"support on {[cube_label(b) for b in bad]}")
        prod = heads[row_flat].multiply(head_next(last)).scale(-1)
        if t != prod:
            tail_ok["product"] = False
            rec.record("product-structure", f"{name} on {qc}", False,
                       _describe_diff(t - prod))
        if full.moment(1, cube=c) != tail_norm:
            tail_ok["norm"] = False
            rec.record("pair-norm", f"{name} on {qc}", False,
                       f"moment {full.moment(1, cube=c)} != {tail_norm}")
        if not t.footprint() <= {(c, n), (c, n + 1)}:
            tail_ok["coords"] = False
            rec.record("two-coordinate", f"{name} on {qc}", False,
                       f"depends on {sorted(t.footprint())}")
        if not t.term_values() <= {-F1}:
            tail_ok["values"] = False
            rec.record("zero-minus-one-valued", f"{name} on {qc}", False,
                       f"values {sorted(t.term_values())}")
        tail_support += t.support_measure(c)

        if mid is not None:
            tm = full.restrict(mid)
            row_mid_fns.append(tm)
            mid15_acc.add(tm)
            if full.integral(mid) != full.integral(c):
                tail_ok["paired"] = False
                rec.record("paired-integrals", name, False,
                           f"{full.integral(mid)} on {cube_label(mid)} vs "
                           f"{full.integral(c)} on {qc}")
            if full.moment(1, cube=mid) != tail_norm:
                tail_ok["bnorm"] = False
                rec.record("bridge-norm", f"{name} on {cube_label(mid)}", False,
                           f"moment {full.moment(1, cube=mid)} != {tail_norm}")
            if not tm.term_values() <= {mid_value}:
                tail_ok["bvalues"] = False
                rec.record("bridge-scaled-values", f"{name} on {cube_label(mid)}", False,
                           f"values {sorted(tm.term_values())} != {{{mid_value}}}")
            if not tm.footprint() <= {(mid, n)}:
                tail_ok["bcoord"] = False
                rec.record("bridge-single-coordinate", f"{name} on {cube_label(mid)}",
                           False, f"depends on {sorted(tm.footprint())}")
        if tail_mid is not None:
            te = full.restrict(tail_mid)
            row_ext_fns.append(te)
            mid14_acc.add(te)
            if full.integral(tail_mid) != full.integral(2 * g + 1):
                tail_ok["paired"] = False
                rec.record("paired-integrals", name, False,
                           f"{full.integral(tail_mid)} on {cube_label(tail_mid)} vs "
                           f"{full.integral(2 * g + 1)} on {cube_label(2 * g + 1)}")
            if full.moment(1, cube=tail_mid) != Fraction(1, fam.flat_size(g, n)):
                tail_ok["bnorm"] = False
                rec.record("bridge-norm", f"{name} on {cube_label(tail_mid)}", False,
                           f"moment {full.moment(1, cube=tail_mid)}")
            if not te.term_values() <= {ext_value}:
                tail_ok["bvalues"] = False
                rec.record("bridge-scaled-values", f"{name} on {cube_label(tail_mid)}",
                           False, f"values {sorted(te.term_values())} != {{{ext_value}}}")
            if not te.footprint() <= {(tail_mid, n)}:
                tail_ok["bcoord"] = False
                rec.record("bridge-single-coordinate",
                           f"{name} on {cube_label(tail_mid)}", False,
                           f"depends on {sorted(te.footprint())}")
    close_row()

    summary = [("product", "product-structure"), ("norm", "pair-norm"),
               ("coords", "two-coordinate"), ("values", "zero-minus-one-valued"),
               ("support", "cube-support"), ("rows", "row-cancellation")]
    if mid is not None or tail_mid is not None:
        summary += [("paired", "paired-integrals"), ("bnorm", "bridge-norm"),
                    ("bvalues", "bridge-scaled-values"),
                    ("bcoord", "bridge-single-coordinate")]
    if mid is not None:
        summary.append(("mid", "bridge-row-cancellation"))
    if tail_mid is not None:
        summary.append(("indicator", "bridge-row-indicator"))
    merged = {**tail_ok, **row_ok}
    for key, check in summary:
        if merged[key]:
            rec.record(check, scope, True)

    level_total = level_acc.total()
    ok = level_total == _constant_on(c, -F1)
    rec.record("rows-sum-to-minus-one", scope, ok,
               None if ok else _describe_diff(level_total - _constant_on(c, -F1)))
    ok = tail_support == 1
    rec.record("disjoint-cells", scope + " tails", ok,
               None if ok else f"tail supports sum to {tail_support}")
    if mid is not None:
        mtotal = mid15_acc.total()
        ok = mtotal == _constant_on(mid, -F1)
        rec.record("bridge-sums-to-minus-one",
                   f"level {n}, {tail_kind} on {cube_label(mid)}", ok,
                   None if ok else _describe_diff(mtotal - _constant_on(mid, -F1)))
    if tail_mid is not None:
        etotal = mid14_acc.total()
        ok = etotal == _constant_on(tail_mid, F1)
        rec.record("bridge-partition-sums-to-one",
                   f"level {n}, {tail_kind} on {cube_label(tail_mid)}", ok,
                   None if ok else _describe_diff(etotal - _constant_on(tail_mid, F1)))

    _verify_columns(fam, e, n, rec, heads_next=head_next)


def _verify_columns(fam: Family, e: int, n: int, rec: _Recorder,
                    heads_next: Callable[[int], StepFunction]) -> None:
    """Column sums of the (e, e+1) tails, plus the cross-level coupling
    of the bridge when e >= 1."""
    r = fam.points
    c = _pair_cube(e)
    g = e + 1
    tail_kind = fam.kinds[g]
    mid = 2 * e if e >= 1 else None
    scope = f"level {n}, pair ({fam.kinds[e]},{tail_kind}) on {cube_label(c)}"
    cols_ok = True
    coupling: dict[int, tuple[ChunkedSum, ChunkedSum]] = {}
    parents = list(fam.index_tuples(e, n))
    for last in range(1, fam.flat_size(e, n + 1) + 1):
        col_fns = []
        col_mid = [] if mid is not None else None
        for parent in parents:
            full = _term_fn(fam, g, n, parent + (last,))
            col_fns.append(full.restrict(c))
            if mid is not None:
                col_mid.append(full.restrict(mid))
        col_sum = sum_functions(col_fns, domain=(c,))
        want = heads_next(last).scale(-1)
        if col_sum != want:
            cols_ok = False
            rec.record("column-cancellation",
                       f"column {tail_kind}^{n}(*,{last}) on {cube_label(c)}", False,
                       _describe_diff(col_sum - want))
        if mid is not None:
            jprime = fam.unflatten(e, n + 1, last)[-1]
            accs = coupling.get(jprime)
            if accs is None:
                accs = (ChunkedSum((mid,)), ChunkedSum((c,)))
                coupling[jprime] = accs
            accs[0].add(sum_functions(col_mid, domain=(mid,)))
            accs[1].add(col_sum)
    if cols_ok:
        rec.record("column-cancellation", scope, True)
    if mid is None:
        return

    lhs_mid: dict[int, ChunkedSum] = {}
    lhs_pair: dict[int, ChunkedSum] = {}
    for idx in fam.index_tuples(e, n + 1):
        jprime = idx[-1]
        if jprime not in lhs_mid:
            lhs_mid[jprime] = ChunkedSum((mid,))
            lhs_pair[jprime] = ChunkedSum((c,))
        full = _term_fn(fam, e, n + 1, idx)
        lhs_mid[jprime].add(full.restrict(mid))
        lhs_pair[jprime].add(full.restrict(c))
    coupling_ok = True
    for jprime in sorted(coupling):
        for cube, lhs_acc, rhs_acc in ((mid, lhs_mid[jprime], coupling[jprime][0]),
                                       (c, lhs_pair[jprime], coupling[jprime][1])):
            lhs = lhs_acc.total()
            rhs = rhs_acc.total()
            diff = lhs + rhs
            if diff.terms:
                coupling_ok = False
                rec.record("bridge-level-coupling",
                           f"column {jprime} of level {n + 1} {fam.kinds[e]} "
                           f"vs level {n} {tail_kind} on {cube_label(cube)}",
                           False, _describe_diff(diff))
    if coupling_ok:
        rec.record("bridge-level-coupling",
                   f"levels {n + 1}/{n}, {fam.kinds[e]}/{tail_kind} "
                   f"on {cube_label(mid)} and {cube_label(c)}", True)
