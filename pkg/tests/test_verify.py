"""Verifier behavior on correct families and deliberately broken ones.

The positive tests pin down exactly which check ids a clean run records.
The fault-injection tests corrupt one structural fact at a time and
assert that precisely the expected checks fail, so every check is known
to be both sound (passes on correct input) and sharp (fails only when
its own invariant is the broken one).
"""

from fractions import Fraction

import pytest

from sumrange.families import (
    StructuralError,
    TermId,
    TransformSpec,
    apply_transform,
    build_kadets,
    build_multipoint,
    build_three_kadets,
)
from sumrange.serialize import family_to_lines, load_family
from sumrange.stepfn import indicator, sum_functions
from sumrange.verify import verify_family, verify_kadets, verify_three_kadets

PAIR_CHECKS = {
    "partition-sums-to-one", "cell-norm", "single-coordinate",
    "zero-one-valued", "disjoint-cells", "product-structure", "pair-norm",
    "two-coordinate", "zero-minus-one-valued", "cube-support",
    "row-cancellation", "rows-sum-to-minus-one", "column-cancellation",
}
BRIDGE_CHECKS = {
    "bridge-partition-sums-to-one", "bridge-sums-to-minus-one",
    "bridge-row-cancellation", "bridge-level-coupling",
    "bridge-row-indicator", "paired-integrals", "bridge-norm",
    "bridge-scaled-values", "bridge-single-coordinate",
}


def check_ids(report):
    return {c.check for c in report.checks}


def failing_checks(report):
    names = {c.check for c in report.failures()}
    names.update(report.suppressed)
    return names


def test_kadets_passes():
    report = verify_kadets(build_kadets(4))
    assert report.ok
    assert check_ids(report) == PAIR_CHECKS | {"cell-count-growth"}


def test_three_kadets_passes():
    report = verify_three_kadets(build_three_kadets(3))
    assert report.ok
    assert check_ids(report) == PAIR_CHECKS | BRIDGE_CHECKS | {"cell-count-growth"}


def test_multipoint_passes():
    report = verify_family(build_multipoint(4, 1))
    assert report.ok
    assert check_ids(report) == PAIR_CHECKS | BRIDGE_CHECKS | {"cell-count-growth"}


def test_custom_sizes_pass():
    assert verify_kadets(build_kadets(3, sizes=[2, 3, 5, 7])).ok
    assert verify_three_kadets(build_three_kadets(2, sizes=[1, 2, 4, 4, 8])).ok


def test_identities_match_direct_sums():
    """Re-derive two aggregate identities by explicit summation."""
    fam = build_three_kadets(2)
    dom = (1, 2, 3)

    # one term plus all its children vanishes on the last two cubes
    g = fam.fn(TermId("g", 1, (1, 1)))
    children = [fam.fn(TermId("h", 1, (1, 1, k)))
                for k in range(1, fam.flat_size(1, 2) + 1)]
    total = sum_functions([g] + children, domain=dom)
    assert total.restrict(2).terms == ()
    assert total.restrict(3).terms == ()

    # a level-2 column couples against the matching level-1 children
    lhs = [fam.fn(TermId("g", 2, (m, 1))) for m in range(1, fam.size(2) + 1)]
    rhs = []
    for idx in fam.index_tuples(2, 1):
        if fam.unflatten(1, 2, idx[-1])[-1] == 1:
            rhs.append(fam.fn(TermId("h", 1, idx)))
    total = sum_functions(lhs + rhs, domain=dom)
    assert total.restrict(2).terms == ()
    assert total.restrict(3).terms == ()


def test_negated_tail_detected():
    fam = build_kadets(3)
    tid = TermId("b", 2, (1, 2))
    report = verify_kadets(fam.with_replaced({tid: fam.fn(tid).scale(-1)}))
    assert not report.ok
    assert failing_checks(report) == {
        "zero-minus-one-valued", "product-structure", "row-cancellation",
        "rows-sum-to-minus-one", "column-cancellation",
    }


def test_unequal_partition_detected():
    # level-2 cells of measure 1/3 and 2/3: still a partition, wrong norms
    fam = build_kadets(3)
    lop = indicator((1,), 1, {2: (0, Fraction(1, 3))})
    rest = indicator((1,), 1, {2: (Fraction(1, 3), 1)})
    report = verify_kadets(fam.with_replaced({
        TermId("a", 2, (1,)): lop,
        TermId("a", 2, (2,)): rest,
    }))
    assert failing_checks(report) == {
        "cell-norm", "product-structure", "row-cancellation",
        "column-cancellation",
    }
    recorded = {(c.check, c.passed) for c in report.checks}
    assert ("partition-sums-to-one", True) in recorded
    assert ("partition-sums-to-one", False) not in recorded


def test_perturbed_mid_part_detected():
    fam = build_three_kadets(2)
    tid = TermId("h", 1, (1, 1, 1))
    bump = indicator((1, 2, 3), 2, {1: (0, Fraction(1, 2))}, Fraction(1, 7))
    report = verify_three_kadets(fam.with_replaced({tid: fam.fn(tid) + bump}))
    assert failing_checks(report) == {
        "bridge-row-cancellation", "bridge-norm", "bridge-scaled-values",
        "paired-integrals", "bridge-sums-to-minus-one",
        "bridge-level-coupling",
    }


def test_swapped_supports_detected():
    # exchange the last-cube cells of two siblings: partitions and norms
    # survive, only the product wiring and its row cancellation break
    fam = build_three_kadets(2)
    dom = (1, 2, 3)
    cell1 = indicator(dom, 3, {1: (0, Fraction(1, 2))})
    cell2 = indicator(dom, 3, {1: (Fraction(1, 2), 1)})
    g11 = fam.fn(TermId("g", 1, (1, 1)))
    g12 = fam.fn(TermId("g", 1, (1, 2)))
    report = verify_three_kadets(fam.with_replaced({
        TermId("g", 1, (1, 1)): g11 - cell1 + cell2,
        TermId("g", 1, (1, 2)): g12 - cell2 + cell1,
    }))
    assert failing_checks(report) == {"product-structure", "row-cancellation"}
    assert all("Q3" in c.scope for c in report.failures())


def test_swapped_columns_detected():
    # swapping two children of one row keeps every row sum intact
    fam = build_three_kadets(2)
    t1, t2 = TermId("h", 1, (1, 1, 1)), TermId("h", 1, (1, 1, 2))
    report = verify_three_kadets(
        fam.with_replaced({t1: fam.fn(t2), t2: fam.fn(t1)}))
    assert failing_checks(report) == {
        "product-structure", "column-cancellation", "bridge-level-coupling",
    }


def test_missing_table_entry_detected(tmp_path):
    lines = list(family_to_lines(build_three_kadets(2)))
    victim = next(i for i, line in enumerate(lines)
                  if '"kind":"h"' in line and line.startswith(","))
    del lines[victim]
    path = tmp_path / "holey.json"
    path.write_text("".join(lines))
    report = verify_family(load_family(path))
    assert failing_checks(report) == {"table-complete"}
    missing = [c for c in report.failures() if c.check == "table-complete"]
    assert len(missing) == 1


def test_loaded_table_verifies(tmp_path):
    path = tmp_path / "fam.json"
    path.write_text("".join(family_to_lines(build_three_kadets(2))))
    report = verify_family(load_family(path))
    assert report.ok
    assert ("table-complete" in check_ids(report))


def test_structure_mismatch_rejected():
    with pytest.raises(StructuralError):
        verify_kadets(build_three_kadets(2))
    with pytest.raises(StructuralError):
        verify_three_kadets(build_kadets(2))
    twisted = apply_transform(build_three_kadets(2), TransformSpec.identity(2))
    with pytest.raises(StructuralError):
        verify_family(twisted)


def test_report_output():
    good = verify_kadets(build_kadets(2))
    lines = good.lines()
    assert lines[-1].startswith("OK: ")
    assert all(line.startswith("PASS") for line in lines[:-1])

    fam = build_kadets(2)
    tid = TermId("b", 1, (1, 1))
    bad = verify_kadets(fam.with_replaced({tid: fam.fn(tid).scale(-1)}))
    assert any(line.startswith("FAIL") for line in bad.lines())
    assert bad.lines()[-1].startswith("FAILED: ")
    csv = bad.csv_lines()
    assert csv[0] == "check,scope,passed,witness"
    assert any(",0," in line for line in csv[1:])
