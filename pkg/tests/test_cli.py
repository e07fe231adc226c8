"""End-to-end CLI behavior: exit codes, file outputs, determinism.

Commands run in-process through main(argv) so the tests see the same
code paths as the installed console script without subprocess cost.
"""

from pathlib import Path

from sumrange.cli import main
from sumrange.families import TermId, TransformSpec, build_kadets
from sumrange.serialize import dump_family, dump_matrix


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


# --- build ------------------------------------------------------------------


def test_build_deterministic_bytes(tmp_path, capsys):
    a, b = tmp_path / "a.family", tmp_path / "b.family"
    code, out, _ = run(capsys, "build", "--flavor", "kadets", "--levels", "3",
                       "--out", str(a))
    assert code == 0
    assert "26 terms" in out
    assert run(capsys, "build", "--flavor", "kadets", "--levels", "3",
               "--out", str(b))[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_build_multipoint_lists_cubes(tmp_path, capsys):
    out_file = tmp_path / "m.family"
    code, out, _ = run(capsys, "build", "--flavor", "multi", "--levels", "1",
                       "--r", "4", "--out", str(out_file))
    assert code == 0
    assert "cubes Q1, Q2, Q3, Q4, Q5" in out


def test_build_needs_out(capsys):
    code, _, err = run(capsys, "build", "--flavor", "kadets", "--levels", "2")
    assert code == 2
    assert "--out" in err


def test_build_rejects_unknown_flavor(capsys):
    code, _, err = run(capsys, "build", "--flavor", "mystery", "--out", "x")
    assert code == 2
    assert "flavor" in err


# --- verify -----------------------------------------------------------------


def test_verify_clean_family(tmp_path, capsys):
    fam_file = tmp_path / "k.family"
    csv_file = tmp_path / "report.csv"
    run(capsys, "build", "--flavor", "kadets", "--levels", "2",
        "--out", str(fam_file))
    code, out, _ = run(capsys, "verify", "--family", str(fam_file),
                       "--out", str(csv_file))
    assert code == 0
    assert "OK:" in out
    lines = csv_file.read_text().splitlines()
    assert lines[0] == "check,scope,passed,witness"
    assert all(",1," in line or line.endswith(',1,""') or ',1,"' in line
               for line in lines[1:])


def test_verify_tampered_value_fails(tmp_path, capsys):
    fam = build_kadets(2)
    tid = TermId("a", 1, (1,))
    bad = fam.with_replaced({tid: fam.fn(tid).scale(2)})
    path = tmp_path / "bad.family"
    dump_family(bad, path)
    code, out, _ = run(capsys, "verify", "--family", str(path))
    assert code == 1
    assert "FAIL cell-norm [a^1(1) on Q1]" in out


def test_verify_corrupt_file(tmp_path, capsys):
    path = tmp_path / "broken.family"
    good = tmp_path / "good.family"
    run(capsys, "build", "--flavor", "kadets", "--levels", "1",
        "--out", str(good))
    path.write_bytes(good.read_bytes()[:100])
    code, _, err = run(capsys, "verify", "--family", str(path))
    assert code == 3
    assert "broken.family" in err


def test_verify_missing_file_and_flag(tmp_path, capsys):
    assert run(capsys, "verify")[0] == 2
    assert run(capsys, "verify", "--family", str(tmp_path / "nope"))[0] == 3


def test_verify_rejects_transformed(tmp_path, capsys):
    matrix = tmp_path / "t.matrix"
    dump_matrix(TransformSpec.identity(1), matrix)
    fam_file = tmp_path / "t.family"
    code, _, _ = run(capsys, "transform", "--flavor", "kadets", "--levels", "2",
                     "--matrix", str(matrix), "--out", str(fam_file))
    assert code == 0
    code, _, err = run(capsys, "verify", "--family", str(fam_file))
    assert code == 2
    assert "untransformed" in err


# --- trace ------------------------------------------------------------------


def test_trace_summary_and_csv(tmp_path, capsys):
    csv_a, csv_b = tmp_path / "a.csv", tmp_path / "b.csv"
    code, out, _ = run(capsys, "trace", "--flavor", "kadets", "--levels", "3",
                       "--schedule", "sigma", "--out", str(csv_a))
    assert code == 0
    assert "max marker deviation 0" in out
    assert "box count peak" in out
    run(capsys, "trace", "--flavor", "kadets", "--levels", "3",
        "--schedule", "sigma", "--out", str(csv_b))
    assert csv_a.read_bytes() == csv_b.read_bytes()
    lines = csv_a.read_text().splitlines()
    assert lines[1] == ("k,term_id,cube,deviation_num,deviation_den,"
                        "deviation_float,box_count,is_block_marker")
    assert lines[2] == "1,a^1(1),Q1,1,1,1.0,1,0"


def test_trace_blocks_mode_is_sparser(tmp_path, capsys):
    steps, blocks = tmp_path / "s.csv", tmp_path / "b.csv"
    run(capsys, "trace", "--flavor", "kadets", "--levels", "3",
        "--schedule", "sigma", "--out", str(steps))
    run(capsys, "trace", "--flavor", "kadets", "--levels", "3",
        "--schedule", "sigma", "--record", "blocks", "--out", str(blocks))
    assert len(blocks.read_text().splitlines()) < len(steps.read_text().splitlines())


def test_trace_schedule_flavor_mismatch(capsys):
    code, _, err = run(capsys, "trace", "--flavor", "three-kadets",
                       "--levels", "2", "--schedule", "sigma")
    assert code == 2
    assert "structure" in err


def test_trace_unknown_schedule_and_record(capsys):
    assert run(capsys, "trace", "--schedule", "waltz")[0] == 2
    assert run(capsys, "trace", "--record", "sometimes")[0] == 2
    assert run(capsys, "trace", "--p", "0")[0] == 2


def test_trace_custom_order(tmp_path, capsys):
    order = tmp_path / "order.txt"
    fam = build_kadets(2)
    order.write_text("# full truncation, as built\n"
                     + "\n".join(str(t) for t in fam.term_ids()) + "\n")
    code, out, _ = run(capsys, "trace", "--flavor", "kadets", "--levels", "2",
                       "--schedule", "custom", "--order", str(order))
    assert code == 0
    assert "final (0)" in out


def test_trace_custom_order_errors(tmp_path, capsys):
    order = tmp_path / "order.txt"
    order.write_text("a^1(1)\nnot-a-term\n")
    code, _, err = run(capsys, "trace", "--flavor", "kadets", "--levels", "1",
                       "--schedule", "custom", "--order", str(order))
    assert code == 3
    assert "order.txt:2" in err
    fam = build_kadets(1)
    order.write_text("\n".join(str(t) for t in list(fam.term_ids())[1:]) + "\n")
    code, _, err = run(capsys, "trace", "--flavor", "kadets", "--levels", "1",
                       "--schedule", "custom", "--order", str(order))
    assert code == 2
    code, _, _ = run(capsys, "trace", "--flavor", "kadets", "--levels", "1",
                     "--schedule", "custom")
    assert code == 2


def test_trace_random_is_seed_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        code, _, _ = run(capsys, "trace", "--flavor", "kadets", "--levels", "2",
                         "--schedule", "random", "--seed", "11", "--out", str(path))
        assert code == 0
    assert a.read_bytes() == b.read_bytes()
    c = tmp_path / "c.csv"
    run(capsys, "trace", "--flavor", "kadets", "--levels", "2",
        "--schedule", "random", "--seed", "12", "--out", str(c))
    assert c.read_bytes() != a.read_bytes()


# --- config files -----------------------------------------------------------


def test_config_file_sets_defaults(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# three-point run\nflavor = three-kadets\nlevels = 2\n"
                   "schedule = p10\n")
    code, out, _ = run(capsys, "trace", "--config", str(cfg))
    assert code == 0
    assert "schedule p10" in out


def test_flags_override_config(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("flavor = three-kadets\nlevels = 2\nschedule = p10\n")
    code, out, _ = run(capsys, "trace", "--config", str(cfg),
                       "--schedule", "p11")
    assert code == 0
    assert "schedule p11" in out


def test_config_rejects_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("levles = 3\n")
    code, _, err = run(capsys, "trace", "--config", str(cfg))
    assert code == 2
    assert "levles" in err


def test_config_rejects_bad_line_and_missing_file(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("just words\n")
    assert run(capsys, "trace", "--config", str(cfg))[0] == 2
    assert run(capsys, "trace", "--config", str(tmp_path / "absent.cfg"))[0] == 2


# --- lemmas -----------------------------------------------------------------


def test_lemmas_csv_schema(tmp_path, capsys):
    csv_file = tmp_path / "suite.csv"
    code, out, _ = run(capsys, "lemmas", "--suite", "cross-variable",
                       "--cases", "20", "--out", str(csv_file))
    assert code == 0
    assert "OK: 20 cases across 1 suites" in out
    lines = csv_file.read_text().splitlines()
    assert lines[0] == "suite,case,hypothesis_ok,conclusion_ok,witness"
    assert len(lines) == 21
    assert lines[1].startswith("cross-variable,case-0,1,1,")


def test_lemmas_parallel_matches_serial(tmp_path, capsys):
    serial, parallel = tmp_path / "s.csv", tmp_path / "p.csv"
    base = ["lemmas", "--cases", "15", "--seed", "7"]
    assert run(capsys, *base, "--suite", "cross-variable", "--jobs", "1",
               "--out", str(serial))[0] == 0
    assert run(capsys, *base, "--suite", "cross-variable", "--jobs", "3",
               "--out", str(parallel))[0] == 0
    assert serial.read_bytes() == parallel.read_bytes()


def test_lemmas_unknown_suite(capsys):
    code, _, err = run(capsys, "lemmas", "--suite", "zorn")
    assert code == 2
    assert "zorn" in err


# --- transform --------------------------------------------------------------


def test_transform_identity_doubles_limits(tmp_path, capsys):
    matrix = tmp_path / "m.matrix"
    dump_matrix(TransformSpec.identity(2), matrix)
    code, out, _ = run(capsys, "transform", "--flavor", "three-kadets",
                       "--levels", "2", "--matrix", str(matrix))
    assert code == 0
    assert "p11: limit (2, 2, 2) reached" in out
    assert "distinct limits: 3 of 3" in out


def test_transform_rank_deficient_collapses_limits(tmp_path, capsys):
    matrix = tmp_path / "m.matrix"
    dump_matrix(TransformSpec([[-1, 0], [0, 0]]), matrix)
    code, out, _ = run(capsys, "transform", "--flavor", "three-kadets",
                       "--levels", "2", "--matrix", str(matrix), "--jobs", "2")
    assert code == 0
    assert "distinct limits: 2 of 3" in out


def test_transform_writes_loadable_family(tmp_path, capsys):
    matrix = tmp_path / "m.matrix"
    out_file = tmp_path / "t.family"
    dump_matrix(TransformSpec.zero(1), matrix)
    code, out, _ = run(capsys, "transform", "--flavor", "kadets", "--levels", "2",
                       "--matrix", str(matrix), "--out", str(out_file))
    assert code == 0
    assert "sigma: limit (0) reached" in out and "tau: limit (1) reached" in out
    assert out_file.exists()


def test_transform_errors(tmp_path, capsys):
    assert run(capsys, "transform", "--flavor", "kadets", "--levels", "2")[0] == 2
    matrix = tmp_path / "wide.matrix"
    dump_matrix(TransformSpec.identity(1), matrix)
    code, _, err = run(capsys, "transform", "--flavor", "three-kadets",
                       "--levels", "2", "--matrix", str(matrix))
    assert code == 2
    assert "dimension" in err
    bad = tmp_path / "bad.matrix"
    bad.write_text("{}")
    assert run(capsys, "transform", "--flavor", "kadets", "--levels", "2",
               "--matrix", str(bad))[0] == 3


# --- parser plumbing --------------------------------------------------------


def test_help_and_missing_command(capsys):
    assert main(["--help"]) == 0
    capsys.readouterr()
    assert main([]) == 2
    capsys.readouterr()


def test_bad_numeric_flag(capsys):
    code, _, err = run(capsys, "trace", "--levels", "three")
    assert code == 2
    assert "integer" in err
