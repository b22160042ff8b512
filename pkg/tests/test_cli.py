import json
import os
import shutil
import subprocess
import sys

import pytest

from conftest import golden_path, quality_inputs
from morphdiv.cli import main, read_tsv
from morphdiv.synthcorpus import convergence_sweep_spec, zipf_spec


def run(*argv):
    return main([str(a) for a in argv])


def hash_line(path):
    with open(path, encoding="utf-8") as f:
        first = f.readline()
    assert first.startswith("# config_hash=") and len(first.strip()) == len("# config_hash=") + 64
    return first


def body(path):
    with open(path, encoding="utf-8") as f:
        return f.read().split("\n", 1)[1]


@pytest.fixture
def corpus(golden):
    return ["--src", golden[0], "--tgt", golden[1], "--align", golden[2]]


def test_extract_golden_byte_exact(tmp_path, corpus):
    assert run("extract", *corpus, "--out", tmp_path) == 0
    for t in ("word", "arc"):
        out = tmp_path / f"occurrences.{t}.tsv"
        hash_line(out)
        with open(golden_path(f"expected_occurrences.{t}.tsv"), encoding="utf-8") as f:
            assert body(out) == f.read()
        hash_line(tmp_path / f"counts.{t}.tsv")


def test_stats_golden_reports(tmp_path, corpus):
    assert run("stats", *corpus, "--out", tmp_path, "--min-pattern-freq", 1) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["patterns"]["word"]["convergence_rate"] == 40 / 58
    assert summary["patterns"]["arc"]["occurrences"] == 47
    assert summary["alignment"]["categories"]["o2o"] == pytest.approx(100 * 58 / 68)
    for name in ("patterns.word.tsv", "patterns.arc.tsv", "categories.tsv", "counts.word.tsv"):
        hash_line(tmp_path / name)
    header, rows = read_tsv(tmp_path / "patterns.word.tsv")
    assert len(rows) == 30
    assert {p.name for p in tmp_path.glob("*.svg")} >= {"patterns.word.quadrant.svg", "categories.categories.svg"}


def test_stats_entropy_base_changes_hash(tmp_path, corpus):
    run("stats", *corpus, "--out", tmp_path / "a", "--figures", "false")
    run("stats", *corpus, "--out", tmp_path / "b", "--figures", "false", "--entropy-base", "2.718281828459045")
    assert hash_line(tmp_path / "a/patterns.word.tsv") != hash_line(tmp_path / "b/patterns.word.tsv")


def test_worker_count_does_not_change_reports(tmp_path):
    spec = zipf_spec(30, n_sentences=1200, seed=3)
    run("synth", "--out", tmp_path, "--n-sentences", 1200, "--n-patterns", 30, "--seed", 3)
    src = ["--src", tmp_path / "synth.src.conllu", "--tgt", tmp_path / "synth.tgt.conllu",
           "--align", tmp_path / "synth.align"]
    run("stats", *src, "--out", tmp_path / "w1", "--figures", "false")
    run("stats", *src, "--out", tmp_path / "w2", "--figures", "false", "--workers", 2, "--chunk-size", 250)
    for name in ("summary.json", "patterns.word.tsv", "patterns.arc.tsv", "categories.tsv"):
        assert (tmp_path / "w1" / name).read_bytes() == (tmp_path / "w2" / name).read_bytes()


def test_config_file_and_override(tmp_path, corpus, golden):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"# comment\nsrc = {golden[0]}\ntgt={golden[1]}\nalign={golden[2]}\n"
                   "patterns=word\nmin-pattern-freq=3\nfigures=false\n")
    assert run("stats", "--config", cfg, "--out", tmp_path / "a") == 0
    assert not (tmp_path / "a/patterns.arc.tsv").exists()
    assert run("stats", "--config", cfg, "--out", tmp_path / "b", "--patterns", "arc") == 0
    assert (tmp_path / "b/patterns.arc.tsv").exists()
    bad = tmp_path / "bad.cfg"
    bad.write_text("no_such_option=1\n")
    with pytest.raises(SystemExit) as e:
        run("stats", "--config", bad)
    assert e.value.code == 1


@pytest.mark.parametrize("argv", [
    ["stats"],
    ["stats", "--src", "/nonexistent", "--tgt", "/x", "--align", "/y"],
    ["compare", "--dist-a", golden_path("expected_occurrences.word.tsv")],
    ["quality", "--src", golden_path("src.conllu"), "--tgt", golden_path("tgt.conllu"),
     "--align", golden_path("align.txt"), "--keep-fraction", "0.5"],
])
def test_usage_errors_exit_1(tmp_path, argv, capsys):
    assert run(*argv, "--out", tmp_path) == 1
    assert "morphdiv: error:" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [["frobnicate"], ["stats", "--workers", "0"], ["stats", "--bogus"]])
def test_argparse_errors_exit_1(argv):
    with pytest.raises(SystemExit) as e:
        run(*argv)
    assert e.value.code == 1


def test_entropy_base_one_rejected(tmp_path, corpus):
    assert run("stats", *corpus, "--entropy-base", 1, "--out", tmp_path) == 1


def test_mismatched_alignment_reports_line(tmp_path, golden, capsys):
    short = tmp_path / "align.txt"
    lines = open(golden[2], encoding="utf-8").read().splitlines()
    short.write_text("\n".join(lines[:-1]) + "\n")
    assert run("extract", "--src", golden[0], "--tgt", golden[1], "--align", short, "--out", tmp_path) == 2
    assert "alignment line 20" in capsys.readouterr().err
    bad = tmp_path / "bad.txt"
    bad.write_text("\n".join(lines[:4] + ["0-99"] + lines[5:]) + "\n")
    assert run("extract", "--src", golden[0], "--tgt", golden[1], "--align", bad, "--out", tmp_path) == 2
    assert "alignment line 5" in capsys.readouterr().err


def test_validate_planted_cycle(tmp_path, capsys):
    good = "# sent_id = a\n1\tI\t_\tPRON\t_\t_\t2\tnsubj\t_\t_\n2\tsee\t_\tVERB\t_\t_\t0\troot\t_\t_\n\n"
    # 2 -> 3 -> 2 while token 1 is the root
    cyc = ("# sent_id = b\n1\tsaid\t_\tVERB\t_\t_\t0\troot\t_\t_\n2\tsee\t_\tVERB\t_\t_\t3\tccomp\t_\t_\n"
           "3\tit\t_\tPRON\t_\t_\t2\tobj\t_\t_\n\n")
    path = tmp_path / "c.conllu"
    path.write_text(good + cyc + good)
    assert run("validate", "--src", path, "--out", tmp_path) == 2
    out = capsys.readouterr().out
    assert out.strip().endswith("1 violation(s)")
    header, rows = read_tsv(tmp_path / "validation.tsv")
    assert len(rows) == 1 and "cycle" in rows[0][0]
    assert run("validate", "--src", golden_path("src.conllu"), "--tgt", golden_path("tgt.conllu"),
               "--align", golden_path("align.txt"), "--out", tmp_path) == 0
    assert "0 violation(s)" in capsys.readouterr().out


def test_compare_self_and_counts_mode(tmp_path, corpus, golden):
    assert run("compare", *corpus, "--tgt-b", golden[1], "--align-b", golden[2],
               "--min-pattern-freq", 1, "--out", tmp_path) == 0
    summary = json.loads((tmp_path / "compare.json").read_text())
    for t in ("word", "arc"):
        block = summary["patterns"][t]
        assert block["mean_wd"] == 0 and block["mean_convergence_abs_diff"] == 0
        header, rows = read_tsv(tmp_path / f"compare.{t}.tsv")
        assert all(float(r[header.index("wd")]) == 0 for r in rows)
        hash_line(tmp_path / f"wd_bins.{t}.tsv")
    run("extract", *corpus, "--out", tmp_path / "x")
    counts = tmp_path / "x/counts.word.tsv"
    assert run("simulate", "--dist-a", counts, "--decoder", "argmax", "--out", tmp_path / "x") == 0
    assert run("compare", "--dist-a", counts, "--dist-b", tmp_path / "x/simulated.counts.tsv",
               "--patterns", "word", "--min-pattern-freq", 1, "--out", tmp_path / "y") == 0
    block = json.loads((tmp_path / "y/compare.json").read_text())["patterns"]["word"]
    assert block["mean_convergence_abs_diff"] > 0
    assert block["b"]["diversity"] == 0


def test_plot_rerenders_reports(tmp_path, corpus, golden):
    run("stats", *corpus, "--out", tmp_path / "r", "--figures", "false", "--min-pattern-freq", 1)
    assert not list((tmp_path / "r").glob("*.svg"))
    assert run("plot", tmp_path / "r/patterns.word.tsv", tmp_path / "r/categories.tsv", "--out", tmp_path / "f") == 0
    assert {p.name for p in (tmp_path / "f").glob("*.svg")} == {
        "patterns.word.quadrant.svg", "patterns.word.breakdown.svg", "categories.categories.svg"}
    run("stats", *corpus, "--out", tmp_path / "s", "--min-pattern-freq", 1)
    for name in ("patterns.word.quadrant.svg", "categories.categories.svg"):
        assert (tmp_path / "f" / name).read_bytes() == (tmp_path / "s" / name).read_bytes()
    assert run("plot", golden[2], "--out", tmp_path / "f") == 2


def test_synth_and_quality(tmp_path):
    spec = convergence_sweep_spec(4, lo=0.4, hi=0.6, max_alternatives=1, n_sentences=1500, seed=2)
    paths = quality_inputs(tmp_path, spec)
    argv = ["quality", "--src", paths["src"], "--tgt", paths["tgt"], "--align", paths["align"],
            "--mt", paths["mt"], "--ref", paths["ref"], "--scores", paths["scores"], "--metric-name", "bleurt",
            "--min-group-size", 50, "--out", tmp_path / "q"]
    assert run(*argv) == 0
    header, groups = read_tsv(tmp_path / "q/groups.tsv")
    assert groups and {r[0] for r in groups} == {"bleu", "bleurt"}
    for r in groups:
        assert int(r[3]) >= 50 and int(r[4]) >= 50
        assert float(r[7]) == pytest.approx(float(r[6]) - float(r[5]), abs=1e-8)
    header, corr = read_tsv(tmp_path / "q/correlations.tsv")
    assert len(corr) == 8
    q = json.loads((tmp_path / "q/quality.json").read_text())
    assert q["sentences"] == 1500
    assert run(*argv[:-2], "--filter-scores", paths["scores"], "--keep-fraction", "0.5",
               "--out", tmp_path / "h") == 0
    assert json.loads((tmp_path / "h/quality.json").read_text())["sentences_kept"] == 750
    short = tmp_path / "short.txt"
    short.write_text("a b\n")
    assert run(*[short if a == paths["mt"] else a for a in argv]) == 2


def test_synth_spec_roundtrip(tmp_path):
    assert run("synth", "--preset", "sweep", "--n-patterns", 5, "--n-sentences", 50, "--out", tmp_path / "a") == 0
    spec = tmp_path / "a/synth.spec.json"
    assert run("synth", "--spec", spec, "--out", tmp_path / "b") == 0
    for ext in ("src.conllu", "tgt.conllu", "align"):
        assert (tmp_path / f"a/synth.{ext}").read_bytes() == (tmp_path / f"b/synth.{ext}").read_bytes()


def test_console_script(tmp_path):
    exe = shutil.which("morphdiv")
    cmd = [exe] if exe else [sys.executable, "-m", "morphdiv.cli"]
    res = subprocess.run(cmd + ["--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("morphdiv ")
