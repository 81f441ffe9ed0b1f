from __future__ import annotations

import csv
import json
import os
import time

import pytest

from nocsynth import cli
from nocsynth.graph import parse_acg, serialize_acg
from nocsynth.workloads import aes_acg, bench_instance


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def aes_file(tmp_path):
    path = tmp_path / "aes.acg"
    path.write_text(serialize_acg(aes_acg()))
    return path


def test_gen_round_trip(tmp_path, capsys):
    code, out, _ = run(capsys, "gen", "--workload", "aes")
    assert code == 0 and parse_acg(out).edges == aes_acg().edges
    dst = tmp_path / "p.acg"
    code, _, _ = run(capsys, "gen", "--workload", "planted", "--n", "8", "--mix", "MGG4,L4", "--out", dst)
    assert code == 0 and dst.exists() and (tmp_path / "p.acg.truth").read_text().startswith("1: MGG4")
    code, _, err = run(capsys, "gen", "--workload", "planted", "--n", "5", "--mix", "MGG4,MGG4")
    assert code == 1 and "error" in err


def test_synth_listing_and_report(aes_file, tmp_path, capsys):
    out_dir = tmp_path / "out"
    code, out, _ = run(capsys, "synth", aes_file, "--lambda", "2", "--out-dir", out_dir)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "COST: 256"
    assert sum("MGG4" in ln for ln in lines) == 4 and sum("L4" in ln for ln in lines) == 2
    assert lines[-5] == "0: Remaining Graph:" and lines[-4:] == ["edge 9 11", "edge 10 12", "edge 11 9", "edge 12 10"]
    report = json.loads((out_dir / "report.json").read_text())
    assert report["architecture"]["links"] == 26 and report["listing"] == out
    for f in report["files"].values():
        assert (out_dir / f["path"]).exists()


def test_synth_is_deterministic(aes_file, tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    run(capsys, "synth", "--acg", aes_file, "--out-dir", a)
    run(capsys, "synth", "--acg", aes_file, "--out-dir", b)
    for name in ("decomposition.txt", "architecture.arch", "routes.txt"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_synth_errors(aes_file, tmp_path, capsys):
    code, _, err = run(capsys, "synth", tmp_path / "missing.acg", "--out-dir", tmp_path)
    assert code == 1 and "cannot read" in err
    bad = tmp_path / "bad.acg"
    bad.write_text("not an acg\n")
    assert run(capsys, "synth", bad, "--out-dir", tmp_path)[0] == 1
    code, _, err = run(capsys, "synth", aes_file, "--max-bisection", "1", "--out-dir", tmp_path)
    assert code == 2 and "infeasible" in err
    assert run(capsys, "synth", aes_file, "--energy", "linear:x", "--out-dir", tmp_path)[0] == 1
    assert run(capsys, "synth", "--out-dir", tmp_path)[0] == 1


def test_compare_outputs(aes_file, tmp_path, capsys):
    out_dir = tmp_path / "cmp"
    code, out, _ = run(capsys, "compare", aes_file, "--rounds", "2", "--out-dir", out_dir)
    assert code == 0
    rows = list(csv.DictReader(out.splitlines()))
    assert [r["arch"] for r in rows] == ["custom", "mesh4x4"]
    custom, mesh = rows
    assert int(custom["delta_cycles"]) < int(mesh["delta_cycles"])
    assert float(custom["energy_j"]) < float(mesh["energy_j"])
    assert (out_dir / "compare.csv").read_text() == out
    assert (out_dir / "compare.svg").read_text().lstrip().startswith(("<?xml", "<svg"))
    report = json.loads((out_dir / "report.json").read_text())
    assert report["simulation"]["packets"] == 120


def test_compare_two_nodes_matches_mesh(tmp_path, capsys):
    acg = tmp_path / "two.acg"
    acg.write_text("acg 2\nnode 1 0 0\nnode 2 1 0\nedge 1 2 64 1\nedge 2 1 32 1\n")
    code, out, _ = run(capsys, "compare", acg, "--mesh", "1x2", "--out-dir", tmp_path / "o")
    assert code == 0
    custom, mesh = list(csv.DictReader(out.splitlines()))
    assert {k: v for k, v in custom.items() if k != "arch"} == {k: v for k, v in mesh.items() if k != "arch"}
    assert run(capsys, "compare", acg, "--mesh", "3x3", "--out-dir", tmp_path / "o")[0] == 1


def test_compare_poisson(aes_file, tmp_path, capsys):
    args = ("compare", aes_file, "--traffic", "poisson", "--cycles", "200", "--seed", "5")
    a = run(capsys, *args, "--out-dir", tmp_path / "a")
    b = run(capsys, *args, "--out-dir", tmp_path / "b")
    assert a[0] == 0 and a[1] == b[1]


def test_bench(tmp_path, capsys):
    code, out, _ = run(capsys, "bench", "--sizes", "4,8", "--instances", "2", "--out-dir", tmp_path)
    assert code == 0
    rows = list(csv.DictReader(out.splitlines()))
    assert [(int(r["n"]), int(r["seed"])) for r in rows] == [(4, 0), (4, 1), (8, 0), (8, 1)]
    assert (tmp_path / "bench.svg").exists()
    assert run(capsys, "bench", "--sizes", "4,x", "--out-dir", tmp_path)[0] == 1


def test_validate_lib(tmp_path, capsys):
    code, out, _ = run(capsys, "validate-lib")
    assert code == 0 and "MGG4: ok" in out
    assert run(capsys, "validate-lib", "--library", tmp_path / "none.lib")[0] == 1


def test_small_instance_is_fast(tmp_path, capsys):
    acg = tmp_path / "n4.acg"
    acg.write_text(serialize_acg(bench_instance(0, 4)))
    g = parse_acg(acg.read_text())
    from nocsynth.decomposer import decompose

    decompose(g)  # warm caches and imports
    t0 = time.perf_counter()
    decompose(g)
    assert time.perf_counter() - t0 < 0.01
