from __future__ import annotations

import io
import json
import random
import subprocess
import sys
from pathlib import Path

import pytest

from mixivm.cli import EXIT_CLASS, EXIT_IO, EXIT_PARSE, EXIT_STATIC, main
from mixivm.oracle import evaluate
from mixivm.parser import INSERT, load_query, parse_update_stream, save_database

from oracles import random_database

QUERIES = Path(__file__).resolve().parent.parent / "queries"


def run(*argv):
    out = io.StringIO()
    code = main([str(a) for a in argv], stdout=out)
    return code, out.getvalue()


def blocks(text):
    out, cur = [], None
    for line in text.splitlines():
        if line.startswith("-- result"):
            cur = set()
        elif line == "-- end --":
            out.append(cur)
            cur = None
        elif cur is not None:
            cur.add(tuple(line.split(",")) if line else ())
    return out


def test_classify_q3():
    code, text = run("classify", QUERIES / "q3.cq")
    d = json.loads(text)
    assert code == 0 and d["class"] == "C_exp" and d["is_well_behaved"] is False
    assert "preprocessing_width" not in d


def test_classify_q1_and_example():
    d = json.loads(run("classify", QUERIES / "q1.cq")[1])
    assert d["class"] == "C_lin" and d["preprocessing_width"] == "1"
    assert json.loads(run("classify", QUERIES / "example.cq")[1])["preprocessing_width"] == "2"


def test_malformed_query(tmp_path, capsys):
    bad = tmp_path / "bad.cq"
    bad.write_text("Q(A) := R@d(A,A).")
    code, _ = run("classify", bad)
    assert code == EXIT_PARSE
    assert "bad.cq:1:15:" in capsys.readouterr().err


def test_missing_file():
    assert run("classify", "/nonexistent/q.cq")[0] == EXIT_IO


def test_plan_example(tmp_path):
    code, text = run("plan", QUERIES / "example.cq", "--emit-dot", tmp_path)
    assert code == 0
    # free variables are underlined with HTML labels in the DOT output
    tree = (tmp_path / "viewtree.dot").read_text().replace("<U>", "").replace("</U>", "")
    for label in ("V_A(A)", "V'_B(A)", "V'_C(A)", "V_C(A,C)", "V'_D(A,C)", "V_D(A,C,D)"):
        assert label in tree and label in text
    assert (tmp_path / "vo.dot").read_text().startswith("digraph")


def test_plan_outside_class(capsys):
    code, _ = run("plan", QUERIES / "q4.cq")
    assert code == EXIT_CLASS and "outside C_exp" in capsys.readouterr().err


def test_plan_transition_dot(tmp_path):
    code, text = run("plan", QUERIES / "q3.cq", "--data", QUERIES / "q3_data", "--emit-dot", tmp_path)
    dot = (tmp_path / "transition.dot").read_text()
    assert code == 0 and "states: 8" in text
    assert dot.count("label=\"I:") == 8


def test_run_toy(tmp_path):
    upd = tmp_path / "u.upd"
    upd.write_text("+T(b1)\n?\n")
    code, text = run("run", QUERIES / "q3.cq", "--data", QUERIES / "q3_data", "--updates", upd)
    assert code == 0 and blocks(text) == [{("a1", "b1")}]


def test_run_initial_result_and_out_file(tmp_path):
    upd = tmp_path / "u.upd"
    upd.write_text("?\n!\n")
    data = tmp_path / "data"
    save_database(data, {"R": {("a", "d")}, "S": {("a", "b")}, "T": {("b", "c")}})
    out = tmp_path / "out.txt"
    code, _ = run("run", QUERIES / "q1.cq", "--data", data, "--updates", upd, "--out", out)
    text = out.read_text()
    assert code == 0 and blocks(text) == [{("a", "b", "c")}]
    stats = json.loads(text.splitlines()[-1])
    assert stats["runtime"] == "view_tree" and stats["updates"] == 0


def test_run_static_update(tmp_path):
    upd = tmp_path / "u.upd"
    upd.write_text("+S(a1,b1)\n")
    code, _ = run("run", QUERIES / "q3.cq", "--data", QUERIES / "q3_data", "--updates", upd)
    assert code == EXIT_STATIC


def test_run_outside_class(tmp_path):
    assert run("run", QUERIES / "q5.cq")[0] == EXIT_CLASS


@pytest.mark.parametrize("name", ["q1", "q2", "q7", "q8", "example", "q3"])
def test_run_blocks_match_oracle_replay(tmp_path, name):
    q = load_query(QUERIES / f"{name}.cq")
    rng = random.Random(len(name))
    data = random_database(q, rng, max_rows=30, domain=4)
    save_database(tmp_path / "data", data)
    lines = []
    for k in range(60):
        a = rng.choice(q.dynamic_atoms)
        sign = "+" if rng.random() < 0.6 else "-"
        lines.append(f"{sign}{a.relation}({','.join(str(rng.randrange(4)) for _ in a.schema)})")
        if k % 10 == 9:
            lines.append("?")
    (tmp_path / "u.upd").write_text("\n".join(lines) + "\n")
    code, text = run("run", QUERIES / f"{name}.cq", "--data", tmp_path / "data",
                     "--updates", tmp_path / "u.upd")
    assert code == 0
    current = {rel: {tuple(map(str, t)) for t in rows} for rel, rows in data.items()}
    expected = []
    for e in parse_update_stream("\n".join(lines), q):
        if e.relation:
            rows = current.setdefault(e.relation, set())
            (rows.add if e.op == INSERT else rows.discard)(e.tuple)
        else:
            expected.append(evaluate(q, current).as_set())
    assert blocks(text) == expected


def test_bench_oumv(tmp_path):
    code, text = run("bench", "oumv", "--n", 8, "--seed", 7, "--out", tmp_path)
    assert code == 0 and json.loads(text)["verified"] is True
    for name in ("query.cq", "updates.upd", "answers.csv"):
        assert (tmp_path / name).exists()
    rows = (tmp_path / "answers.csv").read_text().splitlines()[1:]
    assert len(rows) == 8 and all(r.split(",")[1] == r.split(",")[2] for r in rows)


def test_bench_omv():
    code, text = run("bench", "omv", "--n", 5)
    assert code == 0 and json.loads(text)["verified"] is True


def test_bench_rejects_zero_dimension(capsys):
    assert run("bench", "oumv", "--n", 0)[0] == EXIT_PARSE
    assert "n >= 1" in capsys.readouterr().err


def test_bench_sweep(tmp_path):
    out = tmp_path / "sweep.csv"
    code, text = run("bench", "sweep", "--query", QUERIES / "q1.cq", "--n", "1000,10000",
                     "--updates", 200, "--out", out)
    lines = out.read_text().splitlines()
    assert code == 0 and text == out.read_text()
    assert lines[0].startswith("query,N,") and [l.split(",")[1] for l in lines[1:]] == [
        "1000", "10000"]


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "mixivm.cli", "classify",
                           str(QUERIES / "q2.cq")], capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["class"] == "C_poly"


def test_subcommand_required():
    with pytest.raises(SystemExit):
        main([])
