import io
import json
from collections import Counter
from pathlib import Path

import pytest

import oracle
from tensorql.cli import run
from tensorql.cp_decomp import read_factors, reconstruct
from tensorql.query import parse
from tensorql.rdf_store import load_ntriples_file, parse_ntriples_line

DATA = Path(__file__).parent / "testdata"

# golden name -> arguments; expected stdout lives in testdata/<name>.expected
GOLDEN = {
    "star": ["query", "star.query"],
    "distinct": ["query", "distinct.query"],
    "distinct_pair": ["query", "distinct_pair.query"],
    "optional": ["query", "optional.query"],
    "optional_jsonl": ["query", "optional.query", "--format", "jsonl"],
    "union": ["query", "union.query"],
    "from": ["query", "from.query"],
    "ask_true": ["query", "ask_true.query"],
    "ask_false": ["query", "ask_false.query"],
    "construct": ["query", "construct.query"],
    "stats": ["stats", "people"],
    "explain": ["explain", "--check", "star.query"],
    "decompose": ["decompose", "people", "--naive", "--reduce"],
    "estimate_distinct": ["estimate-distinct", "--sketch", "16", "--check", "star.query"],
}


def cli(args, session):
    out, err = io.StringIO(), io.StringIO()
    code = run(["--session", str(session), *args], stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def session(tmp_path, monkeypatch):
    monkeypatch.chdir(DATA)
    path = tmp_path / "session.json"
    for alias in ("people", "places"):
        code, out, _ = cli(["load", alias, f"{alias}.nt"], path)
        assert code == 0
    return path


@pytest.mark.parametrize("name", sorted(GOLDEN))
def test_golden_output(name, session):
    code, out, err = cli(GOLDEN[name], session)
    assert code == 0, err
    assert out == (DATA / f"{name}.expected").read_text(encoding="utf-8")


def test_load_reports_counts_and_writes_session(session):
    code, out, _ = cli(["load", "again", "people.nt"], session)
    assert code == 0 and out == "10 triples\ndims: 4 x 3 x 8\n"
    data = json.loads(session.read_text())
    assert list(data["graphs"]) == ["people", "places", "again"]
    assert Path(data["graphs"]["again"]).is_absolute()


def test_output_is_deterministic(session):
    runs = {cli(["query", "construct.query"], session)[1] for _ in range(3)}
    assert len(runs) == 1


def test_unsupported_feature_exit_code(session):
    code, out, err = cli(["query", "filter.query"], session)
    assert code == 2 and out == "" and "FILTER" in err


def test_parse_error_exit_code(session):
    code, _, err = cli(["query", "broken.query"], session)
    assert code == 1 and "error:" in err


def test_io_and_alias_errors(session, tmp_path):
    assert cli(["query", "missing.query"], session)[0] == 1
    assert cli(["load", "x", "missing.nt"], session)[0] == 1
    assert cli(["stats", "nope"], session)[0] == 1
    bad = tmp_path / "bad.nt"
    bad.write_text("<a> <b> .\n")
    code, _, err = cli(["load", "bad", str(bad)], session)
    assert code == 1 and "line 1" in err


def test_usage_errors_exit_one(session):
    assert cli([], session)[0] == 1
    assert cli(["decompose", "people"], session)[0] == 1  # needs --rank or --naive
    assert cli(["estimate-distinct", "--sketch", "4", "star.query"], session)[0] == 1


def test_graph_option_adds_alias_for_one_run(tmp_path, monkeypatch):
    monkeypatch.chdir(DATA)
    path = tmp_path / "s.json"
    code, out, _ = cli(["-g", "people=people.nt", "query", "ask_true.query"], path)
    assert code == 0 and out == "true\n"
    assert not path.exists()


def test_session_from_environment(tmp_path, monkeypatch):
    monkeypatch.chdir(DATA)
    path = tmp_path / "env.json"
    monkeypatch.setenv("TENSORQL_SESSION", str(path))
    assert run(["load", "people", "people.nt"], stdout=io.StringIO()) == 0
    assert path.exists()


def test_decompose_export_roundtrip(session, tmp_path, monkeypatch):
    monkeypatch.setenv("TENSORQL_SEED", "5")
    target = tmp_path / "factors"
    code, out, _ = cli(["decompose", "people", "--rank", "20", "--export", str(target)], session)
    assert code == 0 and "method: greedy (seed 5)" in out and "exact: true" in out
    factors, seed = read_factors(target)
    assert seed == 5
    assert reconstruct(factors) == load_ntriples_file(DATA / "people.nt").tensor


def test_query_from_stdin(session, monkeypatch):
    monkeypatch.setattr("sys.stdin", io.StringIO("ASK { ?s <http://ex.org/age> ?o }"))
    assert cli(["query", "-"], session)[1] == "true\n"


@pytest.mark.parametrize("name", ["star", "distinct", "distinct_pair", "optional", "union", "from"])
def test_golden_selects_agree_with_oracle(name):
    graphs = {}
    for alias in ("people", "places"):
        lines = (DATA / f"{alias}.nt").read_text(encoding="utf-8").splitlines()
        graphs[alias] = [t for t in map(parse_ntriples_line, lines) if t is not None]
    query = parse((DATA / f"{name}.query").read_text(encoding="utf-8"))
    header, *rows = (DATA / f"{name}.expected").read_text(encoding="utf-8").splitlines()
    assert header.split("\t") == [f"?{v}" for v in query.output_vars]
    frozen = Counter(tuple(cell or None for cell in row.split("\t")) for row in rows)
    assert frozen == oracle.run(query, graphs, "people")
