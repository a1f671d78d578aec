import json

import numpy as np
import pytest

from weakgraph.errors import ParseError, RaggedRows
from weakgraph.estimators import GraphEstimate, PairInterval, partial_corr_graph
from weakgraph.io import dumps, export_graph, graph_from_json, ingest_csv, write_csv
from weakgraph.linalg import DataMatrix
from weakgraph.models import ModelSpec, sample


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return str(p)


def test_numeric_file(tmp_path):
    X = ingest_csv(write(tmp_path, "1,2\n3,4\n5,6\n"))
    assert (X.n, X.D) == (3, 2)
    assert X.labels == ("1", "2")
    np.testing.assert_array_equal(X.values, [[1, 2], [3, 4], [5, 6]])


def test_header_detected(tmp_path):
    X = ingest_csv(write(tmp_path, "a,b\n1,2\n3,4.5e-1\n"))
    assert X.labels == ("a", "b")
    assert X.values[1, 1] == 0.45


def test_ragged_names_first_bad_line(tmp_path):
    with pytest.raises(RaggedRows) as err:
        ingest_csv(write(tmp_path, "a,b\n1,2\n3\n4,5,6\n"))
    assert err.value.line == 3
    assert "line 3" in str(err.value)


def test_parse_error_position(tmp_path):
    with pytest.raises(ParseError) as err:
        ingest_csv(write(tmp_path, "a,b\n1,2\n3,oops\n"))
    assert (err.value.row, err.value.col) == (3, 2)


def test_non_finite_rejected(tmp_path):
    with pytest.raises(ParseError):
        ingest_csv(write(tmp_path, "1,2\n3,nan\n"))


def test_empty_and_single_row(tmp_path):
    with pytest.raises(ParseError):
        ingest_csv(write(tmp_path, ""))
    with pytest.raises(Exception):
        ingest_csv(write(tmp_path, "a,b\n1,2\n"))


def test_write_then_read(tmp_path, rng):
    X = DataMatrix(rng.standard_normal((10, 3)), ["x", "y", "z"])
    path = str(tmp_path / "o.csv")
    write_csv(X, path)
    Y = ingest_csv(path)
    assert Y.labels == X.labels
    np.testing.assert_array_equal(Y.values, X.values)


def test_dot_empty_graph():
    G = GraphEstimate(("1", "2"), (), {}, 0.1, "delta", 10)
    assert export_graph(G, "dot") == 'graph G {\n  "1";\n  "2";\n}\n'


def test_dot_one_edge():
    G = GraphEstimate(("1", "2"), ((0, 1),), {}, 0.1, "delta", 10)
    assert '  "1" -- "2";' in export_graph(G, "dot").splitlines()


def test_dot_quotes_labels():
    G = GraphEstimate(('a"b', "c"), ((0, 1),), {}, 0.1, "delta", 10)
    assert '"a\\"b" -- "c"' in export_graph(G, "dot")


def test_json_schema_and_round_trip():
    X = sample(ModelSpec("markov", 5), 300, 1)
    G = partial_corr_graph(X, 0.1, "bootstrap", B=200, seed=3)
    text = export_graph(G, "json")
    d = json.loads(text)
    assert list(d) == ["nodes", "alpha", "method", "n", "edges", "meta"]
    pairs = [(e["i"], e["j"]) for e in d["edges"]]
    assert pairs == sorted(pairs) and all(i < j for i, j in pairs)
    H = graph_from_json(text)
    assert H.edges == G.edges
    for pair in G.edges:
        assert H.per_pair[pair] == G.per_pair[pair]
    assert export_graph(H, "json") == text


def test_dumps_exact_floats():
    vals = [0.1, 1 / 3, 1e-300, 2.5e17, -0.0]
    text = dumps({"v": vals, "b": True, "n": None, "inf": float("inf")})
    back = json.loads(text)
    assert back["v"] == vals
    assert back["b"] is True and back["n"] is None and back["inf"] is None
    assert dumps({"v": vals}) == dumps({"v": list(vals)})


def test_unknown_format():
    G = GraphEstimate(("1", "2"), (), {}, 0.1, "delta", 10)
    with pytest.raises(ValueError):
        export_graph(G, "xml")


def test_pair_interval_json_is_exact():
    G = GraphEstimate(("a", "b"), ((0, 1),), {(0, 1): PairInterval(0.1 + 0.2, 0.1, 0.7)}, 0.05, "x", 3)
    assert graph_from_json(export_graph(G)).per_pair[(0, 1)].estimate == 0.1 + 0.2
