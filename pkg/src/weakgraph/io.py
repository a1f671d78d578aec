"""Reading data and writing graphs and reports."""
import csv
import json
import math

import numpy as np

from .errors import DataError, ParseError, RaggedRows
from .linalg import DataMatrix

__all__ = ["ingest_csv", "dumps", "export_graph", "graph_to_dict", "graph_from_json"]


def _is_number(cell):
    try:
        float(cell)
    except ValueError:
        return False
    return True


def ingest_csv(path):
    """Read a numeric CSV into a :class:`DataMatrix`.

    A first row containing any non-numeric cell is taken as a header and
    supplies the node labels.  Blank lines are skipped.

    Raises
    ------
    RaggedRows
        Naming the first line whose field count differs from the first row.
    ParseError
        With line and column of the first non-numeric data cell.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [(lineno, row) for lineno, row in enumerate(csv.reader(fh), start=1) if row]
    if not rows:
        raise ParseError("file contains no data", row=1)
    width = len(rows[0][1])
    for lineno, row in rows:
        if len(row) != width:
            raise RaggedRows(lineno, width, len(row))
    labels = ()
    first = [cell.strip() for cell in rows[0][1]]
    if not all(_is_number(c) for c in first):
        labels = tuple(first)
        rows = rows[1:]
    values = np.empty((len(rows), width))
    for r, (lineno, row) in enumerate(rows):
        for c, cell in enumerate(row):
            try:
                values[r, c] = float(cell)
            except ValueError:
                raise ParseError(f"non-numeric value {cell!r}", row=lineno, col=c + 1) from None
    if not np.all(np.isfinite(values)):
        bad = np.argwhere(~np.isfinite(values))[0]
        raise ParseError("non-finite value", row=rows[bad[0]][0], col=int(bad[1]) + 1)
    if values.shape[0] < 2:
        raise DataError("need at least two observations")
    return DataMatrix(values, labels)


def write_csv(X, path_or_file):
    """Write a DataMatrix with a header row of its labels."""
    X = X if isinstance(X, DataMatrix) else DataMatrix(X)
    close = False
    if isinstance(path_or_file, str):
        fh = open(path_or_file, "w", newline="", encoding="utf-8")
        close = True
    else:
        fh = path_or_file
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(X.labels)
        for row in X.values:
            w.writerow([format(float(v), ".17g") for v in row])
    finally:
        if close:
            fh.close()


# ---------------------------------------------------------------------------
# deterministic JSON


def _scalar(obj):
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return "null"
        return format(x, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent=2, _level=0):
    """JSON text with every float written to 17 significant digits.

    Output depends only on the value, so equal inputs give byte-identical
    text.  Non-finite floats become ``null``.
    """
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(_scalar(v) for v in seq) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in seq]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    return _scalar(obj)


# ---------------------------------------------------------------------------
# graph export


def graph_to_dict(G):
    edges = []
    for i, j in sorted(G.edges):
        rec = {"i": i, "j": j}
        iv = G.per_pair.get((i, j))
        if iv is not None:
            rec.update(estimate=iv.estimate, ci_lo=iv.ci_lo, ci_hi=iv.ci_hi)
        edges.append(rec)
    return {
        "nodes": list(G.node_labels),
        "alpha": G.alpha,
        "method": G.method,
        "n": G.n,
        "edges": edges,
        "meta": dict(G.meta),
    }


def _dot_quote(label):
    return '"' + str(label).replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_graph(G, format="json"):
    """Serialize a graph as JSON or Graphviz DOT text.

    In JSON, ``i`` and ``j`` are 0-based positions in ``nodes``, with
    ``i < j`` and edges sorted.  DOT output lists every node, then one
    ``"a" -- "b";`` line per edge in the same order.
    """
    if format == "json":
        return dumps(graph_to_dict(G)) + "\n"
    if format == "dot":
        lines = ["graph G {"]
        lines += [f"  {_dot_quote(lab)};" for lab in G.node_labels]
        lines += [
            f"  {_dot_quote(G.node_labels[i])} -- {_dot_quote(G.node_labels[j])};"
            for i, j in sorted(G.edges)
        ]
        lines.append("}")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown export format {format!r}")


def graph_from_json(text):
    """Rebuild a :class:`~weakgraph.estimators.GraphEstimate` from JSON export."""
    from .estimators import GraphEstimate, PairInterval

    d = json.loads(text)
    per_pair = {}
    edges = []
    for e in d["edges"]:
        pair = (int(e["i"]), int(e["j"]))
        edges.append(pair)
        if "estimate" in e:
            per_pair[pair] = PairInterval(
                float(e["estimate"]), float(e["ci_lo"]), float(e["ci_hi"])
            )
    return GraphEstimate(
        node_labels=tuple(d["nodes"]),
        edges=tuple(edges),
        per_pair=per_pair,
        alpha=d["alpha"],
        method=d["method"],
        n=d["n"],
        meta=d.get("meta", {}),
    )
