"""Matrix ingestion, synthetic matrices, and graph serialization (JSON and DOT)."""

import csv
import io as _io
import json
from pathlib import Path

import numpy as np
import scipy.io

from ._validation import DEFAULT_SYM_TOL, as_generator
from .graph import LevelRecord, MmfGraph
from .linalg import KPointRotation, SymMatrix

__all__ = [
    "SCHEMA_VERSION",
    "load_matrix",
    "save_matrix",
    "read_csv_table",
    "covariance_from_data",
    "generate_synthetic",
    "graph_to_document",
    "graph_from_document",
    "dumps_graph",
    "loads_graph",
    "export_dot",
    "format_float",
]

SCHEMA_VERSION = "1.0"
MATRIX_FORMATS = ("csv-dense", "matrix-market")
SYNTHETIC_KINDS = ("hierarchical-block", "random-psd", "diagonal")


def format_float(x):
    """Shortest decimal string that round-trips to the same float."""
    return repr(float(x))


def _name(path):
    if hasattr(path, "read") or str(path) == "-":
        return getattr(path, "name", "<stdin>")
    return str(path)


def _source_text(path):
    if hasattr(path, "read"):
        return path.read()
    if str(path) == "-":
        import sys

        return sys.stdin.read()
    return Path(path).read_text()


def read_csv_table(path):
    """Parse a numeric CSV with an optional header row.

    Returns ``(values, header)`` where ``header`` is None when the first row is
    numeric. Ragged rows and non-numeric cells raise ``ValueError`` naming the
    row (1-based, counting the header).
    """
    text = _source_text(path)
    rows = [r for r in csv.reader(_io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError(f"{_name(path)}: no data rows")
    header = None
    try:
        [float(c) for c in rows[0]]
    except ValueError:
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
    start = 2 if header is not None else 1
    width = len(header) if header is not None else len(rows[0]) if rows else 0
    values = []
    for num, row in enumerate(rows, start=start):
        if len(row) != width:
            raise ValueError(f"{_name(path)}: row {num} has {len(row)} fields, expected {width}")
        try:
            values.append([float(c) for c in row])
        except ValueError as exc:
            raise ValueError(f"{_name(path)}: row {num}: {exc}") from None
    return np.array(values, dtype=np.float64).reshape(len(values), width), header


def _guess_format(path):
    suffix = Path(str(path)).suffix.lower()
    return "matrix-market" if suffix in (".mtx", ".mm") else "csv-dense"


def load_matrix(path, format=None, sym_tol=DEFAULT_SYM_TOL, symmetrize=False):
    """Read a symmetric matrix from a dense CSV or a Matrix Market file.

    CSV: ``m`` rows of ``m`` numbers with an optional header row of labels.
    Matrix Market: any scipy-readable file; symmetric coordinate files store
    one triangle and are mirrored on read.
    """
    format = format or ("csv-dense" if hasattr(path, "read") else _guess_format(path))
    if format == "csv-dense":
        values, labels = read_csv_table(path)
    elif format == "matrix-market":
        src = _io.StringIO(_source_text(path)) if str(path) == "-" else path
        values = scipy.io.mmread(src)
        values = np.asarray(values.todense() if hasattr(values, "todense") else values, dtype=np.float64)
        labels = None
    else:
        raise ValueError(f"unknown matrix format {format!r}; expected one of {MATRIX_FORMATS}")
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise ValueError(f"{_name(path)}: matrix is not square (shape {values.shape})")
    try:
        return SymMatrix(values, labels, sym_tol=sym_tol, symmetrize=symmetrize)
    except ValueError as exc:
        raise ValueError(f"{_name(path)}: {exc}") from None


def save_matrix(matrix, path, format=None):
    """Write a matrix as dense CSV (header row when labelled) or symmetric Matrix Market."""
    values = np.asarray(matrix, dtype=np.float64)
    labels = getattr(matrix, "labels", None)
    format = format or _guess_format(path)
    if format == "csv-dense":
        text = matrix_to_csv(values, labels)
        if hasattr(path, "write"):
            path.write(text)
        else:
            Path(path).write_text(text)
    elif format == "matrix-market":
        m = values.shape[0]
        lines = ["%%MatrixMarket matrix coordinate real symmetric"]
        entries = [(i, j, values[i, j]) for j in range(m) for i in range(j, m) if values[i, j] != 0.0]
        lines.append(f"{m} {m} {len(entries)}")
        lines.extend(f"{i + 1} {j + 1} {format_float(v)}" for i, j, v in entries)
        text = "\n".join(lines) + "\n"
        if hasattr(path, "write"):
            path.write(text)
        else:
            Path(path).write_text(text)
    else:
        raise ValueError(f"unknown matrix format {format!r}; expected one of {MATRIX_FORMATS}")


def matrix_to_csv(values, labels=None):
    out = []
    if labels is not None:
        out.append(",".join(labels))
    out.extend(",".join(format_float(x) for x in row) for row in np.atleast_2d(values))
    return "\n".join(out) + "\n"


def covariance_from_data(path, center=True):
    """Sample covariance ``X^T X / (n - 1)`` of an ``n x d`` observation CSV.

    Column headers, when present, become the matrix labels.
    """
    if isinstance(path, np.ndarray):
        X, header = np.asarray(path, dtype=np.float64), None
    else:
        X, header = read_csv_table(path)
    n = X.shape[0]
    if center:
        if n < 2:
            raise ValueError(f"need at least 2 observations to center, got {n}")
        X = X - X.mean(axis=0)
    C = X.T @ X / max(n - 1, 1)
    return SymMatrix((C + C.T) / 2.0, header)


def _hierarchical_block(m, depth, base, boost):
    # leaf id of each index after `depth` rounds of splitting every block in two
    paths = [""] * m

    def split(lo, hi, level):
        if level == depth or hi - lo < 2:
            return
        mid = (lo + hi + 1) // 2
        for i in range(lo, hi):
            paths[i] += "0" if i < mid else "1"
        split(lo, mid, level + 1)
        split(mid, hi, level + 1)

    split(0, m, 0)
    C = np.empty((m, m))
    for i in range(m):
        for j in range(m):
            if i == j:
                C[i, j] = 1.0 + boost
                continue
            common = 0
            for a, b in zip(paths[i], paths[j]):
                if a != b:
                    break
                common += 1
            C[i, j] = base ** (1 + depth - common)
    return C


def generate_synthetic(kind, m, seed=0, depth=2, base=0.5, boost=0.0, noise=0.0, rank=None):
    """Synthetic symmetric test matrices.

    ``hierarchical-block``
        Blocks split in two recursively ``depth`` times; entry ``(i, j)`` is
        ``base ** d`` where ``d`` is 1 within a leaf block and grows by one per
        level up to the common ancestor. The diagonal is ``1 + boost``.
        ``noise`` adds a symmetric Gaussian perturbation of that scale.
    ``random-psd``
        ``A^T A / rank`` for a ``rank x m`` standard Gaussian ``A`` (``rank``
        defaults to ``m``).
    ``diagonal``
        Uniform random entries in ``[0.5, 1.5)`` on the diagonal.
    """
    m = int(m)
    if m < 2:
        raise ValueError(f"size must be at least 2, got {m}")
    rng = as_generator(seed)
    if kind == "hierarchical-block":
        if not 0.0 < base < 1.0:
            raise ValueError(f"base must be in (0, 1), got {base}")
        if depth < 0:
            raise ValueError(f"depth must be nonnegative, got {depth}")
        C = _hierarchical_block(m, int(depth), float(base), float(boost))
        if noise:
            E = rng.standard_normal((m, m)) * noise
            C = C + (E + E.T) / 2.0
    elif kind == "random-psd":
        r = m if rank is None else int(rank)
        if r < 1:
            raise ValueError(f"rank must be positive, got {r}")
        A = rng.standard_normal((r, m))
        C = A.T @ A / r
    elif kind == "diagonal":
        C = np.diag(rng.uniform(0.5, 1.5, size=m))
    else:
        raise ValueError(f"unknown synthetic kind {kind!r}; expected one of {SYNTHETIC_KINDS}")
    return SymMatrix((C + C.T) / 2.0)


def graph_to_document(graph, labels=None, meta=None):
    """Plain-data form of a graph (0-based indices, row-major rotation blocks)."""
    levels = [
        {
            "level": num,
            "tuple": list(lv.indices),
            "wavelet": lv.wavelet,
            "rotation": [float(x) for x in lv.rotation.block.ravel()],
            "error": lv.level_error,
        }
        for num, lv in enumerate(graph.levels, start=1)
    ]
    return {
        "schema_version": SCHEMA_VERSION,
        "m": graph.m,
        "k": graph.k,
        "L": graph.n_levels,
        "levels": levels,
        "core_set": list(graph.core_set),
        "labels": list(labels) if labels is not None else None,
        "meta": dict(meta or {}),
    }


def graph_from_document(doc):
    """Inverse of :func:`graph_to_document`; returns ``(graph, labels, meta)``."""
    try:
        m, k = int(doc["m"]), int(doc["k"])
        levels = []
        for entry in doc["levels"]:
            t = [int(i) for i in entry["tuple"]]
            if int(entry["wavelet"]) != t[-1]:
                raise ValueError(f"level {entry.get('level')}: wavelet must be the last tuple entry")
            block = np.array(entry["rotation"], dtype=np.float64).reshape(len(t), len(t))
            levels.append(LevelRecord(KPointRotation(t, block), float(entry["error"])))
        graph = MmfGraph(m, k, levels)
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed graph document: {exc!r}") from None
    if int(doc.get("L", graph.n_levels)) != graph.n_levels:
        raise ValueError(f"graph document declares L={doc['L']} but has {graph.n_levels} levels")
    if "core_set" in doc and list(doc["core_set"]) != list(graph.core_set):
        raise ValueError("graph document core_set does not match its levels")
    labels = doc.get("labels")
    if labels is not None and len(labels) != m:
        raise ValueError(f"graph document has {len(labels)} labels for m={m}")
    return graph, labels, doc.get("meta") or {}


def dumps_graph(graph, labels=None, meta=None):
    """Canonical JSON text: sorted keys, shortest round-trip floats."""
    doc = graph_to_document(graph, labels, meta)
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"


def loads_graph(text):
    return graph_from_document(json.loads(text))


def _dot_id(text):
    return '"' + str(text).replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_dot(graph, labels=None):
    """Graphviz rendering of the graph, one rank per level.

    Each level's tuple members are boxes, the wavelet has a doubled border.
    A non-wavelet member points to the node where the same index next takes
    part in a rotation, or to its core node. Wavelet nodes have no outgoing
    edges.
    """
    names = list(labels) if labels is not None else [str(i) for i in range(graph.m)]
    core = graph.core_set
    out = ["digraph mmf {", "  rankdir=TB;", "  node [fontname=Helvetica];"]
    node = {}
    for num, lv in enumerate(graph.levels, start=1):
        out.append(f"  subgraph level_{num} {{")
        out.append("    rank=same;")
        for i in lv.indices:
            nid = f"l{num}_{i}"
            node[(num, i)] = nid
            style = "shape=box, peripheries=2, style=filled, fillcolor=gray85" if i == lv.wavelet else "shape=box"
            out.append(f"    {_dot_id(nid)} [label={_dot_id(f'{names[i]} (l={num})')}, {style}];")
        out.append("  }")
    if core:
        out.append("  subgraph core {")
        out.append("    rank=same;")
        for i in core:
            out.append(f"    {_dot_id(f'core_{i}')} [label={_dot_id(f'{names[i]} (core)')}, shape=ellipse];")
        out.append("  }")
    for num, lv in enumerate(graph.levels, start=1):
        for i in lv.scaling:
            target = f"core_{i}"
            for later in range(num + 1, graph.n_levels + 1):
                if i in graph.levels[later - 1].indices:
                    target = node[(later, i)]
                    break
            out.append(f"  {_dot_id(node[(num, i)])} -> {_dot_id(target)};")
    out.append("}")
    return "\n".join(out) + "\n"
