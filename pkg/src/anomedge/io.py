"""Plain-text file formats: edge lists, feature CSVs, truth lists, matrices and graymaps.

Edge list::

    # nodes=N
    i<TAB>j<TAB>weight

0-based ids, one undirected edge per line, ``i != j``. Truth files are the
same minus the header and the weight column, so their line count is the
number of anomalies. Feature matrices are headerless CSV.
"""

from __future__ import annotations

import csv
import math
import re
from pathlib import Path

import numpy as np

from .graph import EdgeSet, FeatureMatrix, GraphData

_HEADER = re.compile(r"^#\s*nodes\s*=\s*(\d+)\s*$")


class FormatError(ValueError):
    """Malformed input file. ``line`` is 1-based, or ``None`` for whole-file problems."""

    def __init__(self, path, line: int | None, message: str):
        where = f"{path}:{line}" if line is not None else f"{path}"
        super().__init__(f"{where}: {message}")
        self.path = str(path)
        self.line = line


def fmt_float(x: float) -> str:
    # shortest round-trip repr, stable across runs
    return repr(float(x))


def _content_lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            yield lineno, raw.rstrip("\r\n")


def _parse_pair(path, lineno, fields, n):
    try:
        i, j = int(fields[0]), int(fields[1])
    except ValueError:
        raise FormatError(path, lineno, f"node ids must be integers, got {fields[:2]}") from None
    if n is not None and not (0 <= i < n and 0 <= j < n):
        raise FormatError(path, lineno, f"node id out of range for {n} nodes: ({i}, {j})")
    if i == j:
        raise FormatError(path, lineno, f"self-loop on node {i}")
    return (i, j) if i < j else (j, i)


def read_edge_list(path) -> GraphData:
    n = None
    weights: dict[tuple[int, int], float] = {}
    for lineno, line in _content_lines(path):
        if not line.strip():
            continue
        if line.lstrip().startswith("#"):
            m = _HEADER.match(line.strip())
            if m:
                if n is not None:
                    raise FormatError(path, lineno, "duplicate '# nodes=N' header")
                n = int(m.group(1))
            continue
        if n is None:
            raise FormatError(path, lineno, "missing '# nodes=N' header before first edge")
        fields = line.split()
        if len(fields) not in (2, 3):
            raise FormatError(path, lineno, f"expected 'i<TAB>j<TAB>weight', got {len(fields)} fields")
        e = _parse_pair(path, lineno, fields, n)
        try:
            w = float(fields[2]) if len(fields) == 3 else 1.0
        except ValueError:
            raise FormatError(path, lineno, f"weight is not a number: {fields[2]!r}") from None
        if not (math.isfinite(w) and w > 0):
            raise FormatError(path, lineno, f"weight must be positive and finite, got {w}")
        if e in weights:
            raise FormatError(path, lineno, f"duplicate edge {e}")
        weights[e] = w
    if n is None:
        raise FormatError(path, None, "missing '# nodes=N' header")
    if n < 1:
        raise FormatError(path, None, "graph must have at least one node")
    A = np.zeros((n, n))
    for (i, j), w in weights.items():
        A[i, j] = A[j, i] = w
    return GraphData(A)


def write_edge_list(path, g: GraphData) -> None:
    A = g.adjacency
    iu, ju = np.nonzero(np.triu(A, 1))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# nodes={g.n_nodes}\n")
        for i, j in zip(iu.tolist(), ju.tolist()):
            fh.write(f"{i}\t{j}\t{fmt_float(A[i, j])}\n")


def read_truth(path, n_nodes: int | None = None) -> EdgeSet:
    edges = []
    seen = set()
    for lineno, line in _content_lines(path):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.split()
        if len(fields) < 2:
            raise FormatError(path, lineno, "expected 'i<TAB>j'")
        e = _parse_pair(path, lineno, fields, n_nodes)
        if e in seen:
            raise FormatError(path, lineno, f"duplicate edge {e}")
        seen.add(e)
        edges.append(e)
    return EdgeSet(edges)


def write_truth(path, truth: EdgeSet) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i, j in truth.sorted():
            fh.write(f"{i}\t{j}\n")


def read_features(path) -> FeatureMatrix:
    rows = []
    width = None
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                vals = [float(c) for c in row]
            except ValueError:
                raise FormatError(path, lineno, f"non-numeric entry in {row}") from None
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise FormatError(path, lineno, f"expected {width} columns, got {len(vals)}")
            if not all(math.isfinite(v) for v in vals):
                raise FormatError(path, lineno, "non-finite feature value")
            rows.append(vals)
    if not rows:
        raise FormatError(path, None, "feature file is empty")
    return FeatureMatrix(np.array(rows, dtype=float))


def write_features(path, X: FeatureMatrix) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in X.data:
            fh.write(",".join(fmt_float(v) for v in row) + "\n")


def write_candidates(path, ranked) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# source={ranked.source}\n")
        if ranked.scores is None:
            for i, j in ranked.edges:
                fh.write(f"{i}\t{j}\n")
        else:
            for (i, j), s in zip(ranked.edges, ranked.scores):
                fh.write(f"{i}\t{j}\t{fmt_float(s)}\n")


def write_matrix_csv(path, M) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in np.asarray(M, dtype=float):
            fh.write(",".join(fmt_float(v) for v in row) + "\n")


def write_pgm(path, M) -> None:
    """Binary graymap, one pixel per entry, 0 -> black and the maximum entry -> white."""
    M = np.clip(np.asarray(M, dtype=float), 0.0, None)
    top = M.max(initial=0.0)
    pix = np.zeros(M.shape, dtype=np.uint8) if top == 0 else np.rint(255.0 * M / top).astype(np.uint8)
    h, w = pix.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(pix.tobytes())


_PGM_HEADER = re.compile(rb"^P5\s+(\d+)\s+(\d+)\s+(\d+)\s")


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    m = _PGM_HEADER.match(data)
    if not m:
        raise FormatError(path, 1, "not a binary graymap")
    w, h, maxval = (int(g) for g in m.groups())
    if maxval != 255:
        raise FormatError(path, None, f"unsupported maxval {maxval}")
    body = data[m.end():]
    if len(body) != w * h:
        raise FormatError(path, None, f"expected {w * h} pixels, found {len(body)}")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w)
