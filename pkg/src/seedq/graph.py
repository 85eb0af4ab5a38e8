"""Directed weighted graphs: construction, edge-list IO, generators, queries.

Graphs are immutable after construction and safe to share across workers.
Node ids from files may be sparse; they are remapped to a dense 0..n-1
index and the original labels kept for output.
"""

import hashlib
import io
import warnings
from dataclasses import dataclass

import numpy as np


class EdgeListParseError(ValueError):
    """A data line could not be parsed; carries the 1-based line number."""

    def __init__(self, lineno, message):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass(frozen=True)
class EdgeWeightScheme:
    """How edge probabilities are assigned once all edges are known.

    kind is one of "in-degree" (p_uv = 1/|N_in(v)|), "constant" (fixed c),
    or "from-file" (third column of the edge list).
    """

    kind: str
    value: float | None = None

    def __post_init__(self):
        if self.kind not in ("in-degree", "constant", "from-file"):
            raise ValueError(f"unknown weight scheme {self.kind!r}")
        if self.kind == "constant":
            if self.value is None or not (0.0 <= self.value <= 1.0):
                raise ValueError(f"constant weight must be in [0,1], got {self.value}")

    @classmethod
    def in_degree(cls):
        return cls("in-degree")

    @classmethod
    def constant(cls, c):
        return cls("constant", float(c))

    @classmethod
    def from_file(cls):
        return cls("from-file")

    @classmethod
    def parse(cls, text):
        """Parse "in-degree", "from-file", or a float literal like "0.1"."""
        text = text.strip()
        if text == "in-degree":
            return cls.in_degree()
        if text == "from-file":
            return cls.from_file()
        try:
            return cls.constant(float(text))
        except ValueError:
            raise ValueError(f"cannot parse weight scheme {text!r}") from None

    def __str__(self):
        if self.kind == "constant":
            return repr(self.value)
        return self.kind


class Graph:
    """Directed graph over dense node ids with optional edge probabilities.

    Edges are stored sorted by (src, dst) with no duplicates and no
    self-loops; in/out adjacency are CSR-style views over the same arrays,
    so they describe the same edge set by construction.
    """

    def __init__(self, n, src, dst, p=None, labels=None):
        n = int(n)
        if n < 0:
            raise ValueError("node count must be non-negative")
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        if src.shape != dst.shape or src.ndim != 1:
            raise ValueError("src/dst must be 1-d arrays of equal length")
        if src.size and (src.min() < 0 or dst.min() < 0 or src.max() >= n or dst.max() >= n):
            raise ValueError("edge endpoint out of range")
        if np.any(src == dst):
            raise ValueError("self-loops are not allowed in Graph")
        if p is not None:
            p = np.asarray(p, dtype=np.float64)
            if p.shape != src.shape:
                raise ValueError("p must match the edge arrays")
            if p.size and (p.min() < 0.0 or p.max() > 1.0):
                raise ValueError("edge probabilities must lie in [0,1]")

        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        if p is not None:
            p = p[order]
        if src.size:
            dup = (src[1:] == src[:-1]) & (dst[1:] == dst[:-1])
            if np.any(dup):
                raise ValueError("duplicate directed edge")

        self.n = n
        self.src = src
        self.dst = dst
        self.p = p
        self.labels = (
            np.arange(n, dtype=np.int64) if labels is None else np.asarray(labels, dtype=np.int64)
        )
        if self.labels.shape != (n,):
            raise ValueError("labels must have one entry per node")

        # CSR over out-edges: edges are already grouped by src.
        self._out_ptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(self._out_ptr, src + 1, 1)
        np.cumsum(self._out_ptr, out=self._out_ptr)
        # CSR over in-edges: positions of edges sorted by dst.
        in_order = np.lexsort((src, dst))
        self._in_edge = in_order
        self._in_ptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(self._in_ptr, dst + 1, 1)
        np.cumsum(self._in_ptr, out=self._in_ptr)
        self._cache = {}

    @property
    def n_edges(self):
        return int(self.src.size)

    def out_neighbors(self, u):
        """(target ids, probabilities) of u's out-edges; p part is None if unweighted."""
        lo, hi = self._out_ptr[u], self._out_ptr[u + 1]
        ps = None if self.p is None else self.p[lo:hi]
        return self.dst[lo:hi], ps

    def in_neighbors(self, v):
        """(source ids, probabilities) of v's in-edges."""
        lo, hi = self._in_ptr[v], self._in_ptr[v + 1]
        idx = self._in_edge[lo:hi]
        ps = None if self.p is None else self.p[idx]
        return self.src[idx], ps

    def out_degrees(self):
        return np.diff(self._out_ptr)

    def in_degrees(self):
        return np.diff(self._in_ptr)

    def edge_set(self):
        return set(zip(self.src.tolist(), self.dst.tolist()))

    def with_weights(self, scheme: EdgeWeightScheme) -> "Graph":
        """New graph with probabilities assigned by the scheme."""
        if scheme.kind == "in-degree":
            indeg = self.in_degrees()
            p = 1.0 / indeg[self.dst]
        elif scheme.kind == "constant":
            p = np.full(self.n_edges, scheme.value)
        else:
            if self.p is None:
                raise ValueError("from-file scheme needs per-edge probabilities")
            p = self.p
        return Graph(self.n, self.src, self.dst, p, self.labels)

    def content_hash(self):
        """Stable hex digest of (n, edges, weights); used for cache keys."""
        h = hashlib.sha256()
        h.update(np.int64(self.n).tobytes())
        h.update(self.src.tobytes())
        h.update(self.dst.tobytes())
        h.update(b"unweighted" if self.p is None else self.p.tobytes())
        return h.hexdigest()

    def __repr__(self):
        w = "unweighted" if self.p is None else "weighted"
        return f"Graph(n={self.n}, edges={self.n_edges}, {w})"


def _parse_line(lineno, line, want_p):
    parts = line.split()
    if len(parts) not in (2, 3):
        raise EdgeListParseError(lineno, f"expected 'u v' or 'u v p', got {line!r}")
    try:
        u, v = int(parts[0]), int(parts[1])
    except ValueError:
        raise EdgeListParseError(lineno, f"node ids must be integers, got {line!r}") from None
    if u < 0 or v < 0:
        raise EdgeListParseError(lineno, "node ids must be non-negative")
    p = None
    if len(parts) == 3:
        try:
            p = float(parts[2])
        except ValueError:
            raise EdgeListParseError(lineno, f"bad probability {parts[2]!r}") from None
        if not (0.0 <= p <= 1.0):
            raise ValueError(f"line {lineno}: probability {p} outside [0,1]")
    elif want_p:
        raise EdgeListParseError(lineno, "from-file scheme requires a third column")
    return u, v, p


def load_edge_list(source, directed=True, scheme=EdgeWeightScheme.in_degree()) -> Graph:
    """Build a Graph from an edge-list text stream.

    Lines are "u v" or "u v p"; '#' starts a comment. Undirected input
    doubles each edge into (u,v) and (v,u). Duplicate directed edges keep
    the first occurrence. Self-loops are dropped with a warning. Weights
    are assigned by the scheme once all edges are loaded.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    want_p = scheme.kind == "from-file"
    seen = {}
    for lineno, raw in enumerate(source, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        u, v, p = _parse_line(lineno, line, want_p)
        if u == v:
            warnings.warn(f"line {lineno}: dropping self-loop ({u},{u})", stacklevel=2)
            continue
        if (u, v) not in seen:
            seen[(u, v)] = p
        if not directed and (v, u) not in seen:
            seen[(v, u)] = p

    if not seen:
        return Graph(0, [], [], p=[])

    ids = sorted({u for e in seen for u in e})
    remap = {orig: i for i, orig in enumerate(ids)}
    src = np.array([remap[u] for u, _ in seen], dtype=np.int64)
    dst = np.array([remap[v] for _, v in seen], dtype=np.int64)
    p = np.array([seen[e] for e in seen], dtype=np.float64) if want_p else None
    g = Graph(len(ids), src, dst, p, labels=np.array(ids, dtype=np.int64))
    return g.with_weights(scheme)


def dump_edge_list(g: Graph, sink) -> None:
    """Write the graph in the same text format, weights included."""
    close = False
    if isinstance(sink, str):
        sink = open(sink, "w")
        close = True
    try:
        sink.write(f"# nodes: {g.n}  edges: {g.n_edges}\n")
        for i in range(g.n_edges):
            u = g.labels[g.src[i]]
            v = g.labels[g.dst[i]]
            if g.p is None:
                sink.write(f"{u} {v}\n")
            else:
                sink.write(f"{u} {v} {g.p[i]:.17g}\n")
    finally:
        if close:
            sink.close()


def write_graph(g: Graph, path, scheme=None) -> None:
    """Write edge list plus the sidecar meta file declaring the format."""
    dump_edge_list(g, str(path))
    with open(str(path) + ".meta", "w") as fh:
        fh.write("directed = true\n")
        fh.write(f"scheme = {'from-file' if g.p is not None else scheme or 'in-degree'}\n")


def read_graph(path) -> Graph:
    """Load a graph written by write_graph, honoring its sidecar."""
    directed, scheme = True, EdgeWeightScheme.from_file()
    try:
        with open(str(path) + ".meta") as fh:
            for line in fh:
                if "=" not in line:
                    continue
                key, val = (part.strip() for part in line.split("=", 1))
                if key == "directed":
                    directed = val.lower() in ("true", "1", "yes")
                elif key == "scheme":
                    scheme = EdgeWeightScheme.parse(val)
    except FileNotFoundError:
        pass
    with open(path) as fh:
        return load_edge_list(fh, directed=directed, scheme=scheme)


def generate_er(n, p_edge, rng) -> Graph:
    """Erdos-Renyi: each unordered pair kept with probability p_edge, then
    doubled into two directed edges. Weights stay unset until a scheme is
    applied with Graph.with_weights."""
    if n < 2:
        raise ValueError("ER generation needs at least 2 nodes")
    if not (0.0 <= p_edge <= 1.0):
        raise ValueError("edge probability must lie in [0,1]")
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < p_edge
    a, b = iu[keep], ju[keep]
    src = np.concatenate([a, b])
    dst = np.concatenate([b, a])
    return Graph(n, src, dst)


def r_hop_out_neighbors(g: Graph, u, r) -> set:
    """All nodes reachable from u within r out-hops, excluding u itself."""
    if not (0 <= u < g.n):
        raise ValueError(f"node {u} out of range")
    if r < 1:
        raise ValueError("hop count must be >= 1")
    seen = {u}
    frontier = [u]
    found = set()
    for _ in range(r):
        nxt = []
        for w in frontier:
            ids, _ = g.out_neighbors(w)
            for v in ids.tolist():
                if v not in seen:
                    seen.add(v)
                    found.add(v)
                    nxt.append(v)
        if not nxt:
            break
        frontier = nxt
    return found
