"""Dense float64 tensors on a reverse-mode tape, with a parameter store,
Adam updates, checkpoint IO, and finite-difference gradient verification.

Everything is double precision. A forward computation builds Node objects
whose parents carry vector-Jacobian closures; backward() walks the graph
in reverse topological order. Inside no_grad() no parents are recorded,
which is the cheap path used for inference.
"""

import hashlib
import json
import struct
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np


class ShapeError(ValueError):
    """Operand shapes incompatible for an operation."""


_grad_enabled = True


@contextmanager
def no_grad():
    """Compute values without recording the tape."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Node:
    """A float64 array plus the links needed to backpropagate through it."""

    __slots__ = ("value", "parents", "grad", "param_name")

    def __init__(self, value, parents=()):
        self.value = np.asarray(value, dtype=np.float64)
        self.parents = parents if _grad_enabled else ()
        self.grad = None
        self.param_name = None

    @property
    def shape(self):
        return self.value.shape

    def item(self):
        return float(self.value)

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return neg(self)

    def __repr__(self):
        return f"Node(shape={self.value.shape}, leaf={not self.parents})"


def as_node(x) -> Node:
    return x if isinstance(x, Node) else Node(x)


def constant(x) -> Node:
    """A node that never receives gradient (no parents, no param tag)."""
    return Node(x)


def _make(value, *parents):
    if _grad_enabled:
        return Node(value, parents)
    return Node(value)


def _check(cond, op, detail):
    if not cond:
        raise ShapeError(f"{op}: {detail}")


# --- elementwise and linear ops ---


def add(a, b) -> Node:
    a, b = as_node(a), as_node(b)
    _check(a.shape == b.shape, "add", f"{a.shape} vs {b.shape}")
    return _make(a.value + b.value, (a, lambda g: g), (b, lambda g: g))


def sub(a, b) -> Node:
    a, b = as_node(a), as_node(b)
    _check(a.shape == b.shape, "sub", f"{a.shape} vs {b.shape}")
    return _make(a.value - b.value, (a, lambda g: g), (b, lambda g: -g))


def neg(a) -> Node:
    a = as_node(a)
    return _make(-a.value, (a, lambda g: -g))


def mul(a, b) -> Node:
    """Elementwise product; either side may be a 0-d scalar node."""
    a, b = as_node(a), as_node(b)
    _check(
        a.shape == b.shape or a.shape == () or b.shape == (),
        "mul",
        f"{a.shape} vs {b.shape}",
    )
    av, bv = a.value, b.value

    def da(g):
        return (g * bv).sum() if a.shape == () and b.shape != () else g * bv

    def db(g):
        return (g * av).sum() if b.shape == () and a.shape != () else g * av

    return _make(av * bv, (a, da), (b, db))


def div(a, b) -> Node:
    a, b = as_node(a), as_node(b)
    _check(a.shape == b.shape, "div", f"{a.shape} vs {b.shape}")
    av, bv = a.value, b.value
    out = av / bv
    return _make(out, (a, lambda g: g / bv), (b, lambda g: -g * out / bv))


def scale(a, c: float) -> Node:
    a = as_node(a)
    c = float(c)
    return _make(a.value * c, (a, lambda g: g * c))


def scale_add(alpha: float, x, beta: float, y) -> Node:
    """alpha*x + beta*y with python-float coefficients."""
    x, y = as_node(x), as_node(y)
    _check(x.shape == y.shape, "scale_add", f"{x.shape} vs {y.shape}")
    alpha, beta = float(alpha), float(beta)
    return _make(
        alpha * x.value + beta * y.value,
        (x, lambda g: alpha * g),
        (y, lambda g: beta * g),
    )


def matmul(a, b) -> Node:
    a, b = as_node(a), as_node(b)
    _check(a.value.ndim == 2 and b.value.ndim == 2, "matmul", "needs two 2-d operands")
    _check(a.shape[1] == b.shape[0], "matmul", f"{a.shape} vs {b.shape}")
    av, bv = a.value, b.value
    return _make(av @ bv, (a, lambda g: g @ bv.T), (b, lambda g: av.T @ g))


def matvec(a, x) -> Node:
    a, x = as_node(a), as_node(x)
    _check(a.value.ndim == 2 and x.value.ndim == 1, "matvec", "needs (m,k) @ (k,)")
    _check(a.shape[1] == x.shape[0], "matvec", f"{a.shape} vs {x.shape}")
    av, xv = a.value, x.value
    return _make(av @ xv, (a, lambda g: np.outer(g, xv)), (x, lambda g: av.T @ g))


def dot(x, y) -> Node:
    x, y = as_node(x), as_node(y)
    _check(x.value.ndim == 1 and x.shape == y.shape, "dot", f"{x.shape} vs {y.shape}")
    xv, yv = x.value, y.value
    return _make(xv @ yv, (x, lambda g: g * yv), (y, lambda g: g * xv))


def transpose(a) -> Node:
    a = as_node(a)
    _check(a.value.ndim == 2, "transpose", "needs a 2-d operand")
    return _make(a.value.T, (a, lambda g: g.T))


def concat(xs, axis=0) -> Node:
    xs = [as_node(x) for x in xs]
    _check(len(xs) > 0, "concat", "needs at least one operand")
    out = np.concatenate([x.value for x in xs], axis=axis)
    offsets = np.cumsum([0] + [x.shape[axis] for x in xs])

    def slicer(i):
        lo, hi = offsets[i], offsets[i + 1]

        def back(g):
            index = [slice(None)] * g.ndim
            index[axis] = slice(lo, hi)
            return g[tuple(index)]

        return back

    return _make(out, *((x, slicer(i)) for i, x in enumerate(xs)))


def stack(xs) -> Node:
    """Scalars -> 1-d vector."""
    xs = [as_node(x) for x in xs]
    for x in xs:
        _check(x.shape == (), "stack", "operands must be scalars")
    out = np.array([x.value for x in xs])
    return _make(out, *((x, (lambda i: lambda g: g[i])(i)) for i, x in enumerate(xs)))


def total(x) -> Node:
    x = as_node(x)
    xv = x.value
    return _make(xv.sum(), (x, lambda g: np.broadcast_to(g, xv.shape).copy()))


def sum_rows(x) -> Node:
    """(m, l) -> (l,) column sums."""
    x = as_node(x)
    _check(x.value.ndim == 2, "sum_rows", "needs a 2-d operand")
    m = x.shape[0]
    return _make(x.value.sum(axis=0), (x, lambda g: np.broadcast_to(g, (m,) + g.shape).copy()))


def row(x, i) -> Node:
    x = as_node(x)
    i = int(i)

    def back(g):
        out = np.zeros_like(x.value)
        out[i] = g
        return out

    return _make(x.value[i], (x, back))


def gather_rows(x, idx) -> Node:
    """x[idx] along axis 0; repeated indices sum in the backward pass."""
    x = as_node(x)
    idx = np.asarray(idx, dtype=np.int64)

    def back(g):
        out = np.zeros_like(x.value)
        np.add.at(out, idx, g)
        return out

    return _make(x.value[idx], (x, back))


def segment_sum(x, seg, num) -> Node:
    """out[seg[i]] += x[i] over axis 0; rows with no members stay zero."""
    x = as_node(x)
    seg = np.asarray(seg, dtype=np.int64)
    _check(seg.shape == (x.shape[0],), "segment_sum", "one segment id per row")
    xv = x.value
    if xv.ndim == 1:
        out = np.bincount(seg, weights=xv, minlength=num)
    else:
        out = np.zeros((num,) + xv.shape[1:])
        np.add.at(out, seg, xv)
    return _make(out, (x, lambda g: g[seg]))


def spmatmul(m, x, mt=None) -> Node:
    """Constant (sparse) matrix times a node: m @ x, differentiable in x.

    Used for neighborhood gather/scatter with per-graph incidence
    matrices; pass mt (the transpose, pre-converted) to avoid rebuilding
    it in every backward pass.
    """
    x = as_node(x)
    out = m @ x.value
    if mt is None and _grad_enabled:
        mt = m.T
    return _make(out, (x, lambda g: mt @ g))


def tile_rows(x, m) -> Node:
    """(l,) -> (m, l) repeated rows."""
    x = as_node(x)
    _check(x.value.ndim == 1, "tile_rows", "needs a 1-d operand")
    return _make(
        np.broadcast_to(x.value, (m, x.shape[0])).copy(), (x, lambda g: g.sum(axis=0))
    )


def tile_cols(x, l) -> Node:
    """(m,) -> (m, l) repeated columns."""
    x = as_node(x)
    _check(x.value.ndim == 1, "tile_cols", "needs a 1-d operand")
    return _make(np.repeat(x.value[:, None], l, axis=1), (x, lambda g: g.sum(axis=1)))


def scale_rows(v, x) -> Node:
    """out[i, :] = v[i] * x[i, :]."""
    v, x = as_node(v), as_node(x)
    _check(x.value.ndim == 2 and v.shape == (x.shape[0],), "scale_rows", f"{v.shape} vs {x.shape}")
    vv, xv = v.value, x.value
    return _make(
        xv * vv[:, None],
        (v, lambda g: (g * xv).sum(axis=1)),
        (x, lambda g: g * vv[:, None]),
    )


def exp(x) -> Node:
    x = as_node(x)
    out = np.exp(x.value)
    return _make(out, (x, lambda g: g * out))


def log(x) -> Node:
    x = as_node(x)
    xv = x.value
    return _make(np.log(xv), (x, lambda g: g / xv))


def sigmoid(x) -> Node:
    x = as_node(x)
    xv = x.value
    t = np.exp(-np.abs(xv))
    out = np.where(xv >= 0, 1.0 / (1.0 + t), t / (1.0 + t))
    return _make(out, (x, lambda g: g * out * (1.0 - out)))


def relu(x) -> Node:
    x = as_node(x)
    mask = x.value > 0
    return _make(np.where(mask, x.value, 0.0), (x, lambda g: g * mask))


def leaky_relu(x, slope=0.2) -> Node:
    x = as_node(x)
    slope = float(slope)
    mask = x.value > 0
    coeff = np.where(mask, 1.0, slope)
    return _make(x.value * coeff, (x, lambda g: g * coeff))


def softmax(x) -> Node:
    """Softmax over a 1-d vector."""
    x = as_node(x)
    _check(x.value.ndim == 1 and x.shape[0] > 0, "softmax", "needs a non-empty vector")
    shifted = x.value - x.value.max()
    e = np.exp(shifted)
    out = e / e.sum()
    return _make(out, (x, lambda g: out * (g - (g * out).sum())))


def softmax_over_list(values) -> Node:
    """Normalize an arbitrary-length list of scalars (or a 1-d node)."""
    if isinstance(values, Node):
        return softmax(values)
    if isinstance(values, (list, tuple)):
        return softmax(stack(values))
    return softmax(as_node(values))


def segment_softmax(x, seg, num) -> Node:
    """Softmax within each segment of a 1-d score vector.

    The per-segment max is treated as a constant shift (softmax is
    shift-invariant), so gradients are exact.
    """
    x = as_node(x)
    seg = np.asarray(seg, dtype=np.int64)
    shift = np.full(num, -np.inf)
    np.maximum.at(shift, seg, x.value)
    e = exp(sub(x, constant(shift[seg])))
    denom = segment_sum(e, seg, num)
    return div(e, gather_rows(denom, seg))


# --- backward pass ---


def _topo(loss):
    order = []
    visited = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent, _ in node.parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(loss, store=None):
    """Backpropagate from a scalar loss; optionally accumulate into a store.

    Parameters that did not participate in the computation keep their
    current (zero after zero_grads) gradient.
    """
    loss = as_node(loss)
    if loss.value.shape != ():
        raise ValueError(f"loss must be scalar, got shape {loss.value.shape}")
    order = _topo(loss)
    for node in order:
        node.grad = None
    loss.grad = np.ones(())
    for node in reversed(order):
        g = node.grad
        if g is None:
            continue
        for parent, vjp in node.parents:
            pg = vjp(g)
            parent.grad = pg if parent.grad is None else parent.grad + pg
    if store is not None:
        for node in order:
            if node.param_name is not None and node.grad is not None:
                store.grads[node.param_name] += node.grad


# --- parameter store ---


class ParamStore:
    """Named float64 parameter tensors with matching gradient buffers."""

    def __init__(self):
        self.params = {}
        self.grads = {}

    def add(self, name, value):
        if name in self.params:
            raise ValueError(f"parameter {name!r} already exists")
        arr = np.array(value, dtype=np.float64)
        self.params[name] = arr
        self.grads[name] = np.zeros_like(arr)
        return arr

    def init_uniform(self, name, shape, rng, fan_in=None):
        """Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)]; fan_in defaults to
        the trailing dimension (or 1 for scalars)."""
        shape = tuple(shape)
        if fan_in is None:
            fan_in = shape[-1] if shape else 1
        bound = 1.0 / np.sqrt(fan_in)
        return self.add(name, rng.uniform(-bound, bound, size=shape))

    def leaf(self, name) -> Node:
        node = Node(self.params[name])
        node.param_name = name
        return node

    def names(self):
        return list(self.params)

    def __contains__(self, name):
        return name in self.params

    def __getitem__(self, name):
        return self.params[name]

    def set_(self, name, value):
        arr = np.asarray(value, dtype=np.float64)
        if arr.shape != self.params[name].shape:
            raise ShapeError(f"set_: {arr.shape} vs {self.params[name].shape}")
        self.params[name][...] = arr

    def zero_grads(self):
        for g in self.grads.values():
            g[...] = 0.0

    def scale_grads(self, c):
        for g in self.grads.values():
            g *= c

    def copy(self) -> "ParamStore":
        other = ParamStore()
        for name, value in self.params.items():
            other.add(name, value.copy())
            other.grads[name][...] = self.grads[name]
        return other

    def state_hash(self) -> str:
        h = hashlib.sha256()
        for name in sorted(self.params):
            h.update(name.encode())
            h.update(np.asarray(self.params[name].shape, dtype=np.int64).tobytes())
            h.update(self.params[name].tobytes())
        return h.hexdigest()

    # checkpoint format: magic, version, manifest length, JSON manifest
    # (names/shapes in order plus free-form meta), then row-major '<f8' data.
    MAGIC = b"SQCK"
    VERSION = 1

    def save(self, path, meta=None):
        manifest = {
            "params": [{"name": k, "shape": list(v.shape)} for k, v in self.params.items()],
            "meta": meta or {},
        }
        blob = json.dumps(manifest).encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(self.MAGIC)
            fh.write(struct.pack("<IQ", self.VERSION, len(blob)))
            fh.write(blob)
            for value in self.params.values():
                fh.write(np.ascontiguousarray(value, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path):
        """Returns (store, meta)."""
        with open(path, "rb") as fh:
            if fh.read(4) != cls.MAGIC:
                raise ValueError(f"{path} is not a parameter checkpoint")
            version, manifest_len = struct.unpack("<IQ", fh.read(12))
            if version != cls.VERSION:
                raise ValueError(f"unsupported checkpoint version {version}")
            manifest = json.loads(fh.read(manifest_len).decode("utf-8"))
            store = cls()
            for entry in manifest["params"]:
                shape = tuple(entry["shape"])
                count = int(np.prod(shape)) if shape else 1
                data = np.frombuffer(fh.read(8 * count), dtype="<f8").reshape(shape)
                store.add(entry["name"], data)
        return store, manifest.get("meta", {})


# --- optimizer ---


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    @classmethod
    def for_store(cls, store, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        state = cls(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
        for name, value in store.params.items():
            state.m[name] = np.zeros_like(value)
            state.v[name] = np.zeros_like(value)
        return state


def adam_step(store, state):
    """One bias-corrected Adam update; gradients are zeroed afterwards."""
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for name, p in store.params.items():
        g = store.grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    store.zero_grads()


# --- gradient verification ---


@dataclass(frozen=True)
class FdCheckResult:
    max_rel_error: float
    param: str
    index: tuple


def finite_difference_check(f, store, h=1e-5, param_names=None) -> FdCheckResult:
    """Compare backward() gradients of f(store) against central differences.

    Relative error per coordinate is |fd - an| / max(|fd|, |an|, 1), so
    coordinates where both gradients are tiny are compared absolutely.
    """
    names = list(param_names) if param_names is not None else store.names()
    store.zero_grads()
    loss = f(store)
    backward(loss, store)
    analytic = {name: store.grads[name].copy() for name in names}
    store.zero_grads()

    def value():
        with no_grad():
            out = f(store)
        return float(as_node(out).value)

    worst = FdCheckResult(0.0, "", ())
    for name in names:
        p = store.params[name]
        it = np.nditer(p, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            orig = p[idx]
            p[idx] = orig + h
            up = value()
            p[idx] = orig - h
            down = value()
            p[idx] = orig
            fd = (up - down) / (2.0 * h)
            an = float(analytic[name][idx]) if analytic[name].shape else float(analytic[name])
            err = abs(fd - an) / max(abs(fd), abs(an), 1.0)
            if err > worst.max_rel_error:
                worst = FdCheckResult(err, name, idx)
            it.iternext()
    return worst
