"""Define-by-run reverse-mode differentiation over NumPy arrays.

A :class:`Tape` records every operation whose inputs depend on a registered
parameter. Operations on constants only are evaluated eagerly and never
recorded, which is also how gradient flow is stopped: pass a plain array (or
``stop_gradient(t)``) and nothing upstream of it receives a gradient.

Only the primitives the partitioning model needs are provided.
"""

from __future__ import annotations

import math
import weakref

import numpy as np
import scipy.sparse as sp

from . import kernels


class NonFiniteError(FloatingPointError):
    """A primitive produced or received a NaN or infinity."""


class Tensor:
    __slots__ = ("value", "_tape", "parents", "backward_fn", "requires_grad", "name", "index")

    __array_priority__ = 100.0

    def __init__(self, value, tape=None, parents=(), backward_fn=None,
                 requires_grad=False, name=None):
        self.value = value
        # weak, so a dropped tape is freed at once instead of waiting for the cycle collector
        self._tape = None if tape is None else weakref.ref(tape)
        self.parents = parents
        self.backward_fn = backward_fn
        self.requires_grad = requires_grad
        self.name = name
        self.index = -1

    @property
    def tape(self):
        return None if self._tape is None else self._tape()

    @property
    def shape(self):
        return self.value.shape

    @property
    def T(self):
        return transpose(self)

    def item(self) -> float:
        if self.value.size != 1:
            raise ValueError(f"item() needs a single element, tensor has shape {self.value.shape}")
        return float(self.value.reshape(-1)[0])

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.value.shape}, requires_grad={self.requires_grad})"

    def __add__(self, o):
        return add(self, o)

    def __radd__(self, o):
        return add(o, self)

    def __sub__(self, o):
        return sub(self, o)

    def __rsub__(self, o):
        return sub(o, self)

    def __mul__(self, o):
        return mul(self, o)

    def __rmul__(self, o):
        return mul(o, self)

    def __truediv__(self, o):
        return div(self, o)

    def __rtruediv__(self, o):
        return div(o, self)

    def __matmul__(self, o):
        return matmul(self, o)

    def __rmatmul__(self, o):
        return matmul(o, self)

    def __neg__(self):
        return mul(self, -1.0)


class Tape:
    """Ordered record of differentiable operations plus a parameter registry."""

    def __init__(self, check_finite: bool = True):
        self.nodes: list[Tensor] = []
        self.params: dict[str, Tensor] = {}
        self.check_finite = check_finite

    def parameter(self, name: str, value) -> Tensor:
        if name in self.params:
            raise KeyError(f"parameter {name!r} already registered on this tape")
        arr = np.array(value, dtype=np.float64)
        _check(arr, f"parameter {name!r}")
        t = Tensor(arr, tape=self, requires_grad=True, name=name)
        self._push(t)
        self.params[name] = t
        return t

    def _push(self, t: Tensor) -> None:
        t.index = len(self.nodes)
        self.nodes.append(t)

    def __len__(self):
        return len(self.nodes)


def _check(arr, what):
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"non-finite values in {what}")


def as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=np.float64))


def stop_gradient(x) -> Tensor:
    return Tensor(as_tensor(x).value)


def _record(op, value, parents, backward_fn):
    tape = None
    for p in parents:
        if p.requires_grad:
            tape = p.tape
            if tape is None:
                raise RuntimeError(f"{op}: operand belongs to a tape that no longer exists")
            break
    if tape is None:
        return Tensor(value)
    if tape.check_finite:
        _check(value, op)
    t = Tensor(value, tape=tape, parents=parents, backward_fn=backward_fn,
               requires_grad=True, name=op)
    tape._push(t)
    return t


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, dim in enumerate(shape):
        if dim == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _binary_shapes(op, a, b):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ValueError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


# -- elementwise ----------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _binary_shapes("add", a, b)
    return _record("add", a.value + b.value, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _binary_shapes("sub", a, b)
    return _record("sub", a.value - b.value, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _binary_shapes("mul", a, b)
    av, bv = a.value, b.value
    return _record("mul", av * bv, (a, b),
                   lambda g: (_unbroadcast(g * bv, a.shape), _unbroadcast(g * av, b.shape)))


def div(a, b) -> Tensor:
    """Exact elementwise quotient; callers guard the denominator."""
    a, b = as_tensor(a), as_tensor(b)
    _binary_shapes("div", a, b)
    av, bv = a.value, b.value
    out = av / bv

    def back(g):
        return _unbroadcast(g / bv, a.shape), _unbroadcast(-g * out / bv, b.shape)

    return _record("div", out, (a, b), back)


def square(a) -> Tensor:
    a = as_tensor(a)
    av = a.value
    return _record("square", av * av, (a,), lambda g: (2.0 * av * g,))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    y = np.tanh(a.value)
    return _record("tanh", y, (a,), lambda g: (g * (1.0 - y * y),))


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.value > 0
    return _record("relu", np.where(mask, a.value, 0.0), (a,), lambda g: (g * mask,))


def clamp_min(a, lo: float) -> Tensor:
    """max(a, lo); the gradient passes only where ``a > lo``."""
    a = as_tensor(a)
    mask = a.value > lo
    return _record("clamp_min", np.where(mask, a.value, lo), (a,), lambda g: (g * mask,))


# -- shape / reductions ------------------------------------------------------------

def transpose(a) -> Tensor:
    a = as_tensor(a)
    return _record("transpose", a.value.T, (a,), lambda g: (g.T,))


def reduce_sum(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    shape = a.shape
    out = a.value.sum(axis=axis, keepdims=keepdims)

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return _record("reduce_sum", np.asarray(out, dtype=np.float64), (a,), back)


def accurate_sum(a) -> Tensor:
    """Sum of all entries, correctly rounded (``math.fsum``)."""
    a = as_tensor(a)
    shape = a.shape
    out = math.fsum(a.value.ravel())
    return _record("accurate_sum", np.asarray(out, dtype=np.float64), (a,),
                   lambda g: (np.broadcast_to(g, shape).copy(),))


def concat_cols(parts) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    rows = {p.shape[0] for p in parts}
    if len(rows) != 1:
        raise ValueError(f"concat_cols: row counts differ {sorted(rows)}")
    widths = [p.shape[1] for p in parts]
    cuts = np.cumsum(widths)[:-1]
    return _record("concat_cols", np.concatenate([p.value for p in parts], axis=1), tuple(parts),
                   lambda g: tuple(np.split(g, cuts, axis=1)))


def take_rows(a, idx) -> Tensor:
    a = as_tensor(a)
    idx = np.asarray(idx, dtype=np.int64)
    shape = a.shape

    def back(g):
        out = np.zeros(shape)
        np.add.at(out, idx, g)
        return (out,)

    return _record("take_rows", a.value[idx], (a,), back)


# -- linear algebra ---------------------------------------------------------------

def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.value.ndim != 2 or b.value.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul: incompatible shapes {a.shape} @ {b.shape}")
    av, bv = a.value, b.value
    return _record("matmul", av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g))


def sparse_dense_matmul(s, b) -> Tensor:
    """``s @ b`` for a constant scipy sparse ``s``."""
    b = as_tensor(b)
    if not sp.issparse(s):
        raise TypeError("sparse_dense_matmul expects a scipy sparse matrix")
    if s.shape[1] != b.shape[0]:
        raise ValueError(f"sparse_dense_matmul: incompatible shapes {s.shape} @ {b.shape}")
    st = s.T.tocsr()
    return _record("sparse_dense_matmul", np.asarray(s @ b.value), (b,),
                   lambda g: (np.asarray(st @ g),))


# -- row-wise composites ------------------------------------------------------------

def row_softmax(a) -> Tensor:
    a = as_tensor(a)
    z = a.value - a.value.max(axis=1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=1, keepdims=True)
    return _record("row_softmax", y, (a,),
                   lambda g: (y * (g - (g * y).sum(axis=1, keepdims=True)),))


def l2_normalize_rows(a, eps: float = 1e-12) -> Tensor:
    """Divide each row by ``max(||row||_2, eps)``; all-zero rows stay zero."""
    a = as_tensor(a)
    norm = np.sqrt((a.value * a.value).sum(axis=1, keepdims=True))
    r = np.maximum(norm, eps)
    y = a.value / r
    live = norm > eps

    def back(g):
        proj = (g * y).sum(axis=1, keepdims=True)
        return (np.where(live, g - y * proj, g) / r,)

    return _record("l2_normalize_rows", y, (a,), back)


def row_maxpool_over_sets(a, indptr, indices) -> Tensor:
    """Row ``i`` of the result is the elementwise max of ``a[j]`` for j in set i.

    Sets are given in CSR form. An empty set yields a zero row.
    """
    a = as_tensor(a)
    av = np.ascontiguousarray(a.value)
    indptr = np.ascontiguousarray(indptr, dtype=np.int64)
    indices = np.ascontiguousarray(indices, dtype=np.int64)
    out, arg = kernels.maxpool_sets(indptr, indices, av)
    nrows = a.shape[0]
    return _record("row_maxpool_over_sets", out, (a,),
                   lambda g: (kernels.maxpool_sets_grad(arg, np.ascontiguousarray(g), nrows),))


def edge_pair_sum(p, q, src, dst, w) -> Tensor:
    """Scalar ``sum_e w_e * <p[src_e], q[dst_e]>`` over an edge list."""
    p, q = as_tensor(p), as_tensor(q)
    if p.shape != q.shape:
        raise ValueError(f"edge_pair_sum: shapes differ {p.shape} vs {q.shape}")
    pv = np.ascontiguousarray(p.value)
    qv = np.ascontiguousarray(q.value)
    total = kernels.edge_pair_sum(src, dst, w, pv, qv)

    def back(g):
        return kernels.edge_pair_grad(src, dst, w, pv, qv, float(g))

    return _record("edge_pair_sum", np.asarray(total, dtype=np.float64), (p, q), back)


# -- reverse pass ---------------------------------------------------------------------

def backward(tape: Tape, output: Tensor, wrt=None) -> dict[str, np.ndarray]:
    """Gradients of a scalar ``output`` with respect to registered parameters.

    Returns ``{name: gradient}`` for every name in ``wrt`` (default: all
    parameters on the tape). Parameters with no path to the output get zeros.
    """
    names = list(tape.params) if wrt is None else list(wrt)
    for nm in names:
        if nm not in tape.params:
            raise KeyError(f"{nm!r} is not a parameter registered on this tape")
    if output.value.size != 1:
        raise ValueError(f"backward needs a scalar output, got shape {output.shape}")
    grads: dict[str, np.ndarray] = {nm: np.zeros_like(tape.params[nm].value) for nm in names}
    if not output.requires_grad:
        return grads
    if output.tape is not tape:
        raise ValueError("output was not recorded on this tape")
    buf: list = [None] * len(tape.nodes)
    buf[output.index] = np.ones_like(output.value)
    for node in reversed(tape.nodes[: output.index + 1]):
        g = buf[node.index]
        if g is None or node.backward_fn is None:
            continue
        for parent, pg in zip(node.parents, node.backward_fn(g)):
            if not parent.requires_grad:
                continue
            cur = buf[parent.index]
            buf[parent.index] = pg if cur is None else cur + pg
    for nm in names:
        g = buf[tape.params[nm].index]
        if g is not None:
            grads[nm] = np.asarray(g, dtype=np.float64).reshape(tape.params[nm].shape)
    return grads


def finite_difference_check(build, params: dict, names=None, step: float = 1e-5) -> float:
    """Worst relative error between :func:`backward` and central differences.

    ``build(tape, tensors)`` must construct the scalar objective from the
    parameter tensors in ``tensors``. The error per coordinate is
    ``|a - b| / max(|a|, |b|, 1e-8)``.
    """
    if not step > 0:
        raise ValueError(f"finite-difference step must be > 0, got {step}")
    params = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    names = list(params) if names is None else ([names] if isinstance(names, str) else list(names))

    def evaluate(vals):
        tape = Tape(check_finite=False)
        ts = {k: tape.parameter(k, v) for k, v in vals.items()}
        return tape, build(tape, ts)

    tape, out = evaluate(params)
    analytic = backward(tape, out, wrt=names)
    worst = 0.0
    for nm in names:
        base = params[nm]
        flat = base.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            hi = float(evaluate(params)[1].value)
            flat[i] = orig - step
            lo = float(evaluate(params)[1].value)
            flat[i] = orig
            num = (hi - lo) / (2.0 * step)
            a = float(analytic[nm].reshape(-1)[i])
            err = abs(a - num) / max(abs(a), abs(num), 1e-8)
            worst = max(worst, err)
    return worst
