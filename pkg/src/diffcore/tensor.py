"""Reverse-mode automatic differentiation over dense float64 tensors.

A ``Graph`` is a tape: every primitive appends one node in creation order,
which is always a valid topological order, and ``backward`` walks the tape in
reverse visiting each node exactly once. Leaves are either named parameters
bound from a parameter store or constants.

All values are float64. Every primitive checks that its output is finite and
that operand shapes are compatible, raising ``NonFiniteError`` /
``ShapeError`` otherwise.
"""

from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from src.core.errors import NonFiniteError, ShapeError
from src.core.rng import RNG

BackwardFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]
Scalar = Union[float, int]


class Tensor:
    """A node of a computation graph holding a float64 array."""

    __slots__ = ("data", "requires_grad", "name", "op", "graph", "_parents", "_backward")

    def __init__(
        self,
        data: np.ndarray,
        graph: "Graph",
        requires_grad: bool = False,
        name: Optional[str] = None,
        op: str = "leaf",
        parents: Tuple["Tensor", ...] = (),
        backward: Optional[BackwardFn] = None,
    ):
        self.data = data
        self.graph = graph
        self.requires_grad = requires_grad
        self.name = name
        self.op = op
        self._parents = parents
        self._backward = backward

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def values(self) -> List[float]:
        """Values in row-major order."""
        return self.data.ravel().tolist()

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError("item", self.shape, detail="tensor is not a scalar")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, op={self.op}{label})"


class Graph:
    """Tape of primitive operations plus the named leaf parameters they read.

    Args:
        params: Mapping of parameter name -> array (usually a ParameterStore).
            Parameters are bound lazily the first time a layer asks for them.
        training: Enables dropout. Evaluation graphs never drop.
        rng: Source of dropout masks; required when ``training`` is True.
    """

    def __init__(self, params: Optional[Mapping[str, np.ndarray]] = None, training: bool = False,
                 rng: Optional[RNG] = None):
        if training and rng is None:
            raise ValueError("A training graph needs an RNG for dropout masks")
        self.training = training
        self.rng = rng
        self.nodes: List[Tensor] = []
        self.params: Dict[str, Tensor] = {}
        self._store = params if params is not None else {}

    def param(self, name: str) -> Tensor:
        """Bind (once) and return the named parameter as a differentiable leaf."""
        bound = self.params.get(name)
        if bound is not None:
            return bound
        if name not in self._store:
            raise KeyError(f"Unknown parameter '{name}'")
        value = np.asarray(self._store[name], dtype=np.float64)
        _check_finite(f"param[{name}]", value)
        leaf = Tensor(value, self, requires_grad=True, name=name)
        self.params[name] = leaf
        return leaf

    def variable(self, name: str, value: np.ndarray) -> Tensor:
        """Register an ad-hoc differentiable leaf (inputs of a gradient check)."""
        value = np.array(value, dtype=np.float64)
        _check_finite(f"variable[{name}]", value)
        leaf = Tensor(value, self, requires_grad=True, name=name)
        self.params[name] = leaf
        return leaf

    def constant(self, value: Union[np.ndarray, Scalar]) -> Tensor:
        """Wrap data that receives no gradient."""
        value = np.asarray(value, dtype=np.float64)
        _check_finite("constant", value)
        return Tensor(value, self)

    def record(self, op: str, data: np.ndarray, parents: Sequence[Tensor], backward: BackwardFn) -> Tensor:
        """Append a primitive's output node to the tape."""
        _check_finite(op, data)
        requires_grad = any(p.requires_grad for p in parents)
        node = Tensor(data, self, requires_grad=requires_grad, op=op, parents=tuple(parents),
                      backward=backward if requires_grad else None)
        self.nodes.append(node)
        return node

    def __len__(self) -> int:
        return len(self.nodes)


# ============================================================================
# HELPERS
# ============================================================================

def _check_finite(op: str, data: np.ndarray) -> None:
    if not np.all(np.isfinite(data)):
        raise NonFiniteError(op)


def _same_graph(op: str, *tensors: Tensor) -> "Graph":
    graph = tensors[0].graph
    for t in tensors[1:]:
        if t.graph is not graph:
            raise ValueError(f"{op}: operands belong to different graphs")
    return graph


def _as_tensor(graph: Graph, value: Union[Tensor, np.ndarray, Scalar]) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return graph.constant(value)


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after NumPy broadcasting."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, dim in enumerate(shape) if dim == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> Tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(op, a.shape, b.shape, detail="not broadcastable") from None


def _normalize_axis(axis: int, ndim: int) -> int:
    return axis + ndim if axis < 0 else axis


# ============================================================================
# PRIMITIVES
# ============================================================================

def matmul(a: Tensor, b: Tensor, transpose_b: bool = False) -> Tensor:
    """Batched matrix product ``a @ b`` (or ``a @ b^T``) with leading-dim broadcasting."""
    graph = _same_graph("matmul", a, b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError("matmul", a.shape, b.shape, detail="operands need at least 2 dimensions")
    bm = np.swapaxes(b.data, -1, -2) if transpose_b else b.data
    if a.shape[-1] != bm.shape[-2]:
        raise ShapeError("matmul", a.shape, b.shape, detail="inner dimensions differ")
    try:
        np.broadcast_shapes(a.shape[:-2], bm.shape[:-2])
    except ValueError:
        raise ShapeError("matmul", a.shape, b.shape, detail="batch dimensions not broadcastable") from None
    out = np.matmul(a.data, bm)

    def backward(g: np.ndarray):
        ga = np.matmul(g, np.swapaxes(bm, -1, -2)) if a.requires_grad else None
        gb = None
        if b.requires_grad:
            gbm = unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), bm.shape)
            gb = np.swapaxes(gbm, -1, -2) if transpose_b else gbm
        return (None if ga is None else unbroadcast(ga, a.shape)), gb

    return graph.record("matmul", out, (a, b), backward)


def add(a: Tensor, b: Union[Tensor, np.ndarray, Scalar]) -> Tensor:
    """Elementwise sum with broadcasting."""
    b = _as_tensor(a.graph, b)
    graph = _same_graph("add", a, b)
    _broadcast_shape("add", a, b)
    out = a.data + b.data

    def backward(g: np.ndarray):
        return unbroadcast(g, a.shape), unbroadcast(g, b.shape)

    return graph.record("add", out, (a, b), backward)


def mul(a: Tensor, b: Union[Tensor, np.ndarray, Scalar]) -> Tensor:
    """Elementwise product with broadcasting."""
    b = _as_tensor(a.graph, b)
    graph = _same_graph("mul", a, b)
    _broadcast_shape("mul", a, b)
    out = a.data * b.data

    def backward(g: np.ndarray):
        ga = unbroadcast(g * b.data, a.shape) if a.requires_grad else None
        gb = unbroadcast(g * a.data, b.shape) if b.requires_grad else None
        return ga, gb

    return graph.record("mul", out, (a, b), backward)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    """Concatenate along ``axis``; all other dimensions must agree."""
    if not tensors:
        raise ValueError("concat: needs at least one tensor")
    graph = _same_graph("concat", *tensors)
    ndim = tensors[0].ndim
    ax = _normalize_axis(axis, ndim)
    for t in tensors[1:]:
        if t.ndim != ndim or any(t.shape[i] != tensors[0].shape[i] for i in range(ndim) if i != ax):
            raise ShapeError("concat", tensors[0].shape, t.shape, detail=f"mismatch off axis {axis}")
    out = np.concatenate([t.data for t in tensors], axis=ax)
    bounds = np.cumsum([t.shape[ax] for t in tensors])[:-1]

    def backward(g: np.ndarray):
        return tuple(np.split(g, bounds, axis=ax))

    return graph.record("concat", out, tuple(tensors), backward)


def split(x: Tensor, sizes: Sequence[int], axis: int = -1) -> List[Tensor]:
    """Split ``x`` into consecutive pieces of the given sizes along ``axis``."""
    ax = _normalize_axis(axis, x.ndim)
    if sum(sizes) != x.shape[ax] or any(s < 0 for s in sizes):
        raise ShapeError("split", x.shape, detail=f"sizes {list(sizes)} do not partition axis {axis}")
    pieces = []
    start = 0
    for size in sizes:
        index = [slice(None)] * x.ndim
        index[ax] = slice(start, start + size)
        index_t = tuple(index)

        def backward(g: np.ndarray, index_t=index_t):
            full = np.zeros_like(x.data)
            full[index_t] = g
            return (full,)

        pieces.append(x.graph.record("split", x.data[index_t].copy(), (x,), backward))
        start += size
    return pieces


def softmax(x: Tensor, mask: Optional[np.ndarray] = None) -> Tensor:
    """Softmax over the last axis.

    ``mask`` is a boolean array broadcastable to ``x`` (True = keep). Masked
    positions behave as logits of minus infinity: they get probability zero
    and receive no gradient. A row with every position masked is an error.
    """
    if mask is not None:
        try:
            keep = np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)
        except ValueError:
            raise ShapeError("softmax", x.shape, np.shape(mask), detail="mask not broadcastable") from None
        if not np.all(keep.any(axis=-1)):
            raise ValueError("softmax: a row is fully masked, softmax is undefined")
        logits = np.where(keep, x.data, -np.inf)
    else:
        keep = None
        logits = x.data
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)

    def backward(g: np.ndarray):
        return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)

    return x.graph.record("softmax", out, (x,), backward)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalise over the last axis, then scale by ``gain`` and shift by ``bias``."""
    graph = _same_graph("layer_norm", x, gain, bias)
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError("layer_norm", x.shape, gain.shape, detail="gain/bias must match the last axis")
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    inv_std = 1.0 / np.sqrt((centered ** 2).mean(axis=-1, keepdims=True) + eps)
    xhat = centered * inv_std
    out = xhat * gain.data + bias.data

    def backward(g: np.ndarray):
        g_xhat = g * gain.data
        gx = inv_std * (g_xhat - g_xhat.mean(axis=-1, keepdims=True)
                        - xhat * (g_xhat * xhat).mean(axis=-1, keepdims=True))
        ggain = (g * xhat).reshape(-1, d).sum(axis=0)
        gbias = g.reshape(-1, d).sum(axis=0)
        return gx, ggain, gbias

    return graph.record("layer_norm", out, (x, gain, bias), backward)


def relu(x: Tensor) -> Tensor:
    out = np.maximum(x.data, 0.0)

    def backward(g: np.ndarray):
        return (g * (x.data > 0),)

    return x.graph.record("relu", out, (x,), backward)


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)

    def backward(g: np.ndarray):
        return (g * (1.0 - out * out),)

    return x.graph.record("tanh", out, (x,), backward)


def exp(x: Tensor) -> Tensor:
    with np.errstate(over="ignore"):
        out = np.exp(x.data)

    def backward(g: np.ndarray):
        return (g * out,)

    return x.graph.record("exp", out, (x,), backward)


def log(x: Tensor) -> Tensor:
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(x.data)

    def backward(g: np.ndarray):
        return (g / x.data,)

    return x.graph.record("log", out, (x,), backward)


def reduce_sum(x: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    out = np.sum(x.data, axis=axis, keepdims=keepdims)

    def backward(g: np.ndarray):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return x.graph.record("sum", np.asarray(out), (x,), backward)


def reduce_mean(x: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    count = x.size if axis is None else x.shape[axis]
    out = np.mean(x.data, axis=axis, keepdims=keepdims)

    def backward(g: np.ndarray):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / count, x.shape).copy(),)

    return x.graph.record("mean", np.asarray(out), (x,), backward)


def affine(x: Tensor, scale: Union[Tensor, Scalar, np.ndarray] = 1.0,
           shift: Union[Tensor, Scalar, np.ndarray] = 0.0) -> Tensor:
    """``x * scale + shift`` with broadcasting; scale and shift may be tensors or constants."""
    scale_t = _as_tensor(x.graph, scale)
    shift_t = _as_tensor(x.graph, shift)
    graph = _same_graph("affine", x, scale_t, shift_t)
    _broadcast_shape("affine", x, scale_t)
    _broadcast_shape("affine", x, shift_t)
    out = x.data * scale_t.data + shift_t.data

    def backward(g: np.ndarray):
        gx = unbroadcast(g * scale_t.data, x.shape) if x.requires_grad else None
        gs = unbroadcast(g * x.data, scale_t.shape) if scale_t.requires_grad else None
        gt = unbroadcast(g, shift_t.shape) if shift_t.requires_grad else None
        return gx, gs, gt

    return graph.record("affine", out, (x, scale_t, shift_t), backward)


def dropout(x: Tensor, rate: float) -> Tensor:
    """Inverted dropout: scale kept units by 1/(1-rate) at train time.

    In evaluation graphs (or with rate 0) the mask is all ones and ``x`` is
    returned unchanged.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    graph = x.graph
    if not graph.training or rate == 0.0:
        return x
    mask = graph.rng.bernoulli(1.0 - rate, size=x.shape) / (1.0 - rate)
    out = x.data * mask

    def backward(g: np.ndarray):
        return (g * mask,)

    return graph.record("dropout", out, (x,), backward)


def sub(a: Tensor, b: Union[Tensor, np.ndarray, Scalar]) -> Tensor:
    """``a - b`` built from add and affine."""
    b = _as_tensor(a.graph, b)
    return add(a, affine(b, -1.0))


PRIMITIVES: Dict[str, Callable[..., object]] = {
    "matmul": matmul,
    "add": add,
    "mul": mul,
    "concat": concat,
    "split": split,
    "softmax": softmax,
    "layer_norm": layer_norm,
    "relu": relu,
    "tanh": tanh,
    "exp": exp,
    "log": log,
    "sum": reduce_sum,
    "mean": reduce_mean,
    "affine": affine,
    "dropout": dropout,
}


def forward_op(op: str, inputs: Sequence[Tensor], **kwargs) -> object:
    """Apply the named primitive to ``inputs``.

    ``concat`` takes the whole input list as its first argument; every other
    primitive takes the inputs positionally.
    """
    if op not in PRIMITIVES:
        raise ValueError(f"Unknown primitive '{op}'. Known: {sorted(PRIMITIVES)}")
    fn = PRIMITIVES[op]
    if op == "concat":
        return fn(list(inputs), **kwargs)
    return fn(*inputs, **kwargs)


# ============================================================================
# BACKWARD PASS
# ============================================================================

def backward(graph: Graph, scalar_output: Tensor) -> Dict[str, np.ndarray]:
    """Reverse-mode pass from a scalar output.

    Returns:
        Parameter name -> gradient array, one entry per bound parameter.
        Parameters that do not influence the output get zeros.

    Raises:
        ShapeError: If ``scalar_output`` has more than one element
    """
    if scalar_output.size != 1:
        raise ShapeError("backward", scalar_output.shape, detail="output must be a scalar")
    if scalar_output.graph is not graph:
        raise ValueError("backward: output does not belong to this graph")

    grads: Dict[int, np.ndarray] = {id(scalar_output): np.ones_like(scalar_output.data)}
    for node in reversed(graph.nodes):
        g = grads.pop(id(node), None)
        if g is None or node._backward is None:
            continue
        parent_grads = node._backward(g)
        for parent, pg in zip(node._parents, parent_grads):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg

    result: Dict[str, np.ndarray] = {}
    for name, leaf in graph.params.items():
        g = grads.get(id(leaf))
        result[name] = np.zeros_like(leaf.data) if g is None else np.asarray(g, dtype=np.float64).reshape(leaf.shape)
        _check_finite(f"gradient[{name}]", result[name])
    return result
