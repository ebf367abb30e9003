"""Reverse-mode differentiation over float64 numpy arrays.

A `Tape` is a Wengert list: every operation appends a record holding its
value, the indices of its parents, the forward function and a vector-Jacobian
product. `Tape.backward` walks the list once in reverse. Parameters live in a
`ParamStore`, a flat vector carved into named slices, so gradients come back
as one vector aligned with it.
"""
import functools
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.special import expit

from catvae.core.errors import DataError, NumericError
from catvae.schemas.reports import GradCheckReport

LOG_FLOOR = 1e-12
EXP_CAP = 30.0


@dataclass(frozen=True)
class SliceSpec:
    name: str
    shape: Tuple[int, ...]
    offset: int

    @property
    def size(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64))


class ParamStore:
    """Flat float64 vector with named, disjoint, covering slices."""

    def __init__(self, layout: Iterable[Tuple[str, Sequence[int]]], vector: Optional[np.ndarray] = None):
        specs: Dict[str, SliceSpec] = {}
        offset = 0
        for name, shape in layout:
            if name in specs:
                raise ValueError(f"Duplicate slice name '{name}'")
            spec = SliceSpec(name, tuple(int(s) for s in shape), offset)
            specs[name] = spec
            offset += spec.size
        self._slices = specs
        if vector is None:
            self.vector = np.zeros(offset)
        else:
            vector = np.asarray(vector, dtype=np.float64)
            if vector.shape != (offset,):
                raise DataError(f"Parameter vector has {vector.size} values, layout needs {offset}")
            self.vector = vector.copy()

    @property
    def slices(self) -> List[SliceSpec]:
        return list(self._slices.values())

    @property
    def size(self) -> int:
        return self.vector.size

    def __contains__(self, name: str) -> bool:
        return name in self._slices

    def spec(self, name: str) -> SliceSpec:
        try:
            return self._slices[name]
        except KeyError:
            raise KeyError(f"No parameter slice named '{name}'") from None

    def view(self, name: str) -> np.ndarray:
        spec = self.spec(name)
        return self.vector[spec.offset : spec.offset + spec.size].reshape(spec.shape)

    def glorot_init(self, seed: int) -> "ParamStore":
        """Weights uniform in [-a, a], a = sqrt(6 / (fan_in + fan_out)); biases zero."""
        rng = np.random.default_rng(seed)
        for spec in self.slices:
            view = self.view(spec.name)
            if len(spec.shape) == 2:
                a = np.sqrt(6.0 / (spec.shape[0] + spec.shape[1]))
                view[...] = rng.uniform(-a, a, size=spec.shape)
            else:
                view[...] = 0.0
        return self

    def copy(self) -> "ParamStore":
        return ParamStore([(s.name, s.shape) for s in self.slices], self.vector)

    def directory(self) -> List[dict]:
        return [{"name": s.name, "shape": list(s.shape), "offset": s.offset} for s in self.slices]

    @classmethod
    def from_directory(cls, slices: List[dict], values: np.ndarray) -> "ParamStore":
        ordered = sorted(slices, key=lambda s: s["offset"])
        return cls([(s["name"], tuple(s["shape"])) for s in ordered], values)


@dataclass
class _Record:
    kind: str
    value: np.ndarray
    parents: Tuple[int, ...] = ()
    forward: Optional[Callable] = None
    vjp: Optional[Callable] = None
    name: Optional[str] = None


class Node:
    """Handle to a value recorded on a tape."""

    __slots__ = ("tape", "index")
    __array_ufunc__ = None

    def __init__(self, tape: "Tape", index: int) -> None:
        self.tape = tape
        self.index = index

    @property
    def value(self) -> np.ndarray:
        return self.tape._records[self.index].value

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    def __repr__(self) -> str:
        return f"Node(index={self.index}, shape={self.shape})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, k: float):
        return power(self, k)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)

    @property
    def T(self):
        return transpose(self)

    def sum(self, axis=None, keepdims: bool = False):
        return sum_(self, axis, keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        return reshape(self, shape)


@dataclass
class Gradients:
    params: Optional[np.ndarray]
    adjoints: Dict[int, np.ndarray] = field(default_factory=dict)
    store: Optional[ParamStore] = None

    def wrt(self, node: Node) -> np.ndarray:
        adj = self.adjoints.get(node.index)
        return np.zeros_like(node.value) if adj is None else adj

    def param(self, name: str) -> np.ndarray:
        spec = self.store.spec(name)
        return self.params[spec.offset : spec.offset + spec.size].reshape(spec.shape)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    grad = np.asarray(grad)
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


class Tape:
    """Single-threaded record of one forward pass."""

    def __init__(self, params: Optional[ParamStore] = None) -> None:
        self.params = params
        self._records: List[_Record] = []
        self._param_nodes: Dict[str, Node] = {}

    def __len__(self) -> int:
        return len(self._records)

    def _push(self, record: _Record) -> Node:
        self._records.append(record)
        return Node(self, len(self._records) - 1)

    def param(self, name: str) -> Node:
        if self.params is None:
            raise KeyError("Tape has no parameter store")
        if name not in self._param_nodes:
            value = self.params.view(name).copy()
            self._param_nodes[name] = self._push(_Record("param", value, name=name))
        return self._param_nodes[name]

    def constant(self, value) -> Node:
        return self._push(_Record("constant", np.array(value, dtype=np.float64)))

    def variable(self, value, name: Optional[str] = None) -> Node:
        """Leaf whose adjoint is reported by `backward` (inputs under test)."""
        return self._push(_Record("variable", np.array(value, dtype=np.float64), name=name))

    def lift(self, x) -> Node:
        if isinstance(x, Node):
            if x.tape is not self:
                raise NumericError("Cannot combine nodes from different tapes")
            return x
        return self.constant(x)

    def apply(self, forward: Callable, vjp: Callable, *parents: Node) -> Node:
        values = [p.value for p in parents]
        out = np.asarray(forward(*values), dtype=np.float64)
        return self._push(_Record("op", out, tuple(p.index for p in parents), forward, vjp))

    def backward(self, output: Node) -> Gradients:
        if output.tape is not self:
            raise NumericError("Output node belongs to another tape")
        if output.value.size != 1:
            raise NumericError(f"backward needs a scalar output, got shape {output.shape}")
        records = self._records
        adjoints: List[Optional[np.ndarray]] = [None] * len(records)
        adjoints[output.index] = np.ones_like(output.value)
        for i in range(output.index, -1, -1):
            grad = adjoints[i]
            record = records[i]
            if grad is None or record.kind != "op":
                continue
            inputs = [records[p].value for p in record.parents]
            for parent, pgrad in zip(record.parents, record.vjp(grad, record.value, *inputs)):
                if pgrad is None:
                    continue
                pgrad = _unbroadcast(pgrad, records[parent].value.shape)
                adjoints[parent] = pgrad if adjoints[parent] is None else adjoints[parent] + pgrad
        param_grad = None
        if self.params is not None:
            param_grad = np.zeros(self.params.size)
            for name, node in self._param_nodes.items():
                adj = adjoints[node.index]
                if adj is not None:
                    spec = self.params.spec(name)
                    param_grad[spec.offset : spec.offset + spec.size] += adj.ravel()
        leaves = {
            i: adj
            for i, (record, adj) in enumerate(zip(records, adjoints))
            if record.kind == "variable" and adj is not None
        }
        return Gradients(param_grad, leaves, self.params)

    def replay(self) -> List[np.ndarray]:
        """Recompute every op from the recorded leaves."""
        values: List[np.ndarray] = []
        for record in self._records:
            if record.kind == "op":
                out = record.forward(*[values[p] for p in record.parents])
                values.append(np.asarray(out, dtype=np.float64))
            else:
                values.append(record.value)
        return values

    def recorded(self) -> List[np.ndarray]:
        return [r.value for r in self._records]


def _tape_of(*args) -> Tape:
    for a in args:
        if isinstance(a, Node):
            return a.tape
    raise NumericError("Operation needs at least one Node operand")


def _binary(a, b) -> Tuple[Node, Node]:
    tape = _tape_of(a, b)
    return tape.lift(a), tape.lift(b)


def add(a, b) -> Node:
    a, b = _binary(a, b)
    return a.tape.apply(np.add, lambda g, o, x, y: (g, g), a, b)


def sub(a, b) -> Node:
    a, b = _binary(a, b)
    return a.tape.apply(np.subtract, lambda g, o, x, y: (g, -g), a, b)


def mul(a, b) -> Node:
    a, b = _binary(a, b)
    return a.tape.apply(np.multiply, lambda g, o, x, y: (g * y, g * x), a, b)


def div(a, b) -> Node:
    a, b = _binary(a, b)
    return a.tape.apply(np.divide, lambda g, o, x, y: (g / y, -g * x / (y * y)), a, b)


def neg(a: Node) -> Node:
    return a.tape.apply(np.negative, lambda g, o, x: (-g,), a)


def power(a: Node, k: float) -> Node:
    return a.tape.apply(lambda x: x**k, lambda g, o, x: (g * k * x ** (k - 1),), a)


def square(a: Node) -> Node:
    return a.tape.apply(np.square, lambda g, o, x: (2.0 * g * x,), a)


def sqrt(a: Node) -> Node:
    return a.tape.apply(np.sqrt, lambda g, o, x: (0.5 * g / o,), a)


def matmul(a, b) -> Node:
    a, b = _binary(a, b)
    if a.value.ndim != 2 or b.value.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DataError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    return a.tape.apply(np.matmul, lambda g, o, x, y: (g @ y.T, x.T @ g), a, b)


def transpose(a: Node) -> Node:
    return a.tape.apply(np.transpose, lambda g, o, x: (np.transpose(g),), a)


def reshape(a: Node, shape) -> Node:
    return a.tape.apply(lambda x: np.reshape(x, shape), lambda g, o, x: (np.reshape(g, x.shape),), a)


def sum_(a: Node, axis=None, keepdims: bool = False) -> Node:
    def vjp(g, o, x):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape),)

    return a.tape.apply(lambda x: np.sum(x, axis=axis, keepdims=keepdims), vjp, a)


def mean(a: Node, axis=None, keepdims: bool = False) -> Node:
    count = a.value.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
    return sum_(a, axis, keepdims) * (1.0 / count)


def getitem(a: Node, index) -> Node:
    def vjp(g, o, x):
        out = np.zeros_like(x)
        np.add.at(out, index, g)
        return (out,)

    return a.tape.apply(lambda x: x[index], vjp, a)


def exp(a: Node) -> Node:
    """exp with its argument capped at EXP_CAP; the gradient is zero above the cap."""
    return a.tape.apply(
        lambda x: np.exp(np.minimum(x, EXP_CAP)),
        lambda g, o, x: (g * o * (x < EXP_CAP),),
        a,
    )


def log(a: Node) -> Node:
    """log with its argument floored at LOG_FLOOR; the gradient is zero below the floor."""
    return a.tape.apply(
        lambda x: np.log(np.maximum(x, LOG_FLOOR)),
        lambda g, o, x: (g / np.maximum(x, LOG_FLOOR) * (x > LOG_FLOOR),),
        a,
    )


def maximum(a: Node, floor: float) -> Node:
    return a.tape.apply(lambda x: np.maximum(x, floor), lambda g, o, x: (g * (x > floor),), a)


def relu(a: Node) -> Node:
    return a.tape.apply(lambda x: np.maximum(x, 0.0), lambda g, o, x: (g * (x > 0),), a)


def softplus(a: Node) -> Node:
    return a.tape.apply(lambda x: np.logaddexp(0.0, x), lambda g, o, x: (g * expit(x),), a)


def tanh(a: Node) -> Node:
    return a.tape.apply(np.tanh, lambda g, o, x: (g * (1.0 - o * o),), a)


def elementwise(a: Node, f: Callable[[np.ndarray], np.ndarray], df: Callable[[np.ndarray], np.ndarray]) -> Node:
    """Apply a scalar function with a user-supplied derivative."""
    return a.tape.apply(f, lambda g, o, x: (g * df(x),), a)


def dense(x, weights: Node, bias: Node) -> Node:
    """Affine map x @ W + b recorded as one op."""
    tape = _tape_of(x, weights, bias)
    x = tape.lift(x)
    if x.value.ndim != 2 or x.shape[1] != weights.shape[0] or bias.shape != (weights.shape[1],):
        raise DataError(f"dense shape mismatch: input {x.shape}, weights {weights.shape}, bias {bias.shape}")
    return tape.apply(
        lambda xv, w, b: xv @ w + b,
        lambda g, o, xv, w, b: (g @ w.T, xv.T @ g, g.sum(axis=0)),
        x,
        weights,
        bias,
    )


def _block_log_softmax(x: np.ndarray, blocks: Sequence[slice]) -> np.ndarray:
    out = np.empty_like(x)
    for block in blocks:
        s = x[:, block]
        shifted = s - s.max(axis=1, keepdims=True)
        out[:, block] = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    return out


def log_softmax_blocks(a: Node, blocks: Sequence[slice]) -> Node:
    """Log-softmax applied independently within each column block."""
    width = sum(b.stop - b.start for b in blocks)
    if a.value.ndim != 2 or a.shape[1] != width:
        raise DataError(f"Block boundaries cover {width} columns, input has shape {a.shape}")

    def vjp(g, o, x):
        grad = np.empty_like(g)
        for block in blocks:
            gb = g[:, block]
            grad[:, block] = gb - np.exp(o[:, block]) * gb.sum(axis=1, keepdims=True)
        return (grad,)

    return a.tape.apply(lambda x: _block_log_softmax(x, blocks), vjp, a)


def _unwrap(out):
    if isinstance(out, Node):
        value = out.value
        return float(value) if value.ndim == 0 else value
    if isinstance(out, tuple):
        return tuple(_unwrap(o) for o in out)
    return out


def lift(fn: Callable) -> Callable:
    """Let a tape function accept plain arrays.

    Called with at least one Node, `fn` runs as is. Called with arrays only,
    it runs on a throwaway tape and returns plain values.
    """

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        if any(isinstance(a, Node) for a in (*args, *kwargs.values())):
            return fn(*args, **kwargs)
        tape = Tape()
        args = [tape.constant(a) if isinstance(a, np.ndarray) else a for a in args]
        kwargs = {k: tape.constant(v) if isinstance(v, np.ndarray) else v for k, v in kwargs.items()}
        return _unwrap(fn(*args, **kwargs))

    return wrapper


def grad_check(
    loss_fn: Callable[[Tape], Node],
    params: ParamStore,
    h: float = 1e-5,
    tol: float = 1e-4,
    max_coordinates: int = 256,
    seed: int = 0,
    denominator_floor: float = 1e-4,
) -> GradCheckReport:
    """Compare reverse-mode gradients with central differences.

    `loss_fn` builds the loss on the tape it is given and must be
    deterministic. Stores larger than `max_coordinates` are subsampled.
    Relative errors use max(|analytic|, |numeric|, denominator_floor), so
    vanishing coordinates are compared on an absolute scale. Losses with
    discontinuities (argmax, hard thresholds) fail this check by construction.
    """
    tape = Tape(params)
    analytic = tape.backward(loss_fn(tape)).params
    if params.size <= max_coordinates:
        coords = np.arange(params.size)
    else:
        coords = np.sort(np.random.default_rng(seed).choice(params.size, max_coordinates, replace=False))

    def evaluate() -> float:
        return float(loss_fn(Tape(params)).value)

    base = params.vector.copy()
    worst, worst_index = 0.0, -1
    try:
        for k in coords:
            params.vector[k] = base[k] + h
            f_plus = evaluate()
            params.vector[k] = base[k] - h
            f_minus = evaluate()
            params.vector[k] = base[k]
            numeric = (f_plus - f_minus) / (2.0 * h)
            denom = max(abs(numeric), abs(analytic[k]), denominator_floor)
            err = abs(numeric - analytic[k]) / denom
            if err > worst or worst_index < 0:
                worst, worst_index = err, int(k)
    finally:
        params.vector[:] = base
    report = GradCheckReport(
        max_relative_error=worst,
        worst_coordinate=worst_index,
        coordinates_checked=len(coords),
        tolerance=tol,
    )
    logger.debug(f"Gradient check: max relative error {worst:.3e} over {len(coords)} coordinates")
    return report
