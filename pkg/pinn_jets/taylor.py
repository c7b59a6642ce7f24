"""Truncated Taylor series ("jets") along one seeded input direction.

A jet of order K stores ``coeffs`` with shape ``(K + 1, *batch)`` where
``coeffs[j]`` is the j-th derivative divided by ``j!``. Every operation is a
``JetFunction`` with a forward rule on coefficient arrays and a backward rule
mapping the output cotangent to operand cotangents. Jets produced from operands
attached to an ``AdjointRecord`` are recorded on it; jets without a record are
plain constants.
"""
import logging
from math import factorial
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit

from shared.errors import ConfigurationError, UsageError

logger = logging.getLogger(__name__)

MAX_ORDER = 3
TWO_PI = 2.0 * np.pi

ArrayLike = Union[float, np.ndarray]

ACTIVATIONS = ("tanh", "sin", "cos", "sigmoid", "exp", "expm1")


def _check_order(order: int) -> None:
    if not isinstance(order, (int, np.integer)) or order < 0 or order > MAX_ORDER:
        raise ConfigurationError(
            f"Jet order must be an integer in [0, {MAX_ORDER}], got {order}",
            field="order",
            value=order,
        )


class Jet:
    """Value plus Taylor coefficients along one seeded input dimension"""

    __slots__ = ("coeffs", "record", "node")

    def __init__(self, coeffs: np.ndarray, record: Any = None, node: Optional[int] = None):
        self.coeffs = coeffs
        self.record = record
        self.node = node

    @property
    def order(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.coeffs.shape[1:]

    @property
    def value(self) -> np.ndarray:
        return self.coeffs[0]

    def deriv(self, j: int) -> np.ndarray:
        """Raw j-th derivative along the seeded direction"""
        if j < 0 or j > self.order:
            raise UsageError(f"Derivative order {j} not carried by a jet of order {self.order}")
        return self.coeffs[j] * factorial(j)

    def derivs(self) -> List[np.ndarray]:
        return [self.deriv(j) for j in range(self.order + 1)]

    def __add__(self, other: Union["Jet", ArrayLike]) -> "Jet":
        if isinstance(other, Jet):
            return add(self, other)
        return shift(self, other)

    __radd__ = __add__

    def __sub__(self, other: Union["Jet", ArrayLike]) -> "Jet":
        if isinstance(other, Jet):
            return sub(self, other)
        return shift(self, -np.asarray(other, dtype=np.float64))

    def __rsub__(self, other: ArrayLike) -> "Jet":
        return shift(neg(self), other)

    def __mul__(self, other: Union["Jet", ArrayLike]) -> "Jet":
        if isinstance(other, Jet):
            return mul(self, other)
        return scale(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other: ArrayLike) -> "Jet":
        if isinstance(other, Jet):
            raise UsageError("Division by a jet is not supported")
        return scale(self, 1.0 / np.asarray(other, dtype=np.float64))

    def __neg__(self) -> "Jet":
        return neg(self)

    def __repr__(self) -> str:
        attached = "recorded" if self.record is not None else "constant"
        return f"Jet(order={self.order}, shape={self.shape}, {attached})"


def jet_seed(x: ArrayLike, order: int) -> Jet:
    """Identity function of the seeded variable: coeffs [x, 1, 0, 0][: order + 1]"""
    _check_order(order)
    x = np.asarray(x, dtype=np.float64)
    coeffs = np.zeros((order + 1,) + x.shape)
    coeffs[0] = x
    if order >= 1:
        coeffs[1] = 1.0
    return Jet(coeffs)


def constant(x: ArrayLike, order: int) -> Jet:
    """Jet of a quantity that does not depend on the seeded variable"""
    _check_order(order)
    x = np.asarray(x, dtype=np.float64)
    coeffs = np.zeros((order + 1,) + x.shape)
    coeffs[0] = x
    return Jet(coeffs)


def align(*arrays: np.ndarray) -> List[np.ndarray]:
    """Pad batch axes (after the coefficient axis) so batches broadcast from the right"""
    ndim = max(a.ndim for a in arrays)
    return [a.reshape(a.shape[:1] + (1,) * (ndim - a.ndim) + a.shape[1:]) for a in arrays]


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast cotangent back down to an operand's coefficient shape"""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(1, 1 + extra)))
    axes = tuple(i for i, size in enumerate(shape) if size == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class JetFunction:
    """Elementary jet operation with forward and backward rules"""

    name = "op"

    def forward(self, *inputs: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(
        self, grad: np.ndarray, inputs: Sequence[np.ndarray], output: np.ndarray
    ) -> Tuple[Optional[np.ndarray], ...]:
        raise NotImplementedError

    def apply(self, *operands: Jet) -> Jet:
        out = self.forward(*(jet.coeffs for jet in operands))
        record = None
        for jet in operands:
            if jet.record is None:
                continue
            if record is not None and jet.record is not record:
                raise UsageError("Operands belong to different adjoint records")
            record = jet.record
        if record is None:
            return Jet(out)
        return record.push(self, operands, out)


def _same_order(a: Jet, b: Jet, op: str) -> None:
    if a.order != b.order:
        raise UsageError(
            f"Jet order mismatch in {op}", expected=a.order, actual=b.order
        )


class _Add(JetFunction):
    name = "add"

    def forward(self, a, b):
        a, b = align(a, b)
        return a + b

    def backward(self, grad, inputs, output):
        return grad, grad


class _Sub(JetFunction):
    name = "sub"

    def forward(self, a, b):
        a, b = align(a, b)
        return a - b

    def backward(self, grad, inputs, output):
        return grad, -grad


def _cauchy(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    order = a.shape[0] - 1
    out = [a[0] * b[0]]
    for k in range(1, order + 1):
        term = a[0] * b[k]
        for i in range(1, k + 1):
            term = term + a[i] * b[k - i]
        out.append(term)
    return np.stack(out)


class _Mul(JetFunction):
    name = "mul"

    def forward(self, a, b):
        return _cauchy(*align(a, b))

    def backward(self, grad, inputs, output):
        a, b = align(*inputs)
        order = a.shape[0] - 1
        grad_a = []
        grad_b = []
        for i in range(order + 1):
            ga = grad[i] * b[0]
            gb = grad[i] * a[0]
            for k in range(i + 1, order + 1):
                ga = ga + grad[k] * b[k - i]
                gb = gb + grad[k] * a[k - i]
            grad_a.append(ga)
            grad_b.append(gb)
        return np.stack(grad_a), np.stack(grad_b)


class _Neg(JetFunction):
    name = "neg"

    def forward(self, a):
        return -a

    def backward(self, grad, inputs, output):
        return (-grad,)


class _Scale(JetFunction):
    name = "scale"

    def __init__(self, factor: ArrayLike):
        factor = np.asarray(factor, dtype=np.float64)
        self.factor = factor.reshape((1,) + factor.shape)

    def forward(self, a):
        a, factor = align(a, self.factor)
        return a * factor

    def backward(self, grad, inputs, output):
        _, factor = align(inputs[0], self.factor)
        return (grad * factor,)


class _Shift(JetFunction):
    name = "shift"

    def __init__(self, offset: ArrayLike):
        offset = np.asarray(offset, dtype=np.float64)
        self.offset = offset.reshape((1,) + offset.shape)

    def forward(self, a):
        a, offset = align(a, self.offset)
        out = np.broadcast_to(a, np.broadcast_shapes(a.shape, offset.shape)).copy()
        out[0] = out[0] + offset[0]
        return out

    def backward(self, grad, inputs, output):
        return (grad,)


def _derivative_table(name: str, x: np.ndarray, count: int) -> List[np.ndarray]:
    """Derivatives f, f', ..., f^(count-1) of an activation evaluated at x"""
    if name == "tanh":
        t = np.tanh(x)
        p = 1.0 - t * t
        table = [t, p, -2.0 * t * p, p * (6.0 * t * t - 2.0), 8.0 * t * p * (2.0 - 3.0 * t * t)]
    elif name == "sigmoid":
        s = expit(x)
        p = s * (1.0 - s)
        table = [
            s,
            p,
            p * (1.0 - 2.0 * s),
            p * (1.0 - 6.0 * s + 6.0 * s * s),
            p * (1.0 - 2.0 * s) * (1.0 - 12.0 * s + 12.0 * s * s),
        ]
    elif name == "sin":
        s, c = np.sin(x), np.cos(x)
        table = [s, c, -s, -c, s]
    elif name == "cos":
        s, c = np.sin(x), np.cos(x)
        table = [c, -s, -c, s, c]
    elif name == "exp":
        e = np.exp(x)
        table = [e] * 5
    elif name == "expm1":
        e = np.exp(x)
        table = [np.expm1(x), e, e, e, e]
    else:
        raise UsageError(f"Unknown activation '{name}'", expected=list(ACTIVATIONS), actual=name)
    return table[:count]


PRIMAL: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "tanh": np.tanh,
    "sigmoid": expit,
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "expm1": np.expm1,
}


def _compose(table: Sequence[np.ndarray], a: np.ndarray) -> np.ndarray:
    """Taylor coefficients of f(a(s)) from f's derivatives at a_0 (order <= 3)"""
    order = a.shape[0] - 1
    out = [table[0]]
    if order >= 1:
        out.append(table[1] * a[1])
    if order >= 2:
        out.append(table[1] * a[2] + table[2] * a[1] * a[1] * 0.5)
    if order >= 3:
        out.append(
            table[1] * a[3] + table[2] * a[1] * a[2] + table[3] * a[1] * a[1] * a[1] / 6.0
        )
    return np.stack(out)


class _Activation(JetFunction):
    def __init__(self, fn: str):
        if fn not in PRIMAL:
            raise UsageError(f"Unknown activation '{fn}'", expected=list(ACTIVATIONS), actual=fn)
        self.fn = fn
        self.name = fn

    def forward(self, a):
        order = a.shape[0] - 1
        table = _derivative_table(self.fn, a[0], order + 1)
        table[0] = PRIMAL[self.fn](a[0])
        return _compose(table, a)

    def backward(self, grad, inputs, output):
        (a,) = inputs
        order = a.shape[0] - 1
        # coefficients of f'(a(s)) give d c_k / d a_j = e_{k-j}
        shifted = _derivative_table(self.fn, a[0], order + 2)[1:]
        e = _compose(shifted, a)
        out = []
        for j in range(order + 1):
            acc = grad[j] * e[0]
            for k in range(j + 1, order + 1):
                acc = acc + grad[k] * e[k - j]
            out.append(acc)
        return (np.stack(out),)


class _Linear(JetFunction):
    """Affine map x @ W + b applied per coefficient; the bias only shifts the value"""

    name = "linear"

    def forward(self, a, w, b=None):
        weight = w[0]
        # weight may carry leading draw axes that broadcast against the batch
        out = np.stack([a[k] @ weight for k in range(a.shape[0])])
        if b is not None:
            out[0] = out[0] + b[0]
        return out

    def backward(self, grad, inputs, output):
        a, w = inputs[0], inputs[1]
        weight = w[0]
        n_in, n_out = weight.shape
        grad_a = np.empty_like(a)
        for k in range(a.shape[0]):
            grad_a[k] = grad[k] @ weight.T
        grad_w = (a.reshape(-1, n_in).T @ grad.reshape(-1, n_out))[None]
        if len(inputs) == 2:
            return grad_a, grad_w
        grad_b = grad[0].reshape(-1, n_out).sum(axis=0)[None]
        return grad_a, grad_w, grad_b


class _Take(JetFunction):
    name = "take"

    def __init__(self, column: int):
        self.column = column

    def forward(self, a):
        return a[..., self.column]

    def backward(self, grad, inputs, output):
        (a,) = inputs
        out = np.zeros_like(a)
        out[..., self.column] = grad
        return (out,)


class _Concat(JetFunction):
    name = "concat"

    def forward(self, *parts):
        return np.concatenate(parts, axis=-1)

    def backward(self, grad, inputs, output):
        bounds = np.cumsum([part.shape[-1] for part in inputs])[:-1]
        return tuple(np.split(grad, bounds, axis=-1))


class _Mean(JetFunction):
    name = "mean"

    def forward(self, a):
        return np.array([a[0].mean()])

    def backward(self, grad, inputs, output):
        (a,) = inputs
        return (np.full_like(a, grad[0] / a[0].size),)


class _Partial(JetFunction):
    """Order-0 jet holding the raw j-th derivative"""

    name = "partial"

    def __init__(self, j: int):
        self.j = j
        self.factor = float(factorial(j))

    def forward(self, a):
        return a[self.j : self.j + 1] * self.factor

    def backward(self, grad, inputs, output):
        (a,) = inputs
        out = np.zeros_like(a)
        out[self.j] = grad[0] * self.factor
        return (out,)


def add(a: Jet, b: Jet) -> Jet:
    _same_order(a, b, "add")
    return _Add().apply(a, b)


def sub(a: Jet, b: Jet) -> Jet:
    _same_order(a, b, "sub")
    return _Sub().apply(a, b)


def mul(a: Jet, b: Jet) -> Jet:
    _same_order(a, b, "mul")
    return _Mul().apply(a, b)


def jet_arith(a: Jet, b: Jet, op: str) -> Jet:
    """Coefficientwise add/sub, truncated Cauchy product for mul"""
    ops = {"add": add, "sub": sub, "mul": mul}
    if op not in ops:
        raise UsageError(f"Unknown jet arithmetic '{op}'", expected=list(ops), actual=op)
    return ops[op](a, b)


def neg(a: Jet) -> Jet:
    return _Neg().apply(a)


def scale(a: Jet, factor: ArrayLike) -> Jet:
    return _Scale(factor).apply(a)


def shift(a: Jet, offset: ArrayLike) -> Jet:
    return _Shift(offset).apply(a)


def square(a: Jet) -> Jet:
    return mul(a, a)


def jet_activation(a: Jet, f: str) -> Jet:
    """Truncated Taylor composition f(a)"""
    return _Activation(f).apply(a)


def tanh(a: Jet) -> Jet:
    return jet_activation(a, "tanh")


def sin(a: Jet) -> Jet:
    return jet_activation(a, "sin")


def cos(a: Jet) -> Jet:
    return jet_activation(a, "cos")


def exp(a: Jet) -> Jet:
    return jet_activation(a, "exp")


def expm1(a: Jet) -> Jet:
    return jet_activation(a, "expm1")


def sigmoid(a: Jet) -> Jet:
    return jet_activation(a, "sigmoid")


def linear(a: Jet, weight: Jet, bias: Optional[Jet] = None) -> Jet:
    if weight.order != 0 or (bias is not None and bias.order != 0):
        raise UsageError("Layer parameters must be order-0 jets")
    if a.shape[-1] != weight.shape[-2]:
        raise UsageError(
            "Layer input width does not match weight rows",
            expected=weight.shape[-2],
            actual=a.shape[-1],
        )
    if bias is None:
        return _Linear().apply(a, weight)
    return _Linear().apply(a, weight, bias)


def take(a: Jet, column: int) -> Jet:
    """Select one column of the trailing axis"""
    return _Take(column).apply(a)


def concat(parts: Sequence[Jet]) -> Jet:
    orders = {part.order for part in parts}
    if len(orders) != 1:
        raise UsageError("Jet order mismatch in concat", actual=sorted(orders))
    return _Concat().apply(*parts)


def mean(a: Jet) -> Jet:
    """Mean over all entries of an order-0 jet, as a scalar jet"""
    if a.order != 0:
        raise UsageError("mean reduces order-0 jets only", expected=0, actual=a.order)
    return _Mean().apply(a)


def partial(a: Jet, j: int) -> Jet:
    """j-th derivative as an order-0 jet, differentiable with respect to parameters"""
    if j < 0 or j > a.order:
        raise UsageError(
            f"Residual needs derivative order {j}, jet carries order {a.order}",
            expected=j,
            actual=a.order,
        )
    return _Partial(j).apply(a)
