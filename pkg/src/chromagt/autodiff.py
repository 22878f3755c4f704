"""Minimal dense-tensor reverse-mode differentiation.

Everything runs in 64-bit numpy with a fixed reduction order, so repeated
forwards are bit-identical and finite-difference checks can be tight.
Each operation records a closure that accumulates exact analytic gradients
into its inputs; backward() topologically sorts the tape from a scalar
loss. Gradient accumulation is additive across backward calls until
zero_grad().
"""

from __future__ import annotations

import json
import zlib
from typing import Callable, Iterable

import numpy as np

from .errors import ConfigError, ShapeError, VersionError

CHECKPOINT_VERSION = 1


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a gradient down to the shape the operand had before broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """Dense 64-bit array with an optional gradient buffer."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None

    # -- basic introspection -------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def item(self) -> float:
        return float(self.data)

    # -- graph construction --------------------------------------------------

    @staticmethod
    def _result(data: np.ndarray, parents: tuple["Tensor", ...]) -> "Tensor":
        out = Tensor(data)
        out.requires_grad = any(p.requires_grad for p in parents)
        if out.requires_grad:
            out._parents = parents
        return out

    def _accumulate(self, grad: np.ndarray) -> None:
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    def backward(self) -> None:
        """Reverse sweep from a scalar; accumulates into .grad of every
        reachable leaf that requires gradients."""
        if self.size != 1:
            raise ShapeError(f"backward: expected a scalar, got shape {self.shape}")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                stack.append((parent, False))

        # Reversed post-order is a topological order: every consumer is
        # processed before its inputs, so each node's gradient is complete
        # when popped.
        grads: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(topo):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node._accumulate(g)
                continue
            for parent, pg in node._backward(g):
                if not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg

    # -- elementwise arithmetic ----------------------------------------------

    @staticmethod
    def _wrap(other) -> "Tensor":
        return other if isinstance(other, Tensor) else Tensor(other)

    def __add__(self, other) -> "Tensor":
        other = Tensor._wrap(other)
        data = _ew("add", np.add, self, other)
        out = Tensor._result(data, (self, other))
        out._backward = lambda g: (
            (self, _unbroadcast(g, self.shape)),
            (other, _unbroadcast(g, other.shape)),
        )
        return out

    __radd__ = __add__

    def __sub__(self, other) -> "Tensor":
        other = Tensor._wrap(other)
        data = _ew("sub", np.subtract, self, other)
        out = Tensor._result(data, (self, other))
        out._backward = lambda g: (
            (self, _unbroadcast(g, self.shape)),
            (other, _unbroadcast(-g, other.shape)),
        )
        return out

    def __rsub__(self, other) -> "Tensor":
        return Tensor._wrap(other) - self

    def __mul__(self, other) -> "Tensor":
        other = Tensor._wrap(other)
        data = _ew("mul", np.multiply, self, other)
        out = Tensor._result(data, (self, other))
        out._backward = lambda g: (
            (self, _unbroadcast(g * other.data, self.shape)),
            (other, _unbroadcast(g * self.data, other.shape)),
        )
        return out

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Tensor":
        other = Tensor._wrap(other)
        data = _ew("div", np.divide, self, other)
        out = Tensor._result(data, (self, other))
        out._backward = lambda g: (
            (self, _unbroadcast(g / other.data, self.shape)),
            (other, _unbroadcast(-g * self.data / (other.data**2), other.shape)),
        )
        return out

    def __neg__(self) -> "Tensor":
        out = Tensor._result(-self.data, (self,))
        out._backward = lambda g: ((self, -g),)
        return out

    def __pow__(self, exponent: float) -> "Tensor":
        if isinstance(exponent, Tensor):
            raise ShapeError("pow: only scalar exponents are supported")
        c = float(exponent)
        out = Tensor._result(self.data**c, (self,))
        out._backward = lambda g: ((self, g * c * self.data ** (c - 1)),)
        return out

    def exp(self) -> "Tensor":
        out = Tensor._result(np.exp(self.data), (self,))
        out._backward = lambda g: ((self, g * out.data),)
        return out

    def log(self) -> "Tensor":
        out = Tensor._result(np.log(self.data), (self,))
        out._backward = lambda g: ((self, g / self.data),)
        return out

    def relu(self) -> "Tensor":
        out = Tensor._result(np.maximum(self.data, 0.0), (self,))
        out._backward = lambda g: ((self, g * (self.data > 0.0)),)
        return out

    def abs(self) -> "Tensor":
        out = Tensor._result(np.abs(self.data), (self,))
        out._backward = lambda g: ((self, g * np.sign(self.data)),)
        return out

    # -- shape manipulation ----------------------------------------------------

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        try:
            data = self.data.reshape(shape)
        except ValueError as exc:
            raise ShapeError(f"reshape: {self.shape} -> {shape}: {exc}") from exc
        out = Tensor._result(data, (self,))
        out._backward = lambda g: ((self, g.reshape(self.shape)),)
        return out

    def transpose(self, axes: tuple[int, ...]) -> "Tensor":
        inverse = tuple(int(np.argsort(axes)[i]) for i in range(len(axes)))
        out = Tensor._result(np.transpose(self.data, axes), (self,))
        out._backward = lambda g: ((self, np.transpose(g, inverse)),)
        return out

    # -- reductions ------------------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        out = Tensor._result(self.data.sum(axis=axis, keepdims=keepdims), (self,))

        def back(g):
            gg = g
            if not keepdims and axis is not None:
                gg = np.expand_dims(gg, axis)
            return ((self, np.broadcast_to(gg, self.shape).copy()),)

        if axis is None and not keepdims:
            out._backward = lambda g: ((self, np.full(self.shape, float(g))),)
        else:
            out._backward = back
        return out

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        if axis is None:
            count = self.size
        else:
            axes = (axis,) if isinstance(axis, int) else tuple(axis)
            count = int(np.prod([self.shape[a] for a in axes]))
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    # -- linear algebra ---------------------------------------------------------

    def __matmul__(self, other) -> "Tensor":
        other = Tensor._wrap(other)
        if self.ndim < 2 or other.ndim < 2:
            raise ShapeError(
                f"matmul: operands must be at least 2-D, got {self.shape} x {other.shape}"
            )
        try:
            data = np.matmul(self.data, other.data)
        except ValueError as exc:
            raise ShapeError(f"matmul: {self.shape} x {other.shape}: {exc}") from exc
        out = Tensor._result(data, (self, other))

        def back(g):
            ga = np.matmul(g, np.swapaxes(other.data, -1, -2))
            gb = np.matmul(np.swapaxes(self.data, -1, -2), g)
            return (
                (self, _unbroadcast(ga, self.shape)),
                (other, _unbroadcast(gb, other.shape)),
            )

        out._backward = back
        return out


# -- module-level operations ----------------------------------------------------


def _ew(name: str, fn, a: Tensor, b: Tensor) -> np.ndarray:
    try:
        return fn(a.data, b.data)
    except ValueError as exc:
        raise ShapeError(f"{name}: {a.shape} vs {b.shape}: {exc}") from exc


def concat(tensors: list[Tensor], axis: int = -1) -> Tensor:
    """Concatenate along an axis (default: last)."""
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        shapes = [t.shape for t in tensors]
        raise ShapeError(f"concat: {shapes}: {exc}") from exc
    out = Tensor._result(data, tuple(tensors))
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]

    def back(g):
        pieces = np.split(g, bounds, axis=axis)
        return tuple((t, piece) for t, piece in zip(tensors, pieces))

    out._backward = back
    return out


def gather_rows(table: Tensor, indices: np.ndarray) -> Tensor:
    """Embedding lookup: output[..., :] = table[indices[...], :]."""
    idx = np.asarray(indices)
    if not np.issubdtype(idx.dtype, np.integer):
        raise ShapeError("gather_rows: indices must be integers")
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise ShapeError(
            f"gather_rows: index out of range for table with {table.shape[0]} rows"
        )
    out = Tensor._result(table.data[idx], (table,))

    def back(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, idx, g)
        return ((table, gt),)

    out._backward = back
    return out


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Stable softmax over one axis; the shift by the (detached) max does
    not change the value or the gradient."""
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)
    out = Tensor._result(y, (x,))

    def back(g):
        inner = (g * y).sum(axis=axis, keepdims=True)
        return ((x, y * (g - inner)),)

    out._backward = back
    return out


def mean_pool(x: Tensor, axis: int = 0) -> Tensor:
    """Average over one axis; the read-out used by graph-level heads."""
    return x.mean(axis=axis)


def apply_mask(x: Tensor, mask: np.ndarray) -> Tensor:
    """Multiply by a constant 0/1 (or rescaled) mask, e.g. for dropout."""
    return x * Tensor(mask)


def detached_max(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    """Max of the current values as a constant (no gradient path). Useful
    for shift-invariant stabilization of exponentials."""
    return Tensor(x.data.max(axis=axis, keepdims=keepdims))


# -- parameters -------------------------------------------------------------------


class ParameterStore:
    """Named map of trainable tensors with deterministic iteration order."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self._params:
            raise ConfigError(f"duplicate parameter name {name!r}")
        t = Tensor(np.array(value, dtype=np.float64), requires_grad=True)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def items(self) -> Iterable[tuple[str, Tensor]]:
        return self._params.items()

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.grad = None

    def state(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self._params.items()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        for name, t in self._params.items():
            if name not in state:
                raise ConfigError(f"state is missing parameter {name!r}")
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != t.shape:
                raise ShapeError(
                    f"parameter {name!r}: stored shape {value.shape} != {t.shape}"
                )
            t.data = value.copy()


def save_checkpoint(path, store: ParameterStore, buffers: dict | None = None,
                    config: dict | None = None) -> None:
    """Write parameters (and optional buffers/config) as versioned JSON.

    Floats are serialized via repr and therefore round-trip bit-exact.
    """
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "params": {
            name: {"shape": list(t.shape), "data": t.data.ravel().tolist()}
            for name, t in store.items()
        },
    }
    if buffers is not None:
        payload["buffers"] = {
            name: {"shape": list(np.shape(v)), "data": np.ravel(v).tolist()}
            for name, v in buffers.items()
        }
    if config is not None:
        payload["config"] = config
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)


def load_checkpoint(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    version = payload.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise VersionError(
            f"checkpoint format version {version} != supported {CHECKPOINT_VERSION}"
        )
    for section in ("params", "buffers"):
        if section in payload:
            payload[section] = {
                name: np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
                for name, entry in payload[section].items()
            }
    return payload


# -- gradient checking ---------------------------------------------------------


def grad_check(
    f: Callable[[], Tensor],
    store: ParameterStore,
    eps: float = 1e-5,
    max_coords: int = 32,
    seed: int = 0,
) -> dict:
    """Compare analytic gradients against central differences.

    f must be a deterministic scalar-valued closure over the store (dropout
    off, normalization statistics either fixed or themselves functions of
    the parameters). For each parameter a seeded subsample of coordinates
    (all of them when the tensor is small) is perturbed by +-eps. The
    reported relative error is the largest coordinate discrepancy divided
    by the largest gradient magnitude of that parameter.
    """
    store.zero_grad()
    loss = f()
    loss.backward()
    analytic = {
        name: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data))
        for name, t in store.items()
    }
    store.zero_grad()

    report: dict = {"params": {}, "max_rel_err": 0.0, "ok": True}
    for name, t in store.items():
        n = t.size
        if n <= max_coords:
            coords = np.arange(n)
        else:
            rng = np.random.default_rng([seed, zlib.crc32(name.encode())])
            coords = rng.choice(n, size=max_coords, replace=False)
        a = analytic[name].ravel()
        numeric = np.zeros(len(coords))
        for k, c in enumerate(coords):
            idx = np.unravel_index(c, t.shape)
            old = t.data[idx]
            t.data[idx] = old + eps
            up = float(f().data)
            t.data[idx] = old - eps
            down = float(f().data)
            t.data[idx] = old
            numeric[k] = (up - down) / (2.0 * eps)
        picked = a[coords]
        finite = bool(np.isfinite(numeric).all() and np.isfinite(picked).all())
        scale = max(np.abs(picked).max(initial=0.0), np.abs(numeric).max(initial=0.0), 1e-8)
        rel = float(np.abs(picked - numeric).max(initial=0.0) / scale)
        report["params"][name] = {
            "max_rel_err": rel,
            "checked": int(len(coords)),
            "finite": finite,
        }
        if not finite:
            report["ok"] = False
            rel = float("inf")
        report["max_rel_err"] = max(report["max_rel_err"], rel)
    return report
