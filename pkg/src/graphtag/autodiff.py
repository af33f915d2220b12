"""Dense float64 tensors with tape-based reverse-mode differentiation.

Forward arithmetic runs eagerly on numpy arrays. While a ``Tape`` is
active (entered as a context manager), every primitive records a pullback
closure on it; ``backward`` replays the records newest-first and
accumulates gradients into every ``Parameter`` reachable from the loss.
The tape is rebuilt by rerunning the forward pass, so control flow may
differ freely between passes.

Broadcasting is deliberately narrow: elementwise primitives accept equal
shapes or a scalar operand, nothing else. Row- and column-wise
combinations have their own primitives with explicit pullbacks.

A tape and the tensors recorded on it belong to a single thread.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
from scipy.special import expit

__all__ = [
    "Tensor",
    "Parameter",
    "Tape",
    "backward",
    "grad_check",
    "add",
    "sub",
    "neg",
    "mul",
    "matmul",
    "relu",
    "sigmoid",
    "log",
    "exp",
    "tsum",
    "logsumexp",
    "add_bias",
    "add_col",
    "scale_rows",
    "row",
    "pick",
    "take_rows",
    "concat_rows",
    "concat_cols",
    "rows_slice",
    "shift_rows",
    "dropout",
]

# Stack of active tapes; ops record on the innermost one only.
_TAPES: list["Tape"] = []

# exp(x) overflows float64 just above this point.
_EXP_LIMIT = 709.0


class Tensor:
    """A dense float64 array, optionally recorded for differentiation."""

    __slots__ = ("data", "_pullback", "_recorded")

    def __init__(self, data):
        self.data = np.asarray(data, dtype=np.float64)
        self._pullback: Callable | None = None
        self._recorded = False

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() needs a scalar, got shape {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape})"

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

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


class Parameter(Tensor):
    """Trainable tensor with a persistently accumulated gradient buffer."""

    __slots__ = ("name", "grad")

    def __init__(self, data, name: str = ""):
        super().__init__(data)
        self.name = name
        self.grad = np.zeros_like(self.data)

    def zero_grad(self) -> None:
        self.grad[...] = 0.0

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape})"


class Tape:
    """Execution-ordered record of the primitives of one forward pass."""

    __slots__ = ("_nodes",)

    def __init__(self):
        self._nodes: list[Tensor] = []

    def __enter__(self) -> "Tape":
        _TAPES.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _TAPES.pop()
        return False

    def __len__(self) -> int:
        return len(self._nodes)


def _record(out: Tensor, pullback: Callable) -> None:
    out._pullback = pullback
    out._recorded = True
    _TAPES[-1]._nodes.append(out)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(p) into every Parameter reachable from ``loss``.

    Replays the active tape newest-first. Calling it again without zeroing
    parameter gradients adds the same gradients a second time.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not _TAPES:
        raise RuntimeError("backward requires an active Tape")
    if not loss._recorded and not isinstance(loss, Parameter):
        raise RuntimeError("loss was not recorded on the active Tape")

    grads: dict[int, np.ndarray] = {}

    def send(t: Tensor, g: np.ndarray) -> None:
        if isinstance(t, Parameter):
            t.grad += g
        elif t._recorded:
            key = id(t)
            prev = grads.get(key)
            grads[key] = g if prev is None else prev + g

    send(loss, np.ones_like(loss.data))
    for node in reversed(_TAPES[-1]._nodes):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        for parent, contrib in node._pullback(g):
            send(parent, contrib)


# ---------------------------------------------------------------------------
# Elementwise primitives (equal shapes or a scalar operand).


def _scalar_reduce(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Collapse a broadcast gradient back onto a scalar operand's shape."""
    if g.shape == shape:
        return g
    return np.sum(g).reshape(shape)


def _check_elementwise(a: Tensor, b: Tensor, opname: str) -> None:
    if a.data.shape != b.data.shape and a.data.size != 1 and b.data.size != 1:
        raise ValueError(
            f"{opname} shape mismatch: {a.data.shape} vs {b.data.shape} "
            "(equal shapes or a scalar operand)"
        )


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_elementwise(a, b, "add")
    out = Tensor(a.data + b.data)
    if _TAPES:
        ash, bsh = a.data.shape, b.data.shape

        def pull(g):
            return ((a, _scalar_reduce(g, ash)), (b, _scalar_reduce(g, bsh)))

        _record(out, pull)
    return out


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_elementwise(a, b, "sub")
    out = Tensor(a.data - b.data)
    if _TAPES:
        ash, bsh = a.data.shape, b.data.shape

        def pull(g):
            return ((a, _scalar_reduce(g, ash)), (b, _scalar_reduce(-g, bsh)))

        _record(out, pull)
    return out


def neg(x) -> Tensor:
    x = _as_tensor(x)
    out = Tensor(-x.data)
    if _TAPES:
        def pull(g):
            return ((x, -g),)

        _record(out, pull)
    return out


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_elementwise(a, b, "mul")
    out = Tensor(a.data * b.data)
    if _TAPES:
        ad, bd = a.data, b.data

        def pull(g):
            return (
                (a, _scalar_reduce(g * bd, ad.shape)),
                (b, _scalar_reduce(g * ad, bd.shape)),
            )

        _record(out, pull)
    return out


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    ad, bd = a.data, b.data
    if ad.ndim != 2 or bd.ndim != 2 or ad.shape[1] != bd.shape[0]:
        raise ValueError(f"matmul shape mismatch: {ad.shape} vs {bd.shape}")
    out = Tensor(ad @ bd)
    if _TAPES:
        def pull(g):
            return ((a, g @ bd.T), (b, ad.T @ g))

        _record(out, pull)
    return out


def relu(x) -> Tensor:
    x = _as_tensor(x)
    out = Tensor(np.maximum(x.data, 0.0))
    if _TAPES:
        mask = x.data > 0.0

        def pull(g):
            return ((x, g * mask),)

        _record(out, pull)
    return out


def sigmoid(x) -> Tensor:
    x = _as_tensor(x)
    s = expit(x.data)
    out = Tensor(s)
    if _TAPES:
        def pull(g):
            return ((x, g * s * (1.0 - s)),)

        _record(out, pull)
    return out


def _first_violation(mask: np.ndarray) -> int:
    return int(np.flatnonzero(mask)[0])


def log(x) -> Tensor:
    x = _as_tensor(x)
    bad = ~(x.data > 0.0)
    if bad.any():
        i = _first_violation(bad)
        raise ValueError(
            f"log domain violation at flat index {i}: value {x.data.reshape(-1)[i]!r}"
        )
    out = Tensor(np.log(x.data))
    if _TAPES:
        xd = x.data

        def pull(g):
            return ((x, g / xd),)

        _record(out, pull)
    return out


def exp(x) -> Tensor:
    x = _as_tensor(x)
    bad = x.data > _EXP_LIMIT
    if bad.any():
        i = _first_violation(bad)
        raise ValueError(
            f"exp overflow at flat index {i}: value {x.data.reshape(-1)[i]!r}"
        )
    e = np.exp(x.data)
    out = Tensor(e)
    if _TAPES:
        def pull(g):
            return ((x, g * e),)

        _record(out, pull)
    return out


# ---------------------------------------------------------------------------
# Reductions and structured combinations.


def tsum(x) -> Tensor:
    """Sum of all entries as a scalar."""
    x = _as_tensor(x)
    out = Tensor(np.asarray(x.data.sum()))
    if _TAPES:
        shape = x.data.shape

        def pull(g):
            return ((x, np.full(shape, float(g))),)

        _record(out, pull)
    return out


def logsumexp(x, axis: int | None = None) -> Tensor:
    """Numerically stable log-sum-exp.

    1-D input with axis None reduces to a scalar; 2-D input with axis
    0 or 1 reduces that axis. The max shift is treated as a constant,
    which leaves the gradient (the softmax) unchanged.
    """
    x = _as_tensor(x)
    xd = x.data
    if axis is None:
        if xd.ndim != 1:
            raise ValueError(f"logsumexp without axis needs a 1-D input, got {xd.shape}")
        m = float(xd.max())
        e = np.exp(xd - m)
        s = float(e.sum())
        out = Tensor(np.asarray(m + np.log(s)))
        if _TAPES:
            soft = e / s

            def pull(g):
                return ((x, float(g) * soft),)

            _record(out, pull)
        return out

    if xd.ndim != 2 or axis not in (0, 1):
        raise ValueError(f"logsumexp axis form needs a 2-D input and axis 0 or 1, got {xd.shape}, axis={axis}")
    m = xd.max(axis=axis, keepdims=True)
    e = np.exp(xd - m)
    s = e.sum(axis=axis, keepdims=True)
    out = Tensor(np.squeeze(m + np.log(s), axis=axis))
    if _TAPES:
        soft = e / s

        def pull(g):
            return ((x, np.expand_dims(g, axis) * soft),)

        _record(out, pull)
    return out


def add_bias(m, v) -> Tensor:
    """Add a length-K vector to every row of an N-by-K matrix."""
    m, v = _as_tensor(m), _as_tensor(v)
    md, vd = m.data, v.data
    if md.ndim != 2 or vd.ndim != 1 or md.shape[1] != vd.shape[0]:
        raise ValueError(f"add_bias shape mismatch: {md.shape} vs {vd.shape}")
    out = Tensor(md + vd[None, :])
    if _TAPES:
        def pull(g):
            return ((m, g), (v, g.sum(axis=0)))

        _record(out, pull)
    return out


def add_col(m, v) -> Tensor:
    """Add v[i] to every entry of row i of a matrix."""
    m, v = _as_tensor(m), _as_tensor(v)
    md, vd = m.data, v.data
    if md.ndim != 2 or vd.ndim != 1 or md.shape[0] != vd.shape[0]:
        raise ValueError(f"add_col shape mismatch: {md.shape} vs {vd.shape}")
    out = Tensor(md + vd[:, None])
    if _TAPES:
        def pull(g):
            return ((m, g), (v, g.sum(axis=1)))

        _record(out, pull)
    return out


def scale_rows(m, s) -> Tensor:
    """Multiply row i of a matrix by scalar s[i]; s has shape (R,) or (R, 1)."""
    m, s = _as_tensor(m), _as_tensor(s)
    md, sd = m.data, s.data
    if md.ndim != 2 or sd.ndim not in (1, 2) or sd.size != md.shape[0]:
        raise ValueError(f"scale_rows shape mismatch: {md.shape} vs {sd.shape}")
    if sd.ndim == 2 and sd.shape[1] != 1:
        raise ValueError(f"scale_rows needs a column of scalars, got {sd.shape}")
    col = sd.reshape(-1, 1)
    out = Tensor(md * col)
    if _TAPES:
        def pull(g):
            return ((m, g * col), (s, (g * md).sum(axis=1).reshape(sd.shape)))

        _record(out, pull)
    return out


def row(m, i: int) -> Tensor:
    """Row i of a matrix as a 1-D tensor."""
    m = _as_tensor(m)
    md = m.data
    if md.ndim != 2:
        raise ValueError(f"row needs a 2-D input, got {md.shape}")
    if not 0 <= i < md.shape[0]:
        raise ValueError(f"row index {i} out of range for shape {md.shape}")
    out = Tensor(md[i].copy())
    if _TAPES:
        def pull(g):
            z = np.zeros_like(md)
            z[i] = g
            return ((m, z),)

        _record(out, pull)
    return out


def pick(t, *indices: int) -> Tensor:
    """A single entry of a 1-D or 2-D tensor as a scalar."""
    t = _as_tensor(t)
    td = t.data
    if td.ndim != len(indices):
        raise ValueError(f"pick got {len(indices)} indices for shape {td.shape}")
    for ax, i in enumerate(indices):
        if not 0 <= i < td.shape[ax]:
            raise ValueError(f"pick index {i} out of range on axis {ax} for shape {td.shape}")
    out = Tensor(np.asarray(td[indices]))
    if _TAPES:
        def pull(g):
            z = np.zeros_like(td)
            z[indices] = float(g)
            return ((t, z),)

        _record(out, pull)
    return out


def take_rows(table, ids) -> Tensor:
    """Gather rows of a table by index, with repeats allowed."""
    table = _as_tensor(table)
    td = table.data
    idx = np.asarray(ids, dtype=np.intp)
    if td.ndim != 2 or idx.ndim != 1:
        raise ValueError(f"take_rows needs a 2-D table and 1-D ids, got {td.shape} and {idx.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= td.shape[0]):
        raise ValueError(f"take_rows ids out of range for table with {td.shape[0]} rows")
    out = Tensor(td[idx])
    if _TAPES:
        def pull(g):
            z = np.zeros_like(td)
            np.add.at(z, idx, g)
            return ((table, z),)

        _record(out, pull)
    return out


def concat_rows(*parts) -> Tensor:
    """Stack 2-D tensors vertically."""
    ts = [_as_tensor(p) for p in parts]
    if not ts:
        raise ValueError("concat_rows needs at least one input")
    cols = {t.data.shape[1] if t.data.ndim == 2 else None for t in ts}
    if None in cols or len(cols) != 1:
        raise ValueError(f"concat_rows needs 2-D inputs with equal column counts, got {[t.shape for t in ts]}")
    out = Tensor(np.vstack([t.data for t in ts]))
    if _TAPES:
        sizes = [t.data.shape[0] for t in ts]

        def pull(g):
            pairs = []
            at = 0
            for t, n in zip(ts, sizes):
                pairs.append((t, g[at:at + n]))
                at += n
            return tuple(pairs)

        _record(out, pull)
    return out


def concat_cols(a, b) -> Tensor:
    """Join two 2-D tensors side by side."""
    a, b = _as_tensor(a), _as_tensor(b)
    ad, bd = a.data, b.data
    if ad.ndim != 2 or bd.ndim != 2 or ad.shape[0] != bd.shape[0]:
        raise ValueError(f"concat_cols shape mismatch: {ad.shape} vs {bd.shape}")
    out = Tensor(np.hstack([ad, bd]))
    if _TAPES:
        ca = ad.shape[1]

        def pull(g):
            return ((a, g[:, :ca]), (b, g[:, ca:]))

        _record(out, pull)
    return out


def rows_slice(m, start: int, stop: int) -> Tensor:
    """Contiguous row slice of a 2-D tensor."""
    m = _as_tensor(m)
    md = m.data
    if md.ndim != 2:
        raise ValueError(f"rows_slice needs a 2-D input, got {md.shape}")
    if not 0 <= start <= stop <= md.shape[0]:
        raise ValueError(f"rows_slice range [{start}, {stop}) invalid for shape {md.shape}")
    out = Tensor(md[start:stop].copy())
    if _TAPES:
        def pull(g):
            z = np.zeros_like(md)
            z[start:stop] = g
            return ((m, z),)

        _record(out, pull)
    return out


def _shifted(arr: np.ndarray, k: int) -> np.ndarray:
    out = np.zeros_like(arr)
    n = arr.shape[0]
    if k == 0:
        out[...] = arr
    elif k > 0:
        if k < n:
            out[k:] = arr[:n - k]
    else:
        if -k < n:
            out[:n + k] = arr[-k:]
    return out


def shift_rows(m, k: int) -> Tensor:
    """Shift rows down by k (up for negative k), zero-filling vacated rows."""
    m = _as_tensor(m)
    if m.data.ndim != 2:
        raise ValueError(f"shift_rows needs a 2-D input, got {m.data.shape}")
    out = Tensor(_shifted(m.data, k))
    if _TAPES:
        def pull(g):
            return ((m, _shifted(g, -k)),)

        _record(out, pull)
    return out


def dropout(x, p: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout; identity when p == 0. Masks are drawn from rng."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {p!r}")
    if p == 0.0:
        return _as_tensor(x)
    x = _as_tensor(x)
    mask = (rng.random(x.data.shape) >= p) / (1.0 - p)
    return mul(x, Tensor(mask))


# ---------------------------------------------------------------------------
# Finite-difference verification.


def grad_check(
    loss_fn: Callable[[], Tensor],
    params: Sequence[Parameter],
    eps: float = 1e-5,
) -> float:
    """Worst relative error between tape gradients and central differences.

    loss_fn must rebuild its forward pass on every call and reach the given
    parameters only through their data arrays. The relative error for each
    entry is |a - f| / max(|a|, |f|, 1e-8) where a is the tape gradient and
    f = (loss(x + eps) - loss(x - eps)) / (2 eps).
    """
    eps = float(eps)
    if not 1e-7 <= eps <= 1e-3:
        raise ValueError(f"eps must lie in [1e-7, 1e-3], got {eps!r}")

    def value() -> float:
        out = loss_fn()
        return out.item() if isinstance(out, Tensor) else float(out)

    base1, base2 = value(), value()
    if base1 != base2:
        raise ValueError(f"loss_fn is not deterministic: {base1!r} != {base2!r}")

    for p in params:
        p.zero_grad()
    with Tape():
        backward(loss_fn())

    worst = 0.0
    for p in params:
        flat = p.data.reshape(-1)
        gflat = p.grad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = value()
            flat[i] = orig - eps
            f_minus = value()
            flat[i] = orig
            fd = (f_plus - f_minus) / (2.0 * eps)
            a = float(gflat[i])
            err = abs(a - fd) / max(abs(a), abs(fd), 1e-8)
            if err > worst:
                worst = err
    return worst
