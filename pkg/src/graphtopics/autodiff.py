"""Minimal reverse-mode autodiff over 2-D double-precision arrays.

Every value is a :class:`Tensor` holding a ``(rows, cols)`` float64 array.
Operations executed while a :class:`Tape` is active record a backward rule;
``backward(loss, tape)`` replays the tape in reverse, accumulating gradients
into every ``requires_grad`` tensor reachable from the scalar loss. Tensors
used more than once sum their gradient contributions.

Sparse matrices are constants: no gradient ever flows into a
:class:`SparseMatrix` (graph adjacency is data, not a parameter).
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


class ShapeError(ValueError):
    """Operand shapes incompatible with the requested operation."""


class BatchError(ValueError):
    """Too few rows for an operation that needs batch statistics."""


_TLS = threading.local()


def _active_tape():
    return getattr(_TLS, "tape", None)


class Tape:
    """Ordered record of executed operations with their backward rules.

    Use as a context manager around a forward pass; one tape at a time per
    thread. Replaying the steps in reverse order applies the chain rule and
    accumulates each tensor's gradient exactly once per use.
    """

    def __init__(self):
        self._steps = []

    def _record(self, fn):
        self._steps.append(fn)

    def __enter__(self):
        if _active_tape() is not None:
            raise RuntimeError("another tape is already active on this thread")
        _TLS.tape = self
        return self

    def __exit__(self, exc_type, exc, tb):
        _TLS.tape = None
        return False

    def __len__(self):
        return len(self._steps)


class Tensor:
    """2-D float64 array with an optional gradient accumulator.

    1-D input is promoted to a single row; scalars to shape (1, 1).
    Set ``requires_grad=True`` on leaves (parameters) whose gradient you
    want after :func:`backward`.
    """

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise ShapeError(f"tensors are 2-D, got ndim={arr.ndim}")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None

    @classmethod
    def _wrap(cls, arr: np.ndarray, requires_grad: bool) -> "Tensor":
        t = cls.__new__(cls)
        t.data = arr
        t.requires_grad = requires_grad
        t.grad = None
        return t

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


class SparseMatrix:
    """Constant sparse matrix (CSR inside); coordinates unique, values nonzero."""

    def __init__(self, matrix):
        csr = sp.csr_matrix(matrix, dtype=np.float64, copy=True)
        csr.sum_duplicates()
        csr.eliminate_zeros()
        csr.sort_indices()
        self.csr = csr

    @classmethod
    def from_coo(cls, rows, cols, vals, shape) -> "SparseMatrix":
        return cls(sp.coo_matrix((vals, (rows, cols)), shape=shape))

    @property
    def shape(self):
        return self.csr.shape

    @property
    def nnz(self) -> int:
        return self.csr.nnz

    def entries(self):
        """Canonical (rows, cols, values) arrays of the stored entries."""
        coo = self.csr.tocoo()
        return coo.row, coo.col, coo.data

    def to_dense(self) -> np.ndarray:
        return self.csr.toarray()

    def transpose(self) -> "SparseMatrix":
        return SparseMatrix(self.csr.T)

    def max_asymmetry(self) -> float:
        """max |M - M^T| over stored entries; 0.0 for exactly symmetric."""
        d = self.csr - self.csr.T
        return 0.0 if d.nnz == 0 else float(np.max(np.abs(d.data)))


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _accumulate(t: Tensor, g: np.ndarray):
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _emit(out: Tensor, bwd):
    """Record a backward rule if a tape is active and the output needs grad."""
    tape = _active_tape()
    if tape is not None and out.requires_grad:
        tape._record(bwd)
    return out


def _needs_grad(*tensors) -> bool:
    return _active_tape() is not None and any(t.requires_grad for t in tensors)


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a, b) -> Tensor:
    """Matrix product a @ b with gradients into both operands."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul inner dims {a.shape} x {b.shape}")
    out = Tensor._wrap(a.data @ b.data, _needs_grad(a, b))

    def bwd():
        g = out.grad
        if g is None:
            return
        if a.requires_grad:
            _accumulate(a, g @ b.data.T)
        if b.requires_grad:
            _accumulate(b, a.data.T @ g)

    return _emit(out, bwd)


def spmm(s: SparseMatrix, b) -> Tensor:
    """Sparse-dense product s @ b; gradient flows into b only (s is constant)."""
    b = _as_tensor(b)
    if s.shape[1] != b.data.shape[0]:
        raise ShapeError(f"spmm inner dims {s.shape} x {b.shape}")
    out = Tensor._wrap(s.csr @ b.data, _needs_grad(b))

    def bwd():
        g = out.grad
        if g is None:
            return
        if b.requires_grad:
            _accumulate(b, s.csr.T @ g)

    return _emit(out, bwd)


def transpose(x) -> Tensor:
    x = _as_tensor(x)
    out = Tensor._wrap(np.ascontiguousarray(x.data.T), _needs_grad(x))

    def bwd():
        g = out.grad
        if g is None:
            return
        if x.requires_grad:
            _accumulate(x, g.T)

    return _emit(out, bwd)


def select_rows(x, indices) -> Tensor:
    """Gather rows of x by index; backward scatter-adds into the source rows."""
    x = _as_tensor(x)
    idx = np.asarray(indices, dtype=np.intp)
    if idx.ndim != 1:
        raise ShapeError("row indices must be 1-D")
    if idx.size and (idx.min() < 0 or idx.max() >= x.data.shape[0]):
        raise ShapeError("row index out of range")
    out = Tensor._wrap(x.data[idx], _needs_grad(x))

    def bwd():
        g = out.grad
        if g is None:
            return
        if x.requires_grad:
            full = np.zeros_like(x.data)
            np.add.at(full, idx, g)
            _accumulate(x, full)

    return _emit(out, bwd)


# ---------------------------------------------------------------------------
# pointwise arithmetic


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"add shapes {a.shape} vs {b.shape}")
    out = Tensor._wrap(a.data + b.data, _needs_grad(a, b))

    def bwd():
        g = out.grad
        if g is None:
            return
        if a.requires_grad:
            _accumulate(a, g)
        if b.requires_grad:
            _accumulate(b, g)

    return _emit(out, bwd)


def add_bias(x, bias) -> Tensor:
    """x (m, n) + bias (1, n), broadcast over rows."""
    x, bias = _as_tensor(x), _as_tensor(bias)
    if bias.shape != (1, x.shape[1]):
        raise ShapeError(f"bias shape {bias.shape} for input {x.shape}")
    out = Tensor._wrap(x.data + bias.data, _needs_grad(x, bias))

    def bwd():
        g = out.grad
        if g is None:
            return
        if x.requires_grad:
            _accumulate(x, g)
        if bias.requires_grad:
            _accumulate(bias, g.sum(axis=0, keepdims=True))

    return _emit(out, bwd)


def add_scalar(x, c: float) -> Tensor:
    x = _as_tensor(x)
    out = Tensor._wrap(x.data + float(c), _needs_grad(x))

    def bwd():
        g = out.grad
        if g is not None and x.requires_grad:
            _accumulate(x, g)

    return _emit(out, bwd)


def mul(a, b) -> Tensor:
    """Elementwise product of two same-shape tensors."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"mul shapes {a.shape} vs {b.shape}")
    out = Tensor._wrap(a.data * b.data, _needs_grad(a, b))

    def bwd():
        g = out.grad
        if g is None:
            return
        if a.requires_grad:
            _accumulate(a, g * b.data)
        if b.requires_grad:
            _accumulate(b, g * a.data)

    return _emit(out, bwd)


def mul_const(x, c) -> Tensor:
    """Elementwise product with a constant scalar or same-shape array."""
    x = _as_tensor(x)
    c = np.asarray(c, dtype=np.float64)
    out = Tensor._wrap(x.data * c, _needs_grad(x))
    if out.data.shape != x.data.shape:
        raise ShapeError(f"constant of shape {c.shape} broadcasts {x.shape} up")

    def bwd():
        g = out.grad
        if g is not None and x.requires_grad:
            _accumulate(x, g * c)

    return _emit(out, bwd)


def sum_all(x) -> Tensor:
    """Sum of all entries, as a (1, 1) tensor."""
    x = _as_tensor(x)
    out = Tensor._wrap(np.array([[x.data.sum()]]), _needs_grad(x))

    def bwd():
        g = out.grad
        if g is not None and x.requires_grad:
            _accumulate(x, np.full_like(x.data, g[0, 0]))

    return _emit(out, bwd)


# ---------------------------------------------------------------------------
# pointwise nonlinearities


def exp(x) -> Tensor:
    x = _as_tensor(x)
    out = Tensor._wrap(np.exp(x.data), _needs_grad(x))

    def bwd():
        g = out.grad
        if g is not None and x.requires_grad:
            _accumulate(x, g * out.data)

    return _emit(out, bwd)


def log(x) -> Tensor:
    """Natural log; caller guarantees positive input (see reconstruction loss)."""
    x = _as_tensor(x)
    out = Tensor._wrap(np.log(x.data), _needs_grad(x))

    def bwd():
        g = out.grad
        if g is not None and x.requires_grad:
            _accumulate(x, g / x.data)

    return _emit(out, bwd)


def sqrt(x) -> Tensor:
    """Elementwise square root; subgradient 0 where the input is 0."""
    x = _as_tensor(x)
    root = np.sqrt(x.data)
    out = Tensor._wrap(root, _needs_grad(x))

    def bwd():
        g = out.grad
        if g is None or not x.requires_grad:
            return
        denom = 2.0 * root
        local = np.divide(1.0, denom, out=np.zeros_like(denom), where=denom > 0)
        _accumulate(x, g * local)

    return _emit(out, bwd)


def arccos(x) -> Tensor:
    """Elementwise arccos; subgradient 0 at |x| >= 1.

    The derivative -1/sqrt(1-x^2) is singular at the boundary; masked
    upstream contributions there would otherwise turn into 0*inf = NaN
    (e.g. the excluded diagonal of a kernel Gram matrix).
    """
    x = _as_tensor(x)
    out = Tensor._wrap(np.arccos(np.clip(x.data, -1.0, 1.0)), _needs_grad(x))

    def bwd():
        g = out.grad
        if g is None or not x.requires_grad:
            return
        inside = np.abs(x.data) < 1.0
        denom = np.sqrt(np.clip(1.0 - x.data * x.data, 0.0, None))
        local = np.divide(-1.0, denom, out=np.zeros_like(denom), where=inside)
        _accumulate(x, g * local)

    return _emit(out, bwd)


def clamp(x, lo: float, hi: float) -> Tensor:
    """Clip to [lo, hi]; gradient passes on the closed interval, 0 outside."""
    x = _as_tensor(x)
    out = Tensor._wrap(np.clip(x.data, lo, hi), _needs_grad(x))

    def bwd():
        g = out.grad
        if g is None or not x.requires_grad:
            return
        mask = (x.data >= lo) & (x.data <= hi)
        _accumulate(x, g * mask)

    return _emit(out, bwd)


def leaky_relu(x, slope: float = 0.01) -> Tensor:
    """max(x, slope*x); slope must lie in (0, 1)."""
    if not 0.0 < slope < 1.0:
        raise ValueError(f"leaky_relu slope must be in (0, 1), got {slope}")
    x = _as_tensor(x)
    out = Tensor._wrap(np.where(x.data >= 0.0, x.data, slope * x.data), _needs_grad(x))

    def bwd():
        g = out.grad
        if g is not None and x.requires_grad:
            _accumulate(x, g * np.where(x.data >= 0.0, 1.0, slope))

    return _emit(out, bwd)


def softmax_rows(x) -> Tensor:
    """Row-wise softmax, numerically stabilized by row-max subtraction."""
    x = _as_tensor(x)
    shifted = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=1, keepdims=True)
    out = Tensor._wrap(y, _needs_grad(x))

    def bwd():
        g = out.grad
        if g is None or not x.requires_grad:
            return
        inner = (g * y).sum(axis=1, keepdims=True)
        _accumulate(x, y * (g - inner))

    return _emit(out, bwd)


# ---------------------------------------------------------------------------
# batch normalization


@dataclass
class BatchNormState:
    """Running mean/variance, updated in train mode, consumed in eval mode."""

    mean: np.ndarray
    var: np.ndarray

    @classmethod
    def initial(cls, width: int) -> "BatchNormState":
        return cls(mean=np.zeros(width), var=np.ones(width))

    def copy(self) -> "BatchNormState":
        return BatchNormState(self.mean.copy(), self.var.copy())


def batch_norm(x, gamma, beta, state: BatchNormState, mode: str = "train",
               eps: float = 1e-5, momentum: float = 0.1) -> Tensor:
    """Column-wise batch normalization with scale gamma and shift beta.

    Train mode normalizes by the batch mean and biased variance and updates
    the running statistics; eval mode normalizes by the running statistics.
    Gradients flow into x, gamma and beta (through the batch statistics in
    train mode).
    """
    x, gamma, beta = _as_tensor(x), _as_tensor(gamma), _as_tensor(beta)
    n = x.shape[1]
    if gamma.shape != (1, n) or beta.shape != (1, n):
        raise ShapeError(f"gamma/beta must be (1, {n})")
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")

    if mode == "train":
        m = x.shape[0]
        if m < 2:
            raise BatchError(f"batch_norm train mode needs >= 2 rows, got {m}")
        mu = x.data.mean(axis=0)
        xc = x.data - mu
        var = (xc * xc).mean(axis=0)
        ivar = 1.0 / np.sqrt(var + eps)
        xhat = xc * ivar
        state.mean = (1.0 - momentum) * state.mean + momentum * mu
        state.var = (1.0 - momentum) * state.var + momentum * var
    else:
        xc = x.data - state.mean
        ivar = 1.0 / np.sqrt(state.var + eps)
        xhat = xc * ivar

    out = Tensor._wrap(gamma.data * xhat + beta.data, _needs_grad(x, gamma, beta))

    if mode == "train":

        def bwd():
            g = out.grad
            if g is None:
                return
            if gamma.requires_grad:
                _accumulate(gamma, (g * xhat).sum(axis=0, keepdims=True))
            if beta.requires_grad:
                _accumulate(beta, g.sum(axis=0, keepdims=True))
            if x.requires_grad:
                m_rows = x.data.shape[0]
                gx = g * gamma.data
                dvar = (gx * xc).sum(axis=0) * (-0.5) * ivar**3
                dmu = -(gx.sum(axis=0) * ivar) + dvar * (-2.0) * xc.mean(axis=0)
                _accumulate(x, gx * ivar + dvar * 2.0 * xc / m_rows + dmu / m_rows)

    else:

        def bwd():
            g = out.grad
            if g is None:
                return
            if gamma.requires_grad:
                _accumulate(gamma, (g * xhat).sum(axis=0, keepdims=True))
            if beta.requires_grad:
                _accumulate(beta, g.sum(axis=0, keepdims=True))
            if x.requires_grad:
                _accumulate(x, g * gamma.data * ivar)

    return _emit(out, bwd)


# ---------------------------------------------------------------------------
# backward


def backward(loss: Tensor, tape: Tape):
    """Run the chain rule from a scalar loss back through the tape."""
    if not isinstance(loss, Tensor) or loss.data.shape != (1, 1):
        raise ValueError("backward expects a scalar (1, 1) tensor")
    loss.grad = np.ones((1, 1))
    for step in reversed(tape._steps):
        step()
