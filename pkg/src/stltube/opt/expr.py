"""Arrays of affine expressions over model variables.

An :class:`AffExpr` behaves like a small numpy array whose entries are affine
functions ``coef @ x + const`` of the decision vector ``x``. Only the
operations needed to assemble tube and containment constraints are provided:
addition, scaling by constants (broadcast), left/right multiplication by
constant matrices, stacking, indexing and reductions.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp


def _as_csr(m, ncols: int) -> sp.csr_matrix:
    m = sp.csr_matrix(m)
    if m.shape[1] < ncols:
        m = sp.csr_matrix((m.data, m.indices, m.indptr), shape=(m.shape[0], ncols))
    return m


class AffExpr:
    """Dense-shaped array of affine expressions.

    Parameters
    ----------
    coef : sparse matrix, shape (size, nvars)
        Row ``k`` holds the coefficients of flattened entry ``k``.
    const : array_like, shape (size,)
    shape : tuple of int
    """

    __array_ufunc__ = None  # make numpy defer to the reflected operators

    def __init__(self, coef, const, shape):
        self.shape = tuple(int(s) for s in shape)
        size = int(np.prod(self.shape)) if self.shape else 1
        self.coef = sp.csr_matrix(coef)
        self.const = np.asarray(const, dtype=float).reshape(-1)
        if self.coef.shape[0] != size or self.const.shape[0] != size:
            raise ValueError("coefficient rows do not match shape %s" % (self.shape,))

    # -- construction -----------------------------------------------------
    @classmethod
    def constant(cls, value, nvars: int = 0) -> "AffExpr":
        value = np.asarray(value, dtype=float)
        size = value.size
        return cls(sp.csr_matrix((size, nvars)), value.reshape(-1), value.shape)

    @classmethod
    def variables(cls, first: int, shape, nvars: int) -> "AffExpr":
        shape = tuple(shape)
        size = int(np.prod(shape)) if shape else 1
        rows = np.arange(size)
        coef = sp.csr_matrix((np.ones(size), (rows, first + rows)), shape=(size, nvars))
        return cls(coef, np.zeros(size), shape)

    # -- basic properties -------------------------------------------------
    @property
    def size(self) -> int:
        return self.const.shape[0]

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def nvars(self) -> int:
        return self.coef.shape[1]

    def __len__(self) -> int:
        return self.shape[0]

    def __repr__(self) -> str:
        return "AffExpr(shape=%s, nvars=%d)" % (self.shape, self.nvars)

    def value(self, x) -> np.ndarray:
        """Evaluate at the decision vector ``x``."""
        x = np.asarray(x, dtype=float)
        n = self.nvars
        v = self.coef @ x[:n] + self.const
        return v.reshape(self.shape)

    def is_constant(self) -> bool:
        return self.coef.nnz == 0

    # -- helpers ----------------------------------------------------------
    def _select(self, idx: np.ndarray) -> "AffExpr":
        flat = np.asarray(idx).reshape(-1)
        return AffExpr(self.coef[flat], self.const[flat], np.shape(idx))

    def _index_grid(self) -> np.ndarray:
        return np.arange(self.size).reshape(self.shape)

    @staticmethod
    def _wrap(other, nvars: int) -> "AffExpr":
        if isinstance(other, AffExpr):
            return other
        return AffExpr.constant(other, nvars)

    # -- arithmetic -------------------------------------------------------
    def __add__(self, other):
        other = self._wrap(other, self.nvars)
        shape = np.broadcast_shapes(self.shape, other.shape)
        a = self._select(np.broadcast_to(self._index_grid(), shape))
        b = other._select(np.broadcast_to(other._index_grid(), shape))
        n = max(a.nvars, b.nvars)
        return AffExpr(_as_csr(a.coef, n) + _as_csr(b.coef, n), a.const + b.const, shape)

    __radd__ = __add__

    def __neg__(self):
        return AffExpr(-self.coef, -self.const, self.shape)

    def __sub__(self, other):
        return self + (-self._wrap(other, self.nvars))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, AffExpr):
            if other.is_constant():
                other = other.const.reshape(other.shape)
            elif self.is_constant():
                return other * self.const.reshape(self.shape)
            else:
                raise TypeError("product of two non-constant expressions is not affine")
        other = np.asarray(other, dtype=float)
        shape = np.broadcast_shapes(self.shape, other.shape)
        a = self._select(np.broadcast_to(self._index_grid(), shape))
        w = np.broadcast_to(other, shape).reshape(-1)
        return AffExpr(sp.diags(w) @ a.coef, w * a.const, shape)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self * (1.0 / np.asarray(other, dtype=float))

    def __matmul__(self, other):
        # self (n, q) @ B (q, p)  or  self (q,) @ B (q, p)
        if isinstance(other, AffExpr):
            if not other.is_constant():
                raise TypeError("product of two non-constant expressions is not affine")
            other = other.const.reshape(other.shape)
        B = np.asarray(other, dtype=float)
        if self.ndim == 1:
            return (self.reshape((1, self.shape[0])) @ B).reshape(B.shape[1:])
        n, q = self.shape
        if B.ndim == 1:
            return (self @ B.reshape(q, 1)).reshape((n,))
        if B.shape[0] != q:
            raise ValueError("matmul shape mismatch %s @ %s" % (self.shape, B.shape))
        K = sp.kron(sp.identity(n, format="csr"), sp.csr_matrix(B.T), format="csr")
        return AffExpr(K @ self.coef, K @ self.const, (n, B.shape[1]))

    def __rmatmul__(self, other):
        # A (m, n) @ self (n, q)  or  A (m, n) @ self (n,)
        A = np.asarray(other, dtype=float)
        if A.ndim == 1:
            return (A.reshape(1, -1) @ self).reshape(self.shape[1:])
        if A.shape[1] != self.shape[0]:
            raise ValueError("matmul shape mismatch %s @ %s" % (A.shape, self.shape))
        if self.ndim == 1:
            As = sp.csr_matrix(A)
            return AffExpr(As @ self.coef, As @ self.const, (A.shape[0],))
        q = self.shape[1]
        K = sp.kron(sp.csr_matrix(A), sp.identity(q, format="csr"), format="csr")
        return AffExpr(K @ self.coef, K @ self.const, (A.shape[0], q))

    # -- shape manipulation -----------------------------------------------
    def __getitem__(self, key):
        return self._select(self._index_grid()[key])

    def reshape(self, shape) -> "AffExpr":
        shape = tuple(shape) if np.iterable(shape) else (int(shape),)
        return AffExpr(self.coef, self.const, np.empty(self.size).reshape(shape).shape)

    def ravel(self) -> "AffExpr":
        return AffExpr(self.coef, self.const, (self.size,))

    @property
    def T(self) -> "AffExpr":
        return self._select(self._index_grid().T)

    def sum(self, axis=None) -> "AffExpr":
        grid = self._index_grid()
        if axis is None:
            groups = grid.reshape(1, -1)
            out_shape: tuple = ()
        else:
            moved = np.moveaxis(grid, axis, -1)
            out_shape = moved.shape[:-1]
            groups = moved.reshape(-1, moved.shape[-1])
        nout, k = groups.shape
        rows = np.repeat(np.arange(nout), k)
        S = sp.csr_matrix((np.ones(nout * k), (rows, groups.reshape(-1))), shape=(nout, self.size))
        return AffExpr(S @ self.coef, S @ self.const, out_shape)


def as_expr(value, nvars: int = 0) -> AffExpr:
    if isinstance(value, AffExpr):
        return value
    return AffExpr.constant(value, nvars)


def concatenate(items: Sequence, axis: int = 0):
    """Concatenate arrays and expressions; returns ndarray when all are constant."""
    items = list(items)
    if not any(isinstance(it, AffExpr) for it in items):
        return np.concatenate([np.atleast_1d(np.asarray(it, dtype=float)) for it in items],
                              axis=axis)
    nv = max(it.nvars for it in items if isinstance(it, AffExpr))
    exprs = [as_expr(it, nv) for it in items]
    exprs = [e.reshape((1,)) if e.ndim == 0 else e for e in exprs]  # scalars act as 1-vectors
    offsets = np.cumsum([0] + [e.size for e in exprs])
    grids = [np.arange(e.size).reshape(e.shape) + off for e, off in zip(exprs, offsets)]
    order = np.concatenate(grids, axis=axis)
    coef = sp.vstack([_as_csr(e.coef, nv) for e in exprs], format="csr")
    const = np.concatenate([e.const for e in exprs])
    big = AffExpr(coef, const, (int(offsets[-1]),))
    return big._select(order)


def hstack(items: Iterable):
    return concatenate(list(items), axis=1)


def vstack(items: Iterable):
    return concatenate(list(items), axis=0)


def value_of(obj, x) -> np.ndarray:
    """Evaluate an expression or pass a constant through as an array."""
    if isinstance(obj, AffExpr):
        return obj.value(x)
    return np.asarray(obj, dtype=float)
