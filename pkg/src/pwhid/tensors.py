"""Dense complex tensor arithmetic and rank-one (CP) factor handling.

All vectorization in this package is column-major (Fortran order): the
entry at multi-index (i, j, k) of an L1 x L2 x L3 array maps to linear
position i + j*L1 + k*L1*L2.  Everything downstream (sampling matrices,
least-squares updates) relies on this convention, so :func:`vectorize`
and :func:`tensor_from_vec` are the only places the index mapping lives.

Tensors are plain :class:`numpy.ndarray` objects promoted to complex
double precision on entry; the identification pipeline is complex-valued
throughout, and a single numeric type avoids silent casts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def as_complex_array(x) -> np.ndarray:
    """Return ``x`` as a complex128 ndarray (no copy when already one)."""
    return np.asarray(x, dtype=np.complex128)


def contract(t: np.ndarray, mode: int, v: np.ndarray) -> np.ndarray:
    """Contract tensor ``t`` with vector ``v`` along ``mode`` (0-based).

    The result has order one less than ``t``; contracting every mode of
    an order-s tensor yields a 0-d array (scalar).

    Raises
    ------
    ValueError
        If ``v`` is not a vector of length ``t.shape[mode]``.
    """
    t = as_complex_array(t)
    v = as_complex_array(v)
    if v.ndim != 1:
        raise ValueError(f"contraction vector must be 1-d, got shape {v.shape}")
    if mode < 0 or mode >= t.ndim:
        raise ValueError(f"mode {mode} out of range for order-{t.ndim} tensor")
    if t.shape[mode] != v.shape[0]:
        raise ValueError(
            f"cannot contract mode {mode} of size {t.shape[mode]} "
            f"with vector of length {v.shape[0]}"
        )
    return np.tensordot(t, v, axes=(mode, 0))


def kronecker(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product of two matrices (or vectors)."""
    return np.kron(as_complex_array(a), as_complex_array(b))


def khatri_rao(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Column-wise Khatri-Rao product.

    For ``a`` of shape (I, r) and ``b`` of shape (J, r), returns the
    (I*J, r) matrix whose column l is ``kron(a[:, l], b[:, l])``.
    """
    a = np.atleast_2d(as_complex_array(a))
    b = np.atleast_2d(as_complex_array(b))
    if a.shape[1] != b.shape[1]:
        raise ValueError(
            f"Khatri-Rao needs equal column counts, got {a.shape[1]} and {b.shape[1]}"
        )
    i, r = a.shape
    j = b.shape[0]
    # kron(a_l, b_l) puts b's index fastest: row i*J + j.
    return np.einsum("ir,jr->ijr", a, b).reshape(i * j, r)


@dataclass(frozen=True, eq=False)
class CPDFactors:
    """Factor matrices (A, B, H) of a third-order polyadic decomposition.

    All three matrices share the same number of columns r; the
    represented tensor has shape (A.shape[0], B.shape[0], H.shape[0]).
    """

    A: np.ndarray
    B: np.ndarray
    H: np.ndarray

    def __post_init__(self):
        for name in ("A", "B", "H"):
            object.__setattr__(self, name, as_complex_array(getattr(self, name)))
            m = getattr(self, name)
            if m.ndim != 2:
                raise ValueError(f"factor {name} must be a matrix, got shape {m.shape}")
        if not (self.A.shape[1] == self.B.shape[1] == self.H.shape[1]):
            raise ValueError(
                "factor matrices must share a column count, got "
                f"{self.A.shape[1]}, {self.B.shape[1]}, {self.H.shape[1]}"
            )

    @property
    def rank(self) -> int:
        return self.A.shape[1]

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.A.shape[0], self.B.shape[0], self.H.shape[0])


def cpd_eval(factors: CPDFactors) -> np.ndarray:
    """Evaluate the sum of rank-one terms: Y[i,j,k] = sum_l A[i,l] B[j,l] H[k,l]."""
    return np.einsum("il,jl,kl->ijk", factors.A, factors.B, factors.H)


def vectorize(t: np.ndarray) -> np.ndarray:
    """Column-major vectorization of a tensor or matrix."""
    return np.ravel(as_complex_array(t), order="F")


def tensor_from_vec(v: np.ndarray, dims) -> np.ndarray:
    """Inverse of :func:`vectorize` for the given dimensions."""
    v = as_complex_array(v)
    dims = tuple(int(d) for d in dims)
    n = int(np.prod(dims)) if dims else 1
    if v.size != n:
        raise ValueError(f"vector of length {v.size} does not fill dims {dims}")
    return v.reshape(dims, order="F")
