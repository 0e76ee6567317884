"""Operating points, slice projections and the sparse sampling matrix.

Gradients of the homogeneous parts are evaluated at Vandermonde points
u_mu = (1, mu, mu^2, ..., mu^(L-1)).  At such points the gradient of a
single degree-s branch collapses to a scalar multiple of a vector that
is a linear image of the rank-one matrix a b^T: sum the antidiagonals
after scaling column j by mu^(j*(s-1)).  Stacking the gradients of all
degrees at all points therefore turns identification into recovery of a
low-rank third-order tensor from linear samples y = P vec(T).

P is block-diagonal across tensor slices with banded (antidiagonal)
blocks; it is assembled once in sparse coordinate form and stored as CSR
so least-squares updates can reuse it without copying.

Slice order is fixed: one degree-1 slice at the fixed point mu = 1
(the degree-1 gradient is constant, so one slice suffices), then the N
points for degree 2, then degree 3, and so on up to degree d.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .tensors import as_complex_array, vectorize
from .volterra import VolterraKernelSet, gradient_of_homogeneous

_UNIT_CIRCLE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class OperatingPoints:
    """A set of pairwise-distinct points on the complex unit circle."""

    mus: np.ndarray

    def __post_init__(self):
        mus = as_complex_array(self.mus).ravel()
        if mus.size < 1:
            raise ValueError("need at least one operating point")
        off = np.abs(np.abs(mus) - 1.0)
        if off.max() > _UNIT_CIRCLE_TOL:
            raise ValueError(
                f"operating points must lie on the unit circle (max deviation {off.max():.3e})"
            )
        if np.unique(mus).size != mus.size:
            raise ValueError("operating points must be pairwise distinct")
        object.__setattr__(self, "mus", mus)

    def __len__(self) -> int:
        return self.mus.size

    def to_pairs(self) -> list[tuple[float, float]]:
        """Serialize as (re, im) pairs."""
        return [(float(m.real), float(m.imag)) for m in self.mus]

    @classmethod
    def from_pairs(cls, pairs) -> "OperatingPoints":
        return cls(np.array([complex(re, im) for re, im in pairs]))


def generate_points(n: int, seed: int) -> OperatingPoints:
    """Draw ``n`` distinct points uniformly on the unit circle.

    The phase is uniform on [0, 2*pi) from a seeded generator, so equal
    seeds give equal point sets.  Duplicate draws (vanishing probability)
    are redrawn.
    """
    if n < 1:
        raise ValueError("need at least one point")
    rng = np.random.default_rng(seed)
    mus = np.exp(2j * np.pi * rng.random(n))
    while np.unique(mus).size != mus.size:
        _, first = np.unique(mus, return_index=True)
        dup = np.setdiff1d(np.arange(n), first)
        mus[dup] = np.exp(2j * np.pi * rng.random(dup.size))
    return OperatingPoints(mus)


def vandermonde_point(mu: complex, L: int) -> np.ndarray:
    """The operating point (1, mu, mu^2, ..., mu^(L-1))."""
    if L < 1:
        raise ValueError("length must be at least 1")
    return np.power(complex(mu), np.arange(L))


def filter_transfer(a: np.ndarray, mu: complex) -> complex:
    """Transfer polynomial a_1 + a_2*mu + ... + a_{L1}*mu^(L1-1)."""
    a = as_complex_array(a).ravel()
    return complex(vandermonde_point(mu, a.size) @ a)


def hankelize(E: np.ndarray) -> np.ndarray:
    """Antidiagonal sums of a matrix: out[m] = sum of E[i, j] with i+j = m.

    For E = a b^T this is the full linear convolution of a and b.
    """
    E = np.atleast_2d(as_complex_array(E))
    L1, L2 = E.shape
    out = np.zeros(L1 + L2 - 1, dtype=np.complex128)
    idx = np.add.outer(np.arange(L1), np.arange(L2))
    np.add.at(out, idx.ravel(), E.ravel())
    return out


def project_slice(E: np.ndarray, mu: complex, s: int) -> np.ndarray:
    """Hankelize after scaling column j of ``E`` by mu^(j*(s-1)).

    For s = 1 the scaling is trivial and this is plain antidiagonal
    summation, whatever ``mu`` is.
    """
    if s < 1:
        raise ValueError("degree must be at least 1")
    E = np.atleast_2d(as_complex_array(E))
    weights = np.power(complex(mu), (s - 1) * np.arange(E.shape[1]))
    return hankelize(E * weights[np.newaxis, :])


def slice_schedule(d: int, pts: OperatingPoints) -> list[tuple[complex, int]]:
    """(mu, degree) per tensor slice, in stacking order: the fixed point
    mu = 1 for degree 1, then all points for each degree 2..d."""
    if d < 1:
        raise ValueError("polynomial degree must be at least 1")
    schedule = [(1.0 + 0.0j, 1)]
    for s in range(2, d + 1):
        schedule.extend((complex(mu), s) for mu in pts.mus)
    return schedule


@dataclass(frozen=True, eq=False)
class SamplingOperator:
    """Sparse matrix form of the concatenated slice projections.

    ``P`` has shape (((d-1)N + 1) * L,  L1 * L2 * L3) with
    L3 = 1 + N(d-1); row block n (of height L) applies the projection of
    slice n at the degree and point recorded in ``slices``.  Each block
    touches only the L1*L2 columns of its own slice, and within a block
    the nonzeros follow the antidiagonal pattern, so every row carries at
    most min(L1, L2) entries.
    """

    P: sp.csr_matrix
    L1: int
    L2: int
    d: int
    points: OperatingPoints
    slices: tuple

    @property
    def L(self) -> int:
        return self.L1 + self.L2 - 1

    @property
    def L3(self) -> int:
        return len(self.slices)

    @property
    def rows(self) -> int:
        return self.P.shape[0]

    @property
    def cols(self) -> int:
        return self.P.shape[1]

    def apply(self, tensor: np.ndarray) -> np.ndarray:
        """P @ vec(tensor) for an (L1, L2, L3) tensor."""
        t = as_complex_array(tensor)
        if t.shape != (self.L1, self.L2, self.L3):
            raise ValueError(
                f"expected tensor of shape {(self.L1, self.L2, self.L3)}, got {t.shape}"
            )
        return self.P @ vectorize(t)

    def row_block(self, slice_index: int) -> slice:
        """Row range of slice ``slice_index`` (0-based)."""
        if not 0 <= slice_index < self.L3:
            raise IndexError(f"slice {slice_index} out of range")
        return slice(slice_index * self.L, (slice_index + 1) * self.L)

    def coordinate_lines(self) -> list[str]:
        """COO text form, one ``row col re im`` line per stored entry."""
        coo = self.P.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return [
            f"{coo.row[i]} {coo.col[i]} {coo.data[i].real!r} {coo.data[i].imag!r}"
            for i in order
        ]

    def write_coordinates(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(self.coordinate_lines()) + "\n")


def build_sampling_matrix(
    L1: int, L2: int, d: int, pts: OperatingPoints
) -> SamplingOperator:
    """Assemble the sparse sampling matrix for the given shape parameters.

    Applying the result to vec(T) equals stacking
    ``project_slice(T[:, :, n], mu_n, s_n)`` over slices n in schedule
    order.
    """
    if L1 < 1 or L2 < 1:
        raise ValueError("filter lengths must be at least 1")
    schedule = slice_schedule(d, pts)
    L = L1 + L2 - 1
    L3 = len(schedule)

    # One slice block: entry (i + j, i + j*L1) = mu^(j*(s-1)); replicate
    # with row/column offsets per slice.
    i_idx = np.repeat(np.arange(L1), L2)
    j_idx = np.tile(np.arange(L2), L1)
    rows_local = i_idx + j_idx
    cols_local = i_idx + j_idx * L1

    rows = np.empty(L1 * L2 * L3, dtype=np.int64)
    cols = np.empty_like(rows)
    data = np.empty(L1 * L2 * L3, dtype=np.complex128)
    for n, (mu, s) in enumerate(schedule):
        sl = slice(n * L1 * L2, (n + 1) * L1 * L2)
        rows[sl] = rows_local + n * L
        cols[sl] = cols_local + n * L1 * L2
        data[sl] = np.power(mu, (s - 1) * j_idx)
    P = sp.coo_matrix(
        (data, (rows, cols)), shape=(L3 * L, L1 * L2 * L3)
    ).tocsr()
    return SamplingOperator(
        P=P, L1=L1, L2=L2, d=d, points=pts, slices=tuple(schedule)
    )


def build_gradient_vector(
    kernels: VolterraKernelSet, pts: OperatingPoints
) -> np.ndarray:
    """Stack the homogeneous-part gradients at the scheduled points.

    Block n is the gradient of the degree-s_n part at the Vandermonde
    point of mu_n, evaluated by contracting the order-s kernel; the
    result has length ((d-1)N + 1) * L.
    """
    L = kernels.memory
    blocks = [
        gradient_of_homogeneous(kernels, s, vandermonde_point(mu, L))
        for mu, s in slice_schedule(kernels.degree, pts)
    ]
    return np.concatenate(blocks)


def build_nonlinearity_factor(A, C, pts: OperatingPoints) -> np.ndarray:
    """Third CP factor of the sampled tensor for known front filters and
    polynomial coefficients.

    Column l holds c_{l,1} in the degree-1 row, then
    s * c_{l,s} * a_l(mu_k)^(s-1) for each degree s >= 2 and point k: the
    per-slice gradient scale of branch l.
    """
    A = as_complex_array(np.atleast_2d(A))
    C = as_complex_array(np.atleast_2d(C))
    if A.shape[1] != C.shape[1]:
        raise ValueError("filter and coefficient branch counts disagree")
    d = C.shape[0]
    n = len(pts)
    H = np.zeros((1 + n * (d - 1), A.shape[1]), dtype=np.complex128)
    for ell in range(A.shape[1]):
        H[0, ell] = C[0, ell]
        a_mu = np.array([filter_transfer(A[:, ell], mu) for mu in pts.mus])
        for s in range(2, d + 1):
            rows = slice(1 + n * (s - 2), 1 + n * (s - 1))
            H[rows, ell] = s * C[s - 1, ell] * a_mu ** (s - 1)
    return H
