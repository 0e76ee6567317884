"""Low-rank tensor recovery from linear samples by partial ALS.

Solves  min over (A, B, H) of || P vec([[A, B, H]]) - y ||_2^2  by cycling
exact least-squares updates of one factor at a time.  With the other two
factors fixed, vec([[A, B, H]]) is linear in the free factor:

    vec(T) = ((H kr B) kron I_L1) vec(A)
    vec(T) = [h_1 kron I_L2 kron a_1 | ... | h_r kron I_L2 kron a_r] vec(B)
    vec(T) = [I_L3 kron b_1 kron a_1 | ... | I_L3 kron b_r kron a_r] vec(H)

(kr = column-wise Khatri-Rao, kron = Kronecker, all under column-major
vectorization), so each update is vec(X) = pinv(P K) y.  The structured
matrix K is assembled sparse and multiplied against the sparse P; only
the small M x (unknowns) product is ever dense.  Each block update is a
global minimizer over its factor, so the residual never increases.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .sampling import SamplingOperator
from .tensors import CPDFactors, as_complex_array, cpd_eval, khatri_rao, vectorize


@dataclass(frozen=True)
class ALSOptions:
    """Knobs for :func:`partial_als`.

    ``pinv_cutoff`` is relative to the largest singular value of each
    block matrix; singular values below it are truncated, which makes
    every update the minimum-norm solution even for rank-deficient
    blocks.  A restart counts as converged when its final residual is at
    most ``success_residual``.
    """

    max_cycles: int = 250
    rel_change_tol: float = 1e-12
    pinv_cutoff: float = 1e-12
    restarts: int = 10
    seed: int = 0
    normalize_each_cycle: bool = True
    success_residual: float = 1e-6
    parallel_restarts: bool = False

    def __post_init__(self):
        if self.max_cycles < 1:
            raise ValueError("max_cycles must be at least 1")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if self.rel_change_tol <= 0 or self.pinv_cutoff <= 0:
            raise ValueError("tolerances must be positive")


@dataclass(eq=False)
class ALSResult:
    """Outcome of one ALS run (or the best of several restarts).

    ``residual_history`` holds || P vec([[A,B,H]]) - y ||_2 after each
    full A->B->H cycle and is non-increasing up to floating-point noise.
    ``block_ranks`` are the numerical ranks of the three block matrices
    on the final cycle (full rank is L1*r, L2*r, L3*r respectively).
    On the result returned by :func:`partial_als`, ``restart_histories``
    keeps every restart's residual history for reporting.
    """

    factors: CPDFactors
    residual_history: list
    converged: bool
    cycles_used: int
    restart_index: int = 0
    block_ranks: tuple = (0, 0, 0)
    restart_histories: list = field(default=None)

    @property
    def final_residual(self) -> float:
        return self.residual_history[-1]


def _sparse_col(v: np.ndarray) -> sp.csr_matrix:
    return sp.csr_matrix(as_complex_array(v).reshape(-1, 1))


def build_z_a(op: SamplingOperator, B: np.ndarray, H: np.ndarray) -> np.ndarray:
    """Block matrix mapping vec(A) to the samples, with B and H fixed."""
    K = sp.kron(sp.csr_matrix(khatri_rao(H, B)), sp.identity(op.L1, format="csr"))
    return (op.P @ K).toarray()


def build_z_b(op: SamplingOperator, A: np.ndarray, H: np.ndarray) -> np.ndarray:
    """Block matrix mapping vec(B) to the samples, with A and H fixed."""
    eye = sp.identity(op.L2, format="csr")
    blocks = [
        sp.kron(sp.kron(_sparse_col(H[:, ell]), eye), _sparse_col(A[:, ell]))
        for ell in range(A.shape[1])
    ]
    return (op.P @ sp.hstack(blocks)).toarray()


def build_z_h(op: SamplingOperator, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Block matrix mapping vec(H) to the samples, with A and B fixed."""
    eye = sp.identity(op.L3, format="csr")
    blocks = [
        sp.kron(sp.kron(eye, _sparse_col(B[:, ell])), _sparse_col(A[:, ell]))
        for ell in range(A.shape[1])
    ]
    return (op.P @ sp.hstack(blocks)).toarray()


def _solve_block(Z: np.ndarray, y: np.ndarray, cutoff: float, shape):
    x, _, rank, _ = np.linalg.lstsq(Z, y, rcond=cutoff)
    return x.reshape(shape, order="F"), int(rank)


def als_update_a(
    op: SamplingOperator, y: np.ndarray, B: np.ndarray, H: np.ndarray,
    pinv_cutoff: float = 1e-12,
) -> np.ndarray:
    """Exact least-squares update of A with B, H fixed."""
    B = as_complex_array(B)
    H = as_complex_array(H)
    _check_shapes(op, y, B=B, H=H)
    A, _ = _solve_block(build_z_a(op, B, H), y, pinv_cutoff, (op.L1, B.shape[1]))
    return A


def als_update_b(
    op: SamplingOperator, y: np.ndarray, A: np.ndarray, H: np.ndarray,
    pinv_cutoff: float = 1e-12,
) -> np.ndarray:
    """Exact least-squares update of B with A, H fixed."""
    A = as_complex_array(A)
    H = as_complex_array(H)
    _check_shapes(op, y, A=A, H=H)
    B, _ = _solve_block(build_z_b(op, A, H), y, pinv_cutoff, (op.L2, A.shape[1]))
    return B


def als_update_h(
    op: SamplingOperator, y: np.ndarray, A: np.ndarray, B: np.ndarray,
    pinv_cutoff: float = 1e-12,
) -> np.ndarray:
    """Exact least-squares update of H with A, B fixed."""
    A = as_complex_array(A)
    B = as_complex_array(B)
    _check_shapes(op, y, A=A, B=B)
    H, _ = _solve_block(build_z_h(op, A, B), y, pinv_cutoff, (op.L3, A.shape[1]))
    return H


def residual_norm(
    op: SamplingOperator, y: np.ndarray, A: np.ndarray, B: np.ndarray, H: np.ndarray
) -> float:
    """|| P vec([[A, B, H]]) - y ||_2."""
    t = cpd_eval(CPDFactors(A, B, H))
    return float(np.linalg.norm(op.P @ vectorize(t) - np.asarray(y).ravel()))


def _check_shapes(op: SamplingOperator, y: np.ndarray, A=None, B=None, H=None):
    y = np.asarray(y)
    if y.ravel().shape[0] != op.rows:
        raise ValueError(f"sample vector has length {y.size}, operator has {op.rows} rows")
    for name, M, n in (("A", A, op.L1), ("B", B, op.L2), ("H", H, op.L3)):
        if M is not None and M.shape[0] != n:
            raise ValueError(f"factor {name} must have {n} rows, got {M.shape[0]}")


def _renormalize(A, B, H):
    """Scale columns of A and B to unit norm, folding the scale into H.

    Leaves [[A, B, H]] unchanged; keeps the factors from drifting across
    the scaling indeterminacy.  Zero columns are left alone.
    """
    na = np.linalg.norm(A, axis=0)
    nb = np.linalg.norm(B, axis=0)
    na = np.where(na > 0, na, 1.0)
    nb = np.where(nb > 0, nb, 1.0)
    return A / na, B / nb, H * (na * nb)


def _init_factors(op: SamplingOperator, r: int, rng: np.random.Generator):
    def gauss(n):
        return (rng.standard_normal((n, r)) + 1j * rng.standard_normal((n, r))) / np.sqrt(2)

    return gauss(op.L1), gauss(op.L2), gauss(op.L3)


def als_run(
    op: SamplingOperator,
    y: np.ndarray,
    r: int,
    opts: ALSOptions,
    rng: np.random.Generator,
    restart_index: int = 0,
) -> ALSResult:
    """One ALS run from a random complex-Gaussian initialization."""
    y = as_complex_array(y).ravel()
    _check_shapes(op, y)
    A, B, H = _init_factors(op, r, rng)
    history: list[float] = []
    ranks = (0, 0, 0)
    for _ in range(opts.max_cycles):
        A, rank_a = _solve_block(
            build_z_a(op, B, H), y, opts.pinv_cutoff, (op.L1, r))
        B, rank_b = _solve_block(
            build_z_b(op, A, H), y, opts.pinv_cutoff, (op.L2, r))
        H, rank_h = _solve_block(
            build_z_h(op, A, B), y, opts.pinv_cutoff, (op.L3, r))
        ranks = (rank_a, rank_b, rank_h)
        if opts.normalize_each_cycle:
            A, B, H = _renormalize(A, B, H)
        res = residual_norm(op, y, A, B, H)
        history.append(res)
        if len(history) >= 2:
            prev = history[-2]
            if prev == 0.0 or abs(prev - res) / prev < opts.rel_change_tol:
                break
    return ALSResult(
        factors=CPDFactors(A, B, H),
        residual_history=history,
        converged=history[-1] <= opts.success_residual,
        cycles_used=len(history),
        restart_index=restart_index,
        block_ranks=ranks,
    )


def partial_als(
    op: SamplingOperator, y: np.ndarray, r: int, opts: ALSOptions | None = None
) -> ALSResult:
    """Best-of-restarts ALS recovery of a rank-r tensor from samples ``y``.

    Each restart draws its initialization from an independent stream
    spawned from ``opts.seed``, so results are reproducible and do not
    depend on whether restarts run serially or in parallel.  Ties on the
    final residual break toward the lowest restart index.
    """
    if r < 1:
        raise ValueError("rank must be at least 1")
    opts = opts or ALSOptions()
    y = as_complex_array(y).ravel()
    _check_shapes(op, y)
    streams = np.random.SeedSequence(opts.seed).spawn(opts.restarts)

    def run(i: int) -> ALSResult:
        return als_run(op, y, r, opts, np.random.default_rng(streams[i]), restart_index=i)

    if opts.parallel_restarts and opts.restarts > 1:
        with ThreadPoolExecutor() as pool:
            results = list(pool.map(run, range(opts.restarts)))
    else:
        results = [run(i) for i in range(opts.restarts)]

    best = min(results, key=lambda res: (res.final_residual, res.restart_index))
    best.restart_histories = [res.residual_history for res in results]
    return best
