"""End-to-end identification: kernels in, estimated PWH system out.

The pipeline: draw operating points, stack the homogeneous-part
gradients into the sample vector y, recover the rank-r tensor behind it
by partial ALS, then undo the decomposition's per-branch scaling
indeterminacy.  The recovered factor columns equal the true filters up
to one complex scale each; dividing by a pivot entry removes the phase,
the real parts are the filter estimates, and the discarded imaginary
magnitude is reported as a quality signal.  Polynomial coefficients come
from a linear solve against the third factor, whose rows are
s * c_s * a(mu_k)^(s-1) when the model holds.

Reported systems follow one scaling convention: filters have unit
Euclidean norm and a positive first nonzero entry, with all scale pushed
into the polynomial coefficients.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .recovery import ALSOptions, ALSResult, partial_als
from .sampling import (
    OperatingPoints,
    build_gradient_vector,
    build_sampling_matrix,
    filter_transfer,
    generate_points,
)
from .tensors import CPDFactors, as_complex_array
from .volterra import PWHSystem, VolterraKernelSet

_PIVOT_TOL = 1e-8
_DEGENERATE_POINT_TOL = 1e-8


@dataclass(eq=False)
class RealizationDiagnostics:
    """Per-column bookkeeping of the phase/scale removal.

    ``scale_a[l]`` is the complex pivot the l-th column of A was divided
    by (likewise ``scale_b``); the product ``scale_a[l] * scale_b[l]``
    must multiply the third factor's column to keep the rank-one terms
    unchanged.  ``max_imag`` is the largest imaginary magnitude discarded
    when taking real parts, relative to nothing (absolute).
    """

    scale_a: np.ndarray
    scale_b: np.ndarray
    max_imag: float
    unreliable: list


def _pivot(column: np.ndarray) -> tuple[complex, bool]:
    """First-row entry unless it is negligible, else the largest-modulus
    entry; flags the column when even that is near zero."""
    norm = np.linalg.norm(column)
    if norm == 0.0 or np.abs(column).max() <= _PIVOT_TOL * max(norm, 1.0):
        return 1.0 + 0.0j, True
    first = column[0]
    if abs(first) >= _PIVOT_TOL * np.abs(column).max():
        return complex(first), False
    return complex(column[np.argmax(np.abs(column))]), False


def realize_filters(
    factors: CPDFactors,
) -> tuple[np.ndarray, np.ndarray, RealizationDiagnostics]:
    """Strip the per-column complex scale from the filter factors.

    Each column of A and B is divided by its pivot entry, which folds the
    column's phase away; the real parts are returned.  Columns whose
    entries are all near zero are flagged unreliable and left unscaled.
    """
    A = as_complex_array(factors.A)
    B = as_complex_array(factors.B)
    r = factors.rank
    scale_a = np.ones(r, dtype=np.complex128)
    scale_b = np.ones(r, dtype=np.complex128)
    unreliable = []
    max_imag = 0.0
    A_out = np.empty(A.shape)
    B_out = np.empty(B.shape)
    for ell in range(r):
        pa, bad_a = _pivot(A[:, ell])
        pb, bad_b = _pivot(B[:, ell])
        if bad_a or bad_b:
            unreliable.append(ell)
        scale_a[ell] = pa
        scale_b[ell] = pb
        ca = A[:, ell] / pa
        cb = B[:, ell] / pb
        max_imag = max(max_imag, np.abs(ca.imag).max(), np.abs(cb.imag).max())
        A_out[:, ell] = ca.real
        B_out[:, ell] = cb.real
    return A_out, B_out, RealizationDiagnostics(scale_a, scale_b, max_imag, unreliable)


def recover_nonlinearity(
    h: np.ndarray, a: np.ndarray, pts: OperatingPoints, d: int
) -> np.ndarray:
    """Polynomial coefficients (c_1, ..., c_d) from one third-factor column.

    Solves h ~ [c_1; 2 c_2 a(mu_k); ...; d c_d a(mu_k)^(d-1)] in the
    least-squares sense.  The design matrix has one column per degree
    with disjoint row support, so the solve separates per degree.  Rows
    where a(mu_k) is negligible carry no information for their degree and
    are dropped; a degree whose rows are all dropped comes back as NaN.
    """
    h = as_complex_array(h).ravel()
    n = len(pts)
    if h.shape[0] != 1 + n * (d - 1):
        raise ValueError(
            f"third-factor column has length {h.shape[0]}, expected {1 + n * (d - 1)}"
        )
    a_mu = np.array([filter_transfer(a, mu) for mu in pts.mus])
    keep = np.abs(a_mu) > _DEGENERATE_POINT_TOL * max(np.abs(a_mu).max(), 1e-300)
    coeffs = np.zeros(d, dtype=np.complex128)
    coeffs[0] = h[0]
    for s in range(2, d + 1):
        rows = h[1 + n * (s - 2) : 1 + n * (s - 1)]
        w = s * a_mu ** (s - 1)
        mask = keep if s > 1 else np.ones(n, dtype=bool)
        denom = np.vdot(w[mask], w[mask]).real
        if denom == 0.0 or not mask.any():
            coeffs[s - 1] = np.nan
            continue
        coeffs[s - 1] = np.vdot(w[mask], rows[mask]) / denom
    return coeffs


def derivative_samples(
    h: np.ndarray, a: np.ndarray, pts: OperatingPoints, d: int
) -> tuple[np.ndarray, np.ndarray]:
    """Pair each operating point with a sampled derivative value.

    Summing the degree blocks of ``h`` at point k (sharing the degree-1
    entry across points) gives g'(a(mu_k)) up to the branch's common
    scale when ``h`` follows the model; the abscissas a(mu_k) are
    computed from the supplied filter.  Returns (abscissas, values).
    """
    h = as_complex_array(h).ravel()
    n = len(pts)
    if h.shape[0] != 1 + n * (d - 1):
        raise ValueError(
            f"third-factor column has length {h.shape[0]}, expected {1 + n * (d - 1)}"
        )
    x = np.array([filter_transfer(a, mu) for mu in pts.mus])
    values = np.full(n, h[0], dtype=np.complex128)
    for s in range(2, d + 1):
        values += h[1 + n * (s - 2) : 1 + n * (s - 1)]
    return x, values


def fit_derivative_polynomial(
    x: np.ndarray, values: np.ndarray, degree: int
) -> np.ndarray:
    """Least-squares polynomial fit of the derivative samples.

    Returns real coefficients (constant first) with the leading
    coefficient normalized to 1, mirroring how estimated nonlinearity
    shapes are reported.
    """
    x = as_complex_array(x).ravel()
    design = x[:, np.newaxis] ** np.arange(degree + 1)
    coeffs, _, _, _ = np.linalg.lstsq(design, as_complex_array(values).ravel(), rcond=None)
    coeffs = coeffs.real
    if coeffs[-1] != 0.0:
        coeffs = coeffs / coeffs[-1]
    return coeffs


def _sign_norm(v: np.ndarray) -> float:
    """Signed Euclidean norm: positive when the first nonzero entry is."""
    norm = float(np.linalg.norm(v))
    nz = np.flatnonzero(v)
    if norm == 0.0 or nz.size == 0:
        return 1.0
    return norm if v[nz[0]] > 0 else -norm


def _rescale_coeffs(c: np.ndarray, alpha: float, beta: float) -> np.ndarray:
    """Coefficient change under a -> alpha*a, b -> beta*b keeping branch I/O."""
    s = np.arange(1, c.shape[0] + 1)
    return c / (beta * alpha**s)


@dataclass(eq=False)
class MatchResult:
    """Alignment of an estimated system to a reference one.

    ``permutation[j]`` is the estimated branch matched to reference
    branch j; ``scale_a``/``scale_b`` are the factors applied to the
    estimated filters so they best match the reference in least squares.
    Errors are relative per branch; coefficient errors are measured after
    the compensating rescaling that keeps branch I/O unchanged.
    """

    permutation: tuple
    scale_a: np.ndarray
    scale_b: np.ndarray
    a_errors: np.ndarray
    b_errors: np.ndarray
    c_errors: np.ndarray
    total_error: float


def _branch_alignment(est_col: np.ndarray, ref_col: np.ndarray) -> tuple[float, float]:
    denom = float(est_col @ est_col)
    alpha = float(est_col @ ref_col) / denom if denom > 0 else 1.0
    err = float(np.linalg.norm(alpha * est_col - ref_col) / np.linalg.norm(ref_col))
    return alpha, err


def _score_permutation(est: PWHSystem, truth: PWHSystem, perm) -> MatchResult:
    r = truth.r
    scale_a = np.ones(r)
    scale_b = np.ones(r)
    a_err = np.zeros(r)
    b_err = np.zeros(r)
    c_err = np.zeros(r)
    for j in range(r):
        ell = perm[j]
        scale_a[j], a_err[j] = _branch_alignment(est.A[:, ell], truth.A[:, j])
        scale_b[j], b_err[j] = _branch_alignment(est.B[:, ell], truth.B[:, j])
        c_aligned = _rescale_coeffs(est.C[:, ell], scale_a[j], scale_b[j])
        ref_norm = np.linalg.norm(truth.C[:, j])
        c_err[j] = float(
            np.linalg.norm(c_aligned - truth.C[:, j]) / (ref_norm if ref_norm > 0 else 1.0)
        )
    return MatchResult(
        permutation=tuple(perm),
        scale_a=scale_a,
        scale_b=scale_b,
        a_errors=a_err,
        b_errors=b_err,
        c_errors=c_err,
        total_error=float(np.sum(a_err + b_err)),
    )


def match_factors(est: PWHSystem, truth: PWHSystem) -> MatchResult:
    """Best branch permutation and scalings aligning ``est`` to ``truth``.

    Exhaustive over permutations for r <= 4; greedy on normalized-column
    correlation above that.
    """
    if (est.r, est.L1, est.L2) != (truth.r, truth.L1, truth.L2):
        raise ValueError("systems must share (r, L1, L2) to be matched")
    r = truth.r
    if r <= 4:
        candidates = itertools.permutations(range(r))
        return min(
            (_score_permutation(est, truth, perm) for perm in candidates),
            key=lambda m: m.total_error,
        )
    # Greedy pairing on |cos angle| between front-filter columns.
    corr = np.abs(
        (truth.A / np.linalg.norm(truth.A, axis=0)).T
        @ (est.A / np.linalg.norm(est.A, axis=0))
    )
    perm = [-1] * r
    free = set(range(r))
    for j in np.argsort(-corr.max(axis=1)):
        best = max(free, key=lambda ell: corr[j, ell])
        perm[j] = best
        free.remove(best)
    return _score_permutation(est, truth, perm)


@dataclass(eq=False)
class IdentificationReport:
    """Everything a run produced, before and after realization."""

    system: PWHSystem
    factors: CPDFactors
    als: ALSResult
    realization: RealizationDiagnostics
    coefficients_raw: np.ndarray
    max_imag_residue: float
    points: OperatingPoints
    sample_count: int
    unknown_count: int
    match: MatchResult = field(default=None)

    @property
    def sample_ratio(self) -> float:
        """Rows of the sampling matrix per scalar unknown.  Reported as
        data; no recoverability claim is attached to it."""
        return self.sample_count / self.unknown_count


def identify(
    kernels: VolterraKernelSet,
    r: int,
    L1: int,
    L2: int,
    N: int,
    opts: ALSOptions | None = None,
    points_seed: int = 0,
    truth: PWHSystem | None = None,
) -> IdentificationReport:
    """Estimate a PWH system with ``r`` branches from its kernel set.

    Draws ``N`` seeded operating points, builds the sample vector and
    sampling matrix, runs best-of-restarts partial ALS, realizes real
    filters from the recovered factors and solves for the polynomial
    coefficients.  ALS non-convergence is reported in the result, not
    raised.  When ``truth`` is given, the report includes the aligned
    per-branch errors.
    """
    if kernels.memory != L1 + L2 - 1:
        raise ValueError(
            f"kernel memory {kernels.memory} does not match L1 + L2 - 1 = {L1 + L2 - 1}"
        )
    opts = opts or ALSOptions()
    d = kernels.degree
    pts = generate_points(N, points_seed)
    op = build_sampling_matrix(L1, L2, d, pts)
    y = build_gradient_vector(kernels, pts)
    als = partial_als(op, y, r, opts)

    A_re, B_re, diag = realize_filters(als.factors)
    coeffs_raw = np.zeros((d, r), dtype=np.complex128)
    for ell in range(r):
        h_fixed = als.factors.H[:, ell] * diag.scale_a[ell] * diag.scale_b[ell]
        coeffs_raw[:, ell] = recover_nonlinearity(h_fixed, A_re[:, ell], pts, d)
    finite = coeffs_raw[np.isfinite(coeffs_raw)]
    max_imag = max(diag.max_imag, float(np.abs(finite.imag).max()) if finite.size else 0.0)

    # Unit-norm filters with positive leading sign; scale lives in the
    # coefficients.  a -> a/sa, b -> b/sb maps c_s to c_s * sb * sa^s.
    A_out = A_re.copy()
    B_out = B_re.copy()
    C_out = np.nan_to_num(coeffs_raw.real, nan=0.0)
    for ell in range(r):
        sa = _sign_norm(A_out[:, ell])
        sb = _sign_norm(B_out[:, ell])
        A_out[:, ell] /= sa
        B_out[:, ell] /= sb
        C_out[:, ell] = _rescale_coeffs(C_out[:, ell], 1.0 / sa, 1.0 / sb)

    system = PWHSystem(A=A_out, B=B_out, C=C_out)
    report = IdentificationReport(
        system=system,
        factors=als.factors,
        als=als,
        realization=diag,
        coefficients_raw=coeffs_raw,
        max_imag_residue=max_imag,
        points=pts,
        sample_count=op.rows,
        unknown_count=r * (L1 + L2 + op.L3),
    )
    if truth is not None:
        report.match = match_factors(system, truth)
    return report
