"""Parallel Wiener-Hammerstein systems and their truncated Volterra kernels.

A parallel Wiener-Hammerstein (PWH) system is a sum of r branches, each a
front FIR filter, a static polynomial nonlinearity and a back FIR filter:

    y = sum_l  b_l * g_l(a_l * u),        g_l(x) = c_{l,1} x + ... + c_{l,d} x^d

with the causal convolution convention (a * u)(t) = sum_i u(t-i+1) a_i.
Such a system depends on the last L = L1 + L2 - 1 inputs only, so it is
fully described by d symmetric L x ... x L kernel tensors plus a constant.

This module simulates PWH systems in the time domain, synthesizes their
kernel tensors in closed form, evaluates the kernel expansion at a point,
and evaluates gradients of the homogeneous (fixed-degree) parts by tensor
contraction.  The synthesis formula is validated against the time-domain
simulation in the test suite; the two routes are independent.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .tensors import as_complex_array, contract


@dataclass(frozen=True, eq=False)
class PWHSystem:
    """Parameters of a parallel Wiener-Hammerstein system.

    Parameters
    ----------
    A : ndarray, shape (L1, r)
        Front FIR filters, one branch per column.
    B : ndarray, shape (L2, r)
        Back FIR filters, one branch per column.
    C : ndarray, shape (d, r)
        Polynomial coefficients: C[s-1, l] multiplies x**s in branch l.
    const0 : ndarray, shape (r,), optional
        Constant term of each branch nonlinearity.  Affects simulation
        only; gradients (and therefore identification) never see it.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    const0: np.ndarray = field(default=None)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        if not (A.shape[1] == B.shape[1] == C.shape[1]):
            raise ValueError(
                f"branch counts disagree: A has {A.shape[1]}, "
                f"B has {B.shape[1]}, C has {C.shape[1]}"
            )
        if min(A.shape + B.shape + C.shape) < 1:
            raise ValueError("all dimensions must be at least 1")
        for name, M in (("A", A), ("B", B)):
            dead = np.flatnonzero(~np.any(M != 0.0, axis=0))
            if dead.size:
                raise ValueError(f"column(s) {dead.tolist()} of {name} are all-zero")
        c0 = self.const0
        c0 = np.zeros(A.shape[1]) if c0 is None else np.asarray(c0, dtype=float).ravel()
        if c0.shape != (A.shape[1],):
            raise ValueError(f"const0 must have one entry per branch, got {c0.shape}")
        object.__setattr__(self, "const0", c0)

    @property
    def L1(self) -> int:
        return self.A.shape[0]

    @property
    def L2(self) -> int:
        return self.B.shape[0]

    @property
    def r(self) -> int:
        return self.A.shape[1]

    @property
    def d(self) -> int:
        return self.C.shape[0]

    @property
    def memory(self) -> int:
        """Number of past inputs the output depends on: L = L1 + L2 - 1."""
        return self.L1 + self.L2 - 1


@dataclass(frozen=True, eq=False)
class VolterraKernelSet:
    """Symmetric kernel tensors of orders 1..d plus the constant term.

    ``kernels[s-1]`` is the order-s tensor, with ``s`` equal axes of
    length L.  Kernels are stored dense and complex; at the memory
    lengths this package targets (L <= 10 or so) packed symmetric
    storage would buy nothing but complexity.
    """

    kernels: list
    f0: float = 0.0

    def __post_init__(self):
        ks = [as_complex_array(k) for k in self.kernels]
        if not ks:
            raise ValueError("kernel set needs at least the order-1 kernel")
        L = ks[0].shape[0] if ks[0].ndim else 0
        for s, k in enumerate(ks, start=1):
            if k.ndim != s or k.shape != (L,) * s:
                raise ValueError(
                    f"kernel {s} must have shape {(L,) * s}, got {k.shape}"
                )
        object.__setattr__(self, "kernels", ks)
        object.__setattr__(self, "f0", float(self.f0))

    @property
    def memory(self) -> int:
        return self.kernels[0].shape[0]

    @property
    def degree(self) -> int:
        return len(self.kernels)


def _poly_eval(coeffs: np.ndarray, const: float, x: np.ndarray) -> np.ndarray:
    """Evaluate const + sum_s coeffs[s-1] * x**s elementwise."""
    # polyval wants highest degree first
    return np.polyval(np.concatenate([coeffs[::-1], [const]]), x)


def simulate(system: PWHSystem, u: np.ndarray) -> np.ndarray:
    """Time-domain output of a PWH system for input sequence ``u``.

    The filter history is zero-padded, so the first L-1 output samples
    are transient; steady-state comparisons should skip them.

    Raises
    ------
    ValueError
        If the input is empty.
    """
    u = np.asarray(u, dtype=float).ravel()
    if u.size == 0:
        raise ValueError("input sequence is empty")
    if u.size < system.memory:
        warnings.warn(
            f"input of length {u.size} is shorter than the memory length "
            f"{system.memory}; every output sample is transient",
            stacklevel=2,
        )
    y = np.zeros(u.size)
    for ell in range(system.r):
        x = np.convolve(u, system.A[:, ell])[: u.size]
        z = _poly_eval(system.C[:, ell], system.const0[ell], x)
        y += np.convolve(z, system.B[:, ell])[: u.size]
    return y


def homogeneous_output(kernels: VolterraKernelSet, s: int, u: np.ndarray) -> complex:
    """Degree-s term of the kernel expansion: the order-s kernel contracted
    with ``u`` on every mode."""
    if not 1 <= s <= kernels.degree:
        raise ValueError(f"degree {s} outside 1..{kernels.degree}")
    t = kernels.kernels[s - 1]
    for _ in range(s):
        t = contract(t, t.ndim - 1, u)
    return complex(t)


def evaluate_kernel_output(kernels: VolterraKernelSet, u: np.ndarray) -> complex:
    """Kernel-expansion output f0 + sum_s H^(s) contracted s times with ``u``.

    ``u`` holds the last L inputs, most recent first, and may be complex.
    """
    u = as_complex_array(u).ravel()
    if u.shape[0] != kernels.memory:
        raise ValueError(
            f"expected a length-{kernels.memory} input vector, got {u.shape[0]}"
        )
    total = complex(kernels.f0)
    for s in range(1, kernels.degree + 1):
        total += homogeneous_output(kernels, s, u)
    return total


def _shifted_front_columns(a: np.ndarray, L2: int) -> np.ndarray:
    """Columns of the banded Toeplitz matrix of ``a``: column k holds ``a``
    placed at offset k in a length L1+L2-1 zero vector."""
    L1 = a.shape[0]
    L = L1 + L2 - 1
    cols = np.zeros((L, L2))
    for k in range(L2):
        cols[k : k + L1, k] = a
    return cols


def synthesize_kernels(system: PWHSystem) -> VolterraKernelSet:
    """Closed-form symmetric Volterra kernels of a PWH system.

    The order-s kernel is

        H^(s)[j1,..,js] = sum_l c_{l,s} sum_k B[k,l] * prod_p Atil[jp-k, l]

    where Atil is the front filter zero-padded to length L; the inner sum
    runs over the back-filter taps.  Each (l, k) term is the s-fold outer
    power of a shifted copy of the front filter, so the kernel is
    symmetric by construction.  The constant is
    f0 = sum_l const0[l] * sum_k B[k,l].
    """
    L = system.memory
    kernels = []
    shifted = [_shifted_front_columns(system.A[:, ell], system.L2)
               for ell in range(system.r)]
    for s in range(1, system.d + 1):
        kernel = np.zeros((L,) * s, dtype=np.complex128)
        for ell in range(system.r):
            c = system.C[s - 1, ell]
            if c == 0.0:
                continue
            for k in range(system.L2):
                b = system.B[k, ell]
                if b == 0.0:
                    continue
                term = shifted[ell][:, k]
                for _ in range(s - 1):
                    term = np.multiply.outer(term, shifted[ell][:, k])
                kernel += c * b * term
        kernels.append(kernel)
    f0 = float(np.dot(system.const0, system.B.sum(axis=0)))
    return VolterraKernelSet(kernels=kernels, f0=f0)


def gradient_of_homogeneous(
    kernels: VolterraKernelSet, s: int, u: np.ndarray
) -> np.ndarray:
    """Gradient of the degree-s part at ``u``: s * H^(s) contracted with
    ``u`` on all modes but the first.  For s = 1 this is the order-1
    kernel itself, independent of ``u``."""
    if not 1 <= s <= kernels.degree:
        raise ValueError(f"degree {s} outside 1..{kernels.degree}")
    u = as_complex_array(u).ravel()
    if u.shape[0] != kernels.memory:
        raise ValueError(
            f"expected a length-{kernels.memory} point, got {u.shape[0]}"
        )
    t = kernels.kernels[s - 1]
    for _ in range(s - 1):
        t = contract(t, t.ndim - 1, u)
    return s * t
