"""Flat text serialization of kernel sets.

Format, line by line:

    line 1:            ``L d``  (memory length, polynomial degree)
    line 2:            ``f0``   (constant term, one float)
    following lines:   for each order s = 1..d, the L**s entries of the
                       order-s kernel in column-major order, one
                       ``re im`` pair per line.

Floats are written with ``repr`` so a write/read round trip is exact.
"""

from __future__ import annotations

import numpy as np

from .tensors import tensor_from_vec, vectorize
from .volterra import VolterraKernelSet


def write_kernels(path, kernels: VolterraKernelSet) -> None:
    """Write a kernel set to ``path`` in the flat text format."""
    lines = [f"{kernels.memory} {kernels.degree}", repr(float(kernels.f0))]
    for kernel in kernels.kernels:
        lines.extend(f"{v.real!r} {v.imag!r}" for v in vectorize(kernel))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_floats(token_line: str, count: int, path, lineno: int) -> list[float]:
    parts = token_line.split()
    if len(parts) != count:
        raise ValueError(
            f"{path}: line {lineno}: expected {count} value(s), got {len(parts)}"
        )
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise ValueError(f"{path}: line {lineno}: {exc}") from None


def read_kernels(path) -> VolterraKernelSet:
    """Read a kernel set written by :func:`write_kernels`.

    Raises
    ------
    ValueError
        On any malformed content, with the offending line number.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValueError(f"{path}: line 1: empty file")
    header = _parse_floats(lines[0], 2, path, 1)
    L, d = int(header[0]), int(header[1])
    if L < 1 or d < 1 or header[0] != L or header[1] != d:
        raise ValueError(f"{path}: line 1: header must be two positive integers")
    if len(lines) < 2:
        raise ValueError(f"{path}: line 2: missing constant term")
    f0 = _parse_floats(lines[1], 1, path, 2)[0]

    expected = 2 + sum(L**s for s in range(1, d + 1))
    if len(lines) != expected:
        raise ValueError(
            f"{path}: line {min(len(lines), expected) + 1}: "
            f"expected {expected} lines for L={L}, d={d}, got {len(lines)}"
        )
    kernels = []
    lineno = 3
    for s in range(1, d + 1):
        entries = np.empty(L**s, dtype=np.complex128)
        for i in range(L**s):
            re, im = _parse_floats(lines[lineno - 1], 2, path, lineno)
            entries[i] = complex(re, im)
            lineno += 1
        kernels.append(tensor_from_vec(entries, (L,) * s))
    return VolterraKernelSet(kernels=kernels, f0=f0)
