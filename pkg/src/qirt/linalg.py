"""Dense complex linear algebra used throughout the package.

Matrices are plain ``numpy`` arrays. Most helpers accept a stack of
matrices with leading batch axes (shape ``(..., n, n)``), which the SDP
layer relies on to push coefficient tensors through the same maps as
numerical values.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

HERMITIAN_TOL = 1e-10

__all__ = [
    "tensor",
    "kron_all",
    "partial_trace",
    "partial_transpose",
    "permute_systems",
    "hermitian_eigs",
    "trace_norm",
    "is_psd",
    "is_hermitian",
    "hermitian_part",
    "psd_sqrt",
    "support_basis",
    "ket",
    "proj",
    "max_entangled",
    "PAULI",
]

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def tensor(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product ``a ⊗ b``."""
    return np.kron(np.asarray(a), np.asarray(b))


def kron_all(*mats: np.ndarray) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def _check_dims(m: np.ndarray, dims: Sequence[int]) -> int:
    n = int(np.prod(dims)) if len(dims) else 1
    if m.shape[-1] != n or m.shape[-2] != n:
        raise ValueError(f"matrix of shape {m.shape[-2:]} does not match subsystem dims {tuple(dims)}")
    return n


def partial_trace(m: np.ndarray, dims: Sequence[int], keep: Sequence[int] | int) -> np.ndarray:
    """Trace out every subsystem not listed in ``keep``.

    ``keep`` is an index (or indices) into ``dims``; the kept factors stay
    in their original order. Leading batch axes are preserved.
    """
    m = np.asarray(m)
    dims = [int(d) for d in dims]
    _check_dims(m, dims)
    if isinstance(keep, (int, np.integer)):
        keep = [int(keep)]
    keep = sorted({int(k) for k in keep})
    if any(k < 0 or k >= len(dims) for k in keep):
        raise ValueError(f"keep indices {keep} out of range for {len(dims)} subsystems")
    batch = m.shape[:-2]
    k = len(dims)
    t = m.reshape(*batch, *dims, *dims)
    letters = "abcdefghijklmnopqrstuvwxyz"
    row = list(letters[:k])
    col = list(letters[k : 2 * k])
    for i in range(k):
        if i not in keep:
            col[i] = row[i]
    out = [row[i] for i in keep] + [col[i] for i in keep]
    expr = "..." + "".join(row) + "".join(col) + "->..." + "".join(out)
    res = np.einsum(expr, t)
    dk = int(np.prod([dims[i] for i in keep])) if keep else 1
    return res.reshape(*batch, dk, dk)


def partial_transpose(m: np.ndarray, dims: Sequence[int], system: int | Sequence[int]) -> np.ndarray:
    """Transpose the chosen tensor factor(s) in place."""
    m = np.asarray(m)
    dims = [int(d) for d in dims]
    n = _check_dims(m, dims)
    systems = [system] if isinstance(system, (int, np.integer)) else list(system)
    if any(s < 0 or s >= len(dims) for s in systems):
        raise ValueError(f"system {system} out of range for {len(dims)} subsystems")
    batch = m.shape[:-2]
    k = len(dims)
    t = m.reshape(*batch, *dims, *dims)
    nb = len(batch)
    axes = list(range(nb + 2 * k))
    for s in systems:
        axes[nb + s], axes[nb + k + s] = axes[nb + k + s], axes[nb + s]
    return t.transpose(axes).reshape(*batch, n, n)


def permute_systems(m: np.ndarray, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors: factor ``perm[i]`` of the input becomes factor ``i``."""
    m = np.asarray(m)
    dims = [int(d) for d in dims]
    n = _check_dims(m, dims)
    perm = [int(p) for p in perm]
    if sorted(perm) != list(range(len(dims))):
        raise ValueError(f"{perm} is not a permutation of {len(dims)} systems")
    batch = m.shape[:-2]
    k = len(dims)
    nb = len(batch)
    t = m.reshape(*batch, *dims, *dims)
    axes = list(range(nb)) + [nb + p for p in perm] + [nb + k + p for p in perm]
    return t.transpose(axes).reshape(*batch, n, n)


def is_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    m = np.asarray(m)
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    return bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= tol * scale)


def hermitian_part(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m)
    return (m + np.swapaxes(m.conj(), -1, -2)) / 2


def hermitian_eigs(m: np.ndarray, tol: float = HERMITIAN_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian matrix, eigenvalues descending.

    The input is symmetrized before the LAPACK call; inputs further than
    ``tol`` (relative) from Hermitian raise ``ValueError``.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("hermitian_eigs needs a square matrix")
    if not is_hermitian(m, tol):
        raise ValueError("matrix is not Hermitian within tolerance")
    w, v = np.linalg.eigh(hermitian_part(m))
    return w[::-1].copy(), v[:, ::-1].copy()


def trace_norm(m: np.ndarray) -> float:
    """Sum of singular values."""
    m = np.asarray(m)
    if m.shape[-1] != m.shape[-2]:
        raise ValueError("trace_norm needs a square matrix")
    if is_hermitian(m, 1e-12):
        return float(np.sum(np.abs(np.linalg.eigvalsh(hermitian_part(m)))))
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))


def is_psd(m: np.ndarray, tol: float = 1e-9) -> bool:
    """True iff the smallest eigenvalue of the Hermitian part is ``>= -tol``."""
    m = np.asarray(m)
    if m.size == 0:
        return True
    return bool(np.linalg.eigvalsh(hermitian_part(m))[0] >= -tol)


def min_eig(m: np.ndarray) -> float:
    m = np.asarray(m)
    if m.size == 0:
        return 0.0
    return float(np.linalg.eigvalsh(hermitian_part(m))[0])


def psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(hermitian_part(np.asarray(m)))
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def psd_project(m: np.ndarray) -> np.ndarray:
    """Nearest PSD matrix in Frobenius norm."""
    w, v = np.linalg.eigh(hermitian_part(np.asarray(m)))
    w = np.clip(w, 0.0, None)
    return (v * w) @ v.conj().T


def support_basis(m: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Orthonormal basis (columns) of the range of a PSD matrix."""
    w, v = np.linalg.eigh(hermitian_part(np.asarray(m)))
    scale = max(1.0, float(np.max(np.abs(w), initial=0.0)))
    return v[:, w > tol * scale]


def ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def proj(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=complex).reshape(-1)
    return np.outer(v, v.conj())


def max_entangled(dim: int, normalized: bool = True) -> np.ndarray:
    """The vector Σ_i |ii⟩, optionally divided by √dim."""
    v = np.eye(dim, dtype=complex).reshape(-1)
    return v / np.sqrt(dim) if normalized else v
