"""Dense subspace and projector algebra.

Subspaces are carried as :class:`Frame` objects (orthonormal column bases).
Idempotents and Hermitian matrices are plain ``numpy`` arrays; the helpers
here validate them where an operation needs the property.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import NotComplementary

INVERTIBLE_RTOL = 1e-10
FRAME_ATOL = 1e-12


def opnorm(a: np.ndarray) -> float:
    """Largest singular value (0 for empty matrices)."""
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


def is_invertible(a: np.ndarray, rtol: float = INVERTIBLE_RTOL) -> bool:
    a = np.asarray(a)
    if a.shape[0] != a.shape[1]:
        return False
    if a.size == 0:
        return True
    s = np.linalg.svd(a, compute_uv=False)
    return bool(s[-1] > rtol * s[0])


def is_hermitian(a: np.ndarray, rtol: float = 1e-12) -> bool:
    a = np.asarray(a)
    return bool(np.linalg.norm(a - a.conj().T, 2) <= rtol * max(opnorm(a), 1e-300))


def is_idempotent(p: np.ndarray) -> bool:
    n = opnorm(p)
    return bool(opnorm(p @ p - p) <= 1e-10 * (1.0 + n * n))


def hermitian_part(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.conj().T)


@dataclass(frozen=True)
class Frame:
    """Subspace of C^n given by an orthonormal basis stored column-wise."""

    basis: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=complex)
        if b.ndim != 2:
            raise ValueError("frame basis must be a 2-D array")
        if not np.all(np.isfinite(b)):
            raise ValueError("frame basis has non-finite entries")
        k = b.shape[1]
        if k > b.shape[0]:
            raise ValueError("frame rank exceeds ambient dimension")
        if k and np.abs(b.conj().T @ b - np.eye(k)).max() > 1e-10:
            raise ValueError("frame basis is not orthonormal; use span() to orthonormalize")
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.conj().T

    def complement(self) -> Frame:
        if self.rank == 0:
            return Frame(np.eye(self.ambient_dim, dtype=complex))
        return Frame(sla.null_space(self.basis.conj().T))

    def transform(self, u: np.ndarray) -> Frame:
        """Image of the subspace under an invertible matrix."""
        return span(np.asarray(u) @ self.basis, rank=self.rank)


def span(vectors: np.ndarray, rank: int | None = None, rtol: float = 1e-10) -> Frame:
    """Orthonormal frame for the column span of ``vectors``.

    Uses an SVD so nearly dependent columns are dropped consistently. When
    ``rank`` is given the leading ``rank`` left singular vectors are kept.
    """
    v = np.atleast_2d(np.asarray(vectors, dtype=complex))
    n, k = v.shape
    if k == 0:
        return Frame(np.zeros((n, 0), dtype=complex))
    u, s, _ = np.linalg.svd(v, full_matrices=False)
    if rank is None:
        rank = int(np.sum(s > rtol * s[0])) if s[0] > 0 else 0
    return Frame(u[:, :rank])


def zero_frame(n: int) -> Frame:
    return Frame(np.zeros((n, 0), dtype=complex))


def orth_projector(frame: Frame) -> np.ndarray:
    """Hermitian idempotent onto the span of ``frame``."""
    p = frame.projector()
    return hermitian_part(p)


def complementary_pair_projectors(p: np.ndarray, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(S, T)`` built from two idempotents with ``P - Q`` invertible.

    ``S = P (P-Q)^{-1}`` projects onto im P along im Q and
    ``T = (P-1)(P-Q)^{-1}`` projects onto ker P along ker Q.
    """
    p = np.asarray(p, dtype=complex)
    q = np.asarray(q, dtype=complex)
    d = p - q
    if not is_invertible(d):
        raise NotComplementary("P - Q is singular: images/kernels are not complementary")
    dinv = np.linalg.inv(d)
    one = np.eye(p.shape[0])
    s = p @ dinv
    t = (p - one) @ dinv
    scale = 1.0 + opnorm(dinv)
    if opnorm(s - t - dinv) > 1e-8 * scale:
        raise NotComplementary("(P-Q)^{-1} != S - T; inputs are not idempotent")
    return s, t


def oblique_projector(l: Frame, m: Frame) -> np.ndarray:
    """Idempotent with image ``l`` and kernel ``m``."""
    if l.ambient_dim != m.ambient_dim:
        raise ValueError("frames live in different ambient spaces")
    if l.rank + m.rank != l.ambient_dim:
        raise NotComplementary(f"dimensions {l.rank} + {m.rank} != {l.ambient_dim}")
    pl = orth_projector(l)
    pm = orth_projector(m)
    d = pl - pm
    if not is_invertible(d):
        raise NotComplementary("P_L - P_M is singular: subspaces intersect")
    return pl @ np.linalg.inv(d)


def orthogonalize_idempotent(p: np.ndarray) -> np.ndarray:
    """Hermitian idempotent with the same image as ``p``."""
    p = np.asarray(p, dtype=complex)
    a = p + p.conj().T - np.eye(p.shape[0])
    return hermitian_part(p @ np.linalg.inv(a))


def gap_distance(l1: Frame, l2: Frame) -> float:
    """Operator norm of the difference of the two orthogonal projectors."""
    if l1.ambient_dim != l2.ambient_dim:
        raise ValueError("frames live in different ambient spaces")
    if l1.rank != l2.rank:
        return 1.0
    if l1.rank == 0:
        return 0.0
    # equal ranks: the norm equals the sine of the largest principal angle,
    # read off from the component of l2 orthogonal to l1
    b1, b2 = l1.basis, l2.basis
    resid = b2 - b1 @ (b1.conj().T @ b2)
    return min(1.0, opnorm(resid))


def graph_frame(a: np.ndarray) -> Frame:
    a = np.asarray(a, dtype=complex)
    stacked = np.vstack([np.eye(a.shape[1], dtype=complex), a])
    return span(stacked, rank=a.shape[1])


def graph_projector(a: np.ndarray) -> np.ndarray:
    """Orthogonal projector in H + H' onto the graph ``{(u, Au)}``."""
    a = np.asarray(a, dtype=complex)
    n = a.shape[1]
    g = np.vstack([np.eye(n, dtype=complex), a])
    gram = np.eye(n) + a.conj().T @ a
    return hermitian_part(g @ np.linalg.solve(gram, g.conj().T))
