"""Local boundary conditions as subspaces L and as automorphisms T of E-,
and the negative spectral subbundle F of T."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .errors import (
    NearSingularT,
    NotComplementary,
    NotHermitian,
    NotTransversal,
    ResolutionTooCoarse,
    SingularT,
)
from .linalg import (
    Frame,
    gap_distance,
    hermitian_part,
    is_invertible,
    oblique_projector,
    opnorm,
    orthogonalize_idempotent,
    span,
)
from .symbol import EllipticSymbol, chiral_split

TRANSVERSAL_RTOL = 1e-8
LAGRANGIAN_ATOL = 1e-9
NEAR_SINGULAR_RTOL = 1e-8
MAX_ADJACENT_GAP = 0.5


@dataclass(frozen=True)
class ConormalData:
    """sigma(n) at a boundary point together with the splitting E = E+ + E-."""

    sigma_n: np.ndarray
    e_plus: Frame
    e_minus: Frame
    p_plus: np.ndarray = field(repr=False)
    p_minus: np.ndarray = field(repr=False)

    @classmethod
    def from_splitting(cls, sigma_n: np.ndarray, e_plus: Frame, e_minus: Frame) -> ConormalData:
        sigma_n = np.asarray(sigma_n, dtype=complex)
        p_plus = oblique_projector(e_plus, e_minus)
        p_minus = np.eye(sigma_n.shape[0]) - p_plus
        return cls(sigma_n, e_plus, e_minus, p_plus, p_minus)

    @classmethod
    def from_symbol(cls, s: EllipticSymbol) -> ConormalData:
        """``s`` is (sigma(n), sigma(xi)) for the outward conormal and positive tangent."""
        split = chiral_split(s)
        return cls.from_splitting(s.sigma1, split.e_plus, split.e_minus)

    @property
    def dim(self) -> int:
        return self.sigma_n.shape[0]

    def direct_sum(self, other: ConormalData) -> ConormalData:
        return ConormalData.from_splitting(
            sla.block_diag(self.sigma_n, other.sigma_n),
            Frame(sla.block_diag(self.e_plus.basis, other.e_plus.basis)),
            Frame(sla.block_diag(self.e_minus.basis, other.e_minus.basis)),
        )


@dataclass(frozen=True)
class BoundaryAutomorphism:
    """Automorphism of E- written in the orthonormal basis ``frame`` of E-."""

    t_matrix: np.ndarray
    frame: Frame

    def __post_init__(self):
        t = np.asarray(self.t_matrix, dtype=complex)
        if t.shape != (self.frame.rank, self.frame.rank):
            raise ValueError("t_matrix does not match the E- frame rank")
        object.__setattr__(self, "t_matrix", t)

    @property
    def is_hermitian(self) -> bool:
        t = self.t_matrix
        return bool(opnorm(t - t.conj().T) <= 1e-9 * max(opnorm(t), 1e-300))

    def ambient(self) -> np.ndarray:
        """T extended by zero on the orthogonal complement of E-."""
        b = self.frame.basis
        return b @ self.t_matrix @ b.conj().T

    def extended(self) -> np.ndarray:
        """T' = T + identity on the orthogonal complement of E-."""
        b = self.frame.basis
        return self.ambient() + np.eye(b.shape[0]) - b @ b.conj().T

    def reframe(self, frame: Frame) -> BoundaryAutomorphism:
        """Same operator written in another orthonormal basis of the same E-."""
        u = frame.basis.conj().T @ self.frame.basis
        return BoundaryAutomorphism(u @ self.t_matrix @ u.conj().T, frame)


@dataclass(frozen=True)
class BoundaryCondition:
    l_frame: Frame


def boundary_projector(c: ConormalData, t: BoundaryAutomorphism) -> np.ndarray:
    """P_T = P+ (1 + i sigma(n)^{-1} T P-)."""
    n = c.dim
    corr = 1j * np.linalg.solve(c.sigma_n, t.ambient() @ c.p_minus)
    return c.p_plus @ (np.eye(n) + corr)


def _check_transversal(c: ConormalData, l: Frame) -> None:
    if l.rank != c.e_minus.rank or l.ambient_dim != c.dim:
        raise NotTransversal(f"L has rank {l.rank}, expected {c.e_minus.rank} in C^{c.dim}")
    for name, e in (("E+", c.e_plus), ("E-", c.e_minus)):
        m = np.hstack([l.basis, e.basis])
        s = np.linalg.svd(m, compute_uv=False)
        if s[-1] <= TRANSVERSAL_RTOL * s[0]:
            raise NotTransversal(f"L meets {name} nontrivially")


def condition_from_T(c: ConormalData, t: BoundaryAutomorphism) -> BoundaryCondition:
    if not is_invertible(t.t_matrix):
        raise SingularT("T is not invertible")
    pt = boundary_projector(c, t)
    n = c.dim
    if opnorm(pt @ pt - pt) > 1e-9 * (1.0 + opnorm(pt) ** 2):
        raise SingularT("P_T failed to be idempotent")
    _, s, vh = np.linalg.svd(pt)
    k = c.e_minus.rank
    # P_T has rank k (image E+), so its kernel is the span of the last n-k right singular vectors
    l = span(vh[k:].conj().T, rank=n - k)
    _check_transversal(c, l)
    return BoundaryCondition(l)


def T_from_condition(c: ConormalData, cond: BoundaryCondition) -> BoundaryAutomorphism:
    l = cond.l_frame
    _check_transversal(c, l)
    try:
        p_l_eplus = oblique_projector(l, c.e_plus)
    except NotComplementary as exc:
        raise NotTransversal(str(exc)) from exc
    pm_ort = orthogonalize_idempotent(c.p_minus)
    n = c.dim
    t_ext = pm_ort @ (1j * c.sigma_n) @ c.p_plus @ p_l_eplus @ pm_ort + (np.eye(n) - pm_ort)
    b = c.e_minus.basis
    return BoundaryAutomorphism(b.conj().T @ t_ext @ b, c.e_minus)


def symplectic_form(c: ConormalData, l: Frame) -> np.ndarray:
    """Gram matrix of omega(u, v) = <i sigma(n) u, v> on a basis of L."""
    return l.basis.conj().T @ (1j * c.sigma_n) @ l.basis


def is_lagrangian(c: ConormalData, cond: BoundaryCondition) -> bool:
    _check_transversal(c, cond.l_frame)
    w = symplectic_form(c, cond.l_frame)
    return bool(np.abs(w).max() <= LAGRANGIAN_ATOL * max(1.0, opnorm(c.sigma_n)))


def negative_subspace_F(t: BoundaryAutomorphism) -> Frame:
    """Span (in ambient coordinates) of the negative eigenvectors of T."""
    tm = t.t_matrix
    if tm.size == 0:
        return Frame(np.zeros((t.frame.ambient_dim, 0), dtype=complex))
    if not t.is_hermitian:
        raise NotHermitian("F is only defined for self-adjoint T")
    w, v = np.linalg.eigh(hermitian_part(tm))
    norm = np.max(np.abs(w))
    if np.min(np.abs(w)) < NEAR_SINGULAR_RTOL * norm or norm == 0:
        raise NearSingularT(f"T has an eigenvalue within {NEAR_SINGULAR_RTOL:g}*|T| of zero")
    neg = v[:, w < 0]
    return span(t.frame.basis @ neg, rank=neg.shape[1])


@dataclass(frozen=True)
class BoundaryLoop:
    """Cyclic samples (no repeated endpoint) over a boundary circle."""

    conormal: tuple[ConormalData, ...]
    automorphisms: tuple[BoundaryAutomorphism, ...]

    def __post_init__(self):
        if len(self.conormal) != len(self.automorphisms):
            raise ValueError("conormal and automorphism samples differ in length")
        if len(self.conormal) < 3:
            raise ValueError("a loop needs at least 3 samples")

    def __len__(self) -> int:
        return len(self.conormal)

    @classmethod
    def from_samples(cls, conormal: Sequence[ConormalData] | ConormalData, ts: Sequence[BoundaryAutomorphism]):
        ts = tuple(ts)
        if isinstance(conormal, ConormalData):
            conormal = (conormal,) * len(ts)
        return cls(tuple(conormal), ts)

    def conditions(self) -> list[BoundaryCondition]:
        return [condition_from_T(c, t) for c, t in zip(self.conormal, self.automorphisms)]


def loop_F(bl: BoundaryLoop) -> list[Frame]:
    frames = [negative_subspace_F(t) for t in bl.automorphisms]
    for i, f in enumerate(frames):
        nxt = frames[(i + 1) % len(frames)]
        g = gap_distance(f, nxt)
        if g >= MAX_ADJACENT_GAP:
            raise ResolutionTooCoarse(f"gap {g:.3f} between samples {i} and {(i + 1) % len(frames)}")
    return frames
