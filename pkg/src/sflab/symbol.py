"""Pointwise symbol algebra: ellipticity, chiral splitting, Theta coordinates
and the equivariant retraction onto Dirac-type symbols."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .errors import EndpointMismatch, InvalidTheta, NotElliptic, NotHermitian, Singular
from .linalg import Frame, hermitian_part, is_invertible, opnorm, span

ELLIPTIC_RTOL = 1e-8
DIRAC_ATOL = 1e-9


@dataclass(frozen=True)
class EllipticSymbol:
    """Values (sigma1, sigma2) of a first-order symbol on an orthonormal frame."""

    sigma1: np.ndarray
    sigma2: np.ndarray

    @property
    def dim(self) -> int:
        return self.sigma1.shape[0]

    @property
    def q(self) -> np.ndarray:
        return np.linalg.solve(self.sigma1, self.sigma2)

    def at(self, c1: float, c2: float) -> np.ndarray:
        return c1 * self.sigma1 + c2 * self.sigma2

    def conjugate(self, g: np.ndarray) -> EllipticSymbol:
        gi = g.conj().T
        return EllipticSymbol(hermitian_part(g @ self.sigma1 @ gi), hermitian_part(g @ self.sigma2 @ gi))


@dataclass(frozen=True)
class ChiralSplit:
    e_plus: Frame
    e_minus: Frame
    q: np.ndarray


@dataclass(frozen=True)
class ThetaCoordinates:
    """(E-, E+, J, Q-).

    ``j`` is an n x k matrix sending E- coordinates (in the ``e_minus``
    basis) to ambient vectors lying in the orthogonal complement of E-.
    ``q_minus`` is k x k in the same E- coordinates.
    """

    e_minus: Frame
    e_plus: Frame
    j: np.ndarray
    q_minus: np.ndarray


def _check_hermitian(a: np.ndarray, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NotHermitian(f"{name} is not square")
    if not np.all(np.isfinite(a)):
        raise NotHermitian(f"{name} has non-finite entries")
    if opnorm(a - a.conj().T) > 1e-12 * max(opnorm(a), 1e-300):
        raise NotHermitian(f"{name} is not Hermitian")
    return hermitian_part(a)


def check_ellipticity(sigma1: np.ndarray, sigma2: np.ndarray) -> EllipticSymbol:
    s1 = _check_hermitian(sigma1, "sigma1")
    s2 = _check_hermitian(sigma2, "sigma2")
    if s1.shape != s2.shape:
        raise NotHermitian("sigma1 and sigma2 have different shapes")
    if not is_invertible(s1):
        raise Singular("sigma1 is not invertible")
    ev = np.linalg.eigvals(np.linalg.solve(s1, s2))
    radius = float(np.max(np.abs(ev)))
    im = ev.imag
    if np.min(np.abs(im)) <= ELLIPTIC_RTOL * radius:
        raise NotElliptic("Q = sigma1^{-1} sigma2 has an eigenvalue on the real axis")
    if np.sum(im > 0) != np.sum(im < 0):
        raise NotElliptic("upper and lower half-plane eigenvalue counts differ")
    return EllipticSymbol(s1, s2)


def _invariant_frame(q: np.ndarray, upper: bool) -> Frame:
    select = (lambda x: x.imag > 0) if upper else (lambda x: x.imag < 0)
    _, z, sdim = sla.schur(q, output="complex", sort=select)
    return span(z[:, :sdim], rank=sdim)


def chiral_split(s: EllipticSymbol) -> ChiralSplit:
    """Generalized eigenspaces of Q for the upper/lower half-planes."""
    q = s.q
    return ChiralSplit(_invariant_frame(q, True), _invariant_frame(q, False), q)


def theta_coords(s: EllipticSymbol) -> ThetaCoordinates:
    split = chiral_split(s)
    em = split.e_minus.basis
    j = s.sigma1 @ em
    q_minus = em.conj().T @ split.q @ em
    return ThetaCoordinates(split.e_minus, split.e_plus, j, q_minus)


def theta_inverse(th: ThetaCoordinates) -> EllipticSymbol:
    """Rebuild (sigma1, sigma2) from Theta coordinates.

    On E- the symbols are ``J`` and ``J Q-``. On E+ they are fixed by
    Hermiticity together with sigma_i E+ being orthogonal to E+, which in the
    basis B = [E+, E-] reads B* sigma_i B = [[0, X_i], [X_i*, 0]] with
    X_i = E+* J_i.
    """
    ev = np.linalg.eigvals(th.q_minus) if th.q_minus.size else np.zeros(0)
    if ev.size and np.max(ev.imag) >= 0:
        raise InvalidTheta("q_minus has an eigenvalue in the closed upper half-plane")
    ep, em = th.e_plus.basis, th.e_minus.basis
    k = em.shape[1]
    if ep.shape[1] != k or ep.shape[0] != 2 * k:
        raise InvalidTheta("E+ and E- must both have half the ambient dimension")
    if np.abs(em.conj().T @ th.j).max(initial=0.0) > 1e-8 * max(1.0, opnorm(th.j)):
        raise InvalidTheta("J does not map into the orthogonal complement of E-")
    b = np.hstack([ep, em])
    if not is_invertible(b):
        raise InvalidTheta("E+ and E- are not complementary")
    binv = np.linalg.inv(b)
    out = []
    for ji in (th.j, th.j @ th.q_minus):
        x = ep.conj().T @ ji
        mid = np.zeros((2 * k, 2 * k), dtype=complex)
        mid[:k, k:] = x
        mid[k:, :k] = x.conj().T
        out.append(hermitian_part(binv.conj().T @ mid @ binv))
    if not is_invertible(out[0]):
        raise InvalidTheta("J is not injective")
    return check_ellipticity(out[0], out[1])


def _inv_sqrt_on_range(jjs: np.ndarray, rank: int) -> np.ndarray:
    w, v = np.linalg.eigh(hermitian_part(jjs))
    v = v[:, -rank:] if rank else v[:, :0]
    w = w[-rank:] if rank else w[:0]
    return (v / np.sqrt(w)) @ v.conj().T


def retract_symbol(s: EllipticSymbol, t: float) -> EllipticSymbol:
    """Point of the equivariant homotopy from ``s`` (t=0) to a Dirac-type symbol (t=1)."""
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    if t == 0.0:
        return s
    th = theta_coords(s)
    k = th.e_minus.rank
    em = th.e_minus.basis
    perp = th.e_minus.complement().basis

    j = th.j
    j_t = (t * _inv_sqrt_on_range(j @ j.conj().T, k) + (1.0 - t) * np.eye(s.dim)) @ j
    q_t = -1j * t * np.eye(k) + (1.0 - t) * th.q_minus

    # E+ is the graph of B: (E-)^perp -> E-; solve E+ = perp X + em Y for B = Y X^{-1}
    ep = th.e_plus.basis
    x = perp.conj().T @ ep
    y = em.conj().T @ ep
    bcoef = np.linalg.lstsq(x.T, y.T, rcond=None)[0].T
    ep_t = span(perp + (1.0 - t) * em @ bcoef, rank=k)

    return theta_inverse(ThetaCoordinates(th.e_minus, ep_t, j_t, q_t))


def is_dirac(s: EllipticSymbol, atol: float = DIRAC_ATOL) -> bool:
    """Clifford relation for the unit frame; (1,0), (0,1), (1,1) span the quadratic form."""
    one = np.eye(s.dim)
    for c1, c2 in ((1.0, 0.0), (0.0, 1.0), (1.0, 1.0)):
        a = s.at(c1, c2)
        if np.abs(a @ a - (c1 * c1 + c2 * c2) * one).max() > atol:
            return False
    return True


def _smoothstep(x: float) -> float:
    """C-infinity step: 0 for x <= 0, 1 for x >= 1."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    a = np.exp(-1.0 / x)
    b = np.exp(-1.0 / (1.0 - x))
    return float(a / (a + b))


def partition_of_unity(t: float) -> tuple[float, float]:
    """(rho0, rho1) with supp rho0 in [0, 0.6] and supp rho1 in [0.4, 1]."""
    r1 = _smoothstep((t - 0.4) / 0.2)
    return 1.0 - r1, r1


def _max_dev(a: EllipticSymbol, b: EllipticSymbol) -> float:
    return max(np.abs(a.sigma1 - b.sigma1).max(), np.abs(a.sigma2 - b.sigma2).max())


def retract_path(
    path: Sequence[EllipticSymbol],
    g: np.ndarray,
    s: float,
    ts: Sequence[float] | None = None,
) -> list[EllipticSymbol]:
    """Retract a path with ``path[-1] = g path[0] g^{-1}`` while keeping that relation.

    ``ts`` are the sample parameters (default: uniform on [0, 1]).
    """
    path = list(path)
    g = np.asarray(g, dtype=complex)
    if opnorm(g.conj().T @ g - np.eye(g.shape[0])) > 1e-9:
        raise ValueError("g must be unitary")
    scale = max(1.0, opnorm(path[0].sigma1), opnorm(path[0].sigma2))
    if _max_dev(path[-1], path[0].conjugate(g)) > 1e-9 * scale:
        raise EndpointMismatch("path(1) != g path(0) g^{-1}")
    if ts is None:
        ts = np.linspace(0.0, 1.0, len(path))
    if s == 0.0:
        return path
    gi = g.conj().T
    out = []
    for t, sym in zip(ts, path):
        r0, r1 = partition_of_unity(float(t))
        s1 = np.zeros_like(sym.sigma1)
        s2 = np.zeros_like(sym.sigma2)
        if r0 > 0:
            h = retract_symbol(sym, s)
            s1 = s1 + r0 * h.sigma1
            s2 = s2 + r0 * h.sigma2
        if r1 > 0:
            h = retract_symbol(sym.conjugate(gi), s).conjugate(g)
            s1 = s1 + r1 * h.sigma1
            s2 = s2 + r1 * h.sigma2
        out.append(check_ellipticity(hermitian_part(s1), hermitian_part(s2)))
    return out
