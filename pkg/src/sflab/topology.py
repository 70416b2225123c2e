"""Bundles over (boundary circle) x (parameter circle) and their first Chern numbers.

The Chern number is evaluated with link determinants around grid cells
(x first, t second). Vertices carry frames ``F[x][t]`` for t = 0..nt-1; the
t-link that crosses the seam is ``det(F[x][nt-1]^* g(x) F[x][0])``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .boundary import (
    BoundaryAutomorphism,
    BoundaryLoop,
    ConormalData,
    loop_F,
    negative_subspace_F,
)
from .errors import GridMismatch, NotConverged, ResolutionTooCoarse, SeamMismatch
from .linalg import Frame, gap_distance, opnorm

SEAM_TOL = 1e-8
RESIDUAL_TOL = 0.01
LINK_MIN = 1e-6
MAX_ADJACENT_GAP = 0.5


@dataclass(frozen=True)
class TorusFamily:
    """Frames of a rank-r subbundle of C^n on an nx-by-nt grid with a seam clutch.

    ``frames`` has shape (nx, nt, n, r); ``clutch`` has shape (nx, n, n).
    """

    frames: np.ndarray
    clutch: np.ndarray

    @property
    def nx(self) -> int:
        return self.frames.shape[0]

    @property
    def nt(self) -> int:
        return self.frames.shape[1]

    @property
    def ambient_dim(self) -> int:
        return self.frames.shape[2]

    @property
    def rank(self) -> int:
        return self.frames.shape[3]

    def frame(self, ix: int, it: int) -> Frame:
        return Frame(self.frames[ix, it])


@dataclass(frozen=True)
class ChernResult:
    raw: float
    rounded: int
    residual: float
    flux: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class Scenario:
    components: tuple[TorusFamily, ...]
    names: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.components:
            raise ValueError("a scenario needs at least one component")
        if not self.names:
            object.__setattr__(self, "names", tuple(f"c{i}" for i in range(len(self.components))))

    @property
    def ranks(self) -> tuple[int, ...]:
        return tuple(c.rank for c in self.components)


def _clutch_array(g, nx: int, n: int) -> np.ndarray:
    if g is None:
        return np.broadcast_to(np.eye(n, dtype=complex), (nx, n, n)).copy()
    if callable(g):
        return np.stack([np.asarray(g(i), dtype=complex) for i in range(nx)])
    g = np.asarray(g, dtype=complex)
    if g.ndim == 2:
        return np.broadcast_to(g, (nx, n, n)).copy()
    if g.shape != (nx, n, n):
        raise GridMismatch(f"clutch has shape {g.shape}, expected ({nx}, {n}, {n})")
    return g


def glue_family(
    f_loops: Sequence[Sequence[Frame]],
    g: np.ndarray | Callable[[int], np.ndarray] | None = None,
    check_adjacent: bool = True,
) -> TorusFamily:
    """Build a torus family from nt+1 loops over x (t = 0, ..., 1 inclusive).

    The last loop must equal ``g`` applied to the first; it is dropped after
    the check and the clutch takes its place in the seam links.
    """
    if len(f_loops) < 3:
        raise ValueError("need at least 3 loops in t (nt >= 2)")
    nx = len(f_loops[0])
    if any(len(loop) != nx for loop in f_loops):
        raise GridMismatch("loops have different numbers of x samples")
    n = f_loops[0][0].ambient_dim
    r = f_loops[0][0].rank
    for loop in f_loops:
        for f in loop:
            if f.ambient_dim != n or f.rank != r:
                raise NotConverged(f"rank jump: expected rank {r} in C^{n}, got {f.rank} in C^{f.ambient_dim}")
    clutch = _clutch_array(g, nx, n)
    for ix in range(nx):
        u = clutch[ix]
        if opnorm(u.conj().T @ u - np.eye(n)) > 1e-9:
            raise ValueError(f"clutch at x index {ix} is not unitary")
        if r and gap_distance(f_loops[-1][ix], f_loops[0][ix].transform(u)) >= SEAM_TOL:
            raise SeamMismatch(f"F(1) != g F(0) at x index {ix}")
    nt = len(f_loops) - 1
    frames = np.empty((nx, nt, n, r), dtype=complex)
    for it in range(nt):
        for ix in range(nx):
            frames[ix, it] = f_loops[it][ix].basis
    fam = TorusFamily(frames, clutch)
    if check_adjacent and r:
        _check_adjacent(fam)
    return fam


def _check_adjacent(fam: TorusFamily) -> None:
    f = fam.frames
    nxt_x = np.roll(f, -1, axis=0)
    nxt_t = np.concatenate([f[:, 1:], np.einsum("xab,xbr->xar", fam.clutch, f[:, :1, :, :].squeeze(1))[:, None]], axis=1)
    for other, axis in ((nxt_x, "x"), (nxt_t, "t")):
        resid = other - f @ (np.conj(np.swapaxes(f, -1, -2)) @ other)
        gaps = np.linalg.norm(resid, ord=2, axis=(-2, -1))
        worst = float(gaps.max())
        if worst >= MAX_ADJACENT_GAP:
            ix, it = np.unravel_index(int(np.argmax(gaps)), gaps.shape)
            raise ResolutionTooCoarse(f"adjacent gap {worst:.3f} along {axis} at cell ({ix}, {it})")


def _link(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.linalg.det(np.conj(np.swapaxes(a, -1, -2)) @ b)


def chern_number(fam: TorusFamily) -> ChernResult:
    """First Chern number from plaquette phases; raises NotConverged on bad input."""
    nx, nt = fam.nx, fam.nt
    if fam.rank == 0:
        return ChernResult(0.0, 0, 0.0, np.zeros((nx, nt)))
    f = fam.frames
    ux = _link(f, np.roll(f, -1, axis=0))
    seam = np.einsum("xab,xbr->xar", fam.clutch, f[:, 0])
    ut = np.empty((nx, nt), dtype=complex)
    ut[:, :-1] = _link(f[:, :-1], f[:, 1:])
    ut[:, -1] = _link(f[:, -1], seam)
    weakest = min(np.abs(ux).min(), np.abs(ut).min())
    if weakest < LINK_MIN:
        raise NotConverged(f"link determinant modulus {weakest:.2e} below {LINK_MIN:g} (rank drop between neighbours)")
    ux = ux / np.abs(ux)
    ut = ut / np.abs(ut)
    # cell (i, j): U_x(i,j) U_t(i+1,j) conj(U_x(i,j+1)) conj(U_t(i,j)); row nt wraps to row 0
    loop = ux * np.roll(ut, -1, axis=0) * np.conj(np.roll(ux, -1, axis=1)) * np.conj(ut)
    flux = np.angle(loop)
    raw = float(flux.sum() / (2 * np.pi))
    rounded = int(round(raw))
    residual = abs(raw - rounded)
    if residual >= RESIDUAL_TOL:
        raise NotConverged(f"Chern sum {raw:.4f} is not near an integer")
    return ChernResult(raw, rounded, residual, flux)


def psi_invariant(s: Scenario) -> int:
    total = 0
    for i, comp in enumerate(s.components):
        try:
            total += chern_number(comp).rounded
        except NotConverged as exc:
            raise NotConverged(str(exc), component=i) from exc
    return total


def _sum_family(a: TorusFamily, b: TorusFamily) -> TorusFamily:
    if (a.nx, a.nt) != (b.nx, b.nt):
        raise GridMismatch(f"grids {a.nx}x{a.nt} and {b.nx}x{b.nt} differ")
    na, nb = a.ambient_dim, b.ambient_dim
    frames = np.zeros((a.nx, a.nt, na + nb, a.rank + b.rank), dtype=complex)
    frames[:, :, :na, : a.rank] = a.frames
    frames[:, :, na:, a.rank :] = b.frames
    clutch = np.zeros((a.nx, na + nb, na + nb), dtype=complex)
    clutch[:, :na, :na] = a.clutch
    clutch[:, na:, na:] = b.clutch
    return TorusFamily(frames, clutch)


def direct_sum(s1: Scenario, s2: Scenario) -> Scenario:
    if len(s1.components) != len(s2.components):
        raise GridMismatch("scenarios have different numbers of boundary components")
    comps = tuple(_sum_family(a, b) for a, b in zip(s1.components, s2.components))
    return Scenario(comps, s1.names)


def trivial_scenario(nx: int, nt: int, components: int = 1) -> Scenario:
    """Rank-0 bundle in C^0 on every component (the neutral element of direct_sum)."""
    fam = TorusFamily(np.zeros((nx, nt, 0, 0), dtype=complex), np.zeros((nx, 0, 0), dtype=complex))
    return Scenario((fam,) * components)


def write_flux_csv(path: str | Path, result: ChernResult) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "t", "flux"])
        for (ix, it), v in np.ndenumerate(result.flux):
            w.writerow([ix, it, f"{v:.12g}"])


# --- constructors -----------------------------------------------------------


def qwz_hamiltonian(k1: float, k2: float, mass: float = 1.0) -> np.ndarray:
    """sin k1 s1 + sin k2 s2 + (mass - cos k1 - cos k2) s3."""
    d3 = mass - np.cos(k1) - np.cos(k2)
    return np.array(
        [[d3, np.sin(k1) - 1j * np.sin(k2)], [np.sin(k1) + 1j * np.sin(k2), -d3]],
        dtype=complex,
    )


def qwz_lower_band(k1: float, k2: float, mass: float = 1.0) -> np.ndarray:
    _, v = np.linalg.eigh(qwz_hamiltonian(k1, k2, mass))
    return v[:, :1]


def qwz_family(n: int, mass: float = 1.0) -> TorusFamily:
    """Lower-band frames of the QWZ model on an n x n Brillouin-zone grid."""
    ks = 2 * np.pi * np.arange(n) / n
    frames = np.empty((n, n, 2, 1), dtype=complex)
    for i, k1 in enumerate(ks):
        for j, k2 in enumerate(ks):
            frames[i, j] = qwz_lower_band(k1, k2, mass)
    return TorusFamily(frames, np.broadcast_to(np.eye(2, dtype=complex), (n, 2, 2)).copy())


@dataclass(frozen=True)
class RotatingFamily:
    """T(x, t) = 1 - 2 P_F(x, t) on E- of rank ``k``.

    F(x, t) is the QWZ lower band (mass 1) at (n x, 2 pi (t + t_offset)),
    embedded in the first two coordinates of E-. Its glued Chern number on a
    boundary circle traversed in the direction of increasing x is ``n``.
    For n = 0 the family is constant with F = span(e1).
    """

    n: int
    k: int = 2
    t_offset: float = 0.0

    def __post_init__(self):
        if self.n != 0 and self.k < 2:
            raise ValueError("a non-trivial line family needs rank(E-) >= 2")
        if self.k < 1:
            raise ValueError("rank(E-) must be positive")

    def f_vector(self, x: float, t: float) -> np.ndarray:
        v = np.zeros((self.k, 1), dtype=complex)
        if self.n == 0:
            v[0, 0] = 1.0
        else:
            v[:2] = qwz_lower_band(self.n * x, 2 * np.pi * (t + self.t_offset))
        return v

    def t_matrix(self, x: float, t: float) -> np.ndarray:
        v = self.f_vector(x, t)
        return np.eye(self.k) - 2.0 * (v @ v.conj().T)

    def t_matrices(self, xs: np.ndarray, t: float) -> np.ndarray:
        """Vectorized ``t_matrix`` over an array of x values, shape (len(xs), k, k)."""
        xs = np.asarray(xs, dtype=float)
        out = np.broadcast_to(np.eye(self.k, dtype=complex), (xs.size, self.k, self.k)).copy()
        if self.n == 0:
            out[:, 0, 0] = -1.0
            return out
        k2 = 2 * np.pi * (t + self.t_offset)
        k1 = self.n * xs
        d = np.stack([np.sin(k1), np.full_like(k1, np.sin(k2)), 1.0 - np.cos(k1) - np.cos(k2)], axis=-1)
        # 1 - 2 P_lower = sign(h) = h / |h| on the two-dimensional block
        d = d / np.linalg.norm(d, axis=-1, keepdims=True)
        out[:, 0, 0] = d[:, 2]
        out[:, 1, 1] = -d[:, 2]
        out[:, 0, 1] = d[:, 0] - 1j * d[:, 1]
        out[:, 1, 0] = d[:, 0] + 1j * d[:, 1]
        return out


def realize_chern(n: int, ambient_rank: int = 4, t_offset: float = 0.0) -> RotatingFamily:
    """Loop of unitary self-adjoint T whose negative bundle has Chern number ``n``.

    ``ambient_rank`` is the rank of E = E+ + E-, so E- has rank ambient_rank/2.
    """
    if ambient_rank < 2 or ambient_rank % 2:
        raise ValueError("ambient_rank must be an even integer >= 2")
    return RotatingFamily(n, ambient_rank // 2, t_offset)


def dirac_conormal(k: int) -> ConormalData:
    """Conormal data sigma(n) = sigma_x (x) 1_k with E+ = e1 (x) C^k, E- = e2 (x) C^k."""
    sx = np.kron(np.array([[0, 1], [1, 0]], dtype=complex), np.eye(k))
    e_plus = Frame(np.vstack([np.eye(k), np.zeros((k, k))]).astype(complex))
    e_minus = Frame(np.vstack([np.zeros((k, k)), np.eye(k)]).astype(complex))
    return ConormalData.from_splitting(sx, e_plus, e_minus)


def sample_T_loops(
    t_of: Callable[[np.ndarray, float], np.ndarray],
    conormal: ConormalData,
    nx: int,
    nt: int,
) -> list[BoundaryLoop]:
    """nt+1 boundary loops of T(x, t) sampled at x = 2 pi i / nx, t = j / nt."""
    xs = 2 * np.pi * np.arange(nx) / nx
    frame = conormal.e_minus
    loops = []
    for j in range(nt + 1):
        mats = t_of(xs, j / nt)
        loops.append(BoundaryLoop.from_samples(conormal, [BoundaryAutomorphism(m, frame) for m in mats]))
    return loops


def family_from_T_loops(loops: Sequence[BoundaryLoop], g=None) -> TorusFamily:
    return glue_family([loop_F(bl) for bl in loops], g)


def chern_of_rotating(fam: RotatingFamily, nx: int, nt: int) -> ChernResult:
    c = dirac_conormal(fam.k)
    return chern_number(family_from_T_loops(sample_T_loops(fam.t_matrices, c, nx, nt)))


def realize_extendable(windings: Sequence[int], rank: int = 1, nx: int = 32, nt: int = 8) -> Scenario:
    """F = full E- (rank ``rank``) on each component, glued by g(x) = exp(i w x)."""
    comps = []
    xs = 2 * np.pi * np.arange(nx) / nx
    c = dirac_conormal(rank)
    t_neg = BoundaryAutomorphism(-np.eye(rank), c.e_minus)
    f = negative_subspace_F(t_neg)
    for w in windings:
        clutch = np.exp(1j * w * xs)[:, None, None] * np.eye(2 * rank)[None]
        loops = [[f] * nx for _ in range(nt + 1)]
        loops[-1] = [f.transform(clutch[i]) for i in range(nx)]
        comps.append(glue_family(loops, clutch))
    return Scenario(tuple(comps), tuple(f"w{w}" for w in windings))


def reverse_x(fam: TorusFamily) -> TorusFamily:
    """Same bundle with the boundary circle traversed backwards."""
    idx = (-np.arange(fam.nx)) % fam.nx
    return TorusFamily(fam.frames[idx], fam.clutch[idx])


__all__ = [
    "ChernResult",
    "RotatingFamily",
    "Scenario",
    "TorusFamily",
    "chern_number",
    "chern_of_rotating",
    "direct_sum",
    "dirac_conormal",
    "family_from_T_loops",
    "glue_family",
    "psi_invariant",
    "qwz_family",
    "qwz_hamiltonian",
    "qwz_lower_band",
    "realize_chern",
    "realize_extendable",
    "reverse_x",
    "sample_T_loops",
    "trivial_scenario",
    "write_flux_csv",
]
