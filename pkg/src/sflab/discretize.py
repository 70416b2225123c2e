"""Finite models of the odd Dirac operator on the annulus S^1 x [0, 1].

The operator is ``A = [[0, D*], [D, 0]]`` with ``D = -i d/dz + d/dy`` acting
on C^r-valued spinor halves; in Fourier modes e^{imy} the y-derivative
becomes ``i (m + a)`` for a flat connection ``a``.

In z the two halves live on staggered grids: u+ at z_j for j = 1..N and
u- at j = 0..N-1 with spacing h = 1 / (N + 1/2). D is a one-sided
difference, D* its exact adjoint, so the bulk matrix is Hermitian and has
no doubled branch. The boundary values u+_0 and u-_N are eliminated with
the boundary condition at each edge.

DOF ordering is (mode, half, z index, flavour) with the + half first.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .boundary import (
    BoundaryAutomorphism,
    BoundaryCondition,
    ConormalData,
    T_from_condition,
    condition_from_T,
)
from .errors import EndpointMismatch, NotHermitian, NotLagrangian, NotTransversal
from .linalg import Frame
from .spectralflow import OperatorPath, check_endpoints, sector_projector

HERMITIAN_TOL = 1e-10


@dataclass(frozen=True)
class AnnulusGrid:
    n_modes: int
    n_z: int

    def __post_init__(self):
        if self.n_z < 8:
            raise ValueError("n_z must be at least 8")
        if self.n_modes < 1:
            raise ValueError("n_modes must be positive")

    @property
    def h(self) -> float:
        return 1.0 / (self.n_z + 0.5)

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.n_modes, self.n_modes + 1)

    @property
    def n_fourier(self) -> int:
        return 2 * self.n_modes + 1

    @property
    def y_points(self) -> np.ndarray:
        """Collocation points matching the retained Fourier modes."""
        return 2 * np.pi * np.arange(self.n_fourier) / self.n_fourier

    def fourier_matrix(self) -> np.ndarray:
        """Unitary map from collocation values to mode coefficients."""
        return np.exp(-1j * np.outer(self.modes, self.y_points)) / np.sqrt(self.n_fourier)


def _edge_conormal(r: int, sign: float) -> ConormalData:
    sx = np.kron(np.array([[0, 1], [1, 0]], dtype=complex), np.eye(r))
    e_plus = Frame(np.vstack([np.eye(r), np.zeros((r, r))]).astype(complex))
    e_minus = Frame(np.vstack([np.zeros((r, r)), np.eye(r)]).astype(complex))
    return ConormalData.from_splitting(sign * sx, e_plus, e_minus)


def inner_conormal(r: int) -> ConormalData:
    """Conormal data at z = 0 (outward normal -dz, so sigma(n) = -sigma_x)."""
    return _edge_conormal(r, -1.0)


def outer_conormal(r: int) -> ConormalData:
    """Conormal data at z = 1 (sigma(n) = sigma_x)."""
    return _edge_conormal(r, 1.0)


@dataclass(frozen=True)
class DiracBlocks:
    """Bulk Dirac matrix before boundary elimination."""

    grid: AnnulusGrid
    flavors: int
    a: float
    bulk: sp.csr_matrix = field(repr=False)

    @property
    def dim(self) -> int:
        return self.grid.n_fourier * 2 * self.grid.n_z * self.flavors

    def index(self, mode: int, half: int, j: int) -> np.ndarray:
        """DOF indices of (mode, half, z index); half 0 is u+ (j = 1..N), half 1 is u- (j = 0..N-1)."""
        g = self.grid
        im = mode + g.n_modes
        jj = j - 1 if half == 0 else j
        start = ((im * 2 + half) * g.n_z + jj) * self.flavors
        return np.arange(start, start + self.flavors)

    def edge_indices(self, half: int) -> np.ndarray:
        """Indices of u-_0 (half=1) or u+_N (half=0) over all modes, mode-major."""
        g = self.grid
        j = 0 if half == 1 else g.n_z
        return np.concatenate([self.index(m, half, j) for m in g.modes])

    def mode_of_dof(self) -> np.ndarray:
        per = 2 * self.grid.n_z * self.flavors
        return np.repeat(self.grid.modes, per)


def _mode_d_block(n_z: int, h: float, kappa: float) -> sp.csr_matrix:
    """Scalar D for one mode: rows (-)_0..N-1, columns u+_1..N."""
    main = np.full(n_z, -1j / h + 1j * kappa)
    lower = np.full(n_z - 1, 1j / h)
    return sp.diags([main, lower], [0, -1], format="csr")


def build_dirac_annulus(
    grid: AnnulusGrid,
    a: float = 0.0,
    potential: tuple[np.ndarray, np.ndarray] | None = None,
    flavors: int = 1,
) -> DiracBlocks:
    """Assemble the block-diagonal (per Fourier mode) bulk operator.

    ``potential`` is an optional pair (V+, V-) of Hermitian r x r matrices
    added on the diagonal of each half.
    """
    n, h, r = grid.n_z, grid.h, flavors
    eye_r = sp.identity(r, format="csr", dtype=complex)
    vp = vm = None
    if potential is not None:
        vp, vm = (np.asarray(v, dtype=complex) for v in potential)
        for v in (vp, vm):
            if v.shape != (r, r) or np.abs(v - v.conj().T).max() > 1e-12 * max(1.0, np.abs(v).max()):
                raise NotHermitian("potential blocks must be Hermitian r x r matrices")
    blocks = []
    for m in grid.modes:
        d = sp.kron(_mode_d_block(n, h, m + a), eye_r, format="csr")
        top = None
        bottom = None
        if vp is not None:
            top = sp.kron(sp.identity(n), sp.csr_matrix(vp))
            bottom = sp.kron(sp.identity(n), sp.csr_matrix(vm))
        blocks.append(sp.bmat([[top, d.conj().T], [d, bottom]], format="csr"))
    bulk = sp.block_diag(blocks, format="csr")
    return DiracBlocks(grid, r, float(a), bulk)


def _as_conditions(data, n: int) -> list:
    if isinstance(data, (BoundaryCondition, BoundaryAutomorphism)):
        return [data] * n
    data = list(data)
    if len(data) != n:
        raise ValueError(f"expected {n} boundary samples (one per collocation point), got {len(data)}")
    return data


def boundary_T(conormal: ConormalData, data) -> np.ndarray:
    """T in the E- coordinates of ``conormal`` from a condition L or an automorphism."""
    if isinstance(data, BoundaryAutomorphism):
        data = condition_from_T(conormal, data)
    if not isinstance(data, BoundaryCondition):
        raise TypeError("boundary samples must be BoundaryCondition or BoundaryAutomorphism")
    t = T_from_condition(conormal, data)
    if not t.is_hermitian:
        raise NotLagrangian("boundary condition is not Lagrangian (T is not self-adjoint)")
    return t.reframe(conormal.e_minus).t_matrix


def collocation_matrix(grid: AnnulusGrid, values: np.ndarray) -> np.ndarray:
    """Multiplication by a matrix field sampled at the collocation points, in mode coordinates.

    ``values`` has shape (n_fourier, r, r); the result is (n_fourier*r) square,
    ordered mode-major.
    """
    f = grid.fourier_matrix()
    nf, r, _ = values.shape
    # (F (x) 1) blockdiag(values) (F (x) 1)^*
    tmp = np.einsum("mj,jab,nj->manb", f, values, f.conj())
    return tmp.reshape(nf * r, nf * r)


@dataclass(frozen=True)
class DiscreteOperator:
    matrix: sp.csr_matrix = field(repr=False)
    blocks: DiracBlocks = field(repr=False)
    t_inner: np.ndarray = field(repr=False)
    t_outer: np.ndarray = field(repr=False)

    @property
    def grid(self) -> AnnulusGrid:
        return self.blocks.grid

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def impose_T(blocks: DiracBlocks, t_inner: np.ndarray, t_outer: np.ndarray) -> DiscreteOperator:
    """Eliminate the boundary values given T at every collocation point.

    ``t_inner``/``t_outer`` have shape (n_fourier, r, r) (or (r, r) for a
    y-independent condition) in the standard E- coordinates of each edge.
    """
    g, r = blocks.grid, blocks.flavors
    nf = g.n_fourier
    t0 = np.asarray(t_inner, dtype=complex)
    t1 = np.asarray(t_outer, dtype=complex)
    if t0.ndim == 2:
        t0 = np.broadcast_to(t0, (nf, r, r))
    if t1.ndim == 2:
        t1 = np.broadcast_to(t1, (nf, r, r))
    if t0.shape != (nf, r, r) or t1.shape != (nf, r, r):
        raise NotTransversal(f"boundary data must have shape ({nf}, {r}, {r})")
    for name, t in (("inner", t0), ("outer", t1)):
        if np.abs(t - np.conj(np.swapaxes(t, -1, -2))).max() > 1e-9 * max(1.0, np.abs(t).max()):
            raise NotLagrangian(f"{name} boundary automorphism is not self-adjoint")
    h = g.h
    # u+_0 = i T0 u-_0 turns the (i/h) u+_0 term of row (-)_0 into -T0/h u-_0;
    # u-_N = i T1^{-1} u+_N gives +T1^{-1}/h on u+_N.
    c0 = -collocation_matrix(g, t0) / h
    c1 = collocation_matrix(g, np.linalg.inv(t1)) / h
    i0 = blocks.edge_indices(1)
    i1 = blocks.edge_indices(0)
    n = blocks.dim
    rows = np.concatenate([np.repeat(i0, i0.size), np.repeat(i1, i1.size)])
    cols = np.concatenate([np.tile(i0, i0.size), np.tile(i1, i1.size)])
    vals = np.concatenate([c0.ravel(), c1.ravel()])
    edge = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    mat = (blocks.bulk + edge).tocsr()
    mat.sum_duplicates()
    skew = abs(mat - mat.conj().T).max() if mat.nnz else 0.0
    if skew > HERMITIAN_TOL * max(1.0, abs(mat).max()):
        raise NotLagrangian(f"eliminated operator is not Hermitian (skew {skew:.2e})")
    return DiscreteOperator(mat, blocks, t0, t1)


def impose_condition(blocks: DiracBlocks, l0, l1) -> DiscreteOperator:
    """Impose boundary conditions given as L subspaces (or automorphisms) at each edge.

    Each of ``l0``, ``l1`` is a single BoundaryCondition/BoundaryAutomorphism
    (y-independent) or a sequence with one entry per collocation point.
    """
    r = blocks.flavors
    nf = blocks.grid.n_fourier
    out = []
    for data, conormal in ((l0, inner_conormal(r)), (l1, outer_conormal(r))):
        if isinstance(data, (BoundaryCondition, BoundaryAutomorphism)):
            out.append(boundary_T(conormal, data))
        else:
            out.append(np.stack([boundary_T(conormal, s) for s in _as_conditions(data, nf)]))
    return impose_T(blocks, out[0], out[1])


def mode_block(grid: AnnulusGrid, kappa: float, t_inner: np.ndarray | float, t_outer: np.ndarray | float) -> np.ndarray:
    """Dense Hermitian matrix of a single Fourier mode with y-independent T."""
    r = np.atleast_2d(np.asarray(t_inner)).shape[0]
    t0 = np.atleast_2d(np.asarray(t_inner, dtype=complex))
    t1 = np.atleast_2d(np.asarray(t_outer, dtype=complex))
    n, h = grid.n_z, grid.h
    d = np.kron(_mode_d_block(n, h, kappa).toarray(), np.eye(r))
    a = np.zeros((2 * n * r, 2 * n * r), dtype=complex)
    a[n * r :, : n * r] = d
    a[: n * r, n * r :] = d.conj().T
    a[n * r : n * r + r, n * r : n * r + r] += -t0 / h
    a[(n - 1) * r : n * r, (n - 1) * r : n * r] += np.linalg.inv(t1) / h
    return a


def continuum_mode_eigenvalues(kappa: float, tau0: float, tau1: float, window: float) -> np.ndarray:
    """Eigenvalues in [-window, window] of the continuum mode problem with scalar T.

    Zeros of the characteristic function in lambda are bracketed on a fine
    grid and polished with Brent's method.
    """
    from scipy.optimize import brentq

    def f(lam: float) -> float:
        w2 = kappa * kappa - lam * lam
        if w2 >= 0:
            w = np.sqrt(w2)
            c = np.cosh(w)
            s = np.sinh(w) / w if w > 1e-12 else 1.0
        else:
            w = np.sqrt(-w2)
            c = np.cos(w)
            s = np.sin(w) / w
        return -c * (tau0 + tau1) + s * (-kappa * tau0 - lam + tau1 * lam * tau0 + tau1 * kappa)

    lams = np.linspace(-window, window, 20001)
    vals = np.array([f(x) for x in lams])
    roots = []
    for i in range(lams.size - 1):
        if vals[i] == 0.0:
            roots.append(lams[i])
        elif vals[i] * vals[i + 1] < 0:
            roots.append(brentq(f, lams[i], lams[i + 1], xtol=1e-14))
    return np.array(roots)


TField = Callable[[np.ndarray, float], np.ndarray]


def constant_T(value: float | np.ndarray, flavors: int) -> TField:
    """T(x, t) = value (scalar times identity, or a fixed r x r matrix)."""
    m = np.asarray(value, dtype=complex)
    if m.ndim == 0:
        m = m * np.eye(flavors)

    def field_(xs: np.ndarray, t: float) -> np.ndarray:
        return np.broadcast_to(m, (np.size(xs), flavors, flavors)).copy()

    field_.constant = m  # type: ignore[attr-defined]
    return field_


@dataclass(frozen=True)
class AnnulusScenario:
    """A loop of boundary problems for the odd Dirac operator on the annulus.

    ``inner_T`` and ``outer_T`` give T(x, t) on each boundary circle, where x
    runs along the positive tangent of that circle: x = y on the outer
    circle z = 1 and x = -y on the inner circle z = 0. Both must be periodic
    in t with period 1. The connection is a(t) = flux * t, and the loop
    closes up to the gauge transformation exp(-i flux y).
    """

    flavors: int
    inner_T: TField
    outer_T: TField
    flux: int = 0
    name: str = "annulus"

    def T_on_grid(self, grid: AnnulusGrid, t: float) -> tuple[np.ndarray, np.ndarray]:
        y = grid.y_points
        return self.inner_T(-y, t), self.outer_T(y, t)


@dataclass(frozen=True)
class DirectSumScenario:
    parts: tuple[AnnulusScenario, ...]
    name: str = "direct-sum"


def mode_shift(blocks: DiracBlocks, shift: int) -> tuple[sp.csr_matrix, np.ndarray]:
    """Partial isometry sending mode m + shift to mode m, and the mask of modes it covers."""
    g = blocks.grid
    n = blocks.dim
    per = 2 * g.n_z * blocks.flavors
    mode = blocks.mode_of_dof()
    target = np.flatnonzero((mode + shift >= -g.n_modes) & (mode + shift <= g.n_modes))
    source = target + shift * per
    mat = sp.csr_matrix((np.ones(target.size, dtype=complex), (target, source)), shape=(n, n))
    mask = np.zeros(n, dtype=bool)
    mask[target] = True
    return mat, mask


def low_mode_sector(blocks: DiracBlocks, fraction: float = 0.5) -> sp.csr_matrix:
    """Projector onto Fourier modes |m| <= fraction * M."""
    mode = blocks.mode_of_dof()
    return sector_projector(np.abs(mode) <= fraction * blocks.grid.n_modes)


def _kappa_derivative(grid: AnnulusGrid, flavors: int) -> sp.csr_matrix:
    """d(bulk)/da: the i*kappa entries of D and their adjoint."""
    b0 = build_dirac_annulus(grid, 0.0, flavors=flavors).bulk
    b1 = build_dirac_annulus(grid, 1.0, flavors=flavors).bulk
    return (b1 - b0).tocsr()


def assemble_path(
    scenario: AnnulusScenario | DirectSumScenario,
    grid: AnnulusGrid,
    nt: int,
    sector_fraction: float | None = 0.5,
) -> OperatorPath:
    """Operator path of a scenario on ``grid`` with ``nt`` initial t-intervals."""
    if isinstance(scenario, DirectSumScenario):
        from .spectralflow import block_diag

        paths = [assemble_path(p, grid, nt, sector_fraction) for p in scenario.parts]
        out = paths[0]
        for p in paths[1:]:
            out = block_diag(out, p)
        check_endpoints(out)
        return out
    r = scenario.flavors
    base = build_dirac_annulus(grid, 0.0, flavors=r)
    dk = _kappa_derivative(grid, r)
    static_inner = getattr(scenario.inner_T, "constant", None)
    static_outer = getattr(scenario.outer_T, "constant", None)

    def at(t: float) -> sp.csr_matrix:
        t0, t1 = scenario.T_on_grid(grid, t)
        if static_inner is not None:
            t0 = static_inner
        if static_outer is not None:
            t1 = static_outer
        blocks = DiracBlocks(grid, r, scenario.flux * t, (base.bulk + (scenario.flux * t) * dk).tocsr())
        return impose_T(blocks, t0, t1).matrix

    gauge, mask = (None, None)
    if scenario.flux:
        gauge, mask = mode_shift(base, scenario.flux)
    sector = low_mode_sector(base, sector_fraction) if sector_fraction is not None else None
    path = OperatorPath(
        at,
        np.linspace(0.0, 1.0, nt + 1),
        gauge,
        mask,
        sector,
        meta={"scenario": scenario.name, "dim": base.dim, "grid": grid},
    )
    try:
        check_endpoints(path)
    except EndpointMismatch as exc:
        raise EndpointMismatch(f"{scenario.name}: {exc}") from exc
    return path


__all__ = [
    "AnnulusScenario",
    "DirectSumScenario",
    "assemble_path",
    "constant_T",
    "low_mode_sector",
    "mode_shift",
    "AnnulusGrid",
    "DiracBlocks",
    "DiscreteOperator",
    "build_dirac_annulus",
    "boundary_T",
    "collocation_matrix",
    "continuum_mode_eigenvalues",
    "impose_T",
    "impose_condition",
    "inner_conormal",
    "mode_block",
    "outer_conormal",
]

