import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st
from scipy.optimize import brentq

from sflab.boundary import condition_from_T, BoundaryAutomorphism
from sflab.discretize import (
    AnnulusGrid,
    assemble_path,
    build_dirac_annulus,
    continuum_mode_eigenvalues,
    impose_T,
    impose_condition,
    inner_conormal,
    mode_block,
    mode_shift,
    outer_conormal,
)
from sflab.errors import NotLagrangian
from sflab.scenarios import ab_flux, rotating_bc
from sflab.spectralflow import spectral_flow

# tau0 = tau1 = 1, kappa = 0.3: lowest continuum pair, and the staggered scheme at N = 64
CONTINUUM_PAIR = 1.59918764
DISCRETE_64 = 1.60758307


def test_continuum_reference():
    vals = continuum_mode_eigenvalues(0.3, 1.0, 1.0, 3.0)
    np.testing.assert_allclose(vals, [-CONTINUUM_PAIR, CONTINUUM_PAIR], atol=1e-8)


def _lowest(n):
    vals = np.linalg.eigvalsh(mode_block(AnnulusGrid(1, n), 0.3, 1.0, 1.0))
    return np.min(np.abs(vals))


def test_first_order_convergence():
    assert _lowest(64) == pytest.approx(DISCRETE_64, abs=1e-8)
    errs = [_lowest(n) - CONTINUUM_PAIR for n in (64, 128, 256)]
    assert all(e > 0 for e in errs)
    for coarse, fine in zip(errs, errs[1:]):
        assert 1.8 < coarse / fine < 2.2


@given(st.floats(0.05, 2.0) | st.floats(-2.0, -0.05), st.integers(8, 64))
def test_edge_mode_is_exact(kappa, n):
    # with tau1 = -tau0 = -1 the continuum problem has lambda = -kappa, and so does the scheme
    vals = np.linalg.eigvalsh(mode_block(AnnulusGrid(1, n), kappa, 1.0, -1.0))
    assert np.min(np.abs(vals + kappa)) < 1e-11
    assert np.min(np.abs(continuum_mode_eigenvalues(kappa, 1.0, -1.0, 2.5) + kappa)) < 1e-9


@pytest.mark.parametrize("a", [0.0, 0.3])
def test_fourier_modes_decouple(a):
    grid = AnnulusGrid(3, 8)
    op = impose_T(build_dirac_annulus(grid, a), np.eye(1), -2.0 * np.eye(1))
    full = np.linalg.eigvalsh(op.matrix.toarray())
    parts = np.concatenate([np.linalg.eigvalsh(mode_block(grid, m + a, 1.0, -2.0)) for m in grid.modes])
    np.testing.assert_allclose(full, np.sort(parts), atol=1e-10)


def test_gauge_relabels_modes():
    grid = AnnulusGrid(4, 8)
    a0 = impose_T(build_dirac_annulus(grid, 0.0), np.eye(1), np.eye(1))
    a1 = impose_T(build_dirac_annulus(grid, 1.0), np.eye(1), np.eye(1)).matrix
    g, mask = mode_shift(a0.blocks, 1)
    moved = (g @ a0.matrix @ g.conj().T).toarray()
    idx = np.flatnonzero(mask)
    np.testing.assert_allclose(a1.toarray()[np.ix_(idx, idx)], moved[np.ix_(idx, idx)], atol=1e-12)


def test_operator_is_hermitian():
    grid = AnnulusGrid(4, 10)
    rng = np.random.default_rng(0)
    t = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    t = t + t.conj().T + 4 * np.eye(2)
    op = impose_T(build_dirac_annulus(grid, 0.4, flavors=2), t, -t).matrix
    assert abs(op - op.conj().T).max() < 1e-12
    assert sp.issparse(op)


def test_non_selfadjoint_T_is_rejected():
    grid = AnnulusGrid(2, 8)
    with pytest.raises(NotLagrangian):
        impose_T(build_dirac_annulus(grid, 0.0), np.array([[1j]]), np.eye(1))


def test_condition_and_automorphism_agree():
    grid = AnnulusGrid(2, 8)
    blocks = build_dirac_annulus(grid, 0.2)
    t0, t1 = np.array([[0.7]]), np.array([[-1.5]])
    l0 = condition_from_T(inner_conormal(1), BoundaryAutomorphism(t0, inner_conormal(1).e_minus))
    l1 = condition_from_T(outer_conormal(1), BoundaryAutomorphism(t1, outer_conormal(1).e_minus))
    a = impose_T(blocks, t0, t1).matrix
    b = impose_condition(blocks, l0, l1).matrix
    assert abs(a - b).max() < 1e-10


def test_flux_crossing_tracks_discrete_root():
    grid = AnnulusGrid(8, 32)
    res = spectral_flow(assemble_path(ab_flux(1), grid, 16), window=1.0)
    assert res.value == -1 and len(res.crossings) == 1
    # zero of the m = 0 block as kappa = t sweeps through it
    root = brentq(lambda k: np.linalg.det(mode_block(grid, k, 1.0, -2.0)).real, 0.2, 0.5)
    c = res.crossings[0]
    assert c.t_left - 1e-9 <= root <= c.t_right + 1e-9
    # continuum root is atanh(1/3); the scheme is first order
    assert abs(root - np.arctanh(1 / 3)) < grid.h


def test_truncation_branch_has_no_weight():
    # a closed loop on a truncated mode set always has net crossings zero; the
    # compensating one sits at the highest mode and carries no low-mode weight
    res = spectral_flow(assemble_path(rotating_bc(1), AnnulusGrid(8, 32), 16), window=1.0)
    assert res.value == 1
    assert len(res.crossings) == 1 and abs(res.crossings[0].t_left - 0.25) < 0.01
    assert len(res.spurious) == 1 and abs(res.spurious[0].weight) < 1e-6


@pytest.mark.parametrize("taus,window", [((1.0, 1.0), 1.0), ((-1.0, -1.0), 1.0), ((1.0, -2.0), 1.0), ((1.0, -1.0), 0.9)])
@pytest.mark.parametrize("n", [64, 128])
def test_no_doubled_branch(taus, window, n):
    # per-mode eigenvalue count in the window equals the continuum count
    grid = AnnulusGrid(1, n)
    for m in range(-6, 7):
        want = continuum_mode_eigenvalues(m, *taus, window).size
        got = np.sum(np.abs(np.linalg.eigvalsh(mode_block(grid, m, *taus))) <= window)
        assert got == want, m


def test_graph_gap_shrinks_with_nt():
    from sflab.linalg import gap_distance, graph_frame

    path = assemble_path(rotating_bc(1), AnnulusGrid(2, 8), 8, sector_fraction=None)

    def worst(nt):
        ts = np.linspace(0, 1, nt + 1)
        frames = [graph_frame(path.operator_at(t).toarray()) for t in ts]
        return max(gap_distance(a, b) for a, b in zip(frames, frames[1:]))

    g8, g16, g32 = worst(8), worst(16), worst(32)
    assert g32 < g16 < g8


@pytest.mark.slow
def test_mode_truncation_stability():
    for scn, want in ((rotating_bc(1), 1), (ab_flux(1), -1)):
        values = [spectral_flow(assemble_path(scn, AnnulusGrid(m, 32), 32), window=1.0).value for m in (16, 32)]
        assert values == [want, want]
