import numpy as np
import pytest
from hypothesis import given, strategies as st

from sflab import linalg as la
from sflab import topology as tp
from sflab.errors import GridMismatch, NotConverged, ResolutionTooCoarse, SeamMismatch
from sflab.suite import berry_curvature_chern

# curvature quadrature oracle on a 256^2 grid, frozen
QWZ_ORACLE = {-3.0: 0, -1.5: -1, -1.0: -1, -0.5: -1, 0.5: 1, 1.0: 1, 1.5: 1, 3.0: 0}


@pytest.mark.parametrize("mass", sorted(QWZ_ORACLE))
def test_qwz_matches_curvature_oracle(mass):
    assert tp.chern_number(tp.qwz_family(32, mass)).rounded == QWZ_ORACLE[mass]


def test_curvature_oracle_is_converged():
    for mass, want in QWZ_ORACLE.items():
        assert berry_curvature_chern(mass, 256) == pytest.approx(want, abs=1e-6)


@given(st.integers(-3, 3), st.sampled_from([24, 32, 40]))
def test_realize_chern(n, grid):
    assert tp.chern_of_rotating(tp.realize_chern(n), grid, grid).rounded == n


def test_under_resolved_family_is_rejected():
    with pytest.raises(ResolutionTooCoarse):
        tp.chern_of_rotating(tp.realize_chern(3), 16, 16)


@given(st.integers(0, 2**32 - 1))
def test_frame_gauge_invariance(seed):
    rng = np.random.default_rng(seed)
    fam = tp.qwz_family(16, 1.0)
    phases = np.exp(1j * rng.uniform(0, 2 * np.pi, size=fam.frames.shape[:2]))
    moved = tp.TorusFamily(fam.frames * phases[..., None, None], fam.clutch)
    assert tp.chern_number(moved).rounded == 1


def test_reverse_x_flips_sign():
    fam = tp.qwz_family(16, -1.0)
    assert tp.chern_number(tp.reverse_x(fam)).rounded == 1


def test_flux_density_sums_to_chern():
    res = tp.chern_number(tp.qwz_family(24, 1.0))
    assert res.flux.shape == (24, 24)
    assert res.flux.sum() / (2 * np.pi) == pytest.approx(1.0, abs=1e-12)
    assert np.abs(res.flux).max() < np.pi


def test_extendable_windings():
    assert tp.psi_invariant(tp.realize_extendable([2])) == 2
    assert tp.psi_invariant(tp.realize_extendable([1, -1])) == 0
    assert tp.psi_invariant(tp.realize_extendable([3, -1], rank=2)) == 2 * 2


def test_direct_sum_and_neutral_element():
    a = tp.realize_extendable([1, 2])
    b = tp.realize_extendable([-3, 1])
    assert tp.psi_invariant(tp.direct_sum(a, b)) == 3 - 2
    z = tp.trivial_scenario(32, 8, components=2)
    assert tp.psi_invariant(tp.direct_sum(a, z)) == tp.psi_invariant(a)
    assert tp.psi_invariant(z) == 0


def test_grid_mismatch():
    with pytest.raises(GridMismatch):
        tp.direct_sum(tp.realize_extendable([1], nx=32), tp.realize_extendable([1], nx=16))
    with pytest.raises(GridMismatch):
        tp.direct_sum(tp.realize_extendable([1]), tp.realize_extendable([1, 1]))


def test_seam_mismatch():
    e1 = la.span(np.array([[1.0], [0.0]]))
    e2 = la.span(np.array([[0.0], [1.0]]))
    loops = [[e1] * 8, [e1] * 8, [e2] * 8]
    with pytest.raises(SeamMismatch):
        tp.glue_family(loops, np.eye(2))
    # a swap clutch makes the same data consistent at the seam
    swap = np.array([[0, 1], [1, 0]], dtype=complex)
    fam = tp.glue_family(loops, swap, check_adjacent=False)
    assert fam.nt == 2


def test_vanishing_link_is_not_converged():
    frames = np.zeros((4, 4, 2, 1), dtype=complex)
    frames[::2, :, 0, 0] = 1.0
    frames[1::2, :, 1, 0] = 1.0
    fam = tp.TorusFamily(frames, np.broadcast_to(np.eye(2), (4, 2, 2)).copy())
    with pytest.raises(NotConverged):
        tp.chern_number(fam)


def test_psi_reports_component():
    frames = np.zeros((4, 4, 2, 1), dtype=complex)
    frames[::2, :, 0, 0] = 1.0
    frames[1::2, :, 1, 0] = 1.0
    bad = tp.TorusFamily(frames, np.broadcast_to(np.eye(2), (4, 2, 2)).copy())
    good = tp.qwz_family(4, 1.0)
    with pytest.raises(NotConverged) as info:
        tp.psi_invariant(tp.Scenario((good, bad)))
    assert info.value.component == 1


def test_flux_csv(tmp_path):
    res = tp.chern_number(tp.qwz_family(6, 1.0))
    tp.write_flux_csv(tmp_path / "f.csv", res)
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "x,t,flux" and len(lines) == 37
