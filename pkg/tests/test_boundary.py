import numpy as np
import pytest
from hypothesis import given, strategies as st

from sflab import boundary as bd
from sflab import linalg as la
from sflab.errors import NearSingularT, NotHermitian, NotTransversal, ResolutionTooCoarse, SingularT
from sflab.suite import random_elliptic, random_hermitian
from sflab.topology import dirac_conormal

seeds = st.integers(0, 2**32 - 1)


@pytest.fixture
def dirac():
    return dirac_conormal(1)


def _vec(*entries):
    return la.span(np.array(entries, dtype=complex).reshape(-1, 1))


def test_dirac_conditions(dirac):
    # E+ = e1, E- = e2, sigma(n) = sigma_x
    plus = bd.condition_from_T(dirac, bd.BoundaryAutomorphism(np.eye(1), dirac.e_minus))
    minus = bd.condition_from_T(dirac, bd.BoundaryAutomorphism(-np.eye(1), dirac.e_minus))
    assert la.gap_distance(plus.l_frame, _vec(-1j, 1)) < 1e-14
    assert la.gap_distance(minus.l_frame, _vec(1j, 1)) < 1e-14
    assert bd.is_lagrangian(dirac, plus) and bd.is_lagrangian(dirac, minus)


def test_boundary_projector_is_idempotent(dirac):
    t = bd.BoundaryAutomorphism(np.array([[2.0 + 1j]]), dirac.e_minus)
    p = bd.boundary_projector(dirac, t)
    np.testing.assert_allclose(p @ p, p, atol=1e-13)


def test_errors(dirac):
    with pytest.raises(SingularT):
        bd.condition_from_T(dirac, bd.BoundaryAutomorphism(np.zeros((1, 1)), dirac.e_minus))
    with pytest.raises(NotTransversal):
        bd.T_from_condition(dirac, bd.BoundaryCondition(dirac.e_plus))
    with pytest.raises(NotTransversal):
        bd.T_from_condition(dirac, bd.BoundaryCondition(dirac.e_minus))
    with pytest.raises(NotHermitian):
        bd.negative_subspace_F(bd.BoundaryAutomorphism(np.array([[1j]]), dirac.e_minus))
    c2 = dirac_conormal(2)
    with pytest.raises(NearSingularT):
        bd.negative_subspace_F(bd.BoundaryAutomorphism(np.diag([1.0, 1e-12]), c2.e_minus))


def test_loop_resolution(dirac):
    c = dirac_conormal(2)

    def t_at(x):
        return np.array([[np.cos(x), np.sin(x)], [np.sin(x), -np.cos(x)]])

    fine = bd.BoundaryLoop.from_samples(c, [bd.BoundaryAutomorphism(t_at(x), c.e_minus) for x in np.linspace(0, 2 * np.pi, 32, endpoint=False)])
    assert len(bd.loop_F(fine)) == 32
    coarse = bd.BoundaryLoop.from_samples(c, [bd.BoundaryAutomorphism(t_at(x), c.e_minus) for x in np.linspace(0, 2 * np.pi, 3, endpoint=False)])
    with pytest.raises(ResolutionTooCoarse):
        bd.loop_F(coarse)


@given(seeds, st.integers(1, 4), st.booleans())
def test_T_L_roundtrip(seed, k, hermitian):
    rng = np.random.default_rng(seed)
    c = bd.ConormalData.from_symbol(random_elliptic(rng, k))
    if hermitian:
        t = random_hermitian(rng, k) + 0.1 * np.eye(k)
    else:
        t = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k)) + np.eye(k)
    cond = bd.condition_from_T(c, bd.BoundaryAutomorphism(t, c.e_minus))
    back = bd.T_from_condition(c, cond)
    assert np.abs(back.t_matrix - t).max() < 1e-8 * (1 + la.opnorm(t))
    assert bd.is_lagrangian(c, cond) == (la.opnorm(t - t.conj().T) <= 1e-9 * la.opnorm(t))


@given(seeds, st.integers(1, 4))
def test_F_is_negative_eigenspace(seed, k):
    rng = np.random.default_rng(seed)
    c = dirac_conormal(k)
    t = random_hermitian(rng, k) + 0.05 * np.eye(k)
    f = bd.negative_subspace_F(bd.BoundaryAutomorphism(t, c.e_minus))
    assert f.rank == int(np.sum(np.linalg.eigvalsh(t) < 0))
    amb = bd.BoundaryAutomorphism(t, c.e_minus).ambient()
    if f.rank:
        rq = f.basis.conj().T @ amb @ f.basis
        assert np.all(np.linalg.eigvalsh(rq) < 0)


def test_reframe_preserves_condition(rng):
    c = bd.ConormalData.from_symbol(random_elliptic(rng, 2))
    t = bd.BoundaryAutomorphism(random_hermitian(rng, 2) + np.eye(2), c.e_minus)
    q, _ = np.linalg.qr(rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
    other = la.Frame(c.e_minus.basis @ q)
    l1 = bd.condition_from_T(c, t).l_frame
    l2 = bd.condition_from_T(bd.ConormalData.from_splitting(c.sigma_n, c.e_plus, other), t.reframe(other)).l_frame
    assert la.gap_distance(l1, l2) < 1e-10
