import numpy as np
import pytest
from hypothesis import given, strategies as st

from sflab import linalg as la
from sflab import symbol as sy
from sflab.errors import EndpointMismatch, InvalidTheta, NotElliptic, NotHermitian, Singular
from sflab.suite import random_elliptic, random_unitary

seeds = st.integers(0, 2**32 - 1)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)


def test_pauli_pair_split():
    # Q = sx sy = i sz, so E+ = e1 and E- = e2
    split = sy.chiral_split(sy.check_ellipticity(SX, SY))
    assert la.gap_distance(split.e_plus, la.span(np.array([[1.0], [0.0]]))) < 1e-14
    assert la.gap_distance(split.e_minus, la.span(np.array([[0.0], [1.0]]))) < 1e-14
    assert sy.is_dirac(sy.EllipticSymbol(SX, SY))


def test_ellipticity_errors():
    with pytest.raises(NotElliptic):
        sy.check_ellipticity(SX, SX)
    with pytest.raises(Singular):
        sy.check_ellipticity(np.diag([1.0, 0.0]), SY)
    with pytest.raises(NotHermitian):
        sy.check_ellipticity(SX, np.array([[0, 1], [0, 0]], dtype=complex))
    # sigma2 = sigma1 gives Q = 1, a real eigenvalue
    with pytest.raises(NotElliptic):
        sy.check_ellipticity(np.eye(2), np.eye(2))


def test_invalid_theta():
    th = sy.theta_coords(sy.check_ellipticity(SX, SY))
    bad = sy.ThetaCoordinates(th.e_minus, th.e_plus, th.j, -th.q_minus)
    with pytest.raises(InvalidTheta):
        sy.theta_inverse(bad)


@given(seeds, st.integers(1, 4))
def test_split_properties(seed, k):
    rng = np.random.default_rng(seed)
    s = random_elliptic(rng, k)
    split = sy.chiral_split(s)
    assert split.e_plus.rank == split.e_minus.rank == k
    for frame, sign in ((split.e_plus, 1), (split.e_minus, -1)):
        b = frame.basis
        assert np.all(sign * np.linalg.eigvals(b.conj().T @ split.q @ b).imag > 0)
        c1, c2 = rng.normal(size=2)
        assert np.abs(b.conj().T @ s.at(c1, c2) @ b).max() < 1e-9 * la.opnorm(s.at(c1, c2))


@given(seeds, st.integers(1, 4))
def test_theta_roundtrip(seed, k):
    s = random_elliptic(np.random.default_rng(seed), k)
    back = sy.theta_inverse(sy.theta_coords(s))
    np.testing.assert_allclose(back.sigma1, s.sigma1, atol=1e-9)
    np.testing.assert_allclose(back.sigma2, s.sigma2, atol=1e-9)


@given(seeds, st.integers(1, 3), st.floats(0, 1))
def test_retraction_equivariance_and_endpoints(seed, k, t):
    rng = np.random.default_rng(seed)
    s = random_elliptic(rng, k)
    g = random_unitary(rng, 2 * k)
    a = sy.retract_symbol(s.conjugate(g), t)
    b = sy.retract_symbol(s, t).conjugate(g)
    np.testing.assert_allclose(a.sigma1, b.sigma1, atol=1e-8)
    np.testing.assert_allclose(a.sigma2, b.sigma2, atol=1e-8)
    assert sy.is_dirac(sy.retract_symbol(s, 1.0))
    r0 = sy.retract_symbol(s, 0.0)
    np.testing.assert_allclose(r0.sigma1, s.sigma1, atol=1e-9)
    # E- does not move along the retraction
    assert la.gap_distance(sy.chiral_split(a).e_minus, sy.chiral_split(s.conjugate(g)).e_minus) < 1e-8


def test_retract_path_keeps_endpoint_relation(rng):
    s = random_elliptic(rng, 2)
    g = random_unitary(rng, 4)
    ts = np.linspace(0, 1, 7)
    # a path from s to g s g^-1 through a rotation of the frame
    h = sy.EllipticSymbol
    path = []
    for t in ts:
        c, sn = np.cos(0.3 * np.sin(np.pi * t)), np.sin(0.3 * np.sin(np.pi * t))
        base = h(c * s.sigma1 + sn * s.sigma2, -sn * s.sigma1 + c * s.sigma2)
        path.append(base if t < 1 else s.conjugate(g))
    out = sy.retract_path(path, g, 1.0, ts)
    end = out[-1]
    want = out[0].conjugate(g)
    np.testing.assert_allclose(end.sigma1, want.sigma1, atol=1e-9)
    np.testing.assert_allclose(end.sigma2, want.sigma2, atol=1e-9)
    assert all(sy.is_dirac(x) for x in out)


def test_retract_path_endpoint_mismatch(rng):
    s = random_elliptic(rng, 1)
    g = random_unitary(rng, 2)
    with pytest.raises(EndpointMismatch):
        sy.retract_path([s, s, s], g, 0.5)


def test_partition_of_unity():
    assert sy.partition_of_unity(0.0) == (1.0, 0.0)
    assert sy.partition_of_unity(1.0) == (0.0, 1.0)
    r0, r1 = sy.partition_of_unity(0.5)
    assert r0 + r1 == pytest.approx(1.0)
