import numpy as np
import pytest
from hypothesis import given, strategies as st

from sflab import linalg as la
from sflab.errors import NotComplementary
from sflab.suite import random_frame, random_idempotent

seeds = st.integers(0, 2**32 - 1)


def test_frame_rejects_non_orthonormal():
    with pytest.raises(ValueError):
        la.Frame(np.array([[1.0], [1.0]], dtype=complex))


def test_span_and_complement():
    f = la.span(np.array([[1.0], [1.0]]))
    assert f.rank == 1
    np.testing.assert_allclose(f.projector(), 0.5 * np.ones((2, 2)), atol=1e-14)
    c = f.complement()
    assert c.rank == 1
    assert abs(np.vdot(f.basis[:, 0], c.basis[:, 0])) < 1e-14


def test_oblique_projector_2d():
    # image e1, kernel span(1, 1): P = [[1, -1], [0, 0]]
    l = la.span(np.array([[1.0], [0.0]]))
    m = la.span(np.array([[1.0], [1.0]]))
    np.testing.assert_allclose(la.oblique_projector(l, m), [[1, -1], [0, 0]], atol=1e-14)


def test_gap_distance_known_angle():
    a = la.span(np.array([[1.0], [0.0]]))
    th = 1e-7
    b = la.span(np.array([[np.cos(th)], [np.sin(th)]]))
    assert la.gap_distance(a, b) == pytest.approx(np.sin(th), rel=1e-8)
    assert la.gap_distance(a, la.zero_frame(2)) == 1.0


def test_not_complementary_on_shared_direction():
    p = la.orth_projector(la.span(np.array([[1.0], [0.0], [0.0]])))
    q = la.orth_projector(la.span(np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])))
    with pytest.raises(NotComplementary):
        la.complementary_pair_projectors(p, q)


@given(seeds, st.integers(2, 9))
def test_oblique_projector_identities(seed, n):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, n))
    l, m = random_frame(rng, n, k), random_frame(rng, n, n - k)
    p = la.oblique_projector(l, m)
    assert np.abs(p @ p - p).max() < 1e-9 * (1 + la.opnorm(p) ** 2)
    assert np.abs(p @ l.basis - l.basis).max() < 1e-9 * la.opnorm(p)
    assert np.abs(p @ m.basis).max() < 1e-9 * la.opnorm(p)


@given(seeds, st.integers(2, 9))
def test_orthogonalized_idempotent_keeps_image(seed, n):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, n))
    p = random_idempotent(rng, n, k)
    port = la.orthogonalize_idempotent(p)
    assert la.is_hermitian(port, 1e-9)
    assert la.is_idempotent(port)
    assert la.gap_distance(la.span(port, rank=k), la.span(p, rank=k)) < 1e-8


@given(seeds, st.integers(2, 9))
def test_complementary_pair(seed, n):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, n))
    p = random_idempotent(rng, n, k)
    q = random_idempotent(rng, n, n - k)
    s, t = la.complementary_pair_projectors(p, q)
    d = p - q
    scale = 1 + la.opnorm(np.linalg.inv(d))
    assert np.abs((s - t) @ d - np.eye(n)).max() < 1e-9 * scale
    assert la.is_idempotent(s) and la.is_idempotent(t)


@given(seeds, st.integers(2, 8))
def test_graph_projector_is_orthogonal_projector(seed, n):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    p = la.graph_projector(a)
    assert la.is_hermitian(p, 1e-10) and la.is_idempotent(p)
    assert np.trace(p).real == pytest.approx(n)
