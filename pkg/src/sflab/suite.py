"""Acceptance battery: one function per criterion, each returning a Criterion.

Random instances are drawn from ``numpy.random.default_rng(seed)``. Oracles
are computed by routes independent of the code under test wherever that is
possible (closed-form linear solves, Berry curvature quadrature, eigenvalue
counts at path endpoints).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla

from . import boundary as bd
from . import linalg as la
from . import symbol as sy
from . import topology as tp
from .discretize import AnnulusGrid, assemble_path, build_dirac_annulus, impose_T
from .errors import NotComplementary
from .scenarios import ab_flux, rotating_bc, torus_scenario
from .spectralflow import OperatorPath, block_diag, concatenate, conjugate, spectral_flow


@dataclass
class Criterion:
    number: int
    title: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] criterion {self.number}: {self.title} ({self.seconds:.1f}s)"


# --- random generators ------------------------------------------------------


def random_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_hermitian(rng: np.random.Generator, n: int, scale: float = 1.0) -> np.ndarray:
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * 0.5 * (a + a.conj().T)


def random_frame(rng: np.random.Generator, n: int, k: int) -> la.Frame:
    return la.span(rng.normal(size=(n, k)) + 1j * rng.normal(size=(n, k)), rank=k)


def random_idempotent(rng: np.random.Generator, n: int, k: int) -> np.ndarray:
    """Oblique projector with random image and kernel, via a similarity."""
    x = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    d = np.diag([1.0] * k + [0.0] * (n - k))
    return x @ d @ np.linalg.inv(x)


def random_elliptic(rng: np.random.Generator, k: int, perturb: float = 0.1) -> sy.EllipticSymbol:
    """Congruence X^* (Pauli pair (x) 1_k) X plus a small Hermitian perturbation.

    Congruence preserves ellipticity, so the result is elliptic unless the
    perturbation is large; such draws are rejected.
    """
    sx = np.kron(np.array([[0, 1], [1, 0]], dtype=complex), np.eye(k))
    syy = np.kron(np.array([[0, -1j], [1j, 0]], dtype=complex), np.eye(k))
    n = 2 * k
    while True:
        x = np.eye(n) + 0.5 * (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
        s1 = x.conj().T @ sx @ x + random_hermitian(rng, n, perturb)
        s2 = x.conj().T @ syy @ x + random_hermitian(rng, n, perturb)
        try:
            return sy.check_ellipticity(s1, s2)
        except Exception:
            continue


# --- criterion 4: appendix identities ----------------------------------------


def criterion_appendix(seed: int = 0, instances: int = 200) -> Criterion:
    rng = np.random.default_rng(seed)
    worst = 0.0
    raise_ok = 0
    for i in range(instances):
        n = int(rng.integers(2, 13))
        k = int(rng.integers(1, n))
        l, m = random_frame(rng, n, k), random_frame(rng, n, n - k)
        plm = la.oblique_projector(l, m)
        pml = la.oblique_projector(m, l)
        # independent oracle: P = [L 0][L M]^{-1}
        basis = np.hstack([l.basis, m.basis])
        oracle = np.hstack([l.basis, np.zeros_like(m.basis)]) @ np.linalg.inv(basis)
        worst = max(worst, np.abs(plm - oracle).max(), np.abs(plm + pml - np.eye(n)).max())

        p = random_idempotent(rng, n, k)
        port = la.orthogonalize_idempotent(p)
        img = la.span(p, rank=k)
        worst = max(
            worst,
            np.abs(port - port.conj().T).max(),
            np.abs(port @ port - port).max(),
            la.gap_distance(la.span(port, rank=k), img),
        )

        # PQST on a complementary pair; every third draw forces a shared direction
        q = random_idempotent(rng, n, n - k)
        if i % 3 == 2:
            v = rng.normal(size=(n, 1)) + 1j * rng.normal(size=(n, 1))
            lp = la.span(np.hstack([v, rng.normal(size=(n, k - 1))]), rank=k)
            lq = la.span(np.hstack([v, rng.normal(size=(n, n - k - 1))]), rank=n - k) if n - k > 1 else la.span(v, rank=1)
            p = la.orth_projector(lp)
            q = la.orth_projector(lq)
        s = np.linalg.svd(p - q, compute_uv=False)
        singular = s[-1] <= la.INVERTIBLE_RTOL * s[0]
        try:
            sm, tm = la.complementary_pair_projectors(p, q)
            raised = False
        except NotComplementary:
            raised = True
        raise_ok += raised == singular
        if not raised:
            d = p - q
            scale = 1.0 + la.opnorm(np.linalg.inv(d))
            e = max(
                np.abs(d @ (sm - tm) - np.eye(n)).max(),
                np.abs((sm - tm) @ d - np.eye(n)).max(),
                np.abs(p + q - (2 * sm - np.eye(n)) @ d).max(),
            )
            worst = max(worst, e / scale)
    passed = worst < 1e-9 and raise_ok == instances
    return Criterion(4, "projector identities on random instances", passed,
                     {"max_error": worst, "raise_agreement": f"{raise_ok}/{instances}"})


# --- criterion 5: symbol suite ----------------------------------------------


def criterion_symbols(seed: int = 1, instances: int = 500) -> Criterion:
    rng = np.random.default_rng(seed)
    worst = {"orth": 0.0, "theta": 0.0, "equiv": 0.0, "invariance": 0.0}
    bad = {"halfplane": 0, "rank": 0, "dirac": 0}
    for _ in range(instances):
        k = int(rng.integers(1, 5))
        s = random_elliptic(rng, k)
        split = sy.chiral_split(s)
        q = split.q
        if split.e_plus.rank != split.e_minus.rank or split.e_plus.rank != k:
            bad["rank"] += 1
        for frame, sign in ((split.e_plus, 1), (split.e_minus, -1)):
            b = frame.basis
            ev = np.linalg.eigvals(b.conj().T @ q @ b)
            if np.any(sign * ev.imag <= 0):
                bad["halfplane"] += 1
            # sigma(xi) E is orthogonal to E
            for _ in range(2):
                c1, c2 = rng.normal(size=2)
                worst["orth"] = max(worst["orth"], np.abs(b.conj().T @ s.at(c1, c2) @ b).max() / la.opnorm(s.at(c1, c2)))
        s2 = sy.theta_inverse(sy.theta_coords(s))
        worst["theta"] = max(worst["theta"], np.abs(s2.sigma1 - s.sigma1).max(), np.abs(s2.sigma2 - s.sigma2).max())
        if not sy.is_dirac(sy.retract_symbol(s, 1.0)):
            bad["dirac"] += 1
        g = random_unitary(rng, 2 * k)
        tt = float(rng.uniform(0, 1))
        a = sy.retract_symbol(s.conjugate(g), tt)
        b = sy.retract_symbol(s, tt).conjugate(g)
        worst["equiv"] = max(worst["equiv"], np.abs(a.sigma1 - b.sigma1).max(), np.abs(a.sigma2 - b.sigma2).max())
        # frame change (e1, e2 + t e1) leaves E+- unchanged
        t = float(rng.normal())
        moved = sy.chiral_split(sy.check_ellipticity(s.sigma1, s.sigma2 + t * s.sigma1))
        worst["invariance"] = max(
            worst["invariance"],
            la.gap_distance(moved.e_plus, split.e_plus),
            la.gap_distance(moved.e_minus, split.e_minus),
        )
    passed = all(v < 1e-9 for v in worst.values()) and not any(bad.values())
    return Criterion(5, "symbol splitting, Theta round-trip, retraction", passed, {**worst, **bad})


# --- criterion 6: boundary suite --------------------------------------------


def _random_conormal(rng: np.random.Generator, k: int) -> bd.ConormalData:
    return bd.ConormalData.from_symbol(random_elliptic(rng, k))


def criterion_boundary(seed: int = 2, instances: int = 500) -> Criterion:
    rng = np.random.default_rng(seed)
    worst_rt = 0.0
    agree = 0
    worst_ort = 0.0
    for i in range(instances):
        k = int(rng.integers(1, 5))
        c = _random_conormal(rng, k)
        hermitian = i % 2 == 0
        if hermitian:
            t = random_hermitian(rng, k) + 0.1 * np.eye(k)
        else:
            t = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k))
        if not la.is_invertible(t):
            t = t + np.eye(k)
        aut = bd.BoundaryAutomorphism(t, c.e_minus)
        cond = bd.condition_from_T(c, aut)
        back = bd.condition_from_T(c, bd.T_from_condition(c, cond))
        worst_rt = max(worst_rt, la.gap_distance(back.l_frame, cond.l_frame))
        is_herm = la.opnorm(t - t.conj().T) <= 1e-9 * la.opnorm(t)
        agree += bd.is_lagrangian(c, cond) == is_herm

        # orthogonal case: unitary conjugate of the Dirac data
        u = random_unitary(rng, 2 * k)
        base = tp.dirac_conormal(k)
        co = bd.ConormalData.from_splitting(u @ base.sigma_n @ u.conj().T, base.e_plus.transform(u), base.e_minus.transform(u))
        th = random_hermitian(rng, k) + 0.1 * np.eye(k)
        lt = bd.condition_from_T(co, bd.BoundaryAutomorphism(th, co.e_minus))
        em = co.e_minus.basis
        # i sigma(n) u+ = T u- with u- = em v, so u+ = (i sigma(n))^{-1} em T v
        direct = la.span(em + np.linalg.solve(1j * co.sigma_n, em @ th), rank=k)
        worst_ort = max(worst_ort, la.gap_distance(direct, lt.l_frame))
    passed = worst_rt < 1e-8 and agree == instances and worst_ort < 1e-9
    return Criterion(6, "L <-> T correspondence", passed,
                     {"roundtrip_gap": worst_rt, "lagrangian_agreement": f"{agree}/{instances}", "orthogonal_gap": worst_ort})


# --- criterion 7: Chern engine ------------------------------------------------


def berry_curvature_chern(mass: float, n: int = 256) -> float:
    """Chern number of the QWZ lower band by midpoint quadrature of the
    analytic two-band curvature -(1/2) d.(d1 d x d2 d)/|d|^3."""
    ks = 2 * np.pi * (np.arange(n) + 0.5) / n
    k1, k2 = np.meshgrid(ks, ks, indexing="ij")
    d = np.stack([np.sin(k1), np.sin(k2), mass - np.cos(k1) - np.cos(k2)])
    d1 = np.stack([np.cos(k1), np.zeros_like(k1), np.sin(k1)])
    d2 = np.stack([np.zeros_like(k2), np.cos(k2), np.sin(k2)])
    triple = np.einsum("i...,i...->...", d, np.cross(d1, d2, axis=0))
    curv = -0.5 * triple / np.linalg.norm(d, axis=0) ** 3
    return float(curv.sum() * (2 * np.pi / n) ** 2 / (2 * np.pi))


def criterion_chern(grids=(24, 48, 96), masses=(-3.0, -1.0, 1.0, 3.0)) -> Criterion:
    table = {}
    ok = True
    for n in range(-3, 4):
        fam = tp.realize_chern(n)
        vals = [tp.chern_of_rotating(fam, g, g).rounded for g in grids]
        table[f"realize_chern({n})"] = vals
        ok &= all(v == n for v in vals)
    qwz = {}
    for m in masses:
        plaq = tp.chern_number(tp.qwz_family(64, m)).rounded
        oracle = berry_curvature_chern(m, 256)
        qwz[m] = (plaq, round(oracle, 6))
        ok &= plaq == int(round(oracle)) and abs(oracle - round(oracle)) < 0.05
    return Criterion(7, "plaquette Chern engine", bool(ok), {"grids": table, "qwz": qwz})


# --- criterion 8: Psi properties --------------------------------------------


def _perturbed(fam: tp.RotatingFamily, rng: np.random.Generator, size: float) -> Callable:
    """T + size * (smooth Hermitian field of sup norm <= 1), periodic in x and t."""
    k = fam.k
    coeffs = [(int(p), int(q), random_hermitian(rng, k) + 1j * random_hermitian(rng, k))
              for p in range(-1, 2) for q in range(-1, 2)]
    norm = sum(la.opnorm(c) for _, _, c in coeffs)

    def field_(xs, t):
        out = fam.t_matrices(xs, t)
        for p, q, c in coeffs:
            ph = np.exp(1j * (p * np.asarray(xs) + 2 * np.pi * q * t))
            pert = 0.5 * (ph[:, None, None] * c + np.conj(ph)[:, None, None] * c.conj().T)
            out = out + size * pert / norm
        return out

    return field_


def criterion_psi(seed: int = 3, nx: int = 48, nt: int = 48) -> Criterion:
    rng = np.random.default_rng(seed)
    detail = {}
    c = tp.dirac_conormal(2)

    def scen(n):
        fam = tp.realize_chern(n, 4, 0.1)
        return tp.Scenario((tp.family_from_T_loops(tp.sample_T_loops(fam.t_matrices, c, nx, nt)),))

    additive = True
    for a, b in ((1, 1), (2, -1), (-3, 1), (0, 2)):
        sa, sb = scen(a), scen(b)
        additive &= tp.psi_invariant(tp.direct_sum(sa, sb)) == tp.psi_invariant(sa) + tp.psi_invariant(sb) == a + b
    detail["additivity"] = bool(additive)
    detail["constant_loops"] = tp.psi_invariant(scen(0))
    ext = [tp.psi_invariant(tp.realize_extendable(w)) for w in ([1, -1], [2, -2], [3, -1, -2])]
    detail["extendable_zero_total"] = ext
    stable = []
    for n in (-2, 1, 3):
        fam = tp.realize_chern(n, 4, 0.1)
        loops = tp.sample_T_loops(_perturbed(fam, rng, 0.05), c, nx, nt)
        stable.append(tp.chern_number(tp.family_from_T_loops(loops)).rounded == n)
    detail["perturbation_stable"] = stable
    passed = additive and detail["constant_loops"] == 0 and ext == [0, 0, 0] and all(stable)
    return Criterion(8, "Psi additivity, vanishing cases, stability", bool(passed), detail)


# --- criterion 9: spectral flow properties ----------------------------------


def random_open_path(rng: np.random.Generator, n: int) -> OperatorPath:
    a0, a1, b = (random_hermitian(rng, n) for _ in range(3))

    def at(t):
        return (1 - t) * a0 + t * a1 + np.sin(np.pi * t) * b

    return OperatorPath(at, np.linspace(0, 1, 9))


def neg_count_change(path: OperatorPath) -> int:
    """Oracle for paths with invertible ends: negative count at 0 minus at 1."""
    e0 = np.linalg.eigvalsh(path.operator_at(0.0))
    e1 = np.linalg.eigvalsh(path.operator_at(1.0))
    return int(np.sum(e0 < 0) - np.sum(e1 < 0))


def criterion_sf_properties(seed: int = 4, instances: int = 100) -> Criterion:
    rng = np.random.default_rng(seed)
    counts = {"invertible": 0, "direct_sum": 0, "oracle": 0, "concat": 0, "conjugate": 0}
    for _ in range(instances):
        n1 = int(rng.integers(1, 21))
        n2 = int(rng.integers(1, 41 - n1))
        p1, p2 = random_open_path(rng, n1), random_open_path(rng, n2)
        s1 = spectral_flow(p1, check=False).value
        s2 = spectral_flow(p2, check=False).value
        s12 = spectral_flow(block_diag(p1, p2), check=False).value
        counts["direct_sum"] += s12 == s1 + s2
        counts["oracle"] += s1 == neg_count_change(p1) and s2 == neg_count_change(p2)

        # p then a path starting at p(1)
        end = p1.operator_at(1.0)
        c = random_hermitian(rng, n1)
        nxt = OperatorPath(lambda t, end=end, c=c: end + np.sin(np.pi * t) * c + t * np.eye(n1), np.linspace(0, 1, 9))
        sn = spectral_flow(nxt, check=False).value
        counts["concat"] += spectral_flow(concatenate(p1, nxt), check=False).value == s1 + sn

        u = random_unitary(rng, n1)
        counts["conjugate"] += spectral_flow(conjugate(p1, u), check=False).value == s1

        # invertible path: unitary rotation of a fixed spectrum bounded away from 0
        d = np.diag(rng.choice([-1.0, 1.0], size=n1) * rng.uniform(0.5, 2.0, size=n1))
        h = random_hermitian(rng, n1)
        inv = OperatorPath(lambda t, d=d, h=h: sla.expm(1j * t * h) @ d @ sla.expm(-1j * t * h), np.linspace(0, 1, 9))
        counts["invertible"] += spectral_flow(inv, check=False).value == 0
    passed = all(v == instances for v in counts.values())
    return Criterion(9, "spectral flow properties on random paths", passed,
                     {k: f"{v}/{instances}" for k, v in counts.items()})


# --- criterion 3: invertibility ------------------------------------------------


def min_abs_eig(grid: AnnulusGrid, t0: float, t1: float, flavors: int = 1) -> float:
    import scipy.sparse.linalg as spla

    op = impose_T(build_dirac_annulus(grid, 0.0, flavors=flavors), t0 * np.eye(flavors), t1 * np.eye(flavors))
    vals = spla.eigsh(op.matrix, k=6, sigma=0.0123, which="LM", return_eigenvectors=False)
    return float(np.min(np.abs(vals)))


def criterion_invertibility(modes: int = 32) -> Criterion:
    detail = {}
    ok = True
    for tau in (1.0, -1.0):
        d64 = min_abs_eig(AnnulusGrid(modes, 64), tau, tau)
        d128 = min_abs_eig(AnnulusGrid(modes, 128), tau, tau)
        rel = abs(d64 - d128) / d128
        detail[f"T={tau:+.0f}"] = {"delta_64": d64, "delta_128": d128, "relative_change": rel}
        ok &= d64 > 0.1 and d128 > 0.1 and rel < 0.10
    return Criterion(3, "odd Dirac with T = +-1 is invertible", bool(ok), detail)


# --- criteria 1 and 2: sf = Psi on the annulus -------------------------------


def verify_scenario(scn, grid: AnnulusGrid, nt: int, topo: tuple[int, int] = (64, 64), window: float = 1.0) -> dict:
    t0 = time.perf_counter()
    path = assemble_path(scn, grid, nt)
    sf = spectral_flow(path, window=window)
    t1 = time.perf_counter()
    psi = tp.psi_invariant(torus_scenario(scn, *topo))
    t2 = time.perf_counter()
    return {
        "sf": sf.value,
        "sf_raw": sf.raw,
        "psi": psi,
        "match": sf.value == psi,
        "subdivisions": sf.subdivisions,
        "sf_seconds": t1 - t0,
        "psi_seconds": t2 - t1,
        "seconds": t2 - t0,
    }


def criterion_theorem(modes: int = 32, nz: int = 64, nt: int = 64, targets=(-2, -1, 0, 1, 2), budget: float = 300.0) -> Criterion:
    grid = AnnulusGrid(modes, nz)
    rows = {}
    ok = True
    for n in targets:
        r = verify_scenario(rotating_bc(n), grid, nt)
        rows[n] = r
        ok &= r["match"] and r["sf"] == n and r["seconds"] < budget
    return Criterion(1, "sf = Psi for rotating boundary conditions", bool(ok), rows)


def criterion_calibration(modes: int = 32, nz: int = 64, nt: int = 64) -> Criterion:
    grid = AnnulusGrid(modes, nz)
    rot = verify_scenario(rotating_bc(1), grid, nt)
    ab = verify_scenario(ab_flux(1), grid, nt)
    ok = rot["sf"] == 1 == rot["psi"] and ab["match"]
    return Criterion(2, "annulus calibration (rotating n=1, one flux quantum)", bool(ok), {"rotating": rot, "ab_flux": ab})


def run_all(quick: bool = False, seed: int = 0) -> list[Criterion]:
    """Run every criterion; ``quick`` shrinks grids and instance counts."""
    if quick:
        plan = [
            lambda: criterion_theorem(8, 32, 16, targets=(-1, 0, 1)),
            lambda: criterion_calibration(8, 32, 16),
            lambda: criterion_invertibility(8),
            lambda: criterion_appendix(seed, 40),
            lambda: criterion_symbols(seed + 1, 60),
            lambda: criterion_boundary(seed + 2, 60),
            lambda: criterion_chern(),
            lambda: criterion_psi(seed + 3, 24, 24),
            lambda: criterion_sf_properties(seed + 4, 20),
        ]
    else:
        plan = [
            criterion_theorem,
            criterion_calibration,
            criterion_invertibility,
            lambda: criterion_appendix(seed, 200),
            lambda: criterion_symbols(seed + 1, 500),
            lambda: criterion_boundary(seed + 2, 500),
            criterion_chern,
            lambda: criterion_psi(seed + 3),
            lambda: criterion_sf_properties(seed + 4, 100),
        ]
    out = []
    for fn in plan:
        t = time.perf_counter()
        c = fn()
        c.seconds = time.perf_counter() - t
        out.append(c)
    return out
