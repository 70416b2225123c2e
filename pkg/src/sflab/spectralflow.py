"""Spectral flow of Hermitian matrix paths by the counting-function method.

On each subinterval [tl, tr] a level ``a`` in (0, window] is chosen such
that both ``a`` and ``-a`` sit in spectral gaps at tl, tr and at the
midpoint, with the number of eigenvalues in (-a, a) the same at all three
points. The contribution is then N[0, a)(tr) - N[0, a)(tl). Intervals where
no such level exists are bisected.

A path may carry a sector operator ``S``. Each eigenpair is then counted
with weight |S psi|^2 instead of 1, which restricts the bookkeeping to a
resolved subspace of a truncated model (S is usually the projector onto it).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import CannotSeparate, EndpointMismatch, JoinMismatch, NotUnitary, SectorLeak

DENSE_LIMIT = 400
MAX_DEPTH = 20
ENDPOINT_TOL = 1e-9
JOIN_TOL = 1e-9
LOCALIZE_RES = 1e-4
SECTOR_TOL = 0.2

Matrix = np.ndarray | sp.spmatrix


def _norm_est(a: Matrix) -> float:
    """Cheap upper bound for the operator norm (max absolute row sum)."""
    if sp.issparse(a):
        return float(abs(a).sum(axis=1).max()) if a.nnz else 0.0
    a = np.asarray(a)
    return float(np.abs(a).sum(axis=1).max()) if a.size else 0.0


def _op_norm(a: Matrix) -> float:
    dense = a.toarray() if sp.issparse(a) else np.asarray(a)
    return float(sla.norm(dense, 2)) if dense.size else 0.0


def _diff_norm(a: Matrix, b: Matrix) -> float:
    d = a - b
    if sp.issparse(d):
        return float(abs(d).max()) if d.nnz else 0.0
    return float(np.abs(d).max()) if d.size else 0.0


@dataclass
class OperatorPath:
    """Continuous path t -> A(t) of Hermitian matrices on [0, 1].

    ``operator_at`` evaluates the path anywhere; ``t_samples`` is the
    initial partition used by :func:`spectral_flow`. The endpoint relation is
    A(1) = G A(0) G^* where ``gauge`` is G (None means identity). When G is
    only a partial isometry (mode shift on a truncated basis) pass
    ``endpoint_mask`` to restrict the check to the rows/columns it covers.
    ``sector`` is an optional weight operator S (see module docstring).
    """

    operator_at: Callable[[float], Matrix]
    t_samples: np.ndarray
    gauge: Matrix | None = None
    endpoint_mask: np.ndarray | None = None
    sector: Matrix | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        ts = np.asarray(self.t_samples, dtype=float)
        if ts.ndim != 1 or ts.size < 2 or ts[0] != 0.0 or ts[-1] != 1.0 or np.any(np.diff(ts) <= 0):
            raise ValueError("t_samples must increase strictly from 0 to 1")
        self.t_samples = ts

    @classmethod
    def from_samples(cls, ts: Sequence[float], matrices: Sequence[Matrix], gauge: Matrix | None = None, **kw) -> OperatorPath:
        """Piecewise-linear interpolation through given samples."""
        ts = np.asarray(ts, dtype=float)
        mats = list(matrices)
        if len(mats) != ts.size:
            raise ValueError("one matrix per sample is required")

        def at(t: float) -> Matrix:
            i = int(np.clip(np.searchsorted(ts, t, side="right") - 1, 0, ts.size - 2))
            s = (t - ts[i]) / (ts[i + 1] - ts[i])
            if s == 0.0:
                return mats[i]
            if s == 1.0:
                return mats[i + 1]
            return (1.0 - s) * mats[i] + s * mats[i + 1]

        return cls(at, ts, gauge, **kw)

    @property
    def dim(self) -> int:
        return self.operator_at(0.0).shape[0]


@dataclass(frozen=True)
class Crossing:
    """Eigenvalue crossing localized to [t_left, t_right].

    ``weight`` is the (sector-weighted) count change on the enclosing
    interval. Crossings with weight near zero are reported as spurious.
    """

    t_left: float
    t_right: float
    direction: int
    branch: int
    weight: float


@dataclass(frozen=True)
class SpectralFlowResult:
    value: int
    crossings: tuple[Crossing, ...]
    window: float
    subdivisions: int
    raw: float
    evaluations: int
    spurious: tuple[Crossing, ...] = ()

    @property
    def residual(self) -> float:
        return abs(self.raw - self.value)


def check_endpoints(path: OperatorPath, tol: float = ENDPOINT_TOL) -> float:
    """Return the endpoint defect; raise EndpointMismatch when above ``tol`` (relative)."""
    a0 = path.operator_at(0.0)
    a1 = path.operator_at(1.0)
    g = path.gauge
    if g is None:
        rhs = a0
    else:
        rhs = g @ a0 @ (g.conj().T)
    if path.endpoint_mask is not None:
        idx = np.flatnonzero(path.endpoint_mask)
        a1 = a1[idx][:, idx]
        rhs = rhs[idx][:, idx]
    defect = _diff_norm(a1, rhs)
    scale = max(1.0, _norm_est(a0))
    if defect > tol * scale:
        raise EndpointMismatch(f"A(1) != G A(0) G^*: defect {defect:.3e}")
    return defect


class _Spectra:
    """Cached windowed eigen-decompositions of the path."""

    def __init__(self, path: OperatorPath, window: float, need_vectors: bool):
        self.path = path
        self.window = window
        self.need_vectors = need_vectors
        self.cache: dict[float, tuple[np.ndarray, np.ndarray, float]] = {}
        self.k_hint = 16

    def __call__(self, t: float) -> tuple[np.ndarray, np.ndarray, float]:
        t = float(t)
        if t not in self.cache:
            self.cache[t] = self._solve(self.path.operator_at(t))
        return self.cache[t]

    def _weights(self, vecs: np.ndarray) -> np.ndarray:
        sv = self.path.sector @ vecs
        return np.sum(np.abs(sv) ** 2, axis=0)

    def _solve(self, a: Matrix):
        lam = self.window
        n = a.shape[0]
        norm = _norm_est(a)
        if n <= DENSE_LIMIT or not sp.issparse(a):
            dense = a.toarray() if sp.issparse(a) else np.asarray(a)
            # slightly wider window so that gaps at +-lam are visible
            lo, hi = -1.25 * lam, 1.25 * lam
            if self.need_vectors:
                vals, vecs = sla.eigh(dense, subset_by_value=(lo, hi), driver="evr")
                weights = self._weights(vecs)
            else:
                vals = sla.eigh(dense, eigvals_only=True, subset_by_value=(lo, hi), driver="evr")
                weights = np.ones(vals.size)
            resid = np.finfo(float).eps * max(norm, 1.0) * 10
            return vals, weights, resid
        return self._solve_sparse(a, norm)

    def _solve_sparse(self, a: sp.spmatrix, norm: float):
        lam = self.window
        # irrational shift keeps the factorization away from exact zero modes
        sigma = 0.0123456789 * lam
        n = a.shape[0]
        lu = spla.splu((a - sigma * sp.identity(n, format="csc")).tocsc())
        op = spla.LinearOperator((n, n), matvec=lu.solve, dtype=complex)
        k = self.k_hint
        reach = 1.25 * lam + abs(sigma)
        while True:
            k = min(k, n - 2)
            vals, vecs = spla.eigsh(a, k=k, sigma=sigma, OPinv=op, which="LM", tol=1e-12)
            if np.max(np.abs(vals - sigma)) > reach or k >= n - 2:
                break
            k *= 2
        self.k_hint = max(self.k_hint, k)
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
        keep = np.abs(vals) <= 1.25 * lam
        # anything inside the returned disc is complete; trim to it
        radius = np.max(np.abs(vals - sigma))
        inside = np.abs(vals - sigma) < radius
        vals, vecs = vals[keep & inside], vecs[:, keep & inside]
        resid_vec = a @ vecs - vecs * vals
        resid = float(np.max(np.linalg.norm(resid_vec, axis=0))) if vals.size else 0.0
        weights = self._weights(vecs) if self.path.sector is not None else np.ones(vals.size)
        return vals, weights, max(resid, np.finfo(float).eps * norm * 10)


def _gap_level(specs: list[np.ndarray], window: float, delta: float) -> tuple[float, float] | None:
    """Level a in (0, window] in a gap of every |eigenvalue| in ``specs``.

    Among gaps whose margin is at least half the best one, the highest is
    used: a wide counting window keeps an eigenvalue that moves quickly
    through zero inside (-a, a) at the samples. Returns (a, margin), or None
    when the best margin is below ``delta``.
    """
    mags = np.concatenate([np.abs(v) for v in specs] + [np.array([0.0, 1.25 * window])])
    mags = np.unique(mags[mags <= 1.25 * window])
    levels = []
    for lo, hi in zip(mags[:-1], mags[1:]):
        if lo >= window:
            break
        a = min(0.5 * (lo + hi), window)
        levels.append((a, min(a - lo, hi - a)))
    if not levels:
        return None
    best_margin = max(m for _, m in levels)
    if best_margin < delta:
        return None
    a, margin = max((lv for lv in levels if lv[1] >= max(0.5 * best_margin, delta)), key=lambda lv: lv[0])
    return float(a), float(margin)


def _count(vals: np.ndarray, weights: np.ndarray, lo: float, hi: float) -> float:
    sel = (vals >= lo) & (vals < hi)
    return float(weights[sel].sum())


def spectral_flow(
    path: OperatorPath,
    window: float | None = None,
    check: bool = True,
    max_depth: int = MAX_DEPTH,
    localize: bool = True,
    certify: bool | None = None,
) -> SpectralFlowResult:
    """Signed count of eigenvalues crossing zero upwards along ``path``.

    ``certify`` defaults to True for dense-sized paths without a sector.
    """
    if check:
        check_endpoints(path)
    a0 = path.operator_at(0.0)
    if certify is None:
        certify = path.sector is None and a0.shape[0] <= DENSE_LIMIT
    if window is None:
        window = 0.1 * _spectral_radius(a0)
    if window <= 0:
        raise ValueError("window must be positive")
    norm = _norm_est(a0)
    spectra = _Spectra(path, window, need_vectors=path.sector is not None)

    def delta_at(*res: float) -> float:
        return max(1e-8 * norm, 10.0 * max(res))

    total = 0.0
    crossings: list[Crossing] = []
    spurious: list[Crossing] = []
    subdivisions = 0
    stack = [(float(tl), float(tr), 0) for tl, tr in zip(path.t_samples[:-1], path.t_samples[1:])][::-1]
    while stack:
        tl, tr, depth = stack.pop()
        tm = 0.5 * (tl + tr)
        (vl, wl, rl), (vm, _, rm), (vr, wr, rr) = spectra(tl), spectra(tm), spectra(tr)
        delta = delta_at(rl, rm, rr)
        level = _gap_level([vl, vm, vr], window, delta)
        ok = level is not None
        if ok:
            a, margin = level
            inner = [np.sum(np.abs(v) < a) for v in (vl, vm, vr)]
            ok = inner[0] == inner[1] == inner[2]
        if ok and certify:
            am = path.operator_at(tm)
            drift = max(_op_norm(am - path.operator_at(tl)), _op_norm(path.operator_at(tr) - am))
            ok = drift < margin
        if not ok:
            if depth >= max_depth:
                raise CannotSeparate(f"no gapped level on [{tl:.6g}, {tr:.6g}] after {depth} bisections")
            subdivisions += 1
            stack.append((tm, tr, depth + 1))
            stack.append((tl, tm, depth + 1))
            continue
        contrib = _count(vr, wr, 0.0, a) - _count(vl, wl, 0.0, a)
        n_change = int(np.sum((vr >= 0) & (vr < a)) - np.sum((vl >= 0) & (vl < a)))
        total += contrib
        steps = int(round(contrib))
        if steps == 0 and n_change == 0:
            continue
        lo, hi = _localize(spectra, tl, tr, a) if localize else (tl, tr)
        branch = int(np.sum(vl < 0))
        if steps == 0:
            spurious.append(Crossing(lo, hi, int(np.sign(n_change)), branch, contrib))
        for _ in range(abs(steps)):
            crossings.append(Crossing(lo, hi, int(np.sign(steps)), branch, contrib))
    value = int(round(total))
    if path.sector is not None and abs(total - value) > SECTOR_TOL:
        raise SectorLeak(f"weighted crossing count {total:.3f} is not close to an integer")
    crossings.sort(key=lambda c: c.t_left)
    spurious.sort(key=lambda c: c.t_left)
    return SpectralFlowResult(
        value, tuple(crossings), float(window), subdivisions, total, len(spectra.cache), tuple(spurious)
    )


def _localize(spectra: _Spectra, tl: float, tr: float, a: float) -> tuple[float, float]:
    """Shrink [tl, tr] around the first change of the count N[0, a)."""
    def n(t):
        v = spectra(t)[0]
        return int(np.sum((v >= 0) & (v < a)))

    base = n(tl)
    while tr - tl > LOCALIZE_RES:
        tm = 0.5 * (tl + tr)
        if n(tm) != base:
            tr = tm
        else:
            tl = tm
    return tl, tr


def _spectral_radius(a: Matrix) -> float:
    if sp.issparse(a) and a.shape[0] > DENSE_LIMIT:
        v = spla.eigsh(a, k=1, which="LM", return_eigenvectors=False)
        return float(np.abs(v).max())
    dense = a.toarray() if sp.issparse(a) else np.asarray(a)
    return float(np.abs(np.linalg.eigvalsh(dense)).max())


def concatenate(p1: OperatorPath, p2: OperatorPath) -> OperatorPath:
    """Run p1 on [0, 1/2] and p2 on [1/2, 1]."""
    end = p1.operator_at(1.0)
    start = p2.operator_at(0.0)
    if end.shape != start.shape or _diff_norm(end, start) > JOIN_TOL * max(1.0, _norm_est(end)):
        raise JoinMismatch("p1(1) != p2(0)")

    def at(t: float) -> Matrix:
        return p1.operator_at(2.0 * t) if t <= 0.5 else p2.operator_at(2.0 * t - 1.0)

    ts = np.concatenate([0.5 * p1.t_samples, 0.5 + 0.5 * p2.t_samples[1:]])
    g1, g2 = p1.gauge, p2.gauge
    if g1 is None:
        gauge = g2
    elif g2 is None:
        gauge = g1
    else:
        gauge = g2 @ g1
    sector = p1.sector if p1.sector is not None else p2.sector
    return OperatorPath(at, ts, gauge, sector=sector)


def _is_unitary(u: Matrix) -> bool:
    n = u.shape[0]
    prod = u.conj().T @ u
    if sp.issparse(prod):
        prod = prod.toarray()
    return bool(np.abs(prod - np.eye(n)).max() <= 1e-10)


def conjugate(path: OperatorPath, u: Matrix) -> OperatorPath:
    """Pointwise U A(t) U^*."""
    if u.shape[0] != u.shape[1] or u.shape[0] != path.dim or not _is_unitary(u):
        raise NotUnitary("conjugating matrix must be unitary on the path's space")
    uh = u.conj().T

    def at(t: float) -> Matrix:
        return u @ path.operator_at(t) @ uh

    gauge = None if path.gauge is None else u @ path.gauge @ uh
    sector = None if path.sector is None else path.sector @ uh
    return OperatorPath(at, path.t_samples, gauge, path.endpoint_mask, sector)


def block_diag(p1: OperatorPath, p2: OperatorPath) -> OperatorPath:
    """Direct sum of two paths on the union of their sample grids."""
    ts = np.union1d(p1.t_samples, p2.t_samples)
    sparse = p1.dim > DENSE_LIMIT or p2.dim > DENSE_LIMIT

    def at(t: float) -> Matrix:
        a, b = p1.operator_at(t), p2.operator_at(t)
        if sparse:
            return sp.block_diag([sp.csr_matrix(a), sp.csr_matrix(b)], format="csr")
        a = a.toarray() if sp.issparse(a) else a
        b = b.toarray() if sp.issparse(b) else b
        return sla.block_diag(a, b)

    def part(g, n):
        if g is None:
            return sp.identity(n, format="csr") if sparse else np.eye(n)
        return sp.csr_matrix(g) if sparse else (g.toarray() if sp.issparse(g) else g)

    gauge = None
    if p1.gauge is not None or p2.gauge is not None:
        g1, g2 = part(p1.gauge, p1.dim), part(p2.gauge, p2.dim)
        gauge = sp.block_diag([g1, g2], format="csr") if sparse else sla.block_diag(g1, g2)
    mask = None
    if p1.endpoint_mask is not None or p2.endpoint_mask is not None:
        m1 = p1.endpoint_mask if p1.endpoint_mask is not None else np.ones(p1.dim, bool)
        m2 = p2.endpoint_mask if p2.endpoint_mask is not None else np.ones(p2.dim, bool)
        mask = np.concatenate([m1, m2])
    sector = None
    if p1.sector is not None or p2.sector is not None:
        s1 = p1.sector if p1.sector is not None else sp.identity(p1.dim, format="csr")
        s2 = p2.sector if p2.sector is not None else sp.identity(p2.dim, format="csr")
        sector = sp.block_diag([sp.csr_matrix(s1), sp.csr_matrix(s2)], format="csr")
    return OperatorPath(at, ts, gauge, mask, sector)


def sector_projector(mask: np.ndarray) -> sp.csr_matrix:
    """Diagonal projector onto the DOFs selected by a boolean mask."""
    return sp.diags(np.asarray(mask, dtype=float), format="csr")


def write_crossings_csv(path: str | Path, result: SpectralFlowResult) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_left", "t_right", "direction"])
        for c in result.crossings:
            w.writerow([f"{c.t_left:.6f}", f"{c.t_right:.6f}", c.direction])


def eigenvalue_traces(path: OperatorPath, ts: Sequence[float], window: float) -> list[tuple[float, int, float]]:
    """(t, index, value) rows of the eigenvalues inside [-window, window]."""
    spectra = _Spectra(path, window / 1.25, need_vectors=False)
    rows = []
    for t in ts:
        vals = spectra(float(t))[0]
        vals = vals[np.abs(vals) <= window]
        rows.extend((float(t), i, float(v)) for i, v in enumerate(vals))
    return rows


def write_traces_csv(path: str | Path, rows: Sequence[tuple[float, int, float]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "index", "value"])
        for t, i, v in rows:
            w.writerow([f"{t:.6f}", i, f"{v:.12g}"])
