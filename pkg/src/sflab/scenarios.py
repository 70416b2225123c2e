"""Scenario constructors and the boundary-data (topological) side of a scenario.

An :class:`~sflab.discretize.AnnulusScenario` is consumed by two independent
pipelines: ``discretize.assemble_path`` + ``spectralflow`` on one side, and
:func:`torus_scenario` (boundary + topology) on the other.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .boundary import BoundaryAutomorphism, BoundaryLoop, loop_F
from .discretize import (
    AnnulusScenario,
    DirectSumScenario,
    constant_T,
    inner_conormal,
    outer_conormal,
)
from .errors import NearSingularT
from .topology import Scenario, direct_sum, glue_family, realize_chern


@dataclass(frozen=True)
class TrigPolynomialT:
    """T(x, t) = sum over terms of C_pq exp(i (p x + 2 pi q t)), made Hermitian.

    Each term (p, q, C) is paired with its conjugate (-p, -q, C^*), so the
    field is Hermitian for any input coefficients.
    """

    terms: tuple[tuple[int, int, np.ndarray], ...]
    flavors: int

    def __call__(self, xs: np.ndarray, t: float) -> np.ndarray:
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        out = np.zeros((xs.size, self.flavors, self.flavors), dtype=complex)
        for p, q, c in self.terms:
            c = np.asarray(c, dtype=complex)
            ph = np.exp(1j * (p * xs + 2 * np.pi * q * t))
            out += 0.5 * (ph[:, None, None] * c + np.conj(ph)[:, None, None] * c.conj().T)
        return out


def ab_flux(flux: int = 1, flavors: int = 1, t_inner: float = 1.0, t_outer: float = -2.0) -> AnnulusScenario:
    """Fixed boundary conditions, connection a(t) = flux * t."""
    return AnnulusScenario(
        flavors, constant_T(t_inner, flavors), constant_T(t_outer, flavors), flux, f"ab-flux({flux})"
    )


def rotating_bc(outer: int = 0, inner: int = 0, flavors: int = 2, t_offset: float = 0.25) -> AnnulusScenario:
    """Fixed Dirac operator with winding boundary conditions.

    Each circle carries a loop of T whose negative bundle has the given
    Chern number (T = +1 when it is zero). ``t_offset`` shifts the loop
    origin so that no crossing sits at the endpoints.
    """
    fixed = constant_T(1.0, flavors)

    def side(n: int):
        return realize_chern(n, 2 * flavors, t_offset).t_matrices if n else fixed

    return AnnulusScenario(flavors, side(inner), side(outer), 0, f"rotating-bc(inner={inner},outer={outer})")


def custom_T_loop(
    flavors: int,
    inner_terms: Sequence[tuple[int, int, np.ndarray]] = (),
    outer_terms: Sequence[tuple[int, int, np.ndarray]] = (),
    flux: int = 0,
) -> AnnulusScenario:
    def make(terms):
        if not terms:
            return constant_T(1.0, flavors)
        return TrigPolynomialT(tuple((int(p), int(q), np.asarray(c, dtype=complex)) for p, q, c in terms), flavors)

    return AnnulusScenario(flavors, make(inner_terms), make(outer_terms), flux, "custom-T-loop")


def _component(scn: AnnulusScenario, which: str, nx: int, nt: int):
    r = scn.flavors
    xs = 2 * np.pi * np.arange(nx) / nx
    if which == "outer":
        conormal, field_, ys = outer_conormal(r), scn.outer_T, xs
    else:
        conormal, field_, ys = inner_conormal(r), scn.inner_T, -xs
    frame = conormal.e_minus
    loops = []
    for j in range(nt + 1):
        mats = field_(xs, j / nt)
        bl = BoundaryLoop.from_samples(conormal, [BoundaryAutomorphism(m, frame) for m in mats])
        try:
            loops.append(loop_F(bl))
        except NearSingularT as exc:
            raise NearSingularT(f"{which} boundary at t={j / nt:.4f}: {exc}") from exc
    # the loop closes up to the gauge exp(-i flux y), restricted to this circle
    clutch = np.exp(-1j * scn.flux * ys)[:, None, None] * np.eye(2 * r)[None]
    return glue_family(loops, clutch)


def torus_scenario(scn: AnnulusScenario | DirectSumScenario, nx: int = 64, nt: int = 64) -> Scenario:
    """Boundary bundles F over (inner circle) x S^1 and (outer circle) x S^1."""
    if isinstance(scn, DirectSumScenario):
        parts = [torus_scenario(p, nx, nt) for p in scn.parts]
        out = parts[0]
        for p in parts[1:]:
            out = direct_sum(out, p)
        return out
    comps = (_component(scn, "inner", nx, nt), _component(scn, "outer", nx, nt))
    return Scenario(comps, ("inner", "outer"))
