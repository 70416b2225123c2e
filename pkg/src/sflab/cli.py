"""Command line entry point: ``sflab <subcommand> [options]``.

Exit status: 0 success, 1 mismatch or numerical/verification failure,
2 input error (bad config, invalid data, missing files).
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from . import boundary as bd
from . import linalg as la
from . import symbol as sy
from . import topology as tp
from . import errors as er
from .config import ScenarioConfig, load_config, parse_matrix, resolved
from .discretize import assemble_path
from .scenarios import torus_scenario
from .spectralflow import eigenvalue_traces, spectral_flow, write_crossings_csv, write_traces_csv

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2

INPUT_ERRORS = (
    er.ConfigError,
    er.NotElliptic,
    er.NotHermitian,
    er.Singular,
    er.InvalidTheta,
    er.NotTransversal,
    er.NotLagrangian,
    er.SingularT,
    er.NearSingularT,
    er.EndpointMismatch,
    er.SeamMismatch,
    er.GridMismatch,
    er.NotComplementary,
    er.NotUnitary,
    er.JoinMismatch,
    OSError,
    ValueError,
)


class StageError(Exception):
    """Wraps a module error with the pipeline stage it came from."""

    def __init__(self, stage: str, exc: Exception):
        super().__init__(f"[{stage}] {type(exc).__name__}: {exc}")
        self.stage = stage
        self.cause = exc


def _stage(name: str, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except er.SflabError as exc:
        raise StageError(name, exc) from exc


def versions() -> dict:
    return {
        "sflab": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


def _overrides(args) -> dict:
    out: dict = {}
    grid = {k: v for k, v in (("nz", args.grid_nz), ("modes", args.grid_modes), ("nt", args.grid_nt)) if v is not None}
    if grid:
        out["grid"] = grid
    if args.tolerance is not None:
        out["tolerance"] = {"residual": args.tolerance}
    if args.out is not None:
        out["output"] = {"dir": str(args.out)}
    return out


def _config(args) -> ScenarioConfig:
    return load_config(args.config, _overrides(args))


def _out_dir(args, cfg: ScenarioConfig | None = None) -> Path | None:
    d = args.out if args.out is not None else (cfg.out_dir if cfg is not None else None)
    if d is None:
        return None
    d = Path(d)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _emit(report: dict, out: Path | None, name: str = "report.json") -> None:
    text = json.dumps(report, indent=2, default=_json_default)
    print(text)
    if out is not None:
        (out / name).write_text(text + "\n")


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.bool_,)):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _read_toml(path) -> dict:
    from .config import tomllib

    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError as exc:
        raise er.ConfigError(f"file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise er.ConfigError(f"cannot parse {path}: {exc}") from exc


def _symbol_from(raw: dict, rng: np.random.Generator) -> sy.EllipticSymbol:
    table = raw.get("symbol")
    if table is None:
        from .suite import random_elliptic

        return random_elliptic(rng, 2)
    try:
        s1, s2 = parse_matrix(table["sigma1"]), parse_matrix(table["sigma2"])
    except KeyError as exc:
        raise er.ConfigError(f"[symbol] needs sigma1 and sigma2 (missing {exc})") from exc
    if s1.shape != s2.shape or s1.shape[0] != s1.shape[1]:
        raise er.ConfigError("sigma1 and sigma2 must be square of the same size")
    return sy.check_ellipticity(s1, s2)


# --- subcommands ---------------------------------------------------------------


def cmd_check_symbol(args) -> int:
    raw = _read_toml(args.config)
    s = _symbol_from(raw, np.random.default_rng(args.seed))
    split = sy.chiral_split(s)
    back = sy.theta_inverse(sy.theta_coords(s))
    report = {
        "versions": versions(),
        "dim": s.dim,
        "rank_plus": split.e_plus.rank,
        "rank_minus": split.e_minus.rank,
        "is_dirac": sy.is_dirac(s),
        "theta_roundtrip_error": float(max(np.abs(back.sigma1 - s.sigma1).max(), np.abs(back.sigma2 - s.sigma2).max())),
        "retraction_is_dirac": sy.is_dirac(sy.retract_symbol(s, 1.0)),
    }
    _emit(report, _out_dir(args), "symbol.json")
    return EXIT_OK


def cmd_boundary_roundtrip(args) -> int:
    raw = _read_toml(args.config)
    rng = np.random.default_rng(args.seed)
    s = _symbol_from(raw, rng)
    c = bd.ConormalData.from_symbol(s)
    k = c.e_minus.rank
    table = raw.get("boundary", {})
    if "T" in table:
        t = parse_matrix(table["T"])
        if t.shape != (k, k):
            raise er.ConfigError(f"T has shape {t.shape}, expected ({k}, {k}) in the E- frame")
    else:
        t = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k))
        t = 0.5 * (t + t.conj().T) + 0.1 * np.eye(k)
    aut = bd.BoundaryAutomorphism(t, c.e_minus)
    cond = bd.condition_from_T(c, aut)
    back = bd.T_from_condition(c, cond)
    cond2 = bd.condition_from_T(c, back)
    report = {
        "versions": versions(),
        "rank": k,
        "T_hermitian": aut.is_hermitian,
        "lagrangian": bd.is_lagrangian(c, cond),
        "T_roundtrip_error": float(np.abs(back.t_matrix - t).max()),
        "L_roundtrip_gap": la.gap_distance(cond.l_frame, cond2.l_frame),
    }
    _emit(report, _out_dir(args), "boundary.json")
    return EXIT_OK if report["L_roundtrip_gap"] < 1e-8 else EXIT_FAIL


def _family_for_chern(args) -> tp.TorusFamily:
    if args.family is not None:
        try:
            data = np.load(args.family)
        except FileNotFoundError as exc:
            raise er.ConfigError(f"file not found: {args.family}") from exc
        if "frames" not in data:
            raise er.ConfigError("family file needs a 'frames' array of shape (nx, nt, n, r)")
        frames = np.asarray(data["frames"], dtype=complex)
        if frames.ndim != 4:
            raise er.ConfigError("frames must have shape (nx, nt, n, r)")
        clutch = np.asarray(data["clutch"], dtype=complex) if "clutch" in data else None
        if clutch is None:
            clutch = np.broadcast_to(np.eye(frames.shape[2]), (frames.shape[0],) + (frames.shape[2],) * 2).copy()
        return tp.TorusFamily(frames, clutch)
    if args.rotating is not None:
        fam = tp.realize_chern(args.rotating)
        c = tp.dirac_conormal(fam.k)
        return tp.family_from_T_loops(tp.sample_T_loops(fam.t_matrices, c, args.nx, args.nx))
    return tp.qwz_family(args.nx, args.qwz)


def cmd_chern(args) -> int:
    fam = _family_for_chern(args)
    if args.save is not None:
        np.savez(args.save, frames=fam.frames, clutch=fam.clutch)
    res = tp.chern_number(fam)
    out = _out_dir(args)
    if out is not None:
        tp.write_flux_csv(out / "flux.csv", res)
    print(f"chern {res.rounded} residual {res.residual:.3e} raw {res.raw:.12f}")
    return EXIT_OK


def _run_sf(cfg: ScenarioConfig, out: Path | None) -> tuple[dict, object]:
    scn = cfg.scenario()
    t0 = time.perf_counter()
    path = _stage("discretize", assemble_path, scn, cfg.grid, cfg.nt, cfg.sector_fraction)
    res = _stage("spectralflow", spectral_flow, path, window=cfg.window)
    diag = {
        "value": res.value,
        "raw": res.raw,
        "residual": res.residual,
        "window": res.window,
        "subdivisions": res.subdivisions,
        "evaluations": res.evaluations,
        "crossings": [{"t_left": c.t_left, "t_right": c.t_right, "direction": c.direction, "weight": c.weight} for c in res.crossings],
        "spurious": [{"t_left": c.t_left, "t_right": c.t_right, "weight": c.weight} for c in res.spurious],
        "dim": path.dim,
        "grid": {"modes": cfg.grid.n_modes, "nz": cfg.grid.n_z, "nt": cfg.nt},
        "seconds": time.perf_counter() - t0,
    }
    if out is not None:
        write_crossings_csv(out / "crossings.csv", res)
        ts = np.linspace(0.0, 1.0, cfg.nt + 1)
        write_traces_csv(out / "traces.csv", eigenvalue_traces(path, ts, cfg.window))
    return diag, res


def _run_psi(cfg: ScenarioConfig, out: Path | None) -> dict:
    t0 = time.perf_counter()
    nx, nt = cfg.topo_grid
    scen = _stage("boundary", torus_scenario, cfg.scenario(), nx, nt)
    results = [_stage("topology", tp.chern_number, f) for f in scen.components]
    if out is not None:
        for name, r in zip(scen.names, results):
            tp.write_flux_csv(out / f"flux_{name}.csv", r)
    return {
        "value": int(sum(r.rounded for r in results)),
        "components": {name: {"chern": r.rounded, "raw": r.raw, "residual": r.residual} for name, r in zip(scen.names, results)},
        "grid": {"nx": nx, "nt": nt},
        "seconds": time.perf_counter() - t0,
    }


def cmd_sf(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    t0 = time.perf_counter()
    diag, res = _run_sf(cfg, out)
    ok = res.residual <= cfg.residual
    _emit({"versions": versions(), "config": resolved(cfg), "sf": diag, "ok": ok, "wall_time": time.perf_counter() - t0}, out)
    return EXIT_OK if ok else EXIT_FAIL


def run_verify(cfg: ScenarioConfig, out: Path | None = None) -> dict:
    t0 = time.perf_counter()
    sf_diag, res = _run_sf(cfg, out)
    psi = _run_psi(cfg, out)
    converged = res.residual <= cfg.residual
    return {
        "versions": versions(),
        "config": resolved(cfg),
        "sf": sf_diag,
        "psi": psi,
        "match": sf_diag["value"] == psi["value"],
        "converged": converged,
        "wall_time": time.perf_counter() - t0,
    }


def cmd_verify(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    report = run_verify(cfg, out)
    _emit(report, out)
    print(f"sf = {report['sf']['value']}  psi = {report['psi']['value']}  match = {report['match']}", file=sys.stderr)
    return EXIT_OK if report["match"] and report["converged"] else EXIT_FAIL


def _criterion_job(job):
    from . import suite

    name, kwargs = job
    t = time.perf_counter()
    c = getattr(suite, name)(**kwargs)
    c.seconds = time.perf_counter() - t
    return c


def suite_jobs(quick: bool, seed: int, cfg: ScenarioConfig | None) -> list[tuple[str, dict]]:
    g = (8, 32, 16) if quick else (32, 64, 64)
    if cfg is not None:
        g = (cfg.grid.n_modes, cfg.grid.n_z, cfg.nt)
    m, nz, nt = g
    few = quick
    return [
        ("criterion_theorem", {"modes": m, "nz": nz, "nt": nt, **({"targets": (-1, 0, 1)} if few else {})}),
        ("criterion_calibration", {"modes": m, "nz": nz, "nt": nt}),
        ("criterion_invertibility", {"modes": m}),
        ("criterion_appendix", {"seed": seed, "instances": 40 if few else 200}),
        ("criterion_symbols", {"seed": seed + 1, "instances": 60 if few else 500}),
        ("criterion_boundary", {"seed": seed + 2, "instances": 60 if few else 500}),
        ("criterion_chern", {}),
        ("criterion_psi", {"seed": seed + 3}),
        ("criterion_sf_properties", {"seed": seed + 4, "instances": 20 if few else 100}),
    ]


def cmd_suite(args) -> int:
    cfg = None
    if args.config is not None or any(v is not None for v in (args.grid_nz, args.grid_modes, args.grid_nt)):
        cfg = _config(args)
    out = _out_dir(args, cfg)
    jobs = suite_jobs(args.quick, args.seed, cfg)
    t0 = time.perf_counter()
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_criterion_job, jobs))
    else:
        results = [_criterion_job(j) for j in jobs]
    results.sort(key=lambda c: c.number)
    for c in results:
        print(c.line())
    passed = sum(c.passed for c in results)
    print(f"{passed}/{len(results)} criteria passed in {time.perf_counter() - t0:.1f}s")
    if out is not None:
        summary = {
            "versions": versions(),
            "quick": args.quick,
            "seed": args.seed,
            "criteria": [{"number": c.number, "title": c.title, "passed": c.passed, "seconds": c.seconds, "detail": c.detail} for c in results],
        }
        (out / "suite.json").write_text(json.dumps(summary, indent=2, default=_json_default) + "\n")
        with open(out / "suite.csv", "w") as fh:
            fh.write("criterion,title,passed,seconds\n")
            for c in results:
                fh.write(f'{c.number},"{c.title}",{c.passed},{c.seconds:.2f}\n')
    return EXIT_OK if passed == len(results) else EXIT_FAIL


# --- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML config file")
    common.add_argument("--out", type=Path, help="directory for reports and CSV files")
    common.add_argument("--grid-nz", type=int)
    common.add_argument("--grid-modes", type=int)
    common.add_argument("--grid-nt", type=int)
    common.add_argument("--tolerance", type=float, help="accepted distance of the weighted crossing count from an integer")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized instances")

    p = argparse.ArgumentParser(prog="sflab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"sflab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("check-symbol", parents=[common], help="split and validate a symbol pair ([symbol] sigma1, sigma2)")
    sub.add_parser("boundary-roundtrip", parents=[common], help="T -> L -> T on a symbol and [boundary] T")
    c = sub.add_parser("chern", parents=[common], help="Chern number of a torus family")
    src = c.add_mutually_exclusive_group()
    src.add_argument("--family", type=Path, help=".npz with frames (nx, nt, n, r) and optional clutch (nx, n, n)")
    src.add_argument("--qwz", type=float, default=1.0, help="QWZ lower band with this mass (default)")
    src.add_argument("--rotating", type=int, help="boundary family realizing this Chern number")
    c.add_argument("--nx", type=int, default=64, help="grid size for generated families")
    c.add_argument("--save", type=Path, help="write the family to this .npz")
    sub.add_parser("sf", parents=[common], help="spectral flow of the discretized annulus path")
    sub.add_parser("verify", parents=[common], help="compare spectral flow with the boundary invariant")
    s = sub.add_parser("suite", parents=[common], help="run the acceptance battery")
    s.add_argument("--quick", action="store_true", help="reduced grids and instance counts")
    s.add_argument("--jobs", type=int, default=1, help="run criteria in parallel processes")
    return p


COMMANDS = {
    "check-symbol": cmd_check_symbol,
    "boundary-roundtrip": cmd_boundary_roundtrip,
    "chern": cmd_chern,
    "sf": cmd_sf,
    "verify": cmd_verify,
    "suite": cmd_suite,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except StageError as exc:
        code = EXIT_INPUT if isinstance(exc.cause, INPUT_ERRORS) else EXIT_FAIL
        print(f"error: {exc}", file=sys.stderr)
        return code
    except INPUT_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except er.SflabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
