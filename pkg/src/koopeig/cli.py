"""Configuration-driven command line: eigenfunction grids, decompositions, spectrum demo.

Exit codes: 0 ok, 2 config error, 3 domain failure, 4 empty target.
All files are written atomically (temp + rename); repeated runs with the
same config and seed produce byte-identical JSON.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, load_config_file
from .decomposition import TargetSample, build_grid, greedy_decompose
from .eigenfunctions import (
    OpenEigenfunction,
    evaluate_points,
    koopman_residual,
)
from .errors import ConfigError, EmptyTargetError, NotInDomainError
from .manifolds import DataFunction, check_transversality
from .spectrum import scaling_fit, wedge_point_spectrum_check
from .targets import parse_data_fn, parse_target

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DOMAIN = 3
EXIT_EMPTY = 4


def _fmt(v: float) -> str:
    return f"{float(v):.17g}"


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + f".tmp{os.getpid()}")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) if isinstance(v, (int, float, np.floating)) else str(v) for v in row))
    _write_atomic(path, "\n".join(lines) + "\n")


def write_json(path: Path, obj) -> None:
    _write_atomic(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _c2l(z: complex) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def _prepare(cfg: RunConfig):
    system = cfg.make_system()
    manifold = cfg.make_manifold(system)
    window = cfg.window(system)
    report = check_transversality(manifold, system.field)
    if not report.passed:
        raise ConfigError(
            f"data manifold is not transverse to the flow "
            f"(min margin {report.min_margin:.3g} at "
            f"{report.violations[:3].tolist()}...)",
            field="manifold",
        )
    return system, manifold, window


def cmd_eval(cfg: RunConfig, out_dir: Path) -> int:
    system, manifold, window = _prepare(cfg)
    if cfg.eig_lambda is None or cfg.eig_h is None:
        raise ConfigError("eval needs eig.lambda and eig.h", field="eig")
    if cfg.lattice is None:
        raise ConfigError("eval needs a lattice", field="lattice")
    h_fn = parse_data_fn(cfg.eig_h, where="eig.h")
    data = DataFunction.from_callable(manifold, h_fn)
    eig = OpenEigenfunction(
        cfg.eig_lambda, data, manifold, system.field, window, tol=cfg.integrator_tol
    )
    lo1, hi1, k1 = cfg.lattice["x1"]
    lo2, hi2, k2 = cfg.lattice["x2"]
    xs = np.linspace(float(lo1), float(hi1), int(k1))
    ys = np.linspace(float(lo2), float(hi2), int(k2))
    points = [np.array([a, b]) for a in xs for b in ys]
    values = evaluate_points(eig, points)
    rows = []
    in_domain = []
    for val in values:
        if val is None:
            continue
        in_domain.append(val)
        rows.append(
            (val.x[0], val.x[1], val.phi.real, val.phi.imag, val.r_star, val.s_star)
        )
    write_csv(
        out_dir / "keig_grid.csv",
        ["x1", "x2", "phi_re", "phi_im", "r_star", "s_star"],
        rows,
    )
    n_total = len(points)
    n_ok = len(rows)

    # Self-certification spot check on points whose short-time image stays in
    # the window.
    t_spot = min(0.1, 0.25 * (window[1] - window[0]) if window[1] > window[0] else 0.1)
    safe = [v for v in in_domain if v.r_star + t_spot < window[1] - 1e-6]
    spot = None
    if safe:
        rng = np.random.default_rng(cfg.seed)
        picks = rng.choice(len(safe), size=min(10, len(safe)), replace=False)
        try:
            spot = koopman_residual(
                eig, [safe[i].x for i in picks], t_spot, tol=cfg.integrator_tol
            )
        except NotInDomainError:
            spot = None
    summary = {
        "command": "eval",
        "lambda": _c2l(eig.eigenvalue),
        "lattice_points": n_total,
        "in_domain_points": n_ok,
        "spot_check_t": t_spot,
        "spot_check_residual": spot,
        "config_echo": cfg.echo,
    }
    write_json(out_dir / "eval_summary.json", summary)
    if n_ok * 2 < n_total:
        print(
            f"eval: only {n_ok}/{n_total} lattice points inside the domain",
            file=sys.stderr,
        )
        return EXIT_DOMAIN
    return EXIT_OK


def cmd_decompose(cfg: RunConfig, out_dir: Path) -> int:
    system, manifold, window = _prepare(cfg)
    if cfg.target is None:
        raise ConfigError("decompose needs a target expression", field="target")
    q = parse_target(cfg.target, dim=system.field.dim, where="target")
    grid = build_grid(
        system.field, manifold, window, cfg.grid_n, cfg.grid_m, cfg.integrator_tol
    )
    target = TargetSample.from_function(grid, q)
    result = greedy_decompose(
        grid,
        target,
        cfg.candidate_lambdas(),
        cfg.K,
        cfg.stop_tol,
        threads=cfg.threads,
        eig_tol=cfg.integrator_tol,
    )
    report = {
        "command": "decompose",
        "terms": [
            {
                "lambda": _c2l(term.eigenvalue),
                "c": term.coefficient,
                "h_samples": [_c2l(v) for v in term.data.values],
            }
            for term in result.terms
        ],
        "residuals": [float(r) for r in result.residual_norms],
        "config_echo": cfg.echo,
    }
    write_json(out_dir / "decomposition.json", report)
    write_csv(
        out_dir / "residuals.csv",
        ["k", "residual_norm"],
        [(k, r) for k, r in enumerate(result.residual_norms)],
    )
    curve_rows = []
    for stage, sweep in enumerate(result.lambda_curves, start=1):
        for lam, res in zip(sweep.candidates, sweep.residual_curve):
            curve_rows.append((stage, lam.real, lam.imag, res))
    write_csv(
        out_dir / "lambda_curves.csv",
        ["stage", "lambda_re", "lambda_im", "residual"],
        curve_rows,
    )
    h_rows = []
    for stage, term in enumerate(result.terms, start=1):
        for s, v in zip(term.data.s_nodes, term.data.values):
            h_rows.append((stage, s, v.real, v.imag))
    write_csv(out_dir / "h_functions.csv", ["stage", "s", "h_re", "h_im"], h_rows)
    grid_rows = []
    for stage, term in enumerate(result.terms, start=1):
        for i in range(grid.n_s):
            for j in range(grid.n_r):
                x = grid.points[i, j]
                v = term.phi_grid[i, j]
                grid_rows.append((stage, x[0], x[1], v.real, v.imag))
    write_csv(
        out_dir / "term_grids.csv",
        ["stage", "x1", "x2", "phi_re", "phi_im"],
        grid_rows,
    )
    return EXIT_OK


def cmd_spectrum(cfg: RunConfig, out_dir: Path) -> int:
    spec = cfg.spectrum or {}
    omega = float(spec.get("omega", 1.0))
    t = float(spec.get("t", 1.0))
    n_list = spec.get("n_list", [4, 8, 16, 32, 64, 128, 256])
    if not isinstance(n_list, list) or not n_list:
        raise ConfigError("n_list must be a non-empty list", field="spectrum.n_list")
    annulus = spec.get("annulus", [0.25, 4.0])
    a_lo, a_hi = float(annulus[0]), float(annulus[1])
    quad_points = int(spec.get("quad_points", 256))
    fit = scaling_fit(omega, t, [int(n) for n in n_list], (a_lo, a_hi), quad_points)
    write_csv(
        out_dir / "spectrum_scaling.csv",
        ["n", "residual", "phi_norm", "relative_residual"],
        list(
            zip(
                fit.n_values,
                fit.residual_norms,
                fit.phi_norms,
                fit.relative_residuals,
            )
        ),
    )
    wedge_cfg = spec.get("wedge", {})
    lam_grid = wedge_cfg.get("lambda_grid", {})
    re_lo, re_hi = lam_grid.get("re_range", [-2.0, 2.0])
    im_lo, im_hi = lam_grid.get("im_range", [-2.0, 2.0])
    count = int(lam_grid.get("count", 5))
    res = np.linspace(float(re_lo), float(re_hi), count)
    ims = np.linspace(float(im_lo), float(im_hi), count)
    lams = [complex(a, b) for a in res for b in ims]
    alpha_window = wedge_cfg.get("alpha_window", [0.2, 2.2])
    h_expr = wedge_cfg.get("h", "1")
    h = parse_data_fn(h_expr, where="spectrum.wedge.h")
    wedge = wedge_point_spectrum_check(
        lams,
        (float(alpha_window[0]), float(alpha_window[1])),
        h,
        seed=cfg.seed,
    )
    summary = {
        "command": "spectrum",
        "omega": omega,
        "t": t,
        "slope": None if len(fit.n_values) < 2 else fit.slope,
        "rows": [
            {
                "n": int(n),
                "residual": float(r),
                "phi_norm": float(p),
                "relative_residual": float(rel),
            }
            for n, r, p, rel in zip(
                fit.n_values, fit.residual_norms, fit.phi_norms, fit.relative_residuals
            )
        ],
        "wedge": {
            "max_residual": wedge.max_residual,
            "lambdas": [_c2l(z) for z in wedge.lambdas],
            "residuals": [float(r) for r in wedge.residuals],
        },
        "config_echo": cfg.echo,
    }
    write_json(out_dir / "spectrum_summary.json", summary)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="koopeig",
        description="Koopman eigenfunctions by characteristic pullback and "
        "greedy eigenfunction dictionaries.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("eval", "evaluate one eigenfunction on a lattice, export CSV"),
        ("decompose", "greedy eigenfunction decomposition of a target"),
        ("spectrum", "approximate-eigenfunction scaling and wedge check"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to a JSON config file")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--tol", type=float, default=None, help="integrator tolerance override")
        p.add_argument("--seed", type=int, default=None, help="seed override")
        p.add_argument("--threads", type=int, default=None, help="worker threads override")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw = load_config_file(args.config)
        if args.out is not None:
            raw["output_dir"] = args.out
        if args.tol is not None:
            raw["integrator_tol"] = args.tol
        if args.seed is not None:
            raw["seed"] = args.seed
        if args.threads is not None:
            raw["threads"] = args.threads
        cfg = RunConfig.from_dict(raw)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        if args.command == "eval":
            return cmd_eval(cfg, out_dir)
        if args.command == "decompose":
            return cmd_decompose(cfg, out_dir)
        return cmd_spectrum(cfg, out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EmptyTargetError as exc:
        print(f"empty target: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except NotInDomainError as exc:
        print(f"domain failure: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
