"""Command-line entry point.

::

    shsaw scan   --config PATH [--threads N] [--out DIR]
    shsaw column --config PATH --k1 VALUE [--out FILE]
    shsaw check  --config PATH [--quick] [--contour-radius R] [--json FILE]

Exit codes: 0 success, 1 failed check, 2 configuration error, 3 too many
flagged grid nodes.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from .config import ResultBundle, flags_text, format_float, load_config, provenance, write_csv
from .dispersion import PointSolver
from .errors import ConfigError, OracleUnavailableError
from .kernels import BACKEND
from .riccati import alpha_stream
from .scan import analyze_column, analyze_grid, effective_speeds, trace_branches, transonic_curves

__all__ = ["main", "cmd_scan", "cmd_column", "cmd_check"]

log = logging.getLogger("shsaw")

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def cmd_scan(config_path, threads: int = 1, out: str | None = None) -> int:
    cfg = load_config(config_path)
    if cfg.grid is None:
        raise ConfigError("grid: required by the scan command")
    grid = cfg.grid
    t0 = time.perf_counter()
    columns = analyze_grid(cfg.cell, grid, cfg.settings, cfg.options, threads)
    link = cfg.options.link_tol or 3 * grid.omega_step
    transonic = transonic_curves(columns, link)
    branches = trace_branches(columns, link)
    speeds = effective_speeds(branches, transonic, cfg.k1_speed_limit)
    samples = [s for c in columns for s in c.samples]
    roots = [
        {"k1": r.k1, "omega": r.omega, "kind": r.kind, "source": r.source, "d_saw": r.d_saw, "d_i": r.d_i,
         "bracket": r.bracket}
        for c in columns for r in c.roots
    ]
    bundle = ResultBundle(
        samples=samples,
        branches=branches,
        transonic=transonic,
        speeds={"c_saw": speeds.c_saw, "c_tr": speeds.c_tr, "ratio": speeds.ratio},
        provenance=provenance(cfg, time.perf_counter() - t0, BACKEND),
        roots=roots,
    )
    out_dir = bundle.save(out or cfg.out_dir)
    flagged = sum(s.failed for s in samples)
    frac = flagged / max(1, len(samples))
    print(f"samples: {len(samples)} ({flagged} flagged)")
    print(f"transonic curves: {len(transonic)}")
    print(f"surface branches: {sum(b.kind == 'surface' for b in branches)}, "
          f"nonphysical branches: {sum(b.kind == 'nonphysical' for b in branches)}")
    print(f"c_saw = {speeds.c_saw}, c_tr = {speeds.c_tr}")
    print(f"written to {out_dir}")
    if frac > cfg.failure_quota:
        print(f"error: {frac:.1%} of grid nodes flagged (quota {cfg.failure_quota:.0%})", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_column(config_path, k1: float, out: str | None = None, roots: bool = False) -> int:
    cfg = load_config(config_path)
    if not 0 <= k1 <= math.pi / cfg.cell.a1 * (1 + 1e-12):
        raise ConfigError(f"--k1: {k1} lies outside [0, pi/a1]")
    if cfg.grid is None:
        raise ConfigError("grid: omega range required by the column command")
    g = cfg.grid
    omegas = [] if g.omega_max == g.omega_min else np.linspace(g.omega_min, g.omega_max, g.n_omega)
    solver = PointSolver(cfg.cell, cfg.settings)
    rng = alpha_stream(cfg.settings.seed)
    res = analyze_column(solver, k1, omegas, rng, cfg.options) if roots else None
    samples = res.samples if res else [solver.sample(float(w), k1, rng) for w in omegas]
    path = Path(out) if out else Path(cfg.out_dir) / f"column_k1_{format_float(k1)}.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    write_csv(path, ["omega", "n_p", "d_saw", "d_d3", "flags"],
              ([s.omega, "" if s.n_p is None else s.n_p, s.d_saw, s.d_d3, flags_text(s)] for s in samples))
    print(f"{len(samples)} rows written to {path}")
    if res:
        for t in res.transonic:
            print(f"transonic  omega={t.omega:.8g}  N_p {t.lower}->{t.upper}")
        for r in res.roots:
            print(f"{r.kind:<13s} omega={r.omega:.8g}  D_saw={r.d_saw:.3e}  ({r.source})")
    return EXIT_OK


def _check_points(cfg, quick: bool):
    pts = list(cfg.check.points)
    n_random = 1 if quick else cfg.check.n_random
    rng = np.random.default_rng(cfg.settings.seed)
    w_hi = cfg.grid.omega_max if cfg.grid else 4.0
    for _ in range(max(0, n_random - len(pts)) if pts else n_random):
        pts.append((float(rng.uniform(0.05, 1.0) * w_hi), float(rng.uniform(0.05, 1.0) * math.pi / cfg.cell.a1)))
    return pts[:1] if quick else pts


def cmd_check(config_path, quick: bool = False, contour_radius: float | None = None,
              json_path: str | None = None) -> int:
    """Identity battery at the configured (or random) points."""
    from .oracle import symmetry_battery

    cfg = load_config(config_path)
    radius = cfg.settings.contour_radius if contour_radius is None else contour_radius
    steps = 1024 if quick else cfg.check.steps
    reports, refused = [], []
    for j, (omega, k1) in enumerate(_check_points(cfg, quick)):
        try:
            rep = symmetry_battery(cfg.cell, cfg.check.d, omega, k1, seed=cfg.settings.seed + j,
                                   tol=cfg.check.tolerance, steps=steps, contour_radius=radius)
        except OracleUnavailableError as exc:
            refused.append({"omega": omega, "k1": k1, "reason": str(exc)})
            print(f"REFUSED omega={omega:.6g} k1={k1:.6g}: {exc}")
            continue
        reports.append(rep)
        print("\n".join(rep.lines()))
    ok = bool(reports) and all(r.ok for r in reports)
    doc = {"ok": ok, "contour_radius": radius, "reports": [r.as_dict() for r in reports], "refused": refused}
    target = Path(json_path) if json_path else Path(cfg.out_dir) / "check.json"
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(json.dumps(doc, indent=1, default=float) + "\n")
    print(f"overall: {'PASS' if ok else 'FAIL'} ({len(reports)} points, {len(refused)} refused)")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="shsaw", description="SH surface-wave spectra of 2D-periodic half-spaces")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("scan", help="sweep the (omega, k1) grid and trace branches")
    s.add_argument("--config", required=True)
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--out")
    c = sub.add_parser("column", help="dispersion functions along one k1 column")
    c.add_argument("--config", required=True)
    c.add_argument("--k1", type=float, required=True)
    c.add_argument("--out")
    c.add_argument("--roots", action="store_true", help="also locate transonic points and roots")
    k = sub.add_parser("check", help="run the identity battery against the brute-force oracle")
    k.add_argument("--config", required=True)
    k.add_argument("--quick", action="store_true")
    k.add_argument("--contour-radius", type=float)
    k.add_argument("--json")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "scan":
            return cmd_scan(args.config, args.threads, args.out)
        if args.command == "column":
            return cmd_column(args.config, args.k1, args.out, args.roots)
        return cmd_check(args.config, args.quick, args.contour_radius, args.json)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
