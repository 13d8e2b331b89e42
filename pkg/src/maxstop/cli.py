"""Command-line front end: solve / diagram / verify / dump-config.

Exit codes: 0 success, 1 configuration error, 2 solver error,
3 verification failure (some |z| > 4).
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import config as cfgmod
from .diffusion import classify_log_phi
from .errors import ConfigError, MaxstopError
from .mc import simulate_policy
from .reward import transform
from .solver import (Case, Region, find_s_hat, optimal_policy, phase_diagram,
                     solve_column, v_diag)

_G = ".17g"  # round-trip safe float format


def _fmt(x) -> str:
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return format(float(x), _G)


def _write_csv(path: str, header: list, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(
                cell if isinstance(cell, str) else _fmt(cell)
                for cell in row) + "\n")


def cmd_solve(cfg: cfgmod.ProblemConfig, s: float, out_dir: str,
              debug_envelope: bool = False) -> int:
    model = cfg.build_model()
    reward = cfg.build_reward()
    col = solve_column(model, reward, s)
    diag = col.diag
    os.makedirs(out_dir, exist_ok=True)

    n_x = int(cfg.grids["n_x"])
    l = model.interval[0]
    xs = np.linspace(l + 1e-6 * max(abs(s), 1.0), s, n_x)
    rows = []
    for x in xs:
        v, reg = col.value_region(float(x))
        y = model.F(float(x))
        H = col.tr.H(y)
        W = v / model.phi(float(x))
        rows.append((x, v, Region(reg).name, H, W))
    path = os.path.join(out_dir, f"diag_s={format(s, 'g')}.csv")
    _write_csv(path, ["x", "V", "region", "H", "W"], rows)

    if debug_envelope:
        dbg = os.path.join(out_dir, f"envelope_s={format(s, 'g')}.csv")
        _write_csv(dbg, ["y", "H", "W", "x"],
                   [(model.F(float(x)), col.tr.H(model.F(float(x))),
                     col.w(model.F(float(x))), x) for x in xs])

    l_star = diag.l_star if diag.case is not Case.WAVE else float("nan")
    print(f"s = {_fmt(s)}")
    print(f"V(s,s) = {_fmt(diag.v)}")
    print(f"l_star = {_fmt(l_star)}")
    print(f"case = {diag.case.value}")
    if diag.x_star is not None:
        print(f"x_star = {_fmt(diag.x_star)}")
    print(f"wrote {path}")
    return 0


def cmd_diagram(cfg: cfgmod.ProblemConfig, out_dir: str) -> int:
    model = cfg.build_model()
    reward = cfg.build_reward()
    g = cfg.grids
    n_s, n_x = int(g["n_s"]), int(g["n_x"])
    if n_s == 1:
        s_grid = np.array([float(g["s_min"])])
    else:
        s_grid = np.linspace(float(g["s_min"]), float(g["s_max"]), n_s)
    surf = phase_diagram(model, reward, s_grid, x_per_s=n_x)
    os.makedirs(out_dir, exist_ok=True)

    rows = []
    for j, s in enumerate(surf.s_grid):
        for i, x in enumerate(surf.x_grid):
            if x > s:
                break
            rows.append((s, x, surf.values[i, j],
                         Region(surf.regions[i, j]).name))
    _write_csv(os.path.join(out_dir, "surface.csv"),
               ["s", "x", "V", "region"], rows)

    _write_csv(os.path.join(out_dir, "boundaries.csv"),
               ["s", "s_minus_lstar", "x_star"],
               [(s, surf.s_minus_lstar[j], surf.x_star[j])
                for j, s in enumerate(surf.s_grid)])

    summary = os.path.join(out_dir, "summary.txt")
    with open(summary, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("[summary]\n")
        for key, val in (("s_hat", surf.s_hat), ("s_lo", surf.s_lo),
                         ("s_hi", surf.s_hi)):
            fh.write(f"{key} = {'none' if val is None else _fmt(val)}\n")
    print(f"wrote surface.csv, boundaries.csv, summary.txt to {out_dir}")
    print(f"s_hat = {'none' if surf.s_hat is None else _fmt(surf.s_hat)}")
    print(f"s_lo = {'none' if surf.s_lo is None else _fmt(surf.s_lo)}")
    print(f"s_hi = {'none' if surf.s_hi is None else _fmt(surf.s_hi)}")
    return 0


def cmd_verify(cfg: cfgmod.ProblemConfig, out_dir: str) -> int:
    model = cfg.build_model()
    reward = cfg.build_reward()
    mc_cfg = cfg.build_mc()
    points = cfg.verify_points
    if not points:
        raise ConfigError("[mc] section must list verification points")
    os.makedirs(out_dir, exist_ok=True)
    report_rows = []
    worst = 0.0
    for x0, s0 in points:
        if s0 == x0:
            analytic = v_diag(model, reward, s0).v
        else:
            col = solve_column(model, reward, s0)
            analytic, _ = col.value_region(x0)
        policy = optimal_policy(model, reward, s0)
        est = simulate_policy(model, reward, policy, x0, s0, mc_cfg)
        z = est.z_score(analytic)
        worst = max(worst, abs(z))
        warn = "censored" if est.dt_warning else ""
        report_rows.append((x0, s0, analytic, est.mean, est.stderr, z, warn))
        print(f"(x0={format(x0, 'g')}, s0={format(s0, 'g')}): "
              f"analytic {_fmt(analytic)}  mc {_fmt(est.mean)} "
              f"+- {_fmt(est.stderr)}  z {z:+.3f} {warn}")
    _write_csv(os.path.join(out_dir, "verify.csv"),
               ["x0", "s0", "analytic", "mc_mean", "mc_stderr", "z", "warning"],
               report_rows)
    if worst > 4.0:
        print(f"verification FAILED: worst |z| = {worst:.3f} > 4", file=sys.stderr)
        return 3
    return 0


def cmd_dump_config(cfg: cfgmod.ProblemConfig) -> int:
    sys.stdout.write(cfgmod.dumps(cfg))
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=None, help="output directory override")
    common.add_argument("--threads", type=int, default=1,
                        help="worker thread cap for numeric kernels")
    common.add_argument("--debug-envelope", action="store_true",
                        help="dump transformed reward/majorant samples per level")

    p = argparse.ArgumentParser(
        prog="maxstop",
        description="Optimal stopping of a diffusion and its running maximum")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("solve", parents=[common],
                        help="solve one maximum level")
    sp.add_argument("config")
    sp.add_argument("--s", type=float, required=True, help="maximum level s")

    dp = sub.add_parser("diagram", parents=[common],
                        help="full phase diagram and value surface")
    dp.add_argument("config")

    vp = sub.add_parser("verify", parents=[common],
                        help="Monte Carlo verification")
    vp.add_argument("config")

    cp = sub.add_parser("dump-config", parents=[common],
                        help="print the canonical config")
    cp.add_argument("config")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads and args.threads > 1:
        try:
            import numba
            numba.set_num_threads(max(1, min(args.threads,
                                             numba.config.NUMBA_NUM_THREADS)))
        except ImportError:
            pass
    try:
        cfg = cfgmod.load(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    out_dir = args.out or cfg.output.get("dir", "out")
    try:
        if args.command == "solve":
            return cmd_solve(cfg, args.s, out_dir,
                             debug_envelope=args.debug_envelope)
        if args.command == "diagram":
            return cmd_diagram(cfg, out_dir)
        if args.command == "verify":
            return cmd_verify(cfg, out_dir)
        if args.command == "dump-config":
            return cmd_dump_config(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except MaxstopError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 2
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
