"""Experiment runner: every module surface as a subcommand emitting CSV tables.

Usage: orlipde <young|norms|solve|contraction|mollify|shift>
           --config <path> [more paths] [--out <dir>] [--seed <int>]
           [--force] [--jobs <k>]

Each run writes into an output directory named by the resolved config hash:
the resolved config, the result CSVs (12 significant digits, byte-stable
for equal config and seed), and a manifest with checksums and timings.
Exit codes: 0 success, 2 config error, 3 numerical divergence, 4 capability
error.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import build_field, build_kernel, build_operator, build_young, load_config
from .errors import CapabilityError, ConfigError, DivergenceError, OrlipdeError
from .grid import GridDomain, GridFunction, ShiftVector, write_grid_function
from .kernels import verify_fundamental
from .parametrix import ParametrixOperator, contraction_profile
from .space import (
    characteristic_norm_value,
    dual_norm_lower_bound,
    inequality_suite,
    l1_norm,
    luxemburg_norm,
    modular,
    mollify,
    orlicz_norm,
    shift_modulus,
)
from .young import boyd_indices, check_delta2


def _fmt(x):
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float) and (x != x):  # NaN
        return "nan"
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".12g")
    return str(x)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# -- command handlers ----------------------------------------------------------


def _cmd_young(cfg, out):
    M = build_young(cfg.get("young"))
    vs = np.logspace(-2, 2, 81)
    N = M.complementary()
    _write_csv(out / "complementary.csv", ["v", "conjugate"], [(v, N(v)) for v in vs])
    try:
        bi = boyd_indices(M)
        _write_csv(
            out / "boyd.csv",
            ["alpha", "beta", "fit_residual", "note"],
            [(bi.alpha, bi.beta, bi.fit_residual, "ok")],
        )
        _write_csv(out / "boyd_trace.csv", ["t", "h_hat"], [tuple(r) for r in bi.h_samples])
    except OrlipdeError as exc:
        _write_csv(
            out / "boyd.csv",
            ["alpha", "beta", "fit_residual", "note"],
            [(float("nan"), float("nan"), float("nan"), type(exc).__name__)],
        )
    u_max = min(1e6, M.domain_cap / 2.0000001)
    rep = check_delta2(M, u0=1.0, u_max=u_max)
    verdict = "pass" if rep.satisfied else "fail"
    _write_csv(
        out / "delta2.csv",
        ["verdict", "k_hat", "u0", "u_max"],
        [(verdict, rep.k_hat, rep.u0_used, u_max)],
    )
    _write_csv(
        out / "delta2_trace.csv",
        ["u", "ratio"],
        [tuple(r) for r in rep.worst_ratio_trace[:: max(1, len(rep.worst_ratio_trace) // 40)]],
    )


def _cmd_norms(cfg, out):
    M = build_young(cfg.get("young"))
    seed = cfg.get_int("seed")
    domain = GridDomain(cfg.get_int("n"), cfg.get_int("grid.N"), cfg.get_float("d"))
    f, _ = build_field(cfg.get("f"), domain, restrict=False)
    g_spec = cfg.get("g")
    g = f if not g_spec else build_field(g_spec, domain, restrict=False)[0]
    rows = [
        ("modular", modular(f, M)),
        ("luxemburg", luxemburg_norm(f, M)),
        ("orlicz", orlicz_norm(f, M)),
        ("dual_lower_bound", dual_norm_lower_bound(f, M, trials=cfg.get_int("trials"), seed=seed)),
        ("l1", l1_norm(f)),
        ("sup", f.sup_norm()),
    ]
    values = np.unique(f.values)
    if values.size <= 2 and set(np.round(values, 12)) <= {0.0, 1.0}:
        mes = float(np.count_nonzero(f.values)) * domain.cell_volume
        formula = characteristic_norm_value(M, mes)
        amemiya = orlicz_norm(f, M)
        rows.append(("indicator_measure", mes))
        rows.append(("characteristic_formula", formula))
        rows.append(("formula_vs_amemiya", abs(formula - amemiya) / amemiya))
    _write_csv(out / "norms.csv", ["name", "value"], rows)
    rep = inequality_suite(f, g, M, seed=seed)
    _write_csv(
        out / "inequalities.csv",
        ["name", "lhs", "rhs", "violated"],
        [(r.name, r.lhs, r.rhs, r.violated) for r in rep.rows],
    )
    deltas = [
        ShiftVector.from_cells(domain, [c] + [0] * (domain.n - 1))
        for c in cfg.get_floats("deltas")
    ]
    _write_csv(out / "shift_modulus.csv", ["delta", "modulus"], shift_modulus(f, M, deltas))


def _cmd_solve(cfg, out, contraction_only=False):
    M = build_young(cfg.get("young"))
    L = build_operator(cfg)
    seed = cfg.get_int("seed")
    n = cfg.get_int("n")
    x0 = cfg.get_floats("x0") or [0.0] * n
    radii = cfg.get_floats("radii")
    probes = cfg.get_int("probes")
    prof = contraction_profile(L, x0, radii=radii, probes=probes, seed=seed, N=32, M=M)
    _write_csv(
        out / "sigma_profile.csv",
        ["r", "sigma_hat"],
        list(zip(prof.radii, prof.sigma_hat)),
    )
    if contraction_only:
        return 0
    r = cfg.get_float("r")
    tol = cfg.get_float("tol")
    P = ParametrixOperator(L, x0, r, N=cfg.get_int("grid.N"), M=M)
    if cfg.get("kernel") != "auto":
        P.J = build_kernel(cfg.get("kernel"), P.L_frozen)
    f, reference = build_field(cfg.get("f"), P.domain, operator=L)
    sigma_r = prof.sigma_hat[min(range(len(radii)), key=lambda i: abs(radii[i] - r))]
    if sigma_r >= 1.0:
        print(f"warning: contraction estimate {sigma_r:.3g} >= 1 at r={r:g}", file=sys.stderr)
    code = 0
    try:
        u, rep = P.solve(f, tol=tol, k_max=cfg.get_int("k_max"))
    except DivergenceError as exc:
        rep = exc.report
        u = None
        code = 3
    _write_csv(
        out / "iterations.csv",
        ["k", "weighted_norm", "step_norm", "residual"],
        [(row.k, row.norm, row.step, row.residual) for row in rep.iterations],
    )
    summary = [
        ("converged", rep.converged),
        ("iterations", len(rep.iterations)),
        ("empirical_ratio", rep.empirical_ratio),
        ("final_residual", rep.final_residual),
        ("certificate", rep.certificate),
        ("sign_flipped", rep.sign_flipped),
        ("sigma_hat_at_r", sigma_r),
    ]
    if reference is not None and u is not None:
        summary.append(("manufactured_error", P.solution_error(rep.sigma, reference)))
    _write_csv(out / "summary.csv", ["name", "value"], summary)
    if u is not None:
        write_grid_function(u, out / "solution.grid")
    if code == 0 and not (rep.converged and rep.certificate <= 2 * tol):
        code = 3
    return code


def _cmd_mollify(cfg, out):
    M = build_young(cfg.get("young"))
    domain = GridDomain(cfg.get_int("n"), cfg.get_int("grid.N"), cfg.get_float("d"))
    f, _ = build_field(cfg.get("f"), domain, restrict=False)
    eps = cfg.get_float("eps")
    smoothed = mollify(f, eps)
    write_grid_function(smoothed, out / "mollified.grid")
    _write_csv(
        out / "summary.csv",
        ["name", "value"],
        [
            ("eps", eps),
            ("sup_change", (smoothed - f).sup_norm()),
            ("gauge_change", luxemburg_norm(smoothed - f, M)),
        ],
    )


def _cmd_shift(cfg, out):
    M = build_young(cfg.get("young"))
    domain = GridDomain(cfg.get_int("n"), cfg.get_int("grid.N"), cfg.get_float("d"))
    f, _ = build_field(cfg.get("f"), domain, restrict=False)
    deltas = [
        ShiftVector.from_cells(domain, [c] + [0] * (domain.n - 1))
        for c in cfg.get_floats("deltas")
    ]
    _write_csv(out / "shift_modulus.csv", ["delta", "modulus"], shift_modulus(f, M, deltas))


_HANDLERS = {
    "young": _cmd_young,
    "norms": _cmd_norms,
    "solve": _cmd_solve,
    "contraction": lambda cfg, out: _cmd_solve(cfg, out, contraction_only=True),
    "mollify": _cmd_mollify,
    "shift": _cmd_shift,
}


def run_config(command, config_path, out_root, seed=None, force=False):
    """Run one experiment; returns the process exit code."""
    t0 = time.time()
    try:
        overrides = {} if seed is None else {"seed": seed}
        cfg = load_config(config_path, "solve" if command == "contraction" else command, overrides)
        digest = cfg.hash()
        out = Path(out_root) / digest[:12]
        if out.exists() and not force:
            raise ConfigError(f"output directory {out} exists; rerun with --force")
        out.mkdir(parents=True, exist_ok=True)
        for stale in out.iterdir():
            stale.unlink()
        (out / "resolved.cfg").write_text(cfg.render())
        handler = _HANDLERS[command]
        code = handler(cfg, out) or 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CapabilityError as exc:
        print(f"capability error: {exc}", file=sys.stderr)
        return 4
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return 3
    outputs = {
        p.name: _sha256(p) for p in sorted(out.iterdir()) if p.name != "manifest.json"
    }
    manifest = {
        "config_hash": digest,
        "seed": cfg.get_int("seed"),
        "version": __version__,
        "outputs": outputs,
        "timings": {"total_s": round(time.time() - t0, 6)},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"{command}: wrote {out} ({len(outputs)} files)")
    return code


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="orlipde", description="Orlicz-space calculus and local elliptic solves"
    )
    parser.add_argument("command", choices=sorted(_HANDLERS))
    parser.add_argument("--config", nargs="+", required=True, help="config file path(s)")
    parser.add_argument("--out", default="runs", help="output root directory")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--force", action="store_true", help="allow overwriting a run directory")
    parser.add_argument("--jobs", type=int, default=1, help="parallel workers across config files")
    args = parser.parse_args(argv)

    if args.jobs > 1 and len(args.config) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
            codes = list(
                pool.map(
                    _run_star,
                    [(args.command, path, args.out, args.seed, args.force) for path in args.config],
                )
            )
    else:
        codes = [
            run_config(args.command, path, args.out, seed=args.seed, force=args.force)
            for path in args.config
        ]
    return max(codes)


def _run_star(params):
    return run_config(*params)


if __name__ == "__main__":
    sys.exit(main())
