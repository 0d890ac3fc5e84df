"""Command-line front end: ``optoring <command> --config FILE [options]``.

Exit codes: 0 success, 2 configuration error, 3 every grid point unstable,
4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, load_config, params_to_dict
from .elimination import phase_matched_phases, two_tone_squeezing_model
from .errors import DomainError, NumericalError, SolverError
from .meanfield import solve_mean_field
from .model import UNIT_CONVENTION, validate_regime
from .ring import RingParams, current_range
from . import sweep

log = logging.getLogger("optoring")

EXIT_OK, EXIT_CONFIG, EXIT_UNSTABLE, EXIT_NUMERICAL = 0, 2, 3, 4

COMMANDS = ("hoppings", "rates", "phase-diagram", "ridge", "coherence", "benchmark", "squeezing")
DEFAULT_GRIDS = {
    "hoppings": "delta_tilde:-1.5:1.5:61",
    "phase-diagram": "J_over_gamma_c:0.1:4:40,delta_tilde:-1.5:1.5:61",
    "benchmark": "J_over_gamma_c:0.25:4:10,delta_tilde:-1.5:1.5:10",
}
DEFAULT_J_LISTS = {
    "rates": [0.5, 1.0, 2.0, 4.0],
    "ridge": [0.25, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0],
    "coherence": [float(v) for v in np.round(np.linspace(0.5, 4.0, 15), 12)],
}
DEFAULT_DERIVED = {"coherence": ("delta_tilde=-J-omega_m",)}
PLOT_COLUMNS = {
    "hoppings": "J_p_plus[omega_m]",
    "phase-diagram": "abs_Q_C[omega_m*gamma_m]",
    "benchmark": "delta[1]",
    "ridge": "Q_C_eff[omega_m*gamma_m]",
    "coherence": "abs_g1_p2_eff[1]",
    "rates": "loss_Gamma_k_at_plus_omega_m[omega_m]",
}


def format_value(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.12g" % float(v)


def write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    path.write_text(buf.getvalue(), encoding="utf-8")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="optoring", description="Phonon heat transport in optomechanical lattices.")
    parser.add_argument("--version", action="version", version=f"optoring {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON configuration file")
        p.add_argument("--grid", help="sweep axes as name:min:max:steps[,name:min:max:steps]")
        p.add_argument("--derived", action="append", default=None,
                       help="derived detuning constraint, e.g. 'delta_tilde=-J-omega_m'")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--svg", action="store_true", help="also write an SVG plot")
        p.add_argument("--threads", type=int, default=None, help="worker processes")
    return parser


def resolve_threads(flag) -> int:
    env = os.environ.get("OPTORING_THREADS")
    if env:
        try:
            value = int(env)
        except ValueError as exc:
            raise ConfigError(f"OPTORING_THREADS must be an integer, got {env!r}") from exc
    elif flag is not None:
        value = flag
    else:
        value = os.cpu_count() or 1
    if value < 1:
        raise ConfigError("thread count must be >= 1")
    return value


def base_ring(cfg) -> RingParams:
    params = cfg.params
    mf = solve_mean_field(params)
    for w in validate_regime(params, mf):
        log.warning("%s", w)
    try:
        return RingParams.from_model(params, mf)
    except DomainError as exc:
        raise ConfigError(f"this command needs a uniform ring: {exc}") from exc


def resolve_grid(args, cfg):
    derived = tuple(args.derived) if args.derived else None
    try:
        if args.grid:
            return sweep.parse_grid(args.grid, derived or DEFAULT_DERIVED.get(args.command, ()))
        grid = sweep.grid_from_run(cfg.run) if args.command in DEFAULT_GRIDS else None
        if grid is not None:
            if derived:
                grid = sweep.GridSpec(grid.axes, derived)
            return grid
        if args.command in DEFAULT_GRIDS:
            return sweep.parse_grid(DEFAULT_GRIDS[args.command], derived or ())
    except (DomainError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid grid: {exc}") from exc
    return None


def j_list_points(args, cfg):
    values = cfg.run.get("J_over_gamma_c", DEFAULT_J_LISTS[args.command])
    derived = tuple(args.derived) if args.derived else DEFAULT_DERIVED.get(args.command, ())
    for d in derived:
        if d not in sweep.DERIVED:
            raise ConfigError(f"unknown derived constraint {d!r}")
    return [{"J_over_gamma_c": float(v)} for v in values], derived


def run_sweep(args, cfg, threads):
    base = base_ring(cfg)
    grid = resolve_grid(args, cfg)
    if grid is not None:
        points, derived, grid_desc = grid.points(), grid.derived, grid.describe()
    else:
        points, derived = j_list_points(args, cfg)
        grid_desc = {"J_over_gamma_c": [p["J_over_gamma_c"] for p in points],
                     "derived": list(derived)}
    try:
        rps = [sweep.apply_point(base, p, derived) for p in points]
    except DomainError as exc:
        raise ConfigError(f"grid point outside the parameter domain: {exc}") from exc
    kwargs = {}
    name = args.command
    if name == "ridge":
        ridge = cfg.run.get("ridge", {})
        kwargs = {"step": float(ridge.get("step", sweep.RIDGE_STEP)),
                  "xatol": float(ridge.get("xatol", sweep.RIDGE_XATOL)),
                  "window": float(ridge.get("window", sweep.RIDGE_WINDOW))}
        header = sweep.ridge_header()
    else:
        header = {"hoppings": sweep.HOPPINGS_HEADER, "phase-diagram": sweep.PHASE_HEADER,
                  "benchmark": sweep.BENCHMARK_HEADER, "rates": sweep.RATES_HEADER,
                  "coherence": sweep.coherence_header(base.L)}[name]
    results = sweep.run_points(name, rps, threads, **kwargs)
    rows = [row for rws, _ in results for row in rws]
    statuses = [status for _, status in results]
    meta = {"grid": grid_desc, "base_ring": {k: getattr(base, k) for k in base.__dataclass_fields__},
            "current_distances": current_range(base.L).tolist()}
    if name == "ridge":
        meta["ridge"] = kwargs
    return header, rows, statuses, meta


def run_squeezing(args, cfg):
    sq = cfg.run.get("squeezing")
    if not sq:
        raise ConfigError("squeezing needs run.squeezing with G_plus and G_minus")
    params = cfg.params
    try:
        G_plus, G_minus = float(sq["G_plus"]), float(sq["G_minus"])
        nu = float(sq.get("nu", 0.0))
        probe = two_tone_squeezing_model(params, G_plus, G_minus, 0.0, 0.0)
    except (DomainError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid squeezing parameters: {exc}") from exc
    theta, varphi = phase_matched_phases(probe.Omega, nu)
    model = two_tone_squeezing_model(params, G_plus, G_minus, theta, varphi)
    K, P = model.beamsplitter_coeffs, model.pairing_coeffs
    header = ["p[sites]", "abs_beamsplitter[omega_m]", "arg_beamsplitter[rad]",
              "abs_pairing[omega_m]", "arg_pairing[rad]", "abs_Omega[omega_m]", "status"]
    rows = []
    for p in range(params.L // 2 + 1 if params.lattice.topology_tag == "ring" else params.L):
        rows.append([p, abs(K[p, 0]), float(np.angle(K[p, 0])), abs(P[p, 0]),
                     float(np.angle(P[p, 0])), abs(model.Omega[p, 0]), "ok"])
    meta = {"squeezing": {"G_plus": G_plus, "G_minus": G_minus, "nu": nu, "r": model.r,
                          "eta": model.eta, "theta": theta.tolist(), "varphi": varphi.tolist()}}
    return header, rows, ["ok"] * len(rows), meta


def write_svg(path: Path, command: str, header, rows, grid_names) -> None:
    """Best-effort plot; failures are logged and never abort the run."""
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        col = PLOT_COLUMNS.get(command)
        if command == "squeezing":
            col = "abs_pairing[omega_m]"
        j = header.index(col)
        vals = np.array([float(r[j]) for r in rows])
        fig, ax = plt.subplots(figsize=(6, 4))
        if command == "hoppings":
            x = np.array([float(r[header.index("delta_tilde[omega_m]")]) for r in rows])
            p = np.array([int(r[header.index("p[sites]")]) for r in rows])
            L = p.max() + 1
            # heatmap over (delta_tilde, p) at the first swept J
            jcol = np.array([float(r[header.index("J_over_gamma_c[1]")]) for r in rows])
            keep = jcol == jcol[0]
            x, vals = x[keep], vals[keep]
            img = vals.reshape(-1, L)
            mesh = ax.imshow(img.T, aspect="auto", origin="lower", cmap="RdBu_r",
                             extent=[x.min(), x.max(), -0.5, L - 0.5])
            ax.set_xlabel("delta_tilde / omega_m")
            ax.set_ylabel("p")
            fig.colorbar(mesh, label=col)
        elif grid_names and len(grid_names) == 2:
            cols = {"J_over_gamma_c": "J_over_gamma_c[1]", "delta_tilde": "delta_tilde[omega_m]",
                    "phi": "phi[rad]", "nbar": "nbar[1]", "g": "g[omega_m]"}
            a = np.array([float(r[header.index(cols[grid_names[0]])]) for r in rows])
            b = np.array([float(r[header.index(cols[grid_names[1]])]) for r in rows])
            na, nb = len(np.unique(a)), len(np.unique(b))
            img = np.ma.masked_invalid(vals.reshape(na, nb))
            cmap = plt.get_cmap("viridis").copy()
            cmap.set_bad("0.7")
            mesh = ax.imshow(img, aspect="auto", origin="lower", cmap=cmap,
                             extent=[b.min(), b.max(), a.min(), a.max()])
            ax.set_xlabel(grid_names[1])
            ax.set_ylabel(grid_names[0])
            fig.colorbar(mesh, label=col)
        else:
            xcol = "p[sites]" if command == "squeezing" else (
                "k[rad]" if command == "rates" else "J_over_gamma_c[1]")
            if grid_names and command not in ("squeezing", "rates"):
                xcol = {"delta_tilde": "delta_tilde[omega_m]", "phi": "phi[rad]",
                        "nbar": "nbar[1]", "g": "g[omega_m]"}.get(grid_names[0], xcol)
            x = np.array([float(r[header.index(xcol)]) for r in rows])
            ax.plot(x, vals, "o-")
            ax.set_xlabel(xcol)
            ax.set_ylabel(col)
        ax.set_title(command)
        fig.tight_layout()
        fig.savefig(path, format="svg")
        plt.close(fig)
    except Exception as exc:  # presentation only
        log.warning("SVG generation failed: %s", exc)


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    started = time.time()
    try:
        cfg = load_config(args.config)
        threads = resolve_threads(args.threads)
        if args.command == "squeezing":
            header, rows, statuses, meta = run_squeezing(args, cfg)
            grid_names = None
        else:
            header, rows, statuses, meta = run_sweep(args, cfg, threads)
            grid_names = [a["name"] for a in meta["grid"]["axes"]] if "axes" in meta["grid"] else None
    except ConfigError as exc:
        print(f"optoring: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, SolverError) as exc:
        print(f"optoring: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{args.command}.csv"
    write_csv(csv_path, header, rows)
    files = [csv_path.name]
    if args.svg:
        svg_path = out / f"{args.command}.svg"
        write_svg(svg_path, args.command, header, rows, grid_names)
        if svg_path.exists():
            files.append(svg_path.name)

    params = cfg.params
    manifest = {
        "tool": "optoring",
        "version": __version__,
        "command": args.command,
        "argv": list(argv) if argv is not None else sys.argv[1:],
        "flags": {"grid": args.grid, "derived": args.derived, "svg": args.svg, "threads": threads},
        "unit_convention": UNIT_CONVENTION,
        "config_snapshot": {**params_to_dict(params), "run": cfg.run},
        "disordered_omega_m": not params.uniform_omega_m,
        "point_status": statuses,
        "status_counts": {s: statuses.count(s) for s in sorted(set(statuses))},
        "outputs": files,
        "timing_seconds": round(time.time() - started, 3),
        **meta,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
    if statuses and all(s == "unstable" for s in statuses):
        print("optoring: every grid point is unstable", file=sys.stderr)
        return EXIT_UNSTABLE
    return EXIT_OK


def main(argv=None) -> None:
    logging.basicConfig(level=logging.WARNING, format="optoring: %(levelname)s: %(message)s")
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
