"""Command-line entry point.

Every subcommand reads a JSON config, validates it before any compute starts,
and writes CSV results plus a JSON manifest (tool version, timestamp, config
hash) into the output directory.  Flags can be overridden by environment
variables with the CRITSENSE_ prefix (CRITSENSE_SEED, CRITSENSE_THREADS,
CRITSENSE_OUT, CRITSENSE_MAX_NCUTOFF).
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, correlators, evolution, information, model, scaling
from .model import ModelParams, g_critical, params_at


class ConfigError(ValueError):
    """Invalid or incomplete run configuration."""


_COMMON_KEYS = {
    "omega": float, "kappa": float, "g": float, "eta": float, "etas": list,
    "efficiency": float, "n_cutoff": int, "seed": int, "t_final": float,
    "dt": float, "n_traj": int, "method": str, "n_grid": int,
    "delta_omega": float, "delta_theta": float, "t_grid": list,
    "s_max": float, "tau_max": float, "n_points": int, "figure": str,
    "x_exponent": float, "y_exponent": float, "curves_csv": str,
}


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    for key, val in cfg.items():
        if key not in _COMMON_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        want = _COMMON_KEYS[key]
        if want is float and isinstance(val, int):
            continue
        if not isinstance(val, want):
            raise ConfigError(f"config key {key!r} must be {want.__name__}")
    return cfg


def _config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def _manifest(out_dir: Path, name: str, cfg: dict, extra: dict | None = None) -> None:
    payload = {
        "tool": "critsense",
        "version": __version__,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "command": name,
        "config": cfg,
        "config_hash": _config_hash(cfg),
    }
    if extra:
        payload.update(extra)
    (out_dir / f"{name}_manifest.json").write_text(json.dumps(payload, indent=2))


def _params_from_config(cfg: dict, eta: float | None = None,
                        max_ncutoff: int | None = None) -> ModelParams:
    eta = eta if eta is not None else cfg.get("eta")
    if eta is None:
        raise ConfigError("config must set 'eta' (or 'etas')")
    g = cfg.get("g")
    omega = cfg.get("omega", 1.0)
    kappa = cfg.get("kappa", 0.1)
    if g is None:
        g = g_critical(omega, kappa)
    n_cutoff = cfg.get("n_cutoff")
    if max_ncutoff is not None and n_cutoff is not None and n_cutoff > max_ncutoff:
        raise ConfigError(f"n_cutoff {n_cutoff} exceeds --max-ncutoff {max_ncutoff}")
    return params_at(g=float(g), eta=float(eta), omega=omega, kappa=kappa,
                     efficiency=cfg.get("efficiency", 1.0), n_cutoff=n_cutoff)


def _etas(cfg: dict) -> list[float]:
    if "etas" in cfg:
        return [float(e) for e in cfg["etas"]]
    if "eta" in cfg:
        return [float(cfg["eta"])]
    raise ConfigError("config must set 'eta' or 'etas'")


def _write_csv(path: Path, header: str, rows: list[str]) -> None:
    path.write_text(header + "\n" + "\n".join(rows) + ("\n" if rows else ""))


# ---------------------------------------------------------------------------
# Subcommands


def _cmd_steady_state(cfg, out_dir, args):
    rows = []
    for eta in _etas(cfg):
        p = _params_from_config(cfg, eta, args.max_ncutoff)
        rho, p_used = evolution.steady_state(p)
        n_op = model.number_operator(p_used)
        nbar = float(np.real(np.trace(n_op @ rho)))
        resid = evolution.steady_residual(p_used, rho)
        rows.append(f"{p_used.eta:.10g},{p_used.g:.10g},{p_used.kappa:.10g},"
                    f"occupation,{nbar:.12g},{resid:.3g},{p_used.n_cutoff}")
    _write_csv(out_dir / "steady_state.csv",
               "eta,g,kappa,quantity,value,residual,n_cutoff", rows)
    _manifest(out_dir, "steady-state", cfg)
    return 0


def _cmd_gap(cfg, out_dir, args):
    rows = []
    gaps, etas = [], []
    for eta in _etas(cfg):
        p = _params_from_config(cfg, eta, args.max_ncutoff)
        res = evolution.liouvillian_gap(p)
        rows.append(f"{p.eta:.10g},{p.g:.10g},{p.kappa:.10g},gap,"
                    f"{res.gap:.12g},{res.residual:.3g},{p.n_cutoff}")
        gaps.append(res.gap)
        etas.append(eta)
    _write_csv(out_dir / "gap.csv",
               "eta,g,kappa,quantity,value,residual,n_cutoff", rows)
    extra = {}
    if len(etas) >= 4:
        expo, err, r2 = scaling.fit_power_law(np.array(etas), np.array(gaps))
        extra["fitted_exponent"] = {"value": expo, "stderr": err, "r_squared": r2}
    _manifest(out_dir, "gap", cfg, extra)
    return 0


def _cmd_propagate(cfg, out_dir, args):
    if "t_final" not in cfg:
        raise ConfigError("propagate requires 't_final'")
    p = _params_from_config(cfg, max_ncutoff=args.max_ncutoff)
    psi = model.vacuum_down_state(p)
    rho0 = np.outer(psi, psi.conj())
    res = evolution.propagate(rho0, p, float(cfg["t_final"]),
                              dt=cfg.get("dt"), n_points=cfg.get("n_points", 51))
    n_op = model.number_operator(p)
    rows = [f"{p.eta:.10g},{p.g:.10g},{p.kappa:.10g},occupation_t={t:.10g},"
            f"{v:.12g},{res.trace_drift:.3g},{p.n_cutoff}"
            for t, v in zip(res.times, res.expectations(n_op))]
    _write_csv(out_dir / "propagate.csv",
               "eta,g,kappa,quantity,value,residual,n_cutoff", rows)
    _manifest(out_dir, "propagate", cfg)
    return 0


def _qfi_curve(cfg, p, method):
    t_final = float(cfg["t_final"])
    if method == "generalized-me":
        t_grid = np.array(cfg["t_grid"], float) if "t_grid" in cfg else None
        res = information.global_qfi_generalized_me(
            p, t_final, dt=cfg.get("dt"),
            delta_theta=cfg.get("delta_theta"), t_grid=t_grid)
    elif method == "correlator":
        res = information.global_qfi_correlator(
            p, t_final, n_grid=cfg.get("n_grid", 40), dt=cfg.get("dt"))
    else:
        raise ConfigError(f"unknown qfi method {method!r}")
    return res


def _cmd_qfi(cfg, out_dir, args):
    if "t_final" not in cfg:
        raise ConfigError("qfi requires 't_final'")
    method = cfg.get("method", "generalized-me")
    rows = []
    for eta in _etas(cfg):
        p = _params_from_config(cfg, eta, args.max_ncutoff)
        res = _qfi_curve(cfg, p, method)
        delta = res.delta_theta if res.delta_theta is not None else ""
        for t, v in zip(res.t_grid, res.qfi):
            rows.append(f"{p.eta:.10g},{p.g:.10g},{p.kappa:.10g},{t:.10g},"
                        f"{v:.12g},0,{res.method},0,{delta}")
    _write_csv(out_dir / "qfi.csv",
               "eta,g,kappa,t,value,stderr,method,n_traj,delta", rows)
    _manifest(out_dir, "qfi", cfg)
    return 0


def _cmd_fi(cfg, out_dir, args):
    for key in ("t_final", "dt", "n_traj"):
        if key not in cfg:
            raise ConfigError(f"fi requires {key!r}")
    n_traj = int(cfg["n_traj"])
    if n_traj < 100:
        raise ConfigError("fi requires n_traj >= 100")
    rows = []
    for eta in _etas(cfg):
        p = _params_from_config(cfg, eta, args.max_ncutoff)
        est = information.fi_photon_counting(
            p, float(cfg["t_final"]), float(cfg["dt"]), n_traj,
            delta_omega=cfg.get("delta_omega"), master_seed=args.seed,
            threads=args.threads, keep_scores=False)
        for t, v, s in zip(est.t_grid, est.fi, est.stderr):
            rows.append(f"{p.eta:.10g},{p.g:.10g},{p.kappa:.10g},{t:.10g},"
                        f"{v:.12g},{s:.12g},photon-counting,{n_traj},"
                        f"{est.delta_omega:.6g}")
    _write_csv(out_dir / "fi.csv",
               "eta,g,kappa,t,value,stderr,method,n_traj,delta", rows)
    _manifest(out_dir, "fi", cfg)
    return 0


def _cmd_correlator(cfg, out_dir, args):
    chunks = []
    for eta in _etas(cfg):
        p = _params_from_config(cfg, eta, args.max_ncutoff)
        tau_max = float(cfg.get("tau_max", 2.0 * eta / p.kappa))
        s_max = float(cfg.get("s_max", eta / p.kappa))
        n_points = int(cfg.get("n_points", 16))
        tau_grid = np.linspace(0.0, tau_max, n_points)
        s_grid = np.linspace(0.0, s_max, n_points)
        grid = correlators.structure_factor_dynamic(p, None, tau_grid, s_grid)
        chunks.append(correlators.grid_to_csv(grid, p))
    header, *_ = chunks[0].splitlines()
    rows = [line for chunk in chunks for line in chunk.splitlines()[1:]]
    _write_csv(out_dir / "correlator.csv", header, rows)
    _manifest(out_dir, "correlator", cfg)
    return 0


def _read_curves_csv(path: str):
    """Read an information CSV (eta,...,t,value,...) into per-eta curves."""
    curves = {}
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        try:
            i_eta, i_t, i_v = (header.index(k) for k in ("eta", "t", "value"))
        except ValueError as exc:
            raise ConfigError(f"{path}: missing eta/t/value columns") from exc
        for line in fh:
            parts = line.strip().split(",")
            if len(parts) <= max(i_eta, i_t, i_v):
                continue
            eta = float(parts[i_eta])
            curves.setdefault(eta, []).append((float(parts[i_t]), float(parts[i_v])))
    out = []
    for eta, pts in sorted(curves.items()):
        pts.sort()
        ts = np.array([t for t, _ in pts])
        vs = np.array([v for _, v in pts])
        keep = (ts > 0) & (vs > 0)
        out.append((eta, ts[keep], vs[keep]))
    return out


def _cmd_collapse(cfg, out_dir, args):
    if "curves_csv" not in cfg:
        raise ConfigError("collapse requires 'curves_csv'")
    x_exp = float(cfg.get("x_exponent", 1.0))
    y_exp = float(cfg.get("y_exponent", 2.0))
    curves = _read_curves_csv(cfg["curves_csv"])
    if len(curves) < 2:
        raise ConfigError("collapse needs curves for at least two eta values")
    ds = scaling.ScalingDataset(curves=curves)
    quality = scaling.collapse_quality(ds, x_exp, y_exp)

    import matplotlib
    matplotlib.use("svg")
    import matplotlib.pyplot as plt
    fig, ax = plt.subplots(figsize=(5, 4))
    for eta, ts, vs in curves:
        ax.loglog(ts / eta**x_exp, vs / eta**y_exp, label=f"eta={eta:g}")
    ax.set_xlabel(f"t / eta^{x_exp:g}")
    ax.set_ylabel(f"value / eta^{y_exp:g}")
    ax.set_title(f"collapse quality = {quality:.3g}")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_dir / "collapse.svg")
    plt.close(fig)

    (out_dir / "collapse.json").write_text(json.dumps({
        "x_exponent": x_exp, "y_exponent": y_exp, "quality": quality}, indent=2))
    _manifest(out_dir, "collapse", cfg, {"quality": quality})
    return 0


_FIGURE_PRESETS = {
    # Desk-scale stand-ins for the headline figures: reduced sizes and
    # trajectory counts, recorded in the manifest.
    "fig2": {"kind": "qfi", "etas": [5.0, 10.0, 20.0], "t_factor": 5.0},
    "fig3": {"kind": "fi", "etas": [5.0, 10.0], "t_factor": 5.0, "n_traj": 2000},
    "fig5": {"kind": "gap+occupation", "etas": [5.0, 10.0, 20.0, 40.0]},
    "fig8": {"kind": "structure-factor", "etas": [10.0, 20.0, 40.0]},
}


def _cmd_reproduce_figure(cfg, out_dir, args):
    target = cfg.get("figure")
    if target not in _FIGURE_PRESETS:
        raise ConfigError(f"figure must be one of {sorted(_FIGURE_PRESETS)}")
    preset = dict(_FIGURE_PRESETS[target])
    kappa = cfg.get("kappa", 0.1)
    omega = cfg.get("omega", 1.0)
    etas = cfg.get("etas", preset["etas"])
    base = {"omega": omega, "kappa": kappa, "etas": [float(e) for e in etas]}

    if preset["kind"] == "qfi":
        sub = dict(base, t_final=preset["t_factor"] * max(etas) / kappa,
                   method="generalized-me")
        _cmd_qfi(sub, out_dir, args)
        sub_collapse = {"curves_csv": str(out_dir / "qfi.csv"),
                        "x_exponent": 1.0, "y_exponent": 2.0}
        _cmd_collapse(sub_collapse, out_dir, args)
    elif preset["kind"] == "fi":
        p0 = params_at(g=g_critical(omega, kappa), eta=min(etas), omega=omega,
                       kappa=kappa)
        dt = cfg.get("dt", 0.005 / kappa / p0.n_cutoff)
        sub = dict(base, t_final=preset["t_factor"] * max(etas) / kappa,
                   dt=float(dt), n_traj=int(cfg.get("n_traj", preset["n_traj"])))
        _cmd_fi(sub, out_dir, args)
        sub_collapse = {"curves_csv": str(out_dir / "fi.csv"),
                        "x_exponent": 1.0, "y_exponent": 1.0}
        _cmd_collapse(sub_collapse, out_dir, args)
    elif preset["kind"] == "gap+occupation":
        _cmd_gap(base, out_dir, args)
        _cmd_steady_state(base, out_dir, args)
    else:  # structure-factor
        rows = []
        for eta in base["etas"]:
            p = params_at(g=g_critical(omega, kappa), eta=eta, omega=omega,
                          kappa=kappa)
            s_grid = np.linspace(0.0, eta / kappa, 24)
            s_used, vals, p_used = correlators.structure_factor_stationary(p, s_grid)
            rows += [f"{p_used.eta:.10g},{p_used.g:.10g},{s:.10g},0,"
                     f"{v:.12g},0" for s, v in zip(s_used, vals)]
        _write_csv(out_dir / "structure_factor.csv",
                   "eta,g,tau,s,re_value,im_value", rows)
    _manifest(out_dir, f"reproduce-{target}", cfg,
              {"scale_down": "desk-scale sizes and trajectory counts"})
    return 0


_COMMANDS = {
    "steady-state": _cmd_steady_state,
    "gap": _cmd_gap,
    "propagate": _cmd_propagate,
    "qfi": _cmd_qfi,
    "fi": _cmd_fi,
    "correlator": _cmd_correlator,
    "collapse": _cmd_collapse,
    "reproduce-figure": _cmd_reproduce_figure,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="critsense",
        description="Criticality-enhanced sensing laboratory for the open "
                    "Rabi model")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", help="JSON config path")
    parser.add_argument("--out", default=os.environ.get("CRITSENSE_OUT", "."),
                        help="output directory")
    parser.add_argument("--threads", type=int,
                        default=int(os.environ.get("CRITSENSE_THREADS", "1")))
    parser.add_argument("--seed", type=int,
                        default=int(os.environ.get("CRITSENSE_SEED", "0")))
    parser.add_argument("--max-ncutoff", type=int,
                        default=int(os.environ.get("CRITSENSE_MAX_NCUTOFF",
                                                   str(model.DEFAULT_MAX_CUTOFF))))
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _load_config(args.config)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](cfg, out_dir, args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
