"""Scenario runner: one command per experiment, CSV/JSON artifacts out.

Each scenario reproduces one study end to end: it runs the relevant
simulation, writes ``trace.csv`` (and ``theory.csv`` where a closed form
exists), and finishes with ``summary.json`` carrying the resolved
configuration, theory-vs-simulation error metrics, and the wall time.  Plots
are deliberately out of scope; the CSVs are the interchange format.

Configuration is a flat JSON object; command-line flags override file
values, and scenario defaults fill the rest.  Exit codes: 0 on success, 2
for configuration/usage problems, 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import ensemble, gaussian_local, spectral, stationary, verify
from .errors import ConfigError, NotStationaryError, NumericalError
from .meanfield import DensityPiece, MixedDensity
from .spline_model import Monomial, PiecewisePoly, SineScaled, Weight

STATIONARY_ATOM = Weight((4.0 + np.sqrt(6.0)) / 5.0, (np.sqrt(6.0) - 1.0) / 5.0)

_COMMON_DEFAULTS = {
    "n": 100,
    "dt": 1e-3,
    "seed": 0,
    "out_dir": None,
}

_SCENARIO_DEFAULTS = {
    # slowest contraction rate at the stationary atom is ~0.019, so the
    # velocity-norm stop needs t ~ 900; the stiffest curvature on the start
    # box stays below ~5, leaving dt = 0.1 well inside the Euler limit
    "atoms": {
        "n": 1, "dt": 0.1, "t_end": 1000.0, "c0": 0.5, "h0": 0.5,
        "ground_truth": {"kind": "monomial", "a": 1.0, "p": 2},
        "record_every": 100,
    },
    "stability": {
        "n": 10_000, "t_end": 1.0, "sigma": 1e-3, "case": "unstable",
        "ground_truth": {"kind": "monomial", "a": 1.0, "p": 2},
        "record_every": 10,
    },
    # a k = 2 sine target relaxes at ~2 zeta_1 = 0.004, so the loss needs
    # t ~ 1200 to cross 1% of its start; dt = 0.1 keeps the Euler exponent
    # bias of the fastest mode near 0.4%
    "small-c": {
        "n": 100, "dt": 0.1, "t_end": 1200.0, "truncation": 10,
        "ground_truth": {"kind": "sine", "A": 1e-3, "k": 2},
        "record_every": 10,
    },
    "linearized": {
        "n": 1000, "t_end": 12.0, "truncation": 10_000,
        "h_lo": 0.3, "h_hi": 0.8,
        "ground_truth": {"kind": "monomial", "a": 0.5, "p": 2},
        "record_every": 10,
    },
    "gaussian": {
        "t_end": 1.0, "sigma": 1e-3,
        "c0": STATIONARY_ATOM.c, "h0": STATIONARY_ATOM.h,
        "ground_truth": {"kind": "monomial", "a": 1.0, "p": 2},
        "record_every": 10,
    },
    "stationary": {"m_max": 8},
    "spectral-table": {"count": 10},
    "verify": {"nystrom_n": 2000},
}

_ALLOWED_KEYS = {
    "scenario", "n", "dt", "t_end", "seed", "truncation", "ground_truth",
    "out_dir", "c0", "h0", "sigma", "case", "h_lo", "h_hi", "count",
    "m_max", "record_every", "nystrom_n",
}


def parse_ground_truth(d: dict):
    try:
        kind = d["kind"]
        if kind == "monomial":
            return Monomial(float(d["a"]), int(d["p"]))
        if kind == "sine":
            return SineScaled(float(d["A"]), int(d["k"]))
        if kind == "piecewise":
            return PiecewisePoly(
                tuple((float(lo), float(hi), tuple(float(v) for v in co))
                      for lo, hi, co in d["pieces"])
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad ground_truth descriptor: {exc}") from exc
    raise ConfigError(f"unknown ground_truth kind {d.get('kind')!r}")


def load_config(path) -> dict:
    """Flat JSON config object from a file; unknown keys are rejected."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"config parse error at line {exc.lineno}, column {exc.colno}: "
            f"{exc.msg}"
        ) from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a flat JSON object")
    unknown = set(data) - _ALLOWED_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return data


def resolve_config(scenario: str, file_cfg: dict, flag_cfg: dict) -> dict:
    """Scenario defaults, overridden by the file, overridden by flags."""
    if scenario not in _SCENARIO_DEFAULTS:
        raise ConfigError(f"unknown scenario {scenario!r}")
    cfg = dict(_COMMON_DEFAULTS)
    cfg.update(_SCENARIO_DEFAULTS[scenario])
    cfg.update({k: v for k, v in file_cfg.items() if k != "scenario"})
    cfg.update({k: v for k, v in flag_cfg.items() if v is not None})
    cfg["scenario"] = scenario
    if cfg.get("out_dir") is None:
        cfg["out_dir"] = f"runs/{scenario}"

    def positive(key):
        if key in cfg and cfg[key] is not None and not cfg[key] > 0:
            raise ConfigError(f"config field {key!r} must be positive")

    for key in ("n", "dt", "t_end", "truncation", "count", "m_max",
                "record_every", "nystrom_n"):
        positive(key)
    if "sigma" in cfg and cfg["sigma"] < 0:
        raise ConfigError("config field 'sigma' must be non-negative")
    if cfg.get("case") not in (None, "unstable", "stable"):
        raise ConfigError("config field 'case' must be 'unstable' or 'stable'")
    if "seed" in cfg:
        cfg["seed"] = int(cfg["seed"])
        if cfg["seed"] < 0:
            raise ConfigError("config field 'seed' must be non-negative")
    return cfg


def _write_csv(path, header: str, columns):
    data = np.column_stack(columns)
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in data:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def _write_summary(out, cfg, error_metrics, started):
    doc = {
        "scenario": cfg["scenario"],
        "config": {k: v for k, v in cfg.items() if k != "scenario"},
        "error_metrics": error_metrics,
        "wall_time_s": round(time.perf_counter() - started, 3),
    }
    with open(out / "summary.json", "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return doc


def _fit_log_slope(t, v):
    """Least-squares slope of log(v) against t; needs positive values."""
    mask = v > 0
    t, v = t[mask], np.log(v[mask])
    tm, vm = t.mean(), v.mean()
    return float(((t - tm) * (v - vm)).sum() / ((t - tm) ** 2).sum())


# ---------------------------------------------------------------------------
# scenario runners


def _run_atoms(cfg, out, started):
    truth = parse_ground_truth(cfg["ground_truth"])
    spec = ensemble.AtomInit(cfg["c0"], cfg["h0"], seed=cfg["seed"])
    trace = ensemble.simulate(
        spec, cfg["n"], truth, cfg["dt"], cfg["t_end"],
        record_every=cfg["record_every"], snapshots=True,
        stop_velocity=1e-8,
    )
    trace.to_csv(out / "trace.csv")
    c_fin = float(trace.snapshots[-1, 0, 0])
    h_fin = float(trace.snapshots[-1, 1, 0])
    dist = float(np.hypot(c_fin - STATIONARY_ATOM.c, h_fin - STATIONARY_ATOM.h))
    # the frozen region is reached only asymptotically, so membership is
    # distance to the set {h >= 1}, not a literal h >= 1
    if max(1.0 - h_fin, 0.0) <= 1e-4:
        basin = "right-of-one"
    elif dist <= 1e-4:
        basin = "stationary-atom"
    else:
        basin = "undecided"
    e_fin = ensemble.Ensemble(c=np.array([c_fin]), h=np.array([h_fin]))
    vc, vh = ensemble.velocities(e_fin, truth)
    metrics = {
        "final_weight": [c_fin, h_fin],
        "basin": basin,
        "distance_to_stationary_atom": dist,
        "final_velocity_norm": float(np.hypot(vc[0], vh[0])),
        "final_loss": float(trace.loss[-1]),
    }
    _write_summary(out, cfg, metrics, started)
    return 0


def _run_stability(cfg, out, started):
    truth = parse_ground_truth(cfg["ground_truth"])
    sigma = cfg["sigma"]
    if cfg["case"] == "unstable":
        center = STATIONARY_ATOM
        theory_rate = 2.0 * float(
            gaussian_local.curvature_matrix(center, truth)[1, 1]
        )
    else:
        # cloud nudged 6 sigma inside the domain: at h = 1 exactly, half
        # the particles would sit at h > 1 where the flow freezes them
        center = Weight(-1.0, 1.0 - 6.0 * sigma)
        theory_rate = -2.0 * abs(center.c) * float(truth(np.array([1.0]))[0])
    spec = ensemble.GaussianInit(center.c, center.h, sigma, seed=cfg["seed"])
    e = ensemble.init(spec, cfg["n"])
    dt, steps = cfg["dt"], int(round(cfg["t_end"] / cfg["dt"]))
    ts, ls, vs = [0.0], [ensemble.loss(e, truth)], [float(np.var(e.h))]
    for i in range(steps):
        e = ensemble.step(e, dt, truth)
        if (i + 1) % cfg["record_every"] == 0 or i + 1 == steps:
            ts.append(e.t)
            ls.append(ensemble.loss(e, truth))
            vs.append(float(np.var(e.h)))
    ts, ls, vs = np.array(ts), np.array(ls), np.array(vs)
    _write_csv(out / "trace.csv", "t,loss", (ts, ls))
    _write_csv(out / "variance.csv", "t,var_h", (ts, vs))
    theory = vs[0] * np.exp(theory_rate * ts)
    _write_csv(out / "theory.csv", "t,var_h", (ts, theory))
    fitted = _fit_log_slope(ts, vs)
    metrics = {
        "case": cfg["case"],
        "center": [center.c, center.h],
        "theory_rate": theory_rate,
        "fitted_rate": fitted,
        "rate_rel_error": abs(fitted - theory_rate) / abs(theory_rate),
    }
    _write_summary(out, cfg, metrics, started)
    return 0


def _run_small_c(cfg, out, started):
    truth = parse_ground_truth(cfg["ground_truth"])
    spec = ensemble.StratifiedInit(0.0, 1.0, c0=0.0, seed=cfg["seed"])
    trace = ensemble.simulate(
        spec, cfg["n"], truth, cfg["dt"], cfg["t_end"],
        record_every=cfg["record_every"],
    )
    trace.to_csv(out / "trace.csv")
    theory = spectral.small_output_loss(truth, trace.t, cfg["truncation"])
    _write_csv(out / "theory.csv", "t,loss", (trace.t, theory))
    window = trace.loss >= 0.01 * trace.loss[0]
    rel = np.abs(trace.loss[window] - theory[window]) / theory[window]
    metrics = {
        "initial_loss": float(trace.loss[0]),
        "window_t_max": float(trace.t[window][-1]),
        "max_rel_error_in_window": float(np.max(rel)),
    }
    _write_summary(out, cfg, metrics, started)
    return 0


def _run_linearized(cfg, out, started):
    truth = parse_ground_truth(cfg["ground_truth"])
    lo, hi = cfg["h_lo"], cfg["h_hi"]
    if not 0.0 <= lo < hi <= 1.0:
        raise ConfigError("need 0 <= h_lo < h_hi <= 1")
    spec = ensemble.StratifiedInit(lo, hi, c0=1.0, seed=cfg["seed"],
                                   knot_only=True)
    trace = ensemble.simulate(
        spec, cfg["n"], truth, cfg["dt"], cfg["t_end"],
        record_every=cfg["record_every"],
    )
    trace.to_csv(out / "trace.csv")
    # the start is the flat density raised to 1/(hi-lo) on [lo, hi]; its
    # perturbation from the full-support minimizer integrates to zero
    dp = MixedDensity(pieces=(
        DensityPiece(0.0, lo, poly=(-1.0,)),
        DensityPiece(lo, hi, poly=(1.0 / (hi - lo) - 1.0,)),
        DensityPiece(hi, 1.0, poly=(-1.0,)),
    ))
    theory = spectral.linearized_loss(dp, trace.t, cfg["truncation"])
    _write_csv(out / "theory.csv", "t,loss", (trace.t, theory))
    window = (trace.loss >= 1e-6) & (trace.loss <= trace.loss[0])
    rel = np.abs(trace.loss[window] - theory[window]) / theory[window]
    metrics = {
        "initial_loss": float(trace.loss[0]),
        "max_rel_error_in_window": float(np.max(rel)),
    }
    _write_summary(out, cfg, metrics, started)
    return 0


def _run_gaussian(cfg, out, started):
    truth = parse_ground_truth(cfg["ground_truth"])
    center = Weight(cfg["c0"], cfg["h0"])
    g0 = gaussian_local.GaussianState.isotropic(center, cfg["sigma"])
    traj = gaussian_local.evolve(
        g0, truth, cfg["dt"], cfg["t_end"], record_every=cfg["record_every"]
    )
    traj.to_csv(out / "trace.csv")
    metrics = {}
    try:
        verdict = gaussian_local.classify(center, truth)
        metrics["classification"] = verdict.to_json()
    except NotStationaryError as exc:
        metrics["classification"] = None
        metrics["drift_norm"] = exc.drift_norm
    h_hh = float(gaussian_local.curvature_matrix(center, truth)[1, 1])
    a_hh = traj.A[:, 1, 1]
    if a_hh[0] > 0 and a_hh[-1] > 0 and h_hh != 0:
        fitted = float(np.log(a_hh[-1] / a_hh[0]) / (traj.t[-1] - traj.t[0]))
        metrics["hh_rate_theory"] = 2.0 * h_hh
        metrics["hh_rate_fitted"] = fitted
        metrics["hh_rate_rel_error"] = abs(fitted - 2 * h_hh) / abs(2 * h_hh)
    _write_summary(out, cfg, metrics, started)
    return 0


def _run_stationary(cfg, out, started):
    truth = Monomial(1.0, 2)
    rows = []
    worst_res, worst_gap = 0.0, 0.0
    for m in range(1, cfg["m_max"] + 1):
        fam = stationary.equidistant_family(m)
        dens = fam.to_density()
        report = stationary.stationarity_residual(dens, truth)
        res = stationary.knot_residuals(fam)
        gap = float(np.max(np.abs(res - fam.delta_h**2 / 6.0)))
        worst_res = max(worst_res, report.residual)
        worst_gap = max(worst_gap, gap)
        rows.append({
            "M": m,
            "delta_h": fam.delta_h,
            "knots": list(fam.knots),
            "coefficients": list(fam.coefficients),
            "residual": report.residual,
            "mf_loss": stationary.family_loss(fam),
        })
    with open(out / "stationary.json", "w") as fh:
        json.dump(rows, fh, indent=2)
        fh.write("\n")
    metrics = {
        "max_stationarity_residual": worst_res,
        "max_knot_residual_gap": worst_gap,
    }
    _write_summary(out, cfg, metrics, started)
    return 0


def _run_spectral_table(cfg, out, started):
    rows = spectral.spectral_table(cfg["count"])
    arr = np.array(rows)
    _write_csv(out / "spectral_table.csv", "k,xi,zeta,mu,lambda",
               tuple(arr.T))
    metrics = {"count": cfg["count"]}
    _write_summary(out, cfg, metrics, started)
    return 0


def _run_verify(cfg, out, started):
    checks = verify.oracle_report(nystrom_n=cfg["nystrom_n"])
    ok = all(c["pass"] for c in checks)
    with open(out / "report.json", "w") as fh:
        json.dump({"pass": ok, "checks": checks}, fh, indent=2)
        fh.write("\n")
    metrics = {
        "checks_total": len(checks),
        "checks_failed": sum(not c["pass"] for c in checks),
    }
    _write_summary(out, cfg, metrics, started)
    if not ok:
        failed = [c["name"] for c in checks if not c["pass"]]
        print(f"verification failed: {failed}", file=sys.stderr)
        return 3
    return 0


_RUNNERS = {
    "atoms": _run_atoms,
    "stability": _run_stability,
    "small-c": _run_small_c,
    "linearized": _run_linearized,
    "gaussian": _run_gaussian,
    "stationary": _run_stationary,
    "spectral-table": _run_spectral_table,
    "verify": _run_verify,
}


def run(cfg: dict) -> int:
    """Execute a resolved configuration; returns the process exit code."""
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    return _RUNNERS[cfg["scenario"]](cfg, out, started)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="splineflow",
        description="particle and closed-form studies of the ramp-spline flow",
    )
    parser.add_argument("scenario", choices=sorted(_RUNNERS))
    parser.add_argument("--config", type=str, default=None,
                        help="flat JSON config file")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--n", type=int, default=None)
    parser.add_argument("--dt", type=float, default=None)
    parser.add_argument("--t-end", dest="t_end", type=float, default=None)
    parser.add_argument("--truncation", type=int, default=None)
    parser.add_argument("--out-dir", dest="out_dir", type=str, default=None)
    parser.add_argument("--count", type=int, default=None,
                        help="rows for spectral-table")
    parser.add_argument("--case", choices=["unstable", "stable"], default=None,
                        help="stability scenario variant")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    flag_cfg = {
        "seed": args.seed, "n": args.n, "dt": args.dt, "t_end": args.t_end,
        "truncation": args.truncation, "out_dir": args.out_dir,
        "count": args.count, "case": args.case,
    }
    try:
        file_cfg = load_config(args.config) if args.config else {}
        cfg = resolve_config(args.scenario, file_cfg, flag_cfg)
        return run(cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
