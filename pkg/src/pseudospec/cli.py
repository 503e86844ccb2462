"""Command-line interface: config-driven sweeps, crossings, traces, checks.

Configuration is a single YAML file; every key has a default and the full
resolved configuration is logged into the output directory on each run.

    model:
      n_sites: 4              # even for staggered gain/loss
      arrangement: longitudinal   # longitudinal | transversal | mixed
      mixed_split: 0.5        # mixed arrangement amplitude split
    point:                    # spectrum command only
      j_tilde: 0.5
      gamma_tilde: 0.0
    sweep:
      j_start: 0.02           # grid in [0, 1), strictly increasing
      j_stop: 0.98
      j_points: 97
      gamma_values: [0.0]
    crossings:
      gamma_values: null      # default: sweep.gamma_values
      avoided_threshold: null # report gap minima below this; null: 10x tol_gap
    trace:
      gamma_seed: 0.0         # line where protected seeds are collected
      step: 0.005
      max_points: 400
      j_window: null          # [lo, hi] to restrict seed locations
    oracle:
      samples: 10
    tolerances:
      tol_real: 1.0e-9
      tol_cluster: 1.0e-8
      tol_quality: 1.0e-6
      tol_gap: 1.0e-8
      overlap_ep: 0.9999
      overlap_dp: 0.9
      tol_ep_param: 1.0e-8
    output:
      directory: pseudospec-out

The sweep holds the energy scale fixed: delta = sqrt(1 - j_tilde^2),
coupling = j_tilde, so normalized and bare energies coincide.  Exit codes:
0 success, 1 failed oracle check, 2 configuration error, 3 numerical
failure (the message names the originating error).
"""

from __future__ import annotations

import argparse
import copy
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from .degeneracy import (
    CrossingEvent,
    check_zero_condition,
    classify_crossing,
    export_events,
    export_manifold,
    find_crossings_1d,
    trace_dp_manifold,
)
from .errors import (
    ConfigError,
    OddChain,
    PseudospecError,
    SingularMetric,
    SiteCountMismatch,
    UnresolvedClassification,
    ZeroScale,
)
from .model import (
    FixedScaleFamily,
    GainLossConfig,
    ModelConfig,
    build_hamiltonian,
    pseudo_metric_catalog,
)
from .oracle import (
    many_body_spectrum,
    occupation_table,
    single_particle_modes,
    u_index_oracle,
)
from .spectral import biorthogonal_eig, cluster_degeneracies
from .sweep import SweepPlan, export_sweep, indices_for_metric, run_sweep, uniform_grid

DEFAULTS: dict[str, Any] = {
    "model": {"n_sites": 4, "arrangement": "longitudinal", "mixed_split": 0.5},
    "point": {"j_tilde": 0.5, "gamma_tilde": 0.0},
    "sweep": {
        "j_start": 0.02,
        "j_stop": 0.98,
        "j_points": 97,
        "gamma_values": [0.0],
    },
    "crossings": {"gamma_values": None, "avoided_threshold": None},
    "trace": {"gamma_seed": 0.0, "step": 0.005, "max_points": 400, "j_window": None},
    "oracle": {"samples": 10},
    "tolerances": {
        "tol_real": 1e-9,
        "tol_cluster": 1e-8,
        "tol_quality": 1e-6,
        "tol_gap": 1e-8,
        "overlap_ep": 1.0 - 1e-4,
        "overlap_dp": 0.9,
        "tol_ep_param": 1e-8,
    },
    "output": {"directory": "pseudospec-out"},
}

_CONFIG_ERRORS = (ConfigError, OddChain, SiteCountMismatch, ZeroScale, SingularMetric)


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        dotted = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown configuration key: {dotted}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{dotted} must be a mapping")
            out[key] = _merge(base[key], value, f"{dotted}.")
        else:
            out[key] = value
    return out


def load_config(path: Optional[str]) -> dict:
    """Defaults deep-merged with the YAML file; unknown keys are rejected."""
    if path is None:
        return copy.deepcopy(DEFAULTS)
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        raw = yaml.safe_load(p.read_text(encoding="utf-8"))
    except yaml.YAMLError as err:
        raise ConfigError(f"config file {p} is not valid YAML: {err}")
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {p} must contain a mapping at top level")
    return _merge(DEFAULTS, raw)


def _number(cfg: dict, section: str, key: str) -> float:
    value = cfg[section][key]
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ConfigError(f"{section}.{key} must be a number, got {value!r}")
    return float(value)


def _positive(cfg: dict, section: str, key: str) -> float:
    value = _number(cfg, section, key)
    if value <= 0:
        raise ConfigError(f"{section}.{key} must be positive, got {value}")
    return value


def _validate(cfg: dict) -> dict:
    n_sites = cfg["model"]["n_sites"]
    if not isinstance(n_sites, int) or n_sites < 1:
        raise ConfigError(f"model.n_sites must be a positive integer, got {n_sites!r}")
    for key in cfg["tolerances"]:
        _positive(cfg, "tolerances", key)
    for key in ("j_start", "j_stop"):
        _number(cfg, "sweep", key)
    if not isinstance(cfg["sweep"]["j_points"], int) or cfg["sweep"]["j_points"] < 2:
        raise ConfigError("sweep.j_points must be an integer >= 2")
    gammas = cfg["sweep"]["gamma_values"]
    if not isinstance(gammas, (list, tuple)) or not gammas:
        raise ConfigError("sweep.gamma_values must be a non-empty list")
    window = cfg["trace"]["j_window"]
    if window is not None:
        if not (isinstance(window, (list, tuple)) and len(window) == 2):
            raise ConfigError("trace.j_window must be [lo, hi] or null")
    return cfg


def _family(cfg: dict) -> FixedScaleFamily:
    model = cfg["model"]
    return FixedScaleFamily(
        model["n_sites"], model["arrangement"], float(model["mixed_split"])
    )


def _out_dir(cfg: dict, args: argparse.Namespace) -> Path:
    target = args.out or os.environ.get("PSEUDOSPEC_OUT") or cfg["output"]["directory"]
    out = Path(target)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _log_config(cfg: dict, out: Path) -> None:
    resolved = copy.deepcopy(cfg)
    resolved["output"]["directory"] = str(out)
    text = yaml.safe_dump(resolved, sort_keys=True, default_flow_style=False)
    (out / "resolved_config.yaml").write_text(text, encoding="utf-8")


def _map_ordered(fn, items, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _sweep_plan(cfg: dict, gammas) -> SweepPlan:
    sweep = cfg["sweep"]
    grid = uniform_grid(sweep["j_start"], sweep["j_stop"], sweep["j_points"])
    return SweepPlan(
        j_tilde_grid=grid,
        gamma_tilde_values=tuple(float(g) for g in gammas),
        arrangement=cfg["model"]["arrangement"],
        n_sites=cfg["model"]["n_sites"],
        mixed_split=float(cfg["model"]["mixed_split"]),
    )


def _bands_for(cfg: dict, gammas, threads: int):
    tols = cfg["tolerances"]

    def one(gamma: float):
        plan = _sweep_plan(cfg, (gamma,))
        return run_sweep(
            plan,
            tol_cluster=tols["tol_cluster"],
            tol_quality=tols["tol_quality"],
            tol_real=tols["tol_real"],
        )[gamma]

    results = _map_ordered(one, [float(g) for g in gammas], threads)
    return dict(zip([float(g) for g in gammas], results))


def cmd_spectrum(cfg: dict, args: argparse.Namespace) -> int:
    out = _out_dir(cfg, args)
    _log_config(cfg, out)
    fam = _family(cfg)
    point = (_number(cfg, "point", "j_tilde"), _number(cfg, "point", "gamma_tilde"))
    tols = cfg["tolerances"]
    es = biorthogonal_eig(fam.hamiltonian(point))
    indices: dict[str, list] = {}
    for metric in fam.metrics():
        per_level = indices_for_metric(
            es,
            metric,
            tol_cluster=tols["tol_cluster"],
            tol_quality=tols["tol_quality"],
            tol_real=tols["tol_real"],
        )
        indices[metric.label] = [
            None if ix is None else {"value": ix.value, "quality": ix.quality}
            for ix in per_level
        ]
    payload = {
        "arrangement": str(cfg["model"]["arrangement"]),
        "n_sites": cfg["model"]["n_sites"],
        "point": {"j_tilde": point[0], "gamma_tilde": point[1]},
        "scale": fam.scale,
        "eigenvalues": [
            {"re": float(e.real), "im": float(e.imag)} for e in es.eigenvalues
        ],
        "indices": indices,
    }
    dest = out / "spectrum.json"
    dest.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", "utf-8")
    print(f"wrote {dest}")
    return 0


def cmd_sweep(cfg: dict, args: argparse.Namespace) -> int:
    out = _out_dir(cfg, args)
    _log_config(cfg, out)
    fam = _family(cfg)
    bands = _bands_for(cfg, cfg["sweep"]["gamma_values"], args.threads)
    dest = export_sweep(bands, out / "sweep.csv", fam.metric_labels)
    print(f"wrote {dest}")
    return 0


def _classified_events(cfg: dict, fam, bands, gamma: float) -> list[CrossingEvent]:
    tols = cfg["tolerances"]
    threshold = cfg["crossings"]["avoided_threshold"]
    events = find_crossings_1d(
        fam,
        bands,
        gamma,
        tol_gap=tols["tol_gap"],
        avoided_threshold=None if threshold is None else float(threshold),
        tol_real=tols["tol_real"],
    )
    classified = []
    for ev in events:
        try:
            # the configured threshold widens detection only; the Avoided
            # floor stays tied to tol_gap so the two roles cannot collide
            classified.append(
                classify_crossing(
                    fam,
                    ev,
                    tol_gap=tols["tol_gap"],
                    tol_quality=tols["tol_quality"],
                    overlap_ep=tols["overlap_ep"],
                    overlap_dp=tols["overlap_dp"],
                )
            )
        except UnresolvedClassification as err:
            # exported with the literal Unresolved label, never dropped
            classified.append(
                replace(
                    ev, index_products=err.diagnostics.get("index_products", {})
                )
            )
    return classified


def cmd_crossings(cfg: dict, args: argparse.Namespace) -> int:
    out = _out_dir(cfg, args)
    _log_config(cfg, out)
    fam = _family(cfg)
    gammas = cfg["crossings"]["gamma_values"]
    if gammas is None:
        gammas = cfg["sweep"]["gamma_values"]
    bands = _bands_for(cfg, gammas, args.threads)

    def one(gamma: float):
        return _classified_events(cfg, fam, bands[gamma], gamma)

    per_gamma = _map_ordered(one, [float(g) for g in gammas], args.threads)
    events = [ev for chunk in per_gamma for ev in chunk]
    dest = export_events(events, out / "events.csv", fam.metric_labels)
    print(f"wrote {dest} ({len(events)} events)")
    return 0


def cmd_trace_manifold(cfg: dict, args: argparse.Namespace) -> int:
    out = _out_dir(cfg, args)
    _log_config(cfg, out)
    fam = _family(cfg)
    gamma_seed = float(cfg["trace"]["gamma_seed"])
    bands = _bands_for(cfg, [gamma_seed], args.threads)[gamma_seed]
    events = _classified_events(cfg, fam, bands, gamma_seed)
    window = cfg["trace"]["j_window"]
    seeds = [
        ev
        for ev in events
        if ev.classification == "Diabolical"
        and check_zero_condition(ev.index_products)
        and (window is None or window[0] <= ev.location[0] <= window[1])
    ]
    if not seeds:
        raise ConfigError(
            f"no protected diabolical seeds on the gamma={gamma_seed} line"
        )

    def one(seed: CrossingEvent):
        return trace_dp_manifold(
            fam,
            seed,
            step=float(cfg["trace"]["step"]),
            max_points=int(cfg["trace"]["max_points"]),
            tol_gap=cfg["tolerances"]["tol_gap"],
        )

    traces = _map_ordered(one, seeds, args.threads)
    dest = export_manifold(traces, out / "manifold.csv")
    print(f"wrote {dest} ({len(traces)} traces)")
    return 0


def cmd_oracle_check(cfg: dict, args: argparse.Namespace) -> int:
    out = _out_dir(cfg, args)
    _log_config(cfg, out)
    n = cfg["model"]["n_sites"]
    arrangement = cfg["model"]["arrangement"]
    tols = cfg["tolerances"]
    rng = np.random.default_rng(args.seed)
    samples = int(cfg["oracle"]["samples"])
    report: dict[str, Any] = {"n_sites": n, "samples": [], "passed": True}
    for _ in range(samples):
        delta = float(rng.uniform(0.2, 1.5))
        coupling = float(rng.uniform(-1.5, 1.5))
        modes = single_particle_modes(delta, coupling, n)
        analytic = many_body_spectrum(modes)
        zeros = (0.0,) * n
        mc = ModelConfig(
            gain_loss=GainLossConfig(n, zeros, zeros, arrangement),
            delta=delta,
            coupling=coupling,
        )
        dense = np.sort(np.linalg.eigvalsh(build_hamiltonian(mc).matrix))
        scale = max(1.0, float(np.max(np.abs(dense))))
        residual = float(np.max(np.abs(analytic - dense))) / scale
        entry: dict[str, Any] = {
            "delta": delta,
            "coupling": coupling,
            "spectrum_residual": residual,
            "spectrum_ok": residual <= 1e-10,
        }
        if arrangement == "longitudinal":
            entry.update(_u_index_agreement(mc, modes, tols))
        report["samples"].append(entry)
        if not all(v for k, v in entry.items() if k.endswith("_ok")):
            report["passed"] = False
    dest = out / "oracle_report.json"
    dest.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", "utf-8")
    print(f"wrote {dest} (passed={report['passed']})")
    return 0 if report["passed"] else 1


def _u_index_agreement(mc: ModelConfig, modes, tols) -> dict:
    """Spin-flip indices versus the fermion-parity oracle, skipping clusters."""
    es = biorthogonal_eig(build_hamiltonian(mc).matrix)
    metric = next(
        m for m in pseudo_metric_catalog(mc) if m.label == "U"
    )
    per_level = indices_for_metric(
        es,
        metric,
        tol_cluster=tols["tol_cluster"],
        tol_quality=tols["tol_quality"],
        tol_real=tols["tol_real"],
    )
    clustered = {
        n for c in cluster_degeneracies(es, tols["tol_cluster"]) if len(c) > 1 for n in c
    }
    table = occupation_table(modes)
    checked = mismatches = 0
    for level in range(es.dim):
        if level in clustered or per_level[level] is None:
            continue
        energy = es.eigenvalues[level].real
        _, mask = min(table, key=lambda row: abs(row[0] - energy))
        checked += 1
        if per_level[level].value != u_index_oracle(mask, modes.n_modes):
            mismatches += 1
    return {
        "u_levels_checked": checked,
        "u_index_mismatches": mismatches,
        "u_index_ok": mismatches == 0 and checked > 0,
    }


COMMANDS = {
    "spectrum": cmd_spectrum,
    "sweep": cmd_sweep,
    "crossings": cmd_crossings,
    "trace-manifold": cmd_trace_manifold,
    "oracle-check": cmd_oracle_check,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pseudospec",
        description="Spectra, indices and degeneracy manifolds of "
        "pseudo-Hermitian spin chains.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("spectrum", "eigenvalues and indices at one parameter point (JSON)"),
        ("sweep", "band sweep over the coupling grid (CSV)"),
        ("crossings", "detect and classify degeneracies on fixed-gain lines (CSV)"),
        ("trace-manifold", "continue protected crossings through parameter space (CSV)"),
        ("oracle-check", "compare against the free-fermion reference (JSON report)"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="YAML run configuration")
        p.add_argument("--out", help="output directory (overrides PSEUDOSPEC_OUT)")
        p.add_argument("--threads", type=int, default=1, help="parallel grid workers")
        p.add_argument("--seed", type=int, default=0, help="RNG seed (oracle-check)")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        cfg = _validate(load_config(args.config))
        return COMMANDS[args.command](cfg, args)
    except _CONFIG_ERRORS as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2
    except PseudospecError as err:
        print(f"numerical failure: {type(err).__name__}: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
