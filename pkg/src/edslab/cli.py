"""Batch front end.

`edslab run --config cfg.json [--out DIR] [--seed S]` solves the base
problem for every configured case, runs the perturbation experiments, fits
decay envelopes, and writes base_solution.csv, profiles.csv, fit.csv,
certificate text/CSV, one decay SVG per case, and a run manifest.  With two
or more cases it also prints a decay-rate contrast line.  Exit codes:
0 success, 2 solver failure, 3 configuration error.

`edslab certify --config cfg.json` emits only the certificate report;
`edslab models` lists the available presets.  EDSLAB_THREADS caps the
worker pool for replicate solves.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field

from . import report
from .certify import build_report
from .eds import decay_contrast, fit_decay, run_experiments
from .errors import ConfigurationError, EdslabError
from .kkt import SolveOptions, solve_equality_nlp
from .models import build_model, list_models

EXIT_OK = 0
EXIT_SOLVER = 2
EXIT_CONFIG = 3


@dataclass
class ExperimentConfig:
    model: str
    params: dict = field(default_factory=dict)
    cases: list = field(default_factory=list)  # (name, param overrides)
    stages: list = field(default_factory=lambda: [-1])
    replicates: int = 1
    magnitude: float = 0.1
    seed: int = 0
    solver: SolveOptions = field(default_factory=SolveOptions)
    window_ctrl: int = 1
    window_obs: int = 1
    out_dir: str = "out"
    threads: int | None = None


_KNOWN_KEYS = {
    "model",
    "params",
    "cases",
    "stages",
    "replicates",
    "magnitude",
    "seed",
    "solver",
    "window_ctrl",
    "window_obs",
    "out_dir",
    "threads",
}


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigurationError("config root must be an object")
    unknown = set(raw) - _KNOWN_KEYS
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    if "model" not in raw or not raw["model"]:
        raise ConfigurationError("config must name a model")
    solver_raw = raw.get("solver", {})
    if not isinstance(solver_raw, dict):
        raise ConfigurationError("solver options must be an object")
    try:
        solver = SolveOptions(**solver_raw)
    except TypeError as exc:
        raise ConfigurationError(f"bad solver options: {exc}") from exc
    cases_raw = raw.get("cases") or [{"name": "base", "params": {}}]
    cases = []
    for entry in cases_raw:
        if not isinstance(entry, dict) or "name" not in entry:
            raise ConfigurationError("each case needs a name")
        cases.append((str(entry["name"]), dict(entry.get("params", {}))))
    names = [name for name, _ in cases]
    if len(set(names)) != len(names):
        raise ConfigurationError("case names must be unique")
    cfg = ExperimentConfig(
        model=str(raw["model"]),
        params=dict(raw.get("params", {})),
        cases=cases,
        stages=[int(s) for s in raw.get("stages", [-1])],
        replicates=int(raw.get("replicates", 1)),
        magnitude=float(raw.get("magnitude", 0.1)),
        seed=int(raw.get("seed", 0)),
        solver=solver,
        window_ctrl=int(raw.get("window_ctrl", 1)),
        window_obs=int(raw.get("window_obs", 1)),
        out_dir=str(raw.get("out_dir", "out")),
        threads=(int(raw["threads"]) if "threads" in raw else None),
    )
    if cfg.replicates < 1:
        raise ConfigurationError("replicates must be >= 1")
    if cfg.magnitude < 0:
        raise ConfigurationError("magnitude must be nonnegative")
    return cfg


def _case_pipeline(cfg: ExperimentConfig, name: str, overrides: dict):
    params = dict(cfg.params)
    params.update(overrides)
    bundle = build_model(cfg.model, params)
    p = bundle.problem
    for j in cfg.stages:
        if not -1 <= j <= p.dims.N:
            raise ConfigurationError(f"perturbation stage {j} outside [-1, {p.dims.N}]")
    base = solve_equality_nlp(p, bundle.base_data, w0=bundle.warm_start, opts=cfg.solver)
    cert = build_report(
        p, base.trajectory, bundle.base_data, cfg.window_ctrl, cfg.window_obs
    )
    profiles = run_experiments(
        p,
        bundle.base_data,
        base.trajectory,
        cfg.stages,
        cfg.replicates,
        cfg.magnitude,
        cfg.seed,
        opts=cfg.solver,
        threads=cfg.threads,
    )
    fit_ls = fit_decay(profiles, mode="ls")
    fit_env = fit_decay(profiles, mode="envelope")
    return {
        "name": name,
        "bundle": bundle,
        "base": base,
        "certificate": cert,
        "profiles": profiles,
        "fit_ls": fit_ls,
        "fit_env": fit_env,
    }


def run(config_path: str, out_dir: str | None = None, seed: int | None = None) -> int:
    """Full pipeline; returns a process exit code."""
    try:
        cfg = load_config(config_path)
        if out_dir is not None:
            cfg.out_dir = out_dir
        if seed is not None:
            cfg.seed = seed
        # validate every case's model parameters before touching the out dir
        results = [_case_pipeline(cfg, name, overrides) for name, overrides in cfg.cases]
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EdslabError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        # solves run before any artifact is written, so a failed run leaves
        # only a manifest recording that nothing was produced
        try:
            os.makedirs(cfg.out_dir, exist_ok=True)
            with open(os.path.join(cfg.out_dir, "manifest.json"), "w") as fh:
                json.dump(
                    {"status": "failed", "error": str(exc), "files": []},
                    fh,
                    indent=2,
                    sort_keys=True,
                )
                fh.write("\n")
        except OSError:
            pass
        return EXIT_SOLVER

    os.makedirs(cfg.out_dir, exist_ok=True)
    base_rows, prof_rows, fit_rows_all, cert_rows = [], [], [], []
    manifest = {
        "config": os.path.abspath(config_path),
        "model": cfg.model,
        "seed": cfg.seed,
        "schema_version": report.SCHEMA_VERSION,
        "cases": {},
        "files": [],
        "status": "ok",
    }
    for res in results:
        name = res["name"]
        base_rows.extend(report.base_solution_rows(name, res["base"].trajectory))
        prof_rows.extend(report.profile_rows(name, res["profiles"]))
        fit_rows_all.extend(report.fit_rows(name, res["fit_env"], res["fit_ls"]))
        cert_rows.extend((name, key, value) for key, value in res["certificate"].to_csv_rows())
        cert_path = os.path.join(cfg.out_dir, f"certificate_{name}.txt") if len(results) > 1 else os.path.join(cfg.out_dir, "certificate.txt")
        with open(cert_path, "w") as fh:
            fh.write(res["certificate"].to_text())
        manifest["files"].append(os.path.basename(cert_path))
        svg_path = os.path.join(cfg.out_dir, f"decay_{name}.svg") if len(results) > 1 else os.path.join(cfg.out_dir, "decay.svg")
        with open(svg_path, "w") as fh:
            fh.write(report.plot_decay(res["profiles"], res["fit_env"]))
        manifest["files"].append(os.path.basename(svg_path))
        manifest["cases"][name] = {
            "iterations": res["base"].iterations,
            "residual": res["base"].residual_norm,
            "rho_ls": res["fit_ls"].rho,
            "r2_ls": res["fit_ls"].r2,
            "upsilon_env": res["fit_env"].upsilon,
            "profile_seeds": [list(p.seed) for p in res["profiles"]],
        }
    for fname, rows in (
        ("base_solution.csv", base_rows),
        ("profiles.csv", prof_rows),
        ("fit.csv", fit_rows_all),
        ("certificates.csv", cert_rows),
    ):
        report.write_csv(os.path.join(cfg.out_dir, fname), fname, rows)
        manifest["files"].append(fname)
    if len(results) >= 2:
        a, b = results[0], results[1]
        contrast = decay_contrast(a["fit_ls"], b["fit_ls"])
        line = f"rho_{a['name']} < rho_{b['name']}: {str(contrast.separated).lower()}"
        print(line)
        manifest["contrast"] = {
            "rho_a": contrast.rho_a,
            "rho_b": contrast.rho_b,
            "margin": contrast.margin,
            "separated": contrast.separated,
            "line": line,
        }
    with open(os.path.join(cfg.out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return EXIT_OK


def certify(config_path: str, out_dir: str | None = None) -> int:
    """Solve the base problem per case and emit certificate reports only."""
    try:
        cfg = load_config(config_path)
        if out_dir is not None:
            cfg.out_dir = out_dir
        reports = []
        for name, overrides in cfg.cases:
            params = dict(cfg.params)
            params.update(overrides)
            bundle = build_model(cfg.model, params)
            base = solve_equality_nlp(bundle.problem, bundle.base_data, w0=bundle.warm_start, opts=cfg.solver)
            cert = build_report(
                bundle.problem, base.trajectory, bundle.base_data, cfg.window_ctrl, cfg.window_obs
            )
            reports.append((name, cert))
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EdslabError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    os.makedirs(cfg.out_dir, exist_ok=True)
    for name, cert in reports:
        text = cert.to_text()
        if len(reports) > 1:
            print(f"[{name}]")
        print(text, end="")
        fname = f"certificate_{name}.txt" if len(reports) > 1 else "certificate.txt"
        with open(os.path.join(cfg.out_dir, fname), "w") as fh:
            fh.write(text)
    return EXIT_OK


def models_cmd() -> int:
    for name, doc in list_models():
        print(f"{name:18s} {doc}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="edslab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="solve, perturb, fit, and emit artifacts")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--seed", type=int, default=None)
    p_cert = sub.add_parser("certify", help="emit certificate reports only")
    p_cert.add_argument("--config", required=True)
    p_cert.add_argument("--out", default=None)
    sub.add_parser("models", help="list model presets")
    args = parser.parse_args(argv)
    if args.command == "run":
        return run(args.config, out_dir=args.out, seed=args.seed)
    if args.command == "certify":
        return certify(args.config, out_dir=args.out)
    return models_cmd()


if __name__ == "__main__":
    sys.exit(main())
