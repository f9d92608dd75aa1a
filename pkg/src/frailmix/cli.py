"""Command-line front end: ``frailmix {fit,simulate,compare,curves,validate}``.

Every option may also come from a JSON config file (``--config``); explicit
flags win over file values, which win over the defaults shown by ``--help``.
Each command that writes a directory also writes ``manifest.json`` with the
resolved configuration, the dataset hash, the seed and package versions.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import platform
import secrets
import sys
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy

from .analysis import FIGURES, compare_models, survival_curves, wald_table
from .data import load_event_csv, scan_event_csv, validate, write_event_csv
from .errors import DataError, DomainError, OptimizationError, SamplerError
from .mcem import MCEMConfig, default_init, run_mcem
from .params import FAMILY_TO_TAG, FrailtySpec, ModelParams, csl_2019_params
from .simulate import DEFAULT_CENSOR_RATE, SimConfig, simulate_dataset, write_truth_csv

EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED = 0, 1, 2
MODELS = {"independence": "independence", "gamma": "gamma-frailty", "lognormal": "lognormal-frailty"}

DEFAULTS = {
    "fit": {
        "data": None, "out": None, "model": "gamma", "seed": None, "init": None,
        "M0": 50, "M_growth": 1.2, "M_max": 500, "tol": 1e-3, "window": 3, "max_iter": 100,
        "M_final": 200, "final_sweeps": 5, "level": 0.05, "threads": os.cpu_count() or 1,
    },
    "simulate": {
        "out": None, "model": "gamma", "n_games": 233, "seed": None, "truth": None,
        "frailty_param": None, "censor_rate": DEFAULT_CENSOR_RATE, "half_length": 45.0, "n_teams": 16,
    },
    "compare": {"fit_a": None, "fit_b": None, "out": None, "n_obs": None},
    "curves": {
        "fit": None, "reference": False, "old_fit": None, "figure": "fig1", "out": None,
        "n_draws": 50, "seed": None,
    },
    "validate": {"data": None},
}
REQUIRED = {
    "fit": ("data", "out"),
    "simulate": ("out",),
    "compare": ("fit_a", "fit_b", "out"),
    "curves": ("out",),
    "validate": ("data",),
}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# helpers


def versions() -> dict[str, str]:
    try:
        own = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        own = "unknown"
    return {"frailmix": own, "numpy": np.__version__, "scipy": scipy.__version__, "python": platform.python_version()}


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_manifest(out: Path, command: str, config: dict, dataset_sha256: str | None, seed) -> None:
    # the output location is not an input, so it stays out of the echo
    config = {k: v for k, v in config.items() if k != "out"}
    _dump_json(
        {"command": command, "config": config, "dataset_sha256": dataset_sha256, "seed": seed,
         "versions": versions()},
        out / "manifest.json",
    )


def resolve_seed(seed):
    return secrets.randbits(63) if seed is None else int(seed)


def _params_from_json(path: str | Path) -> tuple[ModelParams, dict]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    doc = json.loads(path.read_text(encoding="utf-8"))
    family = MODEL_FAMILY[doc["model_tag"]]
    return ModelParams.from_dict(doc["estimates"], family, int(doc["covariate_dim"])), doc


MODEL_FAMILY = {tag: fam for fam, tag in FAMILY_TO_TAG.items()}


def _fmt(x: float, digits: int = 4) -> str:
    return "nan" if not math.isfinite(x) else f"{x:.{digits}f}"


def estimates_table(names, est: dict, se: dict, level: float) -> str:
    """Aligned parameter / estimate / SE / z / p table; '*' marks p < level."""
    rows = [("Parameter", "Estimate", "Std.Error", "z", "p", "")]
    if all(math.isfinite(se[n]) and se[n] > 0 for n in names):
        for r in wald_table({n: est[n] for n in names}, se, level):
            rows.append((r.name, _fmt(r.estimate), _fmt(r.se), _fmt(r.z, 3), f"{r.p_value:.4g}",
                         "*" if r.significant else ""))
    else:
        for n in names:
            rows.append((n, _fmt(est[n]), _fmt(se[n]), "nan", "nan", ""))
    widths = [max(len(r[i]) for r in rows) for i in range(6)]
    lines = ["  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths))).rstrip()
             for r in rows]
    lines.append(f"* significant at level {level}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# commands


def cmd_fit(cfg: dict) -> int:
    out = Path(cfg["out"])
    dataset = load_event_csv(cfg["data"])
    problems = validate(dataset)
    if problems:
        raise DataError("dataset failed validation:\n" + "\n".join(map(str, problems)))
    tag = MODELS[cfg["model"]]
    seed = resolve_seed(cfg["seed"])
    cfg = {**cfg, "seed": seed}
    mc = MCEMConfig(
        M0=int(cfg["M0"]), M_growth=float(cfg["M_growth"]), M_max=int(cfg["M_max"]), tol=float(cfg["tol"]),
        window=int(cfg["window"]), max_iter=int(cfg["max_iter"]), seed=seed, M_final=int(cfg["M_final"]),
        final_sweeps=int(cfg["final_sweeps"]), threads=int(cfg["threads"]),
    )
    init = default_init(dataset, tag)
    if cfg["init"]:
        overrides = json.loads(Path(cfg["init"]).read_text(encoding="utf-8"))
        init = ModelParams.from_dict({**init.to_dict(), **overrides}, init.frailty.family, init.p)
    fit = run_mcem(dataset, init, mc, tag)

    out.mkdir(parents=True, exist_ok=True)
    names = fit.names
    est = fit.estimates
    (out / "estimates.txt").write_text(estimates_table(names, est, fit.se, float(cfg["level"])), encoding="utf-8")
    with (out / "estimates.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["parameter", "estimate", "se"])
        for n in names:
            w.writerow([n, repr(est[n]), repr(fit.se[n])])
    with (out / "trace.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "M", "Q", "Q_se", *names])
        for d, (q, qse, th) in enumerate(zip(fit.q_trace, fit.q_se_trace, fit.theta_trace)):
            w.writerow([d + 1, mc.sample_size(d), repr(q), repr(qse), *map(repr, map(float, th))])
    summary = {
        "model_tag": fit.model_tag,
        "converged": fit.converged,
        "n_iter": fit.n_iter,
        "covariate_dim": dataset.covariate_dim,
        "n_params": len(names),
        "n_clusters": len(dataset.clusters),
        "n_intervals": dataset.n_intervals,
        "n_events": dataset.n_events,
        "dataset_sha256": dataset.sha256(),
        "estimates": est,
        "se": fit.se,
        "loglik": fit.q_final,
        "loglik_mc_se": fit.q_final_se,
        "eta_share": float(fit.final_draws.eta.mean()) if fit.final_draws.eta.size else None,
        "notes": fit.notes,
    }
    _dump_json(summary, out / "fit.json")
    write_manifest(out, "fit", cfg, summary["dataset_sha256"], seed)
    for note in fit.notes:
        print(f"note: {note}", file=sys.stderr)
    return EXIT_OK if fit.converged else EXIT_NOT_CONVERGED


def _sim_truth(cfg: dict) -> ModelParams:
    if cfg["truth"]:
        truth, _ = _params_from_json(cfg["truth"])
    else:
        truth = csl_2019_params()
    model = cfg["model"]
    param = cfg["frailty_param"]
    if model == "independence":
        return truth.with_frailty(FrailtySpec.degenerate())
    if model == "lognormal":
        # default sigma_w gives the same frailty variance as the gamma reference
        s = param if param is not None else math.sqrt(math.log1p(csl_2019_params().frailty.param))
        return truth.with_frailty(FrailtySpec.lognormal(float(s)))
    if param is not None:
        return truth.with_frailty(FrailtySpec.gamma(float(param)))
    if truth.frailty.family != "gamma":
        return truth.with_frailty(csl_2019_params().frailty)
    return truth


def cmd_simulate(cfg: dict) -> int:
    seed = resolve_seed(cfg["seed"])
    cfg = {**cfg, "seed": seed}
    sim = SimConfig(
        _sim_truth(cfg), int(cfg["n_games"]), half_length=float(cfg["half_length"]),
        censor_rate=float(cfg["censor_rate"]), n_teams=int(cfg["n_teams"]), seed=seed,
    )
    dataset, truth = simulate_dataset(sim)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_event_csv(dataset, out / "data.csv")
    write_truth_csv(dataset, truth, out / "truth.csv")
    _dump_json({"model_tag": sim.truth.model_tag, "covariate_dim": sim.truth.p, "estimates": sim.truth.to_dict()},
               out / "truth_params.json")
    write_manifest(out, "simulate", cfg, dataset.sha256(), seed)
    return EXIT_OK


def cmd_compare(cfg: dict) -> int:
    docs = []
    for key in ("fit_a", "fit_b"):
        path = Path(cfg[key])
        if not path.exists():
            raise DataError(f"no such file: {path}")
        docs.append(json.loads(path.read_text(encoding="utf-8")))
    a, b = docs
    if a["dataset_sha256"] != b["dataset_sha256"]:
        raise DataError("the two fits were run on different datasets (hash mismatch)")
    if a["n_params"] > b["n_params"]:
        a, b = b, a
    n_obs = int(cfg["n_obs"]) if cfg["n_obs"] is not None else int(a["n_intervals"])
    report = compare_models(a["loglik"], b["loglik"], a["n_params"], b["n_params"], n_obs,
                            a["model_tag"], b["model_tag"])
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.txt").write_text(report.to_text(), encoding="utf-8")
    _dump_json(report.to_dict(), out / "report.json")
    write_manifest(out, "compare", cfg, a["dataset_sha256"], None)
    print(report.to_text(), end="")
    return EXIT_OK


def cmd_curves(cfg: dict) -> int:
    if cfg["fit"]:
        params, _ = _params_from_json(cfg["fit"])
    elif cfg["reference"]:
        params = csl_2019_params()
    else:
        raise UsageError("curves needs --fit or --reference")
    old = _params_from_json(cfg["old_fit"])[0] if cfg["old_fit"] else None
    seed = resolve_seed(cfg["seed"]) if cfg["figure"] == "fig2" else None
    table = survival_curves(params, cfg["figure"], int(cfg["n_draws"]), rng=seed, old_params=old)
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(out)
    if seed is not None:
        print(f"seed {seed}", file=sys.stderr)
    return EXIT_OK


def cmd_validate(cfg: dict) -> int:
    dataset, problems = scan_event_csv(cfg["data"])
    lines = list(problems)
    if dataset is not None:
        lines += [str(v) for v in validate(dataset)]
    for line in lines:
        print(line)
    if lines:
        return EXIT_INPUT
    print(f"ok: {len(dataset.clusters)} clusters, {dataset.n_intervals} intervals, {dataset.n_events} corners")
    return EXIT_OK


COMMANDS = {"fit": cmd_fit, "simulate": cmd_simulate, "compare": cmd_compare, "curves": cmd_curves,
            "validate": cmd_validate}


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="frailmix", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log MCEM progress")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(p, name, help, **kw):
        d = DEFAULTS[p.prog.split()[-1]][name.lstrip("-").replace("-", "_")]
        text = help if "(default:" in help else f"{help} (default: {d})"
        p.add_argument(name, default=None, help=text, **kw)

    f = sub.add_parser("fit", help="fit a model by MCEM")
    add(f, "--data", "event CSV")
    add(f, "--out", "output directory")
    add(f, "--model", "model", choices=sorted(MODELS))
    add(f, "--seed", "RNG seed; generated and recorded when omitted", type=int)
    add(f, "--init", "JSON file of starting values overriding the defaults")
    add(f, "--M0", "initial Monte Carlo sample size", type=int)
    add(f, "--M-growth", "sample size multiplier per iteration", type=float)
    add(f, "--M-max", "sample size cap", type=int)
    add(f, "--tol", "convergence tolerance on the parameter change", type=float)
    add(f, "--window", "consecutive iterations under tol", type=int)
    add(f, "--max-iter", "iteration cap", type=int)
    add(f, "--M-final", "sample size of the terminal pass", type=int)
    add(f, "--final-sweeps", "Gibbs sweeps in the terminal pass", type=int)
    add(f, "--level", "Wald significance level", type=float)
    add(f, "--threads", "E-step worker threads", type=int)

    s = sub.add_parser("simulate", help="simulate a dataset")
    add(s, "--out", "output directory")
    add(s, "--model", "frailty model of the truth", choices=sorted(MODELS))
    add(s, "--n-games", "number of games", type=int)
    add(s, "--seed", "RNG seed; generated and recorded when omitted", type=int)
    add(s, "--truth", "fit.json or truth_params.json to use as truth (default: reference estimates)")
    add(s, "--frailty-param", "theta_w or sigma_w override", type=float)
    add(s, "--censor-rate", "interior censoring events per minute", type=float)
    add(s, "--half-length", "minutes per half", type=float)
    add(s, "--n-teams", "teams in the league", type=int)

    c = sub.add_parser("compare", help="likelihood-ratio test and BIC of two fits")
    add(c, "--fit-a", "fit.json of the first model")
    add(c, "--fit-b", "fit.json of the second model")
    add(c, "--out", "output directory")
    add(c, "--n-obs", "sample size for BIC (default: interval count)", type=int)

    v = sub.add_parser("curves", help="survival-curve tables")
    add(v, "--fit", "fit.json supplying the parameters")
    v.add_argument("--reference", action="store_true", default=None,
                   help="use the built-in reference estimates instead of --fit")
    add(v, "--old-fit", "independence fit.json (fig3)")
    add(v, "--figure", "which table", choices=FIGURES)
    add(v, "--out", "output CSV path")
    add(v, "--n-draws", "sampled-frailty replicates per side (fig2)", type=int)
    add(v, "--seed", "RNG seed for fig2", type=int)

    val = sub.add_parser("validate", help="check an event CSV")
    add(val, "--data", "event CSV")

    for p in (f, s, c, v, val):
        p.add_argument("--config", default=None, help="JSON file of option values")
    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    cmd = args.command
    cfg = dict(DEFAULTS[cmd])
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise DataError(f"no such file: {path}")
        loaded = json.loads(path.read_text(encoding="utf-8"))
        unknown = set(loaded) - set(cfg)
        if unknown:
            raise UsageError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        cfg.update(loaded)
    for key in cfg:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    missing = [k for k in REQUIRED[cmd] if cfg.get(k) in (None, "")]
    if missing:
        raise UsageError(f"{cmd}: missing required option(s): {', '.join('--' + m.replace('_', '-') for m in missing)}")
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except (DataError, DomainError, UsageError, SamplerError, OptimizationError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
