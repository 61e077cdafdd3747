"""Command-line interface.

Subcommands: ``fit``, ``simulate``, ``study``, ``phi``, ``rfv``, ``survivor``.
Exit status is 0 on success, 2 on invalid data or model input, and 3 when
a fit or study does not converge.
"""

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import replace

import numpy as np

from ._validation import check_dataset, check_level
from .association import empirical_phi, fitted_phi
from .config import MODEL_MENU, ModelConfig
from .distributions import GenGammaParams
from .exceptions import ConvergenceError, DataError, DomainError, NumericError
from .fitting import FitOptions, fit
from .frailty import FrailtySpec, ModulationFn, rfv_scaled, rfv_star
from .likelihood import model_probabilities
from .simulation import SimDesign, run_study, simulate_dataset
from .survival import HazardSpec

__all__ = ["main", "build_parser", "STUDY_SCENARIOS", "scenario_design"]

logger = logging.getLogger("tvfrailty")

EXIT_OK, EXIT_DATA, EXIT_NONCONVERGED = 0, 2, 3

# baseline hazards of the relative-frailty-variance panels
RFV_HAZARDS = {
    "constant": (-3.34, 0.0),
    "increasing": (-4.5, 1.0 / 25.0),
    "decreasing": (-2.5, -1.0 / 25.0),
}


def _scenarios():
    out = {}
    for k in (1.0, 0.2):
        for rho in (0.01, 0.002):
            out[f"a_k{k:g}_rho{rho:g}"] = dict(truth=("gamma_with_trend", dict(k=k, rho=rho)))
        for beta in (0.7, 0.4):
            out[f"b_k{k:g}_beta{beta:g}"] = dict(truth=("gengamma_no_trend", dict(k=k, beta=beta)),
                                                 alpha_beta=True)
    for rho in (0.01, 0.002, 0.0):
        out[f"misspec_rho{rho:g}"] = dict(truth=("gengamma_with_trend", dict(k=2.0, beta=0.5, rho=rho)),
                                          fit="gamma_with_trend")
    return out


STUDY_SCENARIOS = _scenarios()


def scenario_design(name, n_per_age=200, replicates=50, seed=0, ages=None, **kw):
    """:class:`SimDesign` for a named scenario with constant hazards 0.05."""
    try:
        sc = STUDY_SCENARIOS[name]
    except KeyError:
        raise DomainError(f"unknown scenario {name!r}; choose from {sorted(STUDY_SCENARIOS)}") from None
    menu, values = sc["truth"]
    truth = ModelConfig.menu(menu, rates1=[0.05], rates2=[0.05], **values)
    fit_config = None
    if "fit" in sc:
        fit_config = ModelConfig.menu(sc["fit"], rates1=[0.05], rates2=[0.05])
    elif sc.get("alpha_beta"):
        fit_config = replace(truth, parametrization="alpha_beta", params=())
        fit_config = fit_config.with_values({"alpha": values["k"] * values["beta"], "beta": values["beta"],
                                             "lambda1_0": 0.05, "lambda2_0": 0.05})
    ages = np.arange(1, 51) if ages is None else ages
    return SimDesign(truth, ages, n_per_age, replicates, seed, fit_config, name, **kw)


# -- helpers ---------------------------------------------------------------------


def _fmt(v):
    return f"{float(v):.17g}"


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _with_delta(cfg, delta):
    if delta is None or delta == cfg.delta:
        return cfg
    return replace(cfg, hazard1=replace(cfg.hazard1, delta=delta),
                   hazard2=replace(cfg.hazard2, delta=delta))


def _load_model(arg, args):
    """Model from a JSON file or a menu name."""
    if arg is None:
        arg = "gamma_with_trend"
    if os.path.exists(arg):
        try:
            with open(arg) as fh:
                cfg = ModelConfig.from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise DataError(f"{arg}: invalid JSON ({exc})") from None
    elif arg in MODEL_MENU:
        cfg = ModelConfig.menu(arg)
    else:
        raise DataError(f"model {arg!r} is neither a file nor one of {sorted(MODEL_MENU)}")
    if getattr(args, "allow_increasing_h", False) and not cfg.allow_increasing_h:
        values = cfg.values()
        cfg = replace(cfg, allow_increasing_h=True, params=tuple(
            replace(p, lower=None) if p.name == "rho" and p.link == "identity" else p for p in cfg.params))
        cfg = cfg.with_values(values)
    return _with_delta(cfg, getattr(args, "delta", None))


def _ages(arg, default_max=50):
    if arg is None:
        return np.arange(1, default_max + 1, dtype=float)
    if ":" in arg:
        lo, hi, *step = (float(x) for x in arg.split(":"))
        step = step[0] if step else 1.0
        return np.arange(lo, hi + step / 2, step)
    return np.array([float(x) for x in arg.split(",")])


def _out_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


# -- commands ----------------------------------------------------------------------


def cmd_fit(args):
    cfg = _load_model(args.model, args)
    data = check_dataset(args.data)
    options = FitOptions(tol=args.tol, maxiter=args.maxiter, ci_level=check_level(args.ci_level))
    res = fit(cfg, data, options)
    out = _out_dir(args.out)
    report = res.to_dict()
    report["model"] = res.config.to_dict()
    _write_json(os.path.join(out, "fit.json"), report)

    d = data.aggregated()
    ages = d.ages
    s00, s01, s10, s11 = model_probabilities(res.config, None, ages)
    tot1 = d.counts.sum(axis=1) + d.marginal1.sum(axis=1)
    tot2 = d.counts.sum(axis=1) + d.marginal2.sum(axis=1)
    pos1 = d.counts[:, 2] + d.counts[:, 3] + d.marginal1[:, 1]
    pos2 = d.counts[:, 1] + d.counts[:, 3] + d.marginal2[:, 1]
    with np.errstate(invalid="ignore", divide="ignore"):
        obs1, obs2 = pos1 / tot1, pos2 / tot2
    _write_csv(os.path.join(out, "prevalence.csv"),
               ["age", "observed1", "observed2", "fitted1", "fitted2", "n1", "n2"],
               zip(ages, obs1, obs2, s10 + s11, s01 + s11, tot1, tot2))

    emp = empirical_phi(d)
    fph = fitted_phi(res.config, None, ages)
    _write_csv(os.path.join(out, "phi.csv"), ["age", "phi_empirical", "weight", "status", "phi_fitted"],
               zip(ages, emp.phi, emp.weight, emp.status, fph.phi))

    spec, h1, h2 = res.config.build()
    _write_csv(os.path.join(out, "rfv_star.csv"), ["age", "rfv_star1", "rfv_star2"],
               zip(ages, rfv_star(spec, h1, ages), rfv_star(spec, h2, ages)))
    print(f"loglik {res.loglik_max:.6f}  aic {res.aic:.6f}  {res.convergence}")
    for name in res.free_names:
        line = f"  {name:>12s} {res.estimates[name]:.6g}"
        if name in res.profile_cis:
            ci = res.profile_cis[name]
            line += f"  ({ci.lower:.6g}, {ci.upper:.6g})"
        print(line)
    return EXIT_OK if res.converged else EXIT_NONCONVERGED


def cmd_simulate(args):
    cfg = _load_model(args.model, args)
    data = simulate_dataset(cfg, _ages(args.ages), args.n_per_age, seed=args.seed, expected=args.expected)
    out = _out_dir(args.out)
    data.to_csv(os.path.join(out, "data.csv"))
    return EXIT_OK


def cmd_study(args):
    out = _out_dir(args.out)
    options = FitOptions(tol=args.tol)
    reports = []
    if args.model is not None:
        truth = _load_model(args.model, args)
        fit_cfg = _load_model(args.fit_model, args) if args.fit_model else None
        designs = [SimDesign(truth, _ages(args.ages), args.n_per_age, args.replicates, args.seed,
                             fit_cfg, args.name or "custom", options, args.profile, args.level, args.jobs)]
    else:
        names = args.scenario or ["a_k0.2_rho0.01"]
        designs = [scenario_design(n, args.n_per_age, args.replicates, args.seed,
                                   _ages(args.ages), options=options, profile_coverage=args.profile,
                                   level=args.level, n_jobs=args.jobs) for n in names]
    for i, design in enumerate(designs):
        rep = run_study(design)
        rep.to_csv(os.path.join(out, "study.csv"), append=i > 0)
        reports.append(rep.to_dict())
        for r in rep.rows():
            print(f"{r['scenario']:>20s} {r['param']:>10s} bias {r['bias']:+.4f} rmse {r['rmse']:.4f}")
    _write_json(os.path.join(out, "study.json"), {"scenarios": reports})
    return EXIT_OK


def cmd_phi(args):
    series = empirical_phi(check_dataset(args.data))
    out = _out_dir(args.out)
    series.to_csv(os.path.join(out, "phi.csv"))
    if series.n_dropped:
        print(f"{series.n_dropped} age(s) dropped", file=sys.stderr)
    return EXIT_OK


def cmd_rfv(args):
    out = _out_dir(args.out)
    betas = [float(b) for b in args.betas.split(",")]
    rhos = [float(r) for r in args.rho.split(",")]
    s_grid = np.concatenate([[0.0], np.logspace(-3, 3, 61)])
    rows = []
    for beta in betas:
        p = GenGammaParams.unit_mean(args.k, beta)
        rows.extend((beta, s, rfv_scaled(p, s)) for s in s_grid)
    _write_csv(os.path.join(out, "rfv_s.csv"), ["beta", "s", "rfv"], rows)

    delta = args.delta or 1.0
    t = np.arange(0.0, args.t_max + delta / 2, delta)
    rows = []
    for name, (a, b) in RFV_HAZARDS.items():
        hazard = HazardSpec.log_linear(a, b, delta)
        for rho in rhos:
            mod = ModulationFn("exp_quadratic", rho=rho, constraint_decreasing=False)
            for beta in betas:
                spec = FrailtySpec.gengamma(args.k, beta, mod)
                rows.extend((name, rho, beta, ti, v) for ti, v in zip(t, rfv_star(spec, hazard, t)))
    with open(os.path.join(out, "rfv_star.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["hazard", "rho", "beta", "t", "rfv_star"])
        for name, rho, beta, ti, v in rows:
            w.writerow([name, _fmt(rho), _fmt(beta), _fmt(ti), _fmt(v)])
    return EXIT_OK


def cmd_survivor(args):
    cfg = _load_model(args.model, args)
    ages = _ages(args.ages)
    cells = model_probabilities(cfg, None, ages)
    out = _out_dir(args.out)
    _write_csv(os.path.join(out, "survivor.csv"), ["age", "s00", "s01", "s10", "s11"], zip(ages, *cells))
    return EXIT_OK


# -- parser -----------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="tvfrailty",
                                     description="Time-varying shared frailty models for paired current status data.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, model=True, data=False):
        if model:
            p.add_argument("--model", help="model JSON file or menu name "
                                           f"({', '.join(sorted(MODEL_MENU))})")
        if data:
            p.add_argument("--data", required=True, help="dataset CSV")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--delta", type=float, help="grid step (overrides the model)")
        p.add_argument("--allow-increasing-h", action="store_true", help="allow rho < 0")
        p.add_argument("--tol", type=float, default=1e-7, help="optimizer gradient tolerance")

    p = sub.add_parser("fit", help="maximum likelihood fit")
    common(p, data=True)
    p.add_argument("--ci-level", type=float, help="profile-likelihood interval level")
    p.add_argument("--maxiter", type=int, default=500, help="quasi-Newton iteration cap")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", help="simulate a dataset")
    common(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-per-age", type=int, default=200)
    p.add_argument("--ages", help="comma list or lo:hi[:step] (default 1:50)")
    p.add_argument("--expected", action="store_true", help="write expected counts")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("study", help="Monte Carlo bias/RMSE study")
    common(p)
    p.add_argument("--fit-model", help="model fitted to each replicate (default: --model)")
    p.add_argument("--scenario", action="append", choices=sorted(STUDY_SCENARIOS),
                   help="named scenario (repeatable); used when --model is absent")
    p.add_argument("--name", help="scenario label for --model studies")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--replicates", type=int, default=50)
    p.add_argument("--n-per-age", type=int, default=200)
    p.add_argument("--ages", help="comma list or lo:hi[:step] (default 1:50)")
    p.add_argument("--profile", action="store_true", help="also compute profile-interval coverage")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--jobs", type=int, default=1, help="parallel replicate fits")
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("phi", help="empirical association series")
    common(p, model=False, data=True)
    p.set_defaults(func=cmd_phi)

    p = sub.add_parser("rfv", help="relative frailty variance curves")
    common(p, model=False)
    p.add_argument("--k", type=float, default=0.5)
    p.add_argument("--betas", default="0.8,1,1.25")
    p.add_argument("--rho", default="0.0001,-0.0001", help="comma list of rho values")
    p.add_argument("--t-max", type=float, default=50.0)
    p.set_defaults(func=cmd_rfv)

    p = sub.add_parser("survivor", help="tabulate S_ij(t)")
    common(p)
    p.add_argument("--ages", help="comma list or lo:hi[:step] (default 1:50)")
    p.set_defaults(func=cmd_survivor)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (DataError, DomainError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConvergenceError, NumericError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED


if __name__ == "__main__":
    sys.exit(main())
