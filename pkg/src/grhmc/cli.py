"""Command-line front end.

Every subcommand reads an INI-style config (sections ``[model]``,
``[sampler]``, ``[output]`` plus one section per experiment), runs, and writes
CSV and JSON artifacts into the output directory.  Outputs depend only on the
config and seed, so repeated runs are byte-identical.

Exit codes: 0 success, 1 trajectory failure, 2 bad config or data.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import re
import sys

import numpy as np

from . import __version__
from .diagnostics import METHODS, convergence_study, reference_solution
from .errors import ConfigError, ContractViolation, DataError, GRHMCError
from .integrator import IntegratorConfig
from .models import (
    RegressionData,
    StandardNormal,
    VolatilityParams,
    build_bnn_target,
    build_regression_target,
    build_volatility_target,
    circle_target,
    coefficients,
    max_model,
    posterior_zero_fraction,
    read_csv,
    read_series,
    rescale_coefficients,
    simulate_bnn_data,
    simulate_volatility,
    solve_spike_slab_hyperparams,
)
from .sampler import SamplerConfig, run_ensemble

SCHEMA = {
    "model": {"name": str, "c": float, "dim": int},
    "sampler": {
        "t_burn": float, "t_sample": float, "n_samples": int, "n_traj": int, "lambda": float,
        "adapt_lambda": bool, "adapt_m_s": bool, "lambda_min": float, "kernel": str,
        "seed": int, "abs_tol": float, "rel_tol": float, "h_init": float, "h_max": float,
        "h_min": float, "scale_floor": float,
    },
    "output": {"dir": str, "thin": int},
    "convergence": {"c": float, "t_end": float, "h_grid": "floats", "z0": "floats",
                    "methods": "strings"},
    "regression": {"response": str, "p_zero_grid": "floats", "var_nonzero": float},
    "volatility": {"sigma_l": float, "sigma_h": float, "rho": float, "t_len": int,
                   "gamma_prior": str, "column": str, "sim_seed": int},
    "bnn": {"k": int, "n": int, "sigma": float, "sim_seed": int},
}
TOY_MODELS = ("standard_normal", "max_model", "circle")


class Config:
    """Typed, validated view of an INI config with line numbers for error messages."""

    def __init__(self, path):
        self.path = path
        self.cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        try:
            with open(path) as fh:
                self.text = fh.read()
        except OSError as exc:
            raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
        try:
            self.cp.read_string(self.text, source=path)
        except configparser.ParsingError as exc:
            lineno, line = exc.errors[0]
            raise ConfigError(f"{path}:{lineno}:1: cannot parse {line.strip()!r}") from None
        except configparser.Error as exc:
            lineno = getattr(exc, "lineno", None)
            loc = f"{path}:{lineno}:1" if lineno else path
            raise ConfigError(f"{loc}: {exc.message if hasattr(exc, 'message') else exc}") from None
        for sec in self.cp.sections():
            if sec not in SCHEMA:
                raise ConfigError(f"{self._where(sec)}: unknown section [{sec}]")
            for key in self.cp[sec]:
                if key not in SCHEMA[sec]:
                    raise ConfigError(f"{self._where(sec, key)}: unknown key {key!r} in [{sec}]")

    def _where(self, sec, key=None):
        section = None
        for i, line in enumerate(self.text.splitlines(), 1):
            s = line.strip()
            m = re.match(r"\[(.+)\]$", s)
            if m:
                section = m.group(1).strip()
                if key is None and section == sec:
                    return f"{self.path}:{i}:1"
                continue
            if key is not None and section == sec:
                m = re.match(r"([^=:]+)[=:]", s)
                if m and m.group(1).strip().lower() == key:
                    col = line.index(s[0]) + 1 if s else 1
                    return f"{self.path}:{i}:{col}"
        return self.path

    def has(self, sec, key):
        return self.cp.has_option(sec, key)

    def get(self, sec, key, default=None, required=False):
        if not self.cp.has_option(sec, key):
            if required:
                raise ConfigError(f"{self.path}: missing required key {key!r} in [{sec}]")
            return default
        raw = self.cp.get(sec, key).strip()
        kind = SCHEMA[sec][key]
        try:
            if kind is bool:
                return self.cp.getboolean(sec, key)
            if kind == "floats":
                return [float(v) for v in raw.split(",") if v.strip()]
            if kind == "strings":
                return [v.strip() for v in raw.split(",") if v.strip()]
            if kind is int:
                return _parse_int(raw)
            return kind(raw)
        except ValueError:
            raise ConfigError(f"{self._where(sec, key)}: invalid value {raw!r} for {key!r}") from None


def _parse_int(raw):
    # accepts "20000" as well as "2e4"
    try:
        return int(raw)
    except ValueError:
        f = float(raw)
        if not f.is_integer():
            raise
        return int(f)


def sampler_config(cfg, seed_override=None):
    g = lambda k, d=None: cfg.get("sampler", k, d)
    icfg_kwargs = {k: g(k) for k in ("abs_tol", "rel_tol", "h_init", "h_max", "h_min") if g(k) is not None}
    seed = seed_override if seed_override is not None else g("seed", 0)
    try:
        icfg = IntegratorConfig(**icfg_kwargs)
        kwargs = dict(
            t_burn=g("t_burn", 0.0), t_sample=g("t_sample", 1000.0), n_samples=g("n_samples", 1000),
            lam=g("lambda", 1.0), adapt_lambda=g("adapt_lambda", False),
            adapt_m_s=g("adapt_m_s", False), kernel_choice=g("kernel", "randomized"),
            integrator=icfg, seed=seed,
        )
        if g("lambda_min") is not None:
            kwargs["lambda_min"] = g("lambda_min")
        if g("scale_floor") is not None:
            kwargs["scale_floor"] = g("scale_floor")
        return SamplerConfig(**kwargs)
    except (ContractViolation, ConfigError) as exc:
        raise ConfigError(f"{cfg.path}: [sampler] {exc}") from None


def toy_model(cfg):
    name = cfg.get("model", "name", required=True)
    if name == "standard_normal":
        return StandardNormal(cfg.get("model", "dim", 2))
    if name == "max_model":
        return max_model(cfg.get("model", "c", 1.0))
    if name == "circle":
        return circle_target()
    raise ConfigError(f"{cfg._where('model', 'name')}: unknown model {name!r} (expected one of {TOY_MODELS})")


def _fmt(x):
    return f"{x:.17g}"


def write_matrix(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(float(v)) for v in row) + "\n")


def write_table(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else _fmt(float(v)) for v in row) + "\n")


def write_meta(path, meta):
    with open(path, "w") as fh:
        json.dump(meta, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _chain_meta(res):
    out = []
    for m in res.meta:
        m = dict(m)
        m.pop("wall_time", None)
        out.append(m)
    return out


def _failure_report(res):
    return {str(i): {"error": f[0], "message": f[1]} for i, f in sorted(res.failures.items())}


def _summary(x, probs=(0.025, 0.5, 0.975)):
    x = np.asarray(x, dtype=float)
    q = np.quantile(x, probs)
    return {"mean": float(x.mean()), "sd": float(x.std(ddof=1)) if x.size > 1 else 0.0,
            **{f"q{p * 100:g}": float(v) for p, v in zip(probs, q)}}


class Context:
    def __init__(self, args):
        self.args = args
        self.cfg = Config(args.config)
        out = args.out or self.cfg.get("output", "dir", ".")
        os.makedirs(out, exist_ok=True)
        if not os.access(out, os.W_OK):
            raise ConfigError(f"output directory {out!r} is not writable")
        self.out = out
        self.thin = self.cfg.get("output", "thin", 1)
        if self.thin < 1:
            raise ConfigError(f"{self.cfg._where('output', 'thin')}: thin must be >= 1")
        self.jobs = args.jobs if args.jobs is not None else (os.cpu_count() or 1)

    def path(self, name):
        return os.path.join(self.out, name)

    def sample(self, model, scfg):
        n_traj = self.cfg.get("sampler", "n_traj", 1)
        if n_traj < 1:
            raise ConfigError(f"{self.cfg._where('sampler', 'n_traj')}: n_traj must be >= 1")
        return run_ensemble(model, scfg, n_traj, jobs=self.jobs)

    def base_meta(self, scfg, res):
        return {
            "version": __version__,
            "seed": int(scfg.seed),
            "n_samples": int(scfg.n_samples),
            "t_burn": scfg.t_burn,
            "t_sample": scfg.t_sample,
            "kernel": scfg.kernel_choice,
            "abs_tol": scfg.integrator.abs_tol,
            "rel_tol": scfg.integrator.rel_tol,
            "trajectories": _chain_meta(res),
            "failures": _failure_report(res),
        }


def _report_failures(res):
    for i, (kind, msg, _) in sorted(res.failures.items()):
        print(f"trajectory {i} failed: {kind}: {msg}", file=sys.stderr)
    return 1 if res.failures else 0


def cmd_run(ctx):
    model = toy_model(ctx.cfg)
    scfg = sampler_config(ctx.cfg, ctx.args.seed)
    res = ctx.sample(model, scfg)
    draws = res.merged[::ctx.thin]
    write_matrix(ctx.path("samples.csv"), [f"q{i + 1}" for i in range(model.dim)], draws)
    meta = ctx.base_meta(scfg, res)
    meta["model"] = ctx.cfg.get("model", "name")
    write_meta(ctx.path("meta.json"), meta)
    return _report_failures(res)


def cmd_convergence(ctx):
    cfg = ctx.cfg
    c = cfg.get("convergence", "c", cfg.get("model", "c", 1.0))
    T = cfg.get("convergence", "t_end", 1.0)
    hs = cfg.get("convergence", "h_grid", [0.2, 0.1, 0.05, 0.025, 0.0125])
    z0 = cfg.get("convergence", "z0", [-0.5, 1.0, 1.0, -0.25])
    methods = cfg.get("convergence", "methods", list(METHODS))
    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise ConfigError(f"{cfg._where('convergence', 'methods')}: unknown methods {bad}")
    model = max_model(c)
    ref = reference_solution(model, z0, T)
    table = convergence_study(model, z0, T, hs, methods, reference=ref)
    with open(ctx.path("convergence.csv"), "w") as fh:
        fh.write(table.to_csv())
    write_meta(ctx.path("meta.json"), {
        "version": __version__, "c": c, "t_end": T, "z0": list(z0), "reference": ref.tolist(),
        "slopes": table.slopes, "slope_se": table.slope_se,
        "failures": [list(f) for f in table.failures],
    })
    return 0


def cmd_regression(ctx):
    cfg = ctx.cfg
    if not ctx.args.data:
        raise ConfigError("regression needs --data PATH")
    response = cfg.get("regression", "response", required=True)
    X, y, names = read_csv(ctx.args.data, response)
    data = RegressionData.from_raw(X, y, names)
    grid = cfg.get("regression", "p_zero_grid", [0.1, 0.3, 0.5, 0.7, 0.9])
    var_nz = cfg.get("regression", "var_nonzero", 1.0)
    scfg = sampler_config(cfg, ctx.args.seed)
    p = data.p
    sample_rows, zf_rows, sum_rows = [], [], []
    meta = {"version": __version__, "seed": int(scfg.seed), "response": response,
            "covariates": list(names), "runs": []}
    status = 0
    for pz in grid:
        mu, rho = solve_spike_slab_hyperparams(pz, var_nz)
        model = build_regression_target(data, mu, rho)
        res = ctx.sample(model, scfg)
        status = max(status, _report_failures(res))
        draws = res.merged[::ctx.thin]
        sample_rows.extend([pz, *row] for row in draws)
        zf = posterior_zero_fraction(draws, data)
        zf_rows.append([pz, *zf])
        beta0, beta = rescale_coefficients(coefficients(draws, p), data)
        for label, col in [("intercept", beta0)] + [(n, beta[:, i]) for i, n in enumerate(names)]:
            s = _summary(col)
            sum_rows.append([f"{pz:g}", label, s["mean"], s["sd"], s["q2.5"], s["q97.5"]])
        meta["runs"].append({"p_zero": pz, "mu": mu, "rho": rho,
                             "trajectories": _chain_meta(res), "failures": _failure_report(res)})
    header = ["p_zero"] + [f"q{i + 1}" for i in range(2 * p + 1)]
    write_matrix(ctx.path("samples.csv"), header, sample_rows)
    write_table(ctx.path("zero_fraction.csv"), ["p_zero", *names], zf_rows)
    write_table(ctx.path("summaries.csv"), ["p_zero", "coefficient", "mean", "sd", "q2.5", "q97.5"],
                sum_rows)
    write_meta(ctx.path("meta.json"), meta)
    return status


def cmd_volatility(ctx):
    cfg = ctx.cfg
    sec = "volatility"
    meta = {"version": __version__}
    if ctx.args.data:
        Y = read_series(ctx.args.data, cfg.get(sec, "column"))
        meta["data"] = os.path.basename(ctx.args.data)
    else:
        try:
            params = VolatilityParams(cfg.get(sec, "sigma_l", 0.5), cfg.get(sec, "sigma_h", 1.5),
                                      cfg.get(sec, "rho", -0.3), cfg.get(sec, "t_len", 200))
        except ContractViolation as exc:
            raise ConfigError(f"{cfg.path}: [volatility] {exc}") from None
        rng = np.random.default_rng(cfg.get(sec, "sim_seed", 0))
        Y, Z = simulate_volatility(params, rng)
        meta["truth"] = {"sigma_l": params.sigma_l, "sigma_h": params.sigma_h,
                         "rho": params.rho_corr, "t_len": params.T_len}
    prior = cfg.get(sec, "gamma_prior", "exp_gamma")
    try:
        model = build_volatility_target(Y, prior)
    except ContractViolation as exc:
        raise ConfigError(f"{cfg.path}: [volatility] {exc}") from None
    scfg = sampler_config(cfg, ctx.args.seed)
    res = ctx.sample(model, scfg)
    draws = res.merged[::ctx.thin]
    T = model.T
    header = [f"z{t + 1}" for t in range(T)] + ["rho_star", "gamma_l", "gamma_h"]
    write_matrix(ctx.path("samples.csv"), header, draws)
    rows = []
    if len(draws):
        for name, x in model.summaries(draws).items():
            s = _summary(x)
            rows.append([name, s["mean"], s["q50"], s["sd"], s["q2.5"], s["q97.5"]])
        p_high = (draws[:, :T] > 0).mean(axis=0)
        write_table(ctx.path("p_high.csv"), ["t", "p_high"], [[t + 1, v] for t, v in enumerate(p_high)])
    write_table(ctx.path("summaries.csv"), ["parameter", "mean", "median", "sd", "q2.5", "q97.5"], rows)
    meta.update(ctx.base_meta(scfg, res))
    meta["gamma_prior"] = prior
    write_meta(ctx.path("meta.json"), meta)
    return _report_failures(res)


def cmd_bnn(ctx):
    cfg = ctx.cfg
    sec = "bnn"
    K = cfg.get(sec, "k", 2)
    rng = np.random.default_rng(cfg.get(sec, "sim_seed", 0))
    X, y = simulate_bnn_data(rng, n=cfg.get(sec, "n", 100), sigma=cfg.get(sec, "sigma", 0.1))
    model = build_bnn_target(X, y, K)
    scfg = sampler_config(cfg, ctx.args.seed)
    res = ctx.sample(model, scfg)
    draws = res.merged[::ctx.thin]
    write_matrix(ctx.path("samples.csv"), [f"q{i + 1}" for i in range(model.dim)], draws)
    rows = []
    if len(draws):
        s = _summary(np.exp(0.5 * draws[:, 0]))
        rows.append(["sigma", s["mean"], s["sd"], s["q2.5"], s["q97.5"]])
    write_table(ctx.path("summaries.csv"), ["parameter", "mean", "sd", "q2.5", "q97.5"], rows)
    meta = ctx.base_meta(scfg, res)
    meta.update({"k": K, "n": int(X.shape[0]), "sigma_true": cfg.get(sec, "sigma", 0.1)})
    write_meta(ctx.path("meta.json"), meta)
    return _report_failures(res)


COMMANDS = {
    "run": cmd_run,
    "convergence": cmd_convergence,
    "regression": cmd_regression,
    "volatility": cmd_volatility,
    "bnn": cmd_bnn,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="grhmc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, metavar="PATH")
        p.add_argument("--seed", type=int, default=None, help="overrides [sampler] seed")
        p.add_argument("--jobs", type=int, default=None, help="parallel trajectories (default: CPU count)")
        p.add_argument("--out", default=None, metavar="DIR", help="overrides [output] dir")
        if name in ("regression", "volatility"):
            p.add_argument("--data", default=None, metavar="PATH")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        ctx = Context(args)
        return COMMANDS[args.command](ctx)
    except (ConfigError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GRHMCError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
