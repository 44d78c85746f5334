"""Batch command-line front end.

Every subcommand resolves a flat configuration (flags, then the config
file, then defaults; the seed may also come from DISCERR_SEED), validates
it completely, runs, and writes one table as CSV or a JSON report.
Standard output carries data only; progress goes to standard error.

Exit codes: 0 success, 2 configuration error, 3 quadrature failure,
4 inconclusive verdict under --strict.
"""

import argparse
import hashlib
import io
import json
import math
import os
import sys

import numpy as np

from .errors import AccuracyError, DiscerrError, InvalidArgumentError
from .model import Model, refine_path, sample_path
from .payoff import Payoff
from .rng import RngStream

EXIT_OK, EXIT_CONFIG, EXIT_ACCURACY, EXIT_INCONCLUSIVE = 0, 2, 3, 4

DEFAULTS = {
    "payoff": "binary(0)",
    "model": "bm",
    "beta": "1",
    "n_list": "8,16,32,64,128,256,512",
    "paths": 20000,
    "p_list": "2",
    "seed": 42,
    "format": "csv",
    "out": None,
    "x0": 0.0,
    "eps_list": "0.5,0.25,0.125,0.0625",
    "a": "one",
    "k": 2,
    "T": 1.0,
    "refine": 32,
    "k_max": 512,
}

# keys that never influence results and stay out of the config hash
_NOT_HASHED = ("out", "format", "workers", "config", "strict")


class ConfigError(Exception):
    def __init__(self, field, message):
        super().__init__(message)
        self.field = field


def read_config_file(path):
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError("config", f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def resolve_config(args, environ=None):
    environ = os.environ if environ is None else environ
    cfg = dict(DEFAULTS)
    if args.config:
        try:
            cfg.update(read_config_file(args.config))
        except OSError as exc:
            raise ConfigError("config", str(exc)) from None
    if "DISCERR_SEED" in environ:
        cfg["seed"] = environ["DISCERR_SEED"]
    for key, value in vars(args).items():
        if key in ("command", "func", "config") or value is None:
            continue
        cfg[key] = value
    cfg["command"] = args.command
    return cfg


def _floats(text, field):
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    try:
        vals = [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise ConfigError(field, f"not a comma-separated list of numbers: {text!r}") from None
    return vals


def _ints(text, field):
    vals = _floats(text, field)
    if any(v != int(v) for v in vals):
        raise ConfigError(field, "expected integers")
    return [int(v) for v in vals]


def validate(cfg):
    """Typed, checked copy of the resolved configuration."""
    out = dict(cfg)
    try:
        out["payoff"] = str(Payoff.parse(cfg["payoff"]))
    except (InvalidArgumentError, ValueError) as exc:
        raise ConfigError("payoff", str(exc)) from None
    try:
        out["model"] = {"B": "bm", "S": "gbm"}[Model.parse(cfg["model"]).kind]
    except InvalidArgumentError as exc:
        raise ConfigError("model", str(exc)) from None
    betas = _floats(cfg["beta"], "beta")
    if not betas or any(not 0 < b <= 1 for b in betas):
        raise ConfigError("beta", "beta values must lie in (0, 1]")
    out["beta"] = betas
    ns = _ints(cfg["n_list"], "n_list")
    if not ns or any(n < 1 for n in ns):
        raise ConfigError("n_list", "n_list must be a non-empty list of positive integers")
    out["n_list"] = ns
    ps = _floats(cfg["p_list"], "p_list")
    if not ps or any(p < 1 for p in ps):
        raise ConfigError("p_list", "p values must be >= 1")
    out["p_list"] = ps
    try:
        out["paths"] = int(cfg["paths"])
        out["seed"] = int(cfg["seed"])
        out["k"] = int(cfg["k"])
        out["refine"] = int(cfg["refine"])
        out["k_max"] = int(cfg["k_max"])
        out["T"] = float(cfg["T"])
        out["x0"] = float(cfg["x0"])
    except (TypeError, ValueError) as exc:
        raise ConfigError("number", str(exc)) from None
    if out["paths"] < 100:
        raise ConfigError("paths", "paths must be >= 100")
    if not 0 <= out["seed"] < 2 ** 64:
        raise ConfigError("seed", "seed must be a 64-bit unsigned integer")
    if out["k"] not in (1, 2):
        raise ConfigError("k", "k must be 1 or 2")
    if out["refine"] < 1:
        raise ConfigError("refine", "refine must be positive")
    if not 0 <= out["k_max"] <= 512:
        raise ConfigError("k_max", "k_max must lie in [0, 512]")
    if not 0 < out["T"] <= 1:
        raise ConfigError("T", "T must lie in (0, 1]")
    eps = _floats(cfg["eps_list"], "eps_list")
    if not eps or any(e <= 0 for e in eps):
        raise ConfigError("eps_list", "eps values must be positive")
    out["eps_list"] = eps
    if cfg["a"] not in ("one", "zero", "gamma", "gamma2"):
        raise ConfigError("a", "a must be one of one, zero, gamma, gamma2")
    if cfg["format"] not in ("csv", "json"):
        raise ConfigError("format", "format must be csv or json")
    workers = cfg.get("workers")
    out["workers"] = int(workers) if workers not in (None, "") else (os.cpu_count() or 1)
    if out["workers"] < 1:
        raise ConfigError("workers", "workers must be positive")
    return out


def config_hash(cfg):
    blob = json.dumps({k: v for k, v in cfg.items() if k not in _NOT_HASHED},
                      sort_keys=True, default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


class Report:
    """One output table plus summary fields and verdicts."""

    def __init__(self, columns, units):
        self.columns = list(columns)
        self.units = units
        self.rows = []
        self.summary = {}
        self.verdicts = []

    def add(self, *row):
        self.rows.append(row)

    def to_csv(self, cfg):
        buf = io.StringIO()
        buf.write(f"# discerr {cfg['command']} config_hash={config_hash(cfg)} units: {self.units}\n")
        for key in sorted(self.summary):
            buf.write(f"# {key} = {json.dumps(self.summary[key], sort_keys=True, default=_jsonable)}\n")
        buf.write(",".join(self.columns) + "\n")
        for row in self.rows:
            buf.write(",".join(_fmt(v) for v in row) + "\n")
        return buf.getvalue()

    def to_json(self, cfg):
        doc = {
            "config": {k: v for k, v in cfg.items() if k != "workers"},
            "config_hash": config_hash(cfg),
            "units": self.units,
            "columns": self.columns,
            "rows": [[_jsonable(v) for v in r] for r in self.rows],
        }
        doc.update(self.summary)
        return json.dumps(doc, sort_keys=True, indent=2, default=_jsonable) + "\n"


def _jsonable(v):
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    return v


def _progress(msg):
    print(msg, file=sys.stderr, flush=True)


def _objects(cfg):
    return Payoff.parse(cfg["payoff"]), Model.parse(cfg["model"]), RngStream(cfg["seed"])


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_rate(cfg):
    from .estimators import error_moments, rate_fit

    payoff, model, stream = _objects(cfg)
    beta = cfg["beta"][0]
    rep = Report(["n", "p", "moment", "ci_low", "ci_high"], "moment = (E|C_1|^p)^(1/p)")
    if payoff.zero_error:
        for n in cfg["n_list"]:
            for p in cfg["p_list"]:
                rep.add(n, p, 0.0, 0.0, 0.0)
        rep.summary["fits"] = {_fmt(p): {"theta_hat": None, "stderr": None, "r2": None,
                                         "flag": "degenerate: zero error"} for p in cfg["p_list"]}
        return rep
    est = {}
    for n in cfg["n_list"]:
        _progress(f"rate: n={n}")
        est.update(error_moments(payoff, model, beta, [n], cfg["p_list"], cfg["paths"], stream,
                                 workers=cfg["workers"]))
    fits = {}
    for p in cfg["p_list"]:
        for n in cfg["n_list"]:
            e = est[(n, p)]
            rep.add(n, p, e.value, e.ci_low, e.ci_high)
        if len(set(cfg["n_list"])) >= 4:
            f = rate_fit([(n, est[(n, p)]) for n in cfg["n_list"]])
            fits[_fmt(p)] = {"theta_hat": f.theta_hat, "stderr": f.stderr, "r2": f.r2,
                             "flag": f.flagged}
        else:
            fits[_fmt(p)] = {"theta_hat": None, "stderr": None, "r2": None,
                             "flag": "fewer than 4 n values"}
    rep.summary["fits"] = fits
    return rep


def cmd_weaklimit(cfg):
    from scipy.stats import norm

    from .estimators import (collect_samples, error_moments, error_net_stream, ks_distance,
                             terminal_error_sampler, trend_test)
    from .smoothness import check_conditions
    from .timenet import build_net
    from .weaklimit import sample_Z

    payoff, model, stream = _objects(cfg)
    beta = cfg["beta"][0]
    n = max(cfg["n_list"])
    m = cfg["paths"]
    _progress("weaklimit: smoothness conditions")
    report = check_conditions(payoff, model, beta, k_max=cfg["k_max"])
    rep = Report(["path", "scaled_error", "limit"], "sqrt(n) C_1 and Z(1), dimensionless")
    _progress(f"weaklimit: sqrt(n) C_1 at n={n}")
    net = build_net(n, beta)
    err = collect_samples(terminal_error_sampler(payoff, model, net, scale=math.sqrt(n)), m,
                          error_net_stream(stream, n), workers=cfg["workers"])
    _progress("weaklimit: limit samples")
    zs = sample_Z(payoff, model, beta, [1.0], stream.spawn(1), stream.spawn(2), n_paths=m)
    z = np.asarray(zs.z_values)[:, -1]
    for i in range(m):
        rep.add(i, err[i], z[i])
    ks = ks_distance(err, z)
    rep.summary["ks_two_sample"] = ks
    if payoff.kind == "hermite" and payoff.params[0] == 2 and model.kind == "B" and beta == 1:
        rep.summary["ks_normal"] = ks_distance(err, norm.cdf)
    rep.summary["n"] = n
    rep.summary["verdict"] = report.verdict
    rep.summary["cond5"] = {"value": report.cond5_integral, "verdict": report.cond5_verdict}
    rep.summary["cond6"] = {"value": report.cond6_sup, "verdict": report.cond6_verdict}
    rep.summary["besov"] = {"verdict": report.besov_verdict,
                            "partial_sums": list(report.besov_partial_sums)}
    if len(cfg["n_list"]) >= 3 and not payoff.zero_error:
        ns = sorted(set(cfg["n_list"]))
        mom = error_moments(payoff, model, beta, ns, [2.0], m, stream, workers=cfg["workers"],
                            bootstrap=False, scaled=True)
        tr = trend_test(ns, [mom[(k, 2.0)] for k in ns])
        rep.summary["scaled_l2"] = {_fmt(k): mom[(k, 2.0)].value for k in ns}
        rep.summary["growth"] = {"slope": tr.slope, "tstat": tr.tstat, "grows": tr.grows}
    rep.verdicts.append(report.verdict)
    return rep


def cmd_besov(cfg):
    from .smoothness import besov_norm, hermite_coeffs

    payoff, model, _ = _objects(cfg)
    exp = hermite_coeffs((payoff, model), cfg["k_max"])
    truncs = [cfg["k_max"] // d for d in (8, 4, 2, 1)]
    rep = Report(["beta"] + [f"partial_k{t}" for t in truncs]
                 + ["increment_ratio", "tail_term", "verdict"], "partial Besov norms")
    for beta in cfg["beta"]:
        r = besov_norm(exp, beta)
        rep.add(beta, *r.partial_sums, r.increment_ratio, r.tail_term, r.verdict)
        rep.verdicts.append(r.verdict)
    rep.summary["l2_mass"] = exp.l2_mass
    return rep


def cmd_osc(cfg):
    from .smoothness import osc

    payoff, _, _ = _objects(cfg)
    rep = Report(["p", "eps", "osc"], "OSC_p(g, x0, eps), units of g")
    for p in cfg["p_list"]:
        for eps in cfg["eps_list"]:
            rep.add(p, eps, osc(payoff, p, cfg["x0"], eps))
    rep.summary["x0"] = cfg["x0"]
    return rep


def cmd_bracket(cfg):
    from .timenet import build_net
    from .weaklimit import bracket_integral, bracket_psi, gamma_process

    payoff, model, stream = _objects(cfg)
    beta = cfg["beta"][0]
    a = {"one": 1.0, "zero": 0.0}.get(cfg["a"])
    if a is None:
        a = gamma_process(payoff, model, 1 if cfg["a"] == "gamma" else 2)
    rep = Report(["n", "k", "mean_integral", "target", "mean_sup"],
                 "time integrals of psi^{n,k}(a) over [0, T]")
    k, T = cfg["k"], cfg["T"]
    for n in cfg["n_list"]:
        _progress(f"bracket: n={n}")
        net = build_net(n, beta)
        st = stream.spawn(n)
        ints, tgts, sups = [], [], []
        chunk = max(1, min(cfg["paths"], 2 ** 22 // (n * cfg["refine"])))
        for s in range(0, cfg["paths"], chunk):
            c = min(chunk, cfg["paths"] - s)
            coarse = sample_path(model, net.grid, st, c, s)
            fine = refine_path(model, coarse, cfg["refine"], st.spawn(1))
            i, t = bracket_integral(model, a, k, n, beta, T, fine)
            ints.append(i)
            tgts.append(t)
            sups.append(bracket_psi(model, a, k, n, beta, T, fine))
        rep.add(n, k, math.fsum(np.concatenate(ints)) / cfg["paths"],
                math.fsum(np.concatenate(tgts)) / cfg["paths"],
                math.fsum(np.concatenate(sups)) / cfg["paths"])
    return rep


def cmd_decompose(cfg):
    from .discretize import decompose_error
    from .timenet import build_net

    payoff, model, stream = _objects(cfg)
    beta = cfg["beta"][0]
    rep = Report(["n", "nE_I1_sq", "nE_I2_sq", "nE_I3_sq", "nE_C1_sq", "max_residual"],
                 "n times second moments")
    for n in cfg["n_list"]:
        _progress(f"decompose: n={n}")
        net = build_net(n, beta)
        st = stream.spawn(n)
        acc = {k: [] for k in ("i1", "i2", "i3", "c1", "res")}
        chunk = max(1, min(cfg["paths"], 2 ** 21 // (n * cfg["refine"])))
        for s in range(0, cfg["paths"], chunk):
            c = min(chunk, cfg["paths"] - s)
            coarse = sample_path(model, net.grid, st, c, s)
            fine = refine_path(model, coarse, cfg["refine"], st.spawn(1))
            d = decompose_error(payoff, model, net, fine)
            for key, v in (("i1", d.i1), ("i2", d.i2), ("i3", d.i3), ("c1", d.c1),
                           ("res", d.residual)):
                acc[key].append(np.atleast_1d(v))
        sq = {k: n * math.fsum(np.concatenate(v) ** 2) / cfg["paths"] for k, v in acc.items()}
        rep.add(n, sq["i1"], sq["i2"], sq["i3"], sq["c1"], float(np.max(np.concatenate(acc["res"]))))
    return rep


def cmd_net(cfg):
    from .timenet import build_net, mesh_stats

    beta = cfg["beta"][0]
    n = cfg["n_list"][0]
    net = build_net(n, beta)
    rep = Report(["i", "t_i", "one_minus_t_i"], "time")
    for i in range(n + 1):
        rep.add(i, net.knots[i], net.to_maturity[i])
    ms = mesh_stats(net)
    rep.summary["max_interval"] = ms.max_interval
    rep.summary["max_weighted_ratio"] = ms.max_weighted_ratio
    rep.summary["bound"] = ms.bound
    return rep


COMMANDS = {
    "rate": cmd_rate,
    "weaklimit": cmd_weaklimit,
    "besov": cmd_besov,
    "osc": cmd_osc,
    "bracket": cmd_bracket,
    "decompose": cmd_decompose,
    "net": cmd_net,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--payoff", help="e.g. binary(1), call(1), hermite(2), linear(2,1)")
    common.add_argument("--model", choices=["bm", "gbm"])
    common.add_argument("--beta", help="net exponent, or a comma list for sweeps")
    common.add_argument("--n-list", dest="n_list", help="comma-separated net sizes")
    common.add_argument("--paths", type=int, help="Monte Carlo paths")
    common.add_argument("--p-list", dest="p_list", help="comma-separated moment orders")
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("--out", help="output file (default: standard output)")
    common.add_argument("--format", choices=["csv", "json"])
    common.add_argument("--strict", action="store_true", default=None,
                        help="exit 4 on inconclusive verdicts")
    common.add_argument("--config", help="flat key = value file")
    common.add_argument("--x0", type=float, help="osc: centre of the square")
    common.add_argument("--eps-list", dest="eps_list", help="osc: comma-separated radii")
    common.add_argument("--a", choices=["one", "zero", "gamma", "gamma2"],
                        help="bracket: the process a")
    common.add_argument("--k", type=int, choices=[1, 2], help="bracket: power k")
    common.add_argument("--T", type=float, help="bracket: horizon")
    common.add_argument("--refine", type=int, help="fine points per net interval")
    common.add_argument("--k-max", dest="k_max", type=int, help="Hermite truncation")

    parser = argparse.ArgumentParser(prog="discerr", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "rate": "L_p moments of C_1 over net sizes and the fitted rate",
        "weaklimit": "sqrt(n) C_1 against samples of the weak limit",
        "besov": "partial Hermite-Besov norms over a beta sweep",
        "osc": "local oscillation OSC_p over eps",
        "bracket": "Riemann brackets psi^{n,k}",
        "decompose": "second moments of I1, I2, I3",
        "net": "print a time-net",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def _emit(text, path):
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        sys.stdout.flush()


def main(argv=None, environ=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = validate(resolve_config(args, environ))
    except ConfigError as exc:
        print(json.dumps({"error": "config", "field": exc.field, "message": str(exc)}),
              file=sys.stderr)
        return EXIT_CONFIG
    try:
        rep = COMMANDS[cfg["command"]](cfg)
    except AccuracyError as exc:
        print(json.dumps({"error": "accuracy", "message": str(exc),
                          "divergent": exc.divergent}), file=sys.stderr)
        return EXIT_ACCURACY
    except DiscerrError as exc:
        print(json.dumps({"error": "config", "field": None, "message": str(exc)}),
              file=sys.stderr)
        return EXIT_CONFIG
    text = rep.to_json(cfg) if cfg["format"] == "json" else rep.to_csv(cfg)
    _emit(text, cfg["out"])
    if cfg.get("strict") and "inconclusive" in rep.verdicts:
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def main_exit():
    sys.exit(main())
