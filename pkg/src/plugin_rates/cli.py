"""
``plugin-rates`` command line.

Exit codes: 0 success, 1 usage or configuration error, 2 data or model
error, 3 net budget exceeded.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from itertools import product

import numpy as np

from . import __version__
from .config import RunConfig
from .dataset import dataset_to_csv, format_float, read_dataset
from .errors import ConfigError, ModelError, NetBudgetExceeded
from .harness import (ConstantLabel, LPPlugin, OracleBayes, SievePlugin, SweepConfig, assouad_check,
                      concentration_csv, concentration_probe, decay_csv, exponential_probe, gnuplot_dat,
                      rate_csv, run_sweep, summarize)
from .lp_regression import KernelSpec, eta_star_many
from .sieve import NetSpec, SieveConfig, build_net, epsilon_schedule, implied_a_prime, select_sieve, sized_spec
from .synth import (HypercubeFamily, HypercubeOracle, HypercubeParams, make_corridor, make_parabola)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a configuration key (repeatable)")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--seed", help="base seed, an integer in [0, 2^64)")
    p = _Parser(prog="plugin-rates", description="Plug-in classifiers and their convergence rates.")
    p.add_argument("--version", action="version", version=f"plugin-rates {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("synth", parents=[common], help="sample a dataset from an oracle law")
    fit = sub.add_parser("fit", parents=[common], help="fit a regression estimate and classify query points")
    fit.add_argument("dataset", help="dataset CSV (header x1,...,xd,y)")
    fit.add_argument("--queries", help="query CSV with header x1,...,xd (default: a regular grid)")
    sub.add_parser("sweep", parents=[common], help="excess risk against sample size")
    sub.add_parser("probe", parents=[common], help="concentration, exponential decay or hypercube check")
    sub.add_parser("netinfo", parents=[common], help="size and entropy constant of a net")
    return p


# ----------------------------------------------------------------------------
# builders


def header_line(cfg: RunConfig) -> str:
    return f"# plugin-rates {__version__} config-hash={cfg.digest()}"


def build_oracle(cfg: RunConfig):
    kind = cfg.require("oracle.kind")
    d = cfg.require("oracle.d")
    if kind == "parabola":
        return make_parabola(d, cfg.require("oracle.c_coef"), cfg.require("oracle.radius"))
    if kind == "corridor":
        return make_corridor(d, cfg.require("oracle.t0"), cfg.require("oracle.gap_width"))
    beta, lip = cfg.require("oracle.beta"), cfg.require("oracle.lip")
    if kind == "hypercube_family":
        return HypercubeFamily(beta, lip, d, cfg.get("oracle.alpha"), cfg.get("oracle.mode"),
                               cfg.get("oracle.c_q"), cfg.get("oracle.c_w"), cfg.get("oracle.c_m"))
    return HypercubeOracle(hypercube_params(cfg))


def hypercube_params(cfg: RunConfig) -> HypercubeParams:
    return HypercubeParams(d=cfg.require("oracle.d"), q=cfg.require("oracle.q"), m=cfg.require("oracle.m"),
                           w=cfg.require("oracle.w"), beta=cfg.require("oracle.beta"),
                           lip=cfg.require("oracle.lip"), sigma=cfg.get("oracle.sigma", ()),
                           mode=cfg.get("oracle.mode"), c_phi=cfg.get("oracle.c_phi"),
                           alpha=cfg.get("oracle.alpha"))


def build_lp(cfg: RunConfig) -> LPPlugin:
    kernel = KernelSpec(cfg.get("lp.kernel"), cfg.get("lp.kernel_radius"))
    return LPPlugin(cfg.require("lp.beta"), cfg.get("lp.c_h"), cfg.get("lp.bandwidth"), kernel)


def build_sieve_plugin(cfg: RunConfig) -> SievePlugin:
    return SievePlugin(cfg.require("sieve.beta"), cfg.require("sieve.lip"), cfg.get("sieve.alpha"),
                       cfg.require("sieve.rho"), cfg.get("sieve.p"), cfg.get("sieve.c_eps"),
                       cfg.get("sieve.lower"), cfg.get("sieve.upper"), cfg.get("sieve.coef_bound"),
                       cfg.get("sieve.budget"))


def build_classifier(cfg: RunConfig):
    kind = cfg.get("sweep.classifier")
    if kind == "lp":
        return build_lp(cfg)
    if kind == "sieve":
        return build_sieve_plugin(cfg)
    if kind == "bayes":
        return OracleBayes()
    return ConstantLabel(cfg.get("sweep.constant"))


def net_spec(cfg: RunConfig, n: int | None = None) -> NetSpec:
    """Explicit resolution when ``sieve.cells`` is set, else sized from epsilon or eps_n."""
    beta, lip = cfg.require("sieve.beta"), cfg.require("sieve.lip")
    common = dict(d=cfg.get("sieve.d"), lower=cfg.get("sieve.lower"), upper=cfg.get("sieve.upper"),
                  coef_bound=cfg.get("sieve.coef_bound"), p=cfg.get("sieve.p"),
                  size_budget=cfg.get("sieve.budget"), degree=cfg.get("sieve.degree"))
    if not common["upper"] > common["lower"]:
        raise ConfigError("sieve.upper must exceed sieve.lower")
    if cfg.has("sieve.cells"):
        tau = cfg.require("sieve.tau")
        return NetSpec(beta=beta, lip=lip, cells_per_axis=cfg.require("sieve.cells"), tau=tau,
                       epsilon=cfg.get("sieve.epsilon", 2.0 * tau), **common)
    if cfg.has("sieve.epsilon"):
        eps = cfg.require("sieve.epsilon")
    elif n is not None:
        eps = epsilon_schedule(n, SieveConfig(cfg.get("sieve.alpha"), cfg.require("sieve.rho"), cfg.get("sieve.p"),
                                              cfg.get("sieve.c_eps")))
    else:
        raise ConfigError("missing required key 'sieve.epsilon' (or sieve.cells with sieve.tau, or sieve.n)")
    return sized_spec(beta, lip, eps, **common)


def theory(cfg: RunConfig) -> dict | None:
    mode = cfg.get("sweep.theory")
    if mode == "none":
        return None
    needed = {"strong": ("alpha", "beta", "d"), "mild": ("alpha", "beta", "d"),
              "sieve_inf": ("alpha", "rho"), "sieve_p": ("alpha", "rho", "p")}[mode]
    out = {"mode": mode}
    for k in needed:
        v = cfg.require(f"sweep.{k}")
        out[k] = int(v) if isinstance(v, float) and v.is_integer() else v
    return out


# ----------------------------------------------------------------------------
# output


def _write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _meta_text(cfg: RunConfig, params: dict) -> str:
    lines = [header_line(cfg)]
    lines += [f"{k} = {format_float(v) if isinstance(v, float) else v}" for k, v in params.items()]
    lines.append(f"seed = {cfg.get('seed')}")
    return "\n".join(lines) + "\n"


def _out_path(args, cfg: RunConfig, suffix: str) -> str:
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, cfg.get("out.name") + suffix)


def _fmt_count(net) -> str:
    if net.log_count < 30 * math.log(10):
        return str(net.count)
    return f"~1e{math.floor(net.log_count / math.log(10))}"


# ----------------------------------------------------------------------------
# commands


def cmd_synth(args, cfg: RunConfig) -> int:
    oracle = build_oracle(cfg)
    n = cfg.require("oracle.n")
    seed = cfg.get("seed")
    if isinstance(oracle, HypercubeFamily):
        from .harness import derived_seed
        oracle = oracle.oracle_for(n, derived_seed(seed, n, 0, "oracle"))
    data = oracle.sample(seed, n)
    csv_path = _out_path(args, cfg, ".csv")
    meta_path = _out_path(args, cfg, ".meta")
    _write(csv_path, dataset_to_csv(data, header_line(cfg)))
    _write(meta_path, _meta_text(cfg, {**oracle.params(), "n": n}))
    print(f"rows = {data.n}")
    print(f"data = {csv_path}")
    print(f"meta = {meta_path}")
    return 0


def _read_queries(path: str, d: int) -> np.ndarray:
    from .errors import DatasetFormatError
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip() and not ln.startswith("#")]
    expected = ",".join(f"x{j + 1}" for j in range(d))
    if not lines or lines[0].replace(" ", "") != expected:
        raise DatasetFormatError(f"query header must be {expected}", row=1)
    rows = []
    for i, ln in enumerate(lines[1:], 2):
        try:
            rows.append([float(v) for v in ln.split(",")])
        except ValueError:
            raise DatasetFormatError("not a number", row=i) from None
        if len(rows[-1]) != d:
            raise DatasetFormatError(f"expected {d} fields", row=i)
    return np.array(rows, dtype=float).reshape(-1, d)


def _grid_queries(cfg: RunConfig, d: int) -> np.ndarray:
    lo, hi, k = cfg.get("fit.grid_lower"), cfg.get("fit.grid_upper"), cfg.get("fit.grid_points")
    axis = np.linspace(lo, hi, k)
    return np.array(list(product(axis, repeat=d)), dtype=float)


def cmd_fit(args, cfg: RunConfig) -> int:
    data = read_dataset(args.dataset)
    queries = _read_queries(args.queries, data.d) if args.queries else _grid_queries(cfg, data.d)
    names = [f"x{j + 1}" for j in range(data.d)]
    lines = [header_line(cfg)]
    if cfg.get("fit.classifier") == "lp":
        values, guarded = eta_star_many(data, queries, build_lp(cfg).config(data.n, data.d))
        lines.append(",".join(names + ["eta_hat", "label", "guarded"]))
        for x, v, g in zip(queries, values, guarded):
            lines.append(",".join([format_float(c) for c in x] + [format_float(v), str(int(v >= 0.5)), str(int(g))]))
    else:
        spec = net_spec(cfg, data.n)
        if spec.d != data.d:
            spec = NetSpec(**{**spec.__dict__, "d": data.d})
        net = build_net(spec)
        fit = select_sieve(data, net)
        values = fit.member(queries)
        lines.append(f"# member_index={fit.index} empirical_risk={format_float(fit.empirical_risk)}")
        lines.append(",".join(names + ["eta_hat", "label", "guarded", "member_index", "empirical_risk"]))
        for x, v in zip(queries, values):
            lines.append(",".join([format_float(c) for c in x] + [format_float(v), str(int(v >= 0.5)), "0",
                                                                   str(fit.index), format_float(fit.empirical_risk)]))
    path = _out_path(args, cfg, ".fit.csv")
    _write(path, "\n".join(lines) + "\n")
    print(f"queries = {len(queries)}")
    print(f"fit = {path}")
    return 0


def cmd_sweep(args, cfg: RunConfig) -> int:
    sweep = SweepConfig(build_oracle(cfg), build_classifier(cfg), cfg.require("sweep.n_grid"),
                        cfg.get("sweep.replicates"), cfg.get("sweep.mc"), cfg.get("seed"), theory(cfg),
                        cfg.get("sweep.workers"))
    path = _out_path(args, cfg, ".sweep.csv")
    head = header_line(cfg)

    def flush(rows):
        done = len(rows) == len(sweep.n_grid)
        _write(path, rate_csv(summarize(rows, sweep.theory), head, partial=not done))

    result = run_sweep(sweep, on_row=flush)
    if cfg.get("out.gnuplot"):
        _write(_out_path(args, cfg, ".sweep.dat"),
               gnuplot_dat([r.n for r in result.rows], [r.mean_excess for r in result.rows], head))
    print(f"rows = {len(result.rows)}")
    print(f"fitted_slope = {format_float(result.slope)}")
    print(f"sweep = {path}")
    return 0


def cmd_probe(args, cfg: RunConfig) -> int:
    kind = cfg.require("sweep.probe")
    seed = cfg.get("seed")
    head = header_line(cfg)
    path = _out_path(args, cfg, ".probe.csv")
    if kind == "concentration":
        res = concentration_probe(build_oracle(cfg), build_lp(cfg), cfg.require("sweep.points"),
                                  cfg.require("sweep.deltas"), cfg.require("sweep.n_grid"),
                                  cfg.get("sweep.replicates"), seed)
        _write(path, concentration_csv(res, head))
        if res.fit:
            print(f"slope = {format_float(res.fit.slope)}")
            print(f"r_squared = {format_float(res.fit.r_squared)}")
    elif kind == "exponential":
        lp = build_lp(cfg)
        if lp.bandwidth is None:
            raise ConfigError("missing required key 'lp.bandwidth' (the exponential probe uses a fixed h)")
        res = exponential_probe(build_oracle(cfg), lp, cfg.require("sweep.n_grid"), cfg.get("sweep.replicates"),
                                cfg.get("sweep.mc"), seed)
        _write(path, decay_csv(res, head))
        if cfg.get("out.gnuplot"):
            _write(_out_path(args, cfg, ".probe.dat"),
                   gnuplot_dat([r.n for r in res.rows], [r.mean_excess for r in res.rows], head))
    else:
        res = assouad_check(hypercube_params(cfg), build_classifier(cfg), cfg.require("sweep.n"),
                            cfg.get("sweep.mc"), seed, cfg.get("sweep.replicates"), cfg.get("sweep.bound_form"))
        lines = [head, "sigma,mean_excess,se"]
        lines += [f"{' '.join(str(s) for s in sg)},{format_float(m)},{format_float(se)}" for sg, m, se in res.per_vertex]
        lines.append(f"# sup_excess={format_float(res.sup_excess)} se={format_float(res.sup_se)} "
                     f"bound={format_float(res.bound)} dominates={int(res.dominates)}")
        _write(path, "\n".join(lines) + "\n")
        print(f"sup_excess = {format_float(res.sup_excess)}")
        print(f"bound = {format_float(res.bound)}")
        print(f"dominates = {int(res.dominates)}")
    print(f"probe = {path}")
    return 0


def cmd_netinfo(args, cfg: RunConfig) -> int:
    n = cfg.get("sieve.n")
    spec = net_spec(cfg, n)
    from .sieve import Net
    net = Net(spec)
    rho = cfg.get("sieve.rho", spec.d / spec.beta)
    print(f"cells_per_axis = {spec.cells_per_axis}")
    print(f"tau = {format_float(spec.tau)}")
    print(f"degree = {spec.degree}")
    print(f"members_per_cell = {net.per_cell}")
    print(f"card = {_fmt_count(net)}")
    print(f"log_card = {format_float(net.log_count)}")
    print(f"epsilon = {format_float(spec.epsilon)}")
    if n is not None and cfg.has("sieve.rho"):
        eps_n = epsilon_schedule(n, SieveConfig(cfg.get("sieve.alpha"), rho, cfg.get("sieve.p"), cfg.get("sieve.c_eps")))
        print(f"epsilon_n = {format_float(eps_n)}")
    print(f"implied_a_prime = {format_float(implied_a_prime(net, rho))}")
    print(f"within_budget = {int(net.log_count <= math.log(spec.size_budget) + 1e-12)}")
    return 0


COMMANDS = {"synth": cmd_synth, "fit": cmd_fit, "sweep": cmd_sweep, "probe": cmd_probe, "netinfo": cmd_netinfo}


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except UsageError as exc:
        print(f"plugin-rates: error: {exc}", file=sys.stderr)
        return 1
    try:
        text = ""
        if args.config:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        cfg = RunConfig.from_sources(text, args.set, args.seed)
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, ValueError) as exc:
        print(f"plugin-rates: error: {exc}", file=sys.stderr)
        return 1
    except NetBudgetExceeded as exc:
        print(f"plugin-rates: net budget exceeded: {exc}", file=sys.stderr)
        return 3
    except (ModelError, OSError) as exc:
        print(f"plugin-rates: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        print("plugin-rates: interrupted; completed rows were kept", file=sys.stderr)
        return 130


if __name__ == "__main__":
    sys.exit(main())
