"""Command-line front end: one subcommand per experiment, driven by a YAML config.

Exit codes: 0 success, 2 configuration or precondition error, 3 numerical failure
such as a singular design.
"""

import argparse
import io
import json
import math
import os
import sys

import numpy as np

from . import config as cfgmod
from . import rng
from .basis import ConstraintBall
from .bench import RateLadder, run_ladder
from .density import (DensityTransforms, exit_probability, normalization,
                      transition_density_grid)
from .errors import ConfigError, NumericalError, ProjSDEError
from .estimator import contrast, design_matrix, dimension_rule, fit, spec_for_dimension, truncate
from .gram import estimate_gram, gram_condition_sweep
from .minimax import (build_hypotheses, bump_model, holder_membership, kl_budget,
                      min_distance, pairwise_separation)
from .model import Compact, Growing, check_assumptions, derivative_check, model_from_config
from .regression import build_regression
from .simulate import PathSample, simulate_sample

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


# --- helpers -----------------------------------------------------------------

def _json(obj):
    return json.dumps(obj, sort_keys=True, indent=2, default=_jsonable) + "\n"


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _csv(columns, rows):
    buf = io.StringIO()
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)
                           for v in row) + "\n")
    return buf.getvalue()


def _write(out, name, text):
    with open(os.path.join(out, name), "w", newline="") as fh:
        fh.write(text)


def _hypotheses(cfg):
    lb = cfg["lowerbound"]
    return build_hypotheses(lb["beta"], lb["R"], lb["kappa1"], (lb["A"], lb["B"]), lb["m"],
                            lb["M_target"], seed=cfg["sample"]["seed"], a=lb["a"],
                            gamma_scale=lb["gamma_scale"])


def build_model(cfg):
    if "model" not in cfg:
        raise ConfigError("missing required key 'model'")
    mc = cfg["model"]
    name = mc["name"]
    if name == "bump":
        missing = [k for k in ("bumps", "beta", "R", "kappa1") if mc.get(k) is None]
        if missing:
            raise ConfigError(f"model: bump model missing key(s) {', '.join(missing)}")
        return bump_model(mc["beta"], mc["R"], mc["kappa1"], (mc.get("A", -1.0), mc.get("B", 1.0)),
                          mc["bumps"])
    hyps = _hypotheses(cfg) if name.startswith("hypothesis:") else None
    if hyps is not None:
        j = int(name.split(":", 1)[1]) if name.split(":", 1)[1].isdigit() else -1
        if not 0 <= j <= hyps.M:
            raise ConfigError(f"model: hypothesis index must be in 0..{hyps.M}")
    return model_from_config(mc, hyps)


def _interval(cfg):
    iv = cfg["interval"]
    return Compact(iv["A"], iv["B"]) if iv["kind"] == "fixed" else Growing(iv["a"])


def _basis_for(cfg, N, n):
    b = cfg["basis"]
    interval = _interval(cfg)
    A, B = interval.bounds(N)
    m = b["dimension"]
    if m is None:
        m = dimension_rule(N, n, b["beta"], interval, b["c"])
    return spec_for_dimension(b["kind"], m, A, B, b["degree"])


def _sample(cfg, model, threads):
    s = cfg["sample"]
    if s["input"]:
        try:
            return PathSample.load(s["input"])
        except (OSError, ValueError) as exc:
            raise ConfigError(f"sample.input: cannot load {s['input']}: {exc}") from None
    return simulate_sample(model, s["N"], s["n"], s["substeps"], s["seed"], scheme=s["scheme"],
                           threads=threads)


# --- subcommands ---------------------------------------------------------------

def cmd_simulate(cfg, out, threads=1):
    model = build_model(cfg)
    sample = _sample(cfg, model, threads)
    _write(out, "sample.csv", sample.to_csv())
    v = sample.values
    qv = np.sum(np.diff(v, axis=1) ** 2, axis=1)
    summary = {
        "N": sample.N, "n": sample.n, "values": int(v.size), "seed": sample.seed,
        "terminal_mean": float(np.mean(v[:, -1])), "terminal_sd": float(np.std(v[:, -1])),
        "min": float(v.min()), "max": float(v.max()),
        "quadratic_variation_mean": float(np.mean(qv)),
    }
    _write(out, "summary.json", _json(summary))
    return summary


def cmd_estimate(cfg, out, threads=1):
    model = build_model(cfg)
    sample = _sample(cfg, model, threads)
    spec = _basis_for(cfg, sample.N, sample.n)
    ball = ConstraintBall.for_spec(spec, sample.N, sample.n,
                                   None if cfg["constraint"] else math.inf)
    data = build_regression(sample, model.x0)
    design = design_matrix(data, spec)
    est = fit(data, spec, ball, design)
    if cfg["truncation"]:
        est = truncate(est, sample.N)
    doc = est.to_dict()
    doc["contrast"] = contrast(data, est.coeffs, spec, design)
    doc["N"], doc["n"] = sample.N, sample.n
    _write(out, "estimate.json", _json(doc))
    xs = np.linspace(spec.A, spec.B, 201)
    _write(out, "curve.csv", _csv(("x", "sigma2_hat", "sigma2_true"),
                                  zip(xs, est(xs), model.sigma2(xs))))
    return doc


def cmd_gram(cfg, out, threads=1):
    model = build_model(cfg)
    g, b, seed = cfg["gram"], cfg["basis"], cfg["sample"]["seed"]
    if cfg["interval"]["kind"] == "growing":
        table = gram_condition_sweep(model, g["N_list"], b["beta"], cfg["interval"]["a"], b["c"],
                                     b["degree"], b["kind"], mc_paths=g["mc_paths"], seed=seed,
                                     substeps=g["substeps"])
        _write(out, "gram_table.csv", table.to_csv())
        doc = {"ratios": table.ratios, "bounded": table.bounded()}
    else:
        N, n = cfg["sample"]["N"], cfg["sample"]["n"]
        spec = _basis_for(cfg, N, n)
        rep = estimate_gram(model, spec, n, g["mc_paths"], rng.derive_seed(seed, rng.GRAM),
                            g["substeps"])
        buf = io.StringIO()
        np.savetxt(buf, rep.psi, delimiter=",", fmt="%.17g")
        _write(out, "psi.csv", buf.getvalue())
        doc = {"m": spec.m, "min_eig": rep.min_eig, "max_eig": rep.max_eig,
               "op_norm_inverse": rep.op_norm_inverse, "l_m": rep.l_m, "product": rep.product,
               "rank_deficient": rep.rank_deficient, "mc_paths": rep.mc_paths}
    _write(out, "gram.json", _json(doc))
    return doc


def cmd_rates(cfg, out, threads=1):
    model = build_model(cfg)
    b, lad = cfg["basis"], cfg["ladder"]
    ladder = RateLadder(
        regime=lad["regime"], sizes=cfgmod.rungs(cfg), beta=b["beta"], truth=model,
        replicates=cfg["risk"]["replicates"], seed=cfg["sample"]["seed"],
        interval=_interval(cfg), kind=b["kind"], degree=b["degree"], c=b["c"],
        m=b["dimension"], constrained=cfg["constraint"], substeps=cfg["sample"]["substeps"],
        eval_paths=cfg["risk"]["eval_paths"], truth_id=cfg["model"]["name"],
    )
    res = run_ladder(ladder, threads)
    _write(out, "ladder.csv", res.to_csv())
    _write(out, "slope.json", res.slope_json() + "\n")
    _write(out, "ladder.dat", res.plot_data())
    return json.loads(res.slope_json())


def cmd_lowerbound(cfg, out, threads=1):
    lb, seed = cfg["lowerbound"], cfg["sample"]["seed"]
    hs = _hypotheses(cfg)
    words = hs.codewords.astype(int)
    _write(out, "codebook.csv", _csv(("index", "word"),
                                     [(i, "".join(map(str, w))) for i, w in enumerate(words)]))
    sep = pairwise_separation(hs, lb["c0"], lb["N"], lb["n"])
    hold = holder_membership(hs)
    kl = kl_budget(hs, lb["N"], lb["n"], lb["mc_paths"], seed, lb["bridges"], lb["bridge_steps"],
                   lb["substeps"], threads=threads)
    _write(out, "kl.csv", kl.to_csv())
    doc = {
        "hypotheses": hs.to_dict(),
        "codebook": {"M": hs.M, "m": hs.m, "min_hamming": min_distance(hs.codewords),
                     "required_M": 2 ** (hs.m / 8), "required_distance": hs.m / 8},
        "separation": {"max_rel_error": sep.max_rel_error, "min_distance": sep.min_distance,
                       "single_bit_distance": sep.single_bit_distance, "two_s": sep.two_s,
                       "separated": sep.separated},
        "holder": {"max_quotient": hold.max_quotient, "R": hold.R, "member": hold.member},
        "kl": {"average": kl.average, "se": kl.se, "budget": kl.budget, "kl_null": kl.kl_null,
               "tsybakov_pm": kl.tsybakov_pm, "within_budget": kl.within_budget},
    }
    _write(out, "lowerbound.json", _json(doc))
    return doc


def cmd_density(cfg, out, threads=1):
    model = build_model(cfg)
    d, seed = cfg["density"], cfg["sample"]["seed"]
    x = model.x0 if d["x"] is None else float(d["x"])
    tr = DensityTransforms(model)
    ys = np.asarray(d["ys"], dtype=float)
    rows, norms = [], {}
    for i, t in enumerate(d["times"]):
        vals, ses = transition_density_grid(model, 0.0, float(t), x, ys, d["bridges"],
                                            d["bridge_steps"], rng.derive_seed(seed, rng.BRIDGE, i),
                                            tr)
        rows.extend((float(t), y, v, s) for y, v, s in zip(ys, vals, ses))
        if d["normalization"] and x == model.x0:
            norms[repr(float(t))] = normalization(model, float(t), seed=rng.derive_seed(
                seed, rng.BRIDGE, len(d["times"]) + i), transforms=tr)
    _write(out, "density.csv", _csv(("t", "y", "density", "se"), rows))
    ex = exit_probability(model, d["exit_A"], d["exit_paths"], cfg["sample"]["substeps"],
                          rng.derive_seed(seed, rng.EVAL), d["exit_grid"])
    grid = np.arange(d["exit_grid"] + 1) / d["exit_grid"]
    _write(out, "exit.csv", _csv(("t", "probability"), zip(grid, ex.per_time)))
    doc = {"normalization": norms, "exit": {"A": d["exit_A"], "value": ex.value, "se": ex.se,
                                            "argmax_time": ex.argmax_time}}
    _write(out, "density.json", _json(doc))
    return doc


def cmd_check_assumptions(cfg, out, threads=1):
    model = build_model(cfg)
    rep = check_assumptions(model)
    doc = {"assumptions": rep.as_dict(), "derivative_check": derivative_check(model)}
    _write(out, "assumptions.json", _json(doc))
    return doc


COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "gram": cmd_gram,
    "rates": cmd_rates,
    "lowerbound": cmd_lowerbound,
    "density": cmd_density,
    "check-assumptions": cmd_check_assumptions,
}


def build_parser():
    p = argparse.ArgumentParser(prog="projsde",
                                description="Projection estimation of sigma^2 from repeated SDE paths.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="YAML experiment config")
    p.add_argument("--out", required=True, help="output directory (created if missing)")
    p.add_argument("--seed", type=int, default=None, help="overrides sample.seed")
    p.add_argument("--threads", type=int, default=1, help="worker threads; results do not depend on it")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = cfgmod.load_config_file(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            cfg["sample"]["seed"] = args.seed
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        os.makedirs(args.out, exist_ok=True)
        _write(args.out, "config.resolved.yaml", cfgmod.dump(cfg))
        COMMANDS[args.command](cfg, args.out, args.threads)
    except NumericalError as exc:
        print(f"projsde: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ProjSDEError as exc:
        print(f"projsde: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
