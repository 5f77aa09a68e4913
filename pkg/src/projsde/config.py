"""Experiment configuration: YAML loading and schema validation with defaults.

Errors carry the line of the offending key so that a user can find it in the
file.  Unknown keys are rejected at every level.
"""

import copy

import yaml

from .errors import ConfigError

_NUM = (int, float)
_OPT_NUM = (int, float, type(None))

# section -> key -> (accepted types, default)
SCHEMA = {
    "model": {
        "name": ((str,), None),
        "x0": (_NUM, 0.0),
        "sigma": (_NUM + (str,), None),
        "drift": (_NUM, 0.0),
        "b": ((str,), None),
        "b_prime": ((str,), None),
        "sigma_prime": ((str,), None),
        "sigma_double_prime": ((str,), None),
        "kappa0": (_OPT_NUM, None),
        "kappa1": (_OPT_NUM, None),
        "bumps": ((int,), None),
        "beta": (_NUM, None),
        "R": (_NUM, None),
        "A": (_NUM, None),
        "B": (_NUM, None),
    },
    "sample": {
        "N": ((int,), 10),
        "n": ((int,), 100),
        "substeps": ((int,), 16),
        "seed": ((int,), 0),
        "scheme": ((str,), "euler"),
        "input": ((str, type(None)), None),
    },
    "basis": {
        "kind": ((str,), "spline"),
        "degree": ((int,), 3),
        "dimension": ((int, type(None)), None),
        "beta": (_NUM, 2.0),
        "c": (_NUM, 1.0),
    },
    "interval": {
        "kind": ((str,), "fixed"),
        "A": (_NUM, -1.0),
        "B": (_NUM, 1.0),
        "a": (_NUM, 1.0),
    },
    "constraint": ((bool,), True),
    "truncation": ((bool,), False),
    "risk": {
        "replicates": ((int,), 20),
        "eval_paths": ((int,), 200),
    },
    "ladder": {
        "regime": ((str,), "compact_repeated"),
        "rungs": ((list,), [16, 32, 64, 128]),
    },
    "lowerbound": {
        "m": ((int,), 16),
        "M_target": ((int,), 4),
        "c0": (_NUM, 1.0),
        "beta": (_NUM, 2.0),
        "R": (_NUM, 1.0),
        "kappa1": (_OPT_NUM, None),
        "A": (_NUM, -1.0),
        "B": (_NUM, 1.0),
        "N": ((int,), 4),
        "n": ((int,), 16),
        "mc_paths": ((int,), 500),
        "bridges": ((int,), 100),
        "bridge_steps": ((int,), 16),
        "substeps": ((int,), 64),
        "gamma_scale": (_NUM, 1.0),
        "a": (_NUM, 1.0),
    },
    "gram": {
        "N_list": ((list,), [64, 128, 256, 512]),
        "mc_paths": ((int,), 20000),
        "substeps": ((int,), 4),
    },
    "density": {
        "x": (_OPT_NUM, None),
        "times": ((list,), [0.25, 0.5, 1.0]),
        "ys": ((list,), [-2.0, -1.0, 0.0, 1.0, 2.0]),
        "bridges": ((int,), 2000),
        "bridge_steps": ((int,), 32),
        "normalization": ((bool,), True),
        "exit_A": (_NUM, 3.0),
        "exit_paths": ((int,), 20000),
        "exit_grid": ((int,), 32),
    },
}

CHOICES = {
    ("sample", "scheme"): ("euler", "milstein"),
    ("basis", "kind"): ("spline", "fourier"),
    ("interval", "kind"): ("fixed", "growing"),
    ("ladder", "regime"): ("compact_single_path", "compact_repeated", "growing_interval",
                           "real_line"),
}


def _key_lines(node, prefix=(), out=None):
    """Map key paths to 1-based line numbers from a composed YAML node tree."""
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for knode, vnode in node.value:
            path = prefix + (str(knode.value),)
            out[path] = knode.start_mark.line + 1
            _key_lines(vnode, path, out)
    return out


def _where(source, lines, path):
    line = lines.get(tuple(path))
    return f"{source}:{line}" if line is not None else source


def _type_ok(value, types):
    # bool is an int subclass; never accept it where a number is expected
    if isinstance(value, bool) and bool not in types:
        return False
    return isinstance(value, types)


def _type_names(types):
    return " or ".join(sorted({"null" if t is type(None) else t.__name__ for t in types}))


def load_config(text, source="<config>"):
    """Parse and validate a YAML document; returns the fully resolved config dict."""
    try:
        node = yaml.compose(text)
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        loc = f"{source}:{mark.line + 1}" if mark is not None else source
        raise ConfigError(f"{loc}: YAML syntax error: {getattr(exc, 'problem', exc)}") from None
    raw = {} if raw is None else raw
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    lines = _key_lines(node) if node is not None else {}
    return resolve(raw, source, lines)


def load_config_file(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return load_config(text, str(path))


def resolve(raw, source="<config>", lines=None):
    lines = {} if lines is None else lines
    out = {}
    for key in raw:
        if key not in SCHEMA:
            raise ConfigError(f"{_where(source, lines, [key])}: unknown key {key!r}")
    for section, spec in SCHEMA.items():
        value = raw.get(section)
        if isinstance(spec, tuple):
            types, default = spec
            if value is None:
                value = default
            elif not _type_ok(value, types):
                raise ConfigError(f"{_where(source, lines, [section])}: {section} must be "
                                  f"{_type_names(types)}")
            out[section] = value
            continue
        if value is None:
            value = {}
        if not isinstance(value, dict):
            raise ConfigError(f"{_where(source, lines, [section])}: section {section!r} "
                              "must be a mapping")
        resolved = {}
        for key, v in value.items():
            if key not in spec:
                raise ConfigError(f"{_where(source, lines, [section, key])}: unknown key "
                                  f"{section}.{key}")
            types, _ = spec[key]
            if not _type_ok(v, types):
                raise ConfigError(f"{_where(source, lines, [section, key])}: {section}.{key} "
                                  f"must be {_type_names(types)}, got {type(v).__name__}")
            allowed = CHOICES.get((section, key))
            if allowed is not None and v not in allowed:
                raise ConfigError(f"{_where(source, lines, [section, key])}: {section}.{key} "
                                  f"must be one of {', '.join(allowed)}")
            resolved[key] = v
        if section == "model":
            if "name" in value:
                # model keys only matter when present; keep the document minimal
                out[section] = resolved
            elif section in raw:
                raise ConfigError(f"{_where(source, lines, ['model'])}: missing required key "
                                  "model.name")
            continue
        for key, (_, default) in spec.items():
            resolved.setdefault(key, copy.deepcopy(default))
        out[section] = resolved
    _check_values(out, source, lines)
    return out


def _check_values(cfg, source, lines):
    def need(cond, path, msg):
        if not cond:
            raise ConfigError(f"{_where(source, lines, path)}: {msg}")

    s = cfg["sample"]
    need(s["N"] >= 1, ["sample", "N"], "sample.N must be >= 1")
    need(s["n"] >= 2, ["sample", "n"], "sample.n must be >= 2")
    need(s["substeps"] >= 1, ["sample", "substeps"], "sample.substeps must be >= 1")
    need(s["seed"] >= 0, ["sample", "seed"], "sample.seed must be a non-negative integer")
    iv = cfg["interval"]
    if iv["kind"] == "fixed":
        need(iv["A"] < iv["B"], ["interval"], "interval needs A < B")
    else:
        need(iv["a"] > 0, ["interval", "a"], "interval.a must be positive")
    b = cfg["basis"]
    need(b["degree"] >= 0, ["basis", "degree"], "basis.degree must be >= 0")
    need(b["dimension"] is None or b["dimension"] >= 1, ["basis", "dimension"],
         "basis.dimension must be >= 1")
    need(cfg["risk"]["replicates"] >= 1, ["risk", "replicates"], "risk.replicates must be >= 1")
    for r in cfg["ladder"]["rungs"]:
        ok = (isinstance(r, int) and not isinstance(r, bool) and r >= 1) or (
            isinstance(r, list) and len(r) == 2 and all(isinstance(v, int) and v >= 1 for v in r))
        need(ok, ["ladder", "rungs"], "each ladder rung must be N or [N, n] with positive integers")
    for key in ("times", "ys"):
        vals = cfg["density"][key]
        need(all(_type_ok(v, _NUM) for v in vals), ["density", key],
             f"density.{key} must be a list of numbers")
    need(all(0 < t for t in cfg["density"]["times"]), ["density", "times"],
         "density.times must be positive")
    need(all(isinstance(v, int) and v >= 2 for v in cfg["gram"]["N_list"]), ["gram", "N_list"],
         "gram.N_list must hold integers >= 2")


def rungs(cfg):
    """Ladder rungs as (N, n) pairs; a bare N means n = N."""
    return [(r, r) if isinstance(r, int) else (r[0], r[1]) for r in cfg["ladder"]["rungs"]]


def dump(cfg):
    return yaml.safe_dump(cfg, sort_keys=True, default_flow_style=False)
