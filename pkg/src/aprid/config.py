"""Experiment configuration: INI files, validation, canonical digests.

A config has three sections:

    [problem]    kind = npc | npc_synthetic | qcqp_expectation |
                        qcqp_finite_sum | bilinear, plus kind-specific keys
    [algorithm]  name = aprid | apriad | msa | csa | pdsg_adp, plus
                 algorithm-specific keys
    [run]        horizon, batch sizes, seeds, checkpoints, reference mode,
                 timing mode

Validation is all-at-once: every problem found is collected and raised in a
single ConfigError. Every key, including defaults the user never wrote, is
resolved to a canonical string and lands in the run manifest; the config
digest is the sha256 of those resolved lines with the seed list excluded
(two runs differing only in seeds are the same experiment).
"""

import configparser
import hashlib
import math
from dataclasses import dataclass, field

from .errors import ConfigError

__all__ = ["ExperimentConfig", "parse_config", "resolve_config", "config_digest"]


def _parse_bool(text):
    t = text.strip().lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_int(text):
    try:
        return int(text)
    except ValueError:
        raise ValueError(f"expected an integer, got {text!r}") from None


def _parse_float(text):
    try:
        v = float(text)
    except ValueError:
        raise ValueError(f"expected a number, got {text!r}") from None
    if not math.isfinite(v):
        raise ValueError(f"expected a finite number, got {text!r}")
    return v


def _pos_int(text):
    v = _parse_int(text)
    if v < 1:
        raise ValueError(f"expected a positive integer, got {v}")
    return v


def _nonneg_int(text):
    v = _parse_int(text)
    if v < 0:
        raise ValueError(f"expected a non-negative integer, got {v}")
    return v


def _pos_float(text):
    v = _parse_float(text)
    if not v > 0:
        raise ValueError(f"expected a positive number, got {v}")
    return v


def _nonneg_float(text):
    v = _parse_float(text)
    if v < 0:
        raise ValueError(f"expected a non-negative number, got {v}")
    return v


def _enum(*choices):
    def parse(text):
        t = text.strip()
        if t not in choices:
            raise ValueError(f"expected one of {choices}, got {text!r}")
        return t

    return parse


def _int_list(text):
    parts = [p for p in text.replace(",", " ").split() if p]
    if not parts:
        raise ValueError("expected a comma-separated list of integers")
    return [_nonneg_int(p) for p in parts]


def _checkpoints(text):
    # a single integer is a count of log-spaced checkpoints; a list of two or
    # more is the explicit iteration list
    values = _int_list(text)
    if len(values) == 1:
        return values
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError("checkpoint list must be strictly increasing")
    return values


@dataclass
class _Key:
    parse: object
    default: object = None
    required: bool = False


_PROBLEM_COMMON = {"kind": _Key(str, required=True)}

_PROBLEM_KEYS = {
    "npc": {
        "data": _Key(str, required=True),
        "format": _Key(_enum("auto", "dense-csv", "sparse-index-value"), "auto"),
        "preprocess": _Key(_parse_bool, True),
        "c_hat": _Key(_parse_float),
        "c_target": _Key(_parse_float),
        "kappa": _Key(_nonneg_float, 0.0),
        "box_halfwidth": _Key(_pos_float, 100.0),
    },
    "npc_synthetic": {
        "d": _Key(_pos_int, required=True),
        "n_pos": _Key(_pos_int, required=True),
        "n_neg": _Key(_pos_int, required=True),
        "separation": _Key(_pos_float, 2.0),
        "instance_seed": _Key(_nonneg_int, 0),
        "preprocess": _Key(_parse_bool, True),
        "c_hat": _Key(_parse_float),
        "c_target": _Key(_parse_float),
        "kappa": _Key(_nonneg_float, 0.0),
        "box_halfwidth": _Key(_pos_float, 100.0),
    },
    "qcqp_expectation": {
        "n": _Key(_pos_int, required=True),
        "p": _Key(_pos_int, required=True),
        "eval_samples": _Key(_pos_int, 100_000),
        "h_normalization": _Key(_enum("fro", "spectral"), "fro"),
    },
    "qcqp_finite_sum": {
        "n": _Key(_pos_int, required=True),
        "p": _Key(_pos_int, required=True),
        "num_objective_terms": _Key(_pos_int, required=True),
        "num_constraints": _Key(_pos_int, required=True),
        "instance_seed": _Key(_nonneg_int, 0),
        "h_normalization": _Key(_enum("fro", "spectral"), "fro"),
        "max_elements": _Key(_pos_int, 250_000_000),
    },
    "bilinear": {
        "n": _Key(_pos_int, required=True),
        "m": _Key(_pos_int, required=True),
        "instance_seed": _Key(_nonneg_int, 0),
        "noise_sigma": _Key(_nonneg_float, 0.0),
    },
}

_ALGORITHM_COMMON = {"name": _Key(str, required=True)}

_ALGORITHM_KEYS = {
    "aprid": {
        "alpha": _Key(_pos_float, 10.0),
        "rho": _Key(_pos_float, 1.0),
        "beta1": _Key(_nonneg_float, 0.9),
        "beta2": _Key(_pos_float, 0.99),
        "theta": _Key(_pos_float, 10.0),
        "schedule": _Key(_enum("constant", "sqrt_log"), "constant"),
        "divergence_cap": _Key(_pos_float, 1e8),
    },
    "apriad": {
        "alpha": _Key(_pos_float, 1.0),
        "rho": _Key(_pos_float, 1.0),
        "beta1": _Key(_nonneg_float, 0.9),
        "beta2": _Key(_pos_float, 0.99),
        "theta": _Key(_pos_float, 10.0),
        "schedule": _Key(_enum("constant", "sqrt"), "constant"),
    },
    "msa": {
        "alpha": _Key(_pos_float, 10.0),
        "rho": _Key(_pos_float, 1.0),
        "z_cap": _Key(_pos_float, 1e3),
    },
    "csa": {
        "gamma": _Key(_pos_float, 10.0),
        "eta_tol": _Key(_nonneg_float, 0.04),
        "s": _Key(_pos_int, 1),
    },
    "pdsg_adp": {
        "alpha": _Key(_pos_float, 20.0),
        "rho": _Key(_pos_float, math.sqrt(10.0)),
        "eta_scale": _Key(_nonneg_float, 0.1),
        "divergence_cap": _Key(_pos_float, 1e8),
    },
}

_RUN_KEYS = {
    "horizon": _Key(_pos_int, required=True),
    "j0": _Key(_pos_int, 10),
    "j1": _Key(_pos_int, 10),
    "jg": _Key(_pos_int, 100),
    "seeds": _Key(_int_list, [0]),
    "checkpoints": _Key(_checkpoints, [50]),
    "reference": _Key(_enum("exact", "best_feasible", "none"), None),
    "reference_tol": _Key(_pos_float, 1e-6),
    "feasible_tol": _Key(_pos_float, 1e-6),
    "freeze_samples": _Key(_pos_int, 100_000),
    "freeze_seed": _Key(_nonneg_int, 0),
    "timing": _Key(_enum("algo", "total", "none"), "algo"),
}


@dataclass
class ExperimentConfig:
    """Fully resolved, validated experiment description."""

    problem: dict
    algorithm: dict
    run: dict
    resolved: dict = field(default_factory=dict)
    digest: str = ""

    @property
    def problem_kind(self) -> str:
        return self.problem["kind"]

    @property
    def algorithm_name(self) -> str:
        return self.algorithm["name"]

    def with_override(self, param, value):
        """New config with one ``section.key`` replaced by ``value``."""
        sec, _, key = param.partition(".")
        if sec not in ("problem", "algorithm", "run") or not key:
            raise ConfigError([f"override target {param!r} must look like section.key"])
        raw = {
            "problem": {k: v for k, v in self._raw["problem"].items()},
            "algorithm": {k: v for k, v in self._raw["algorithm"].items()},
            "run": {k: v for k, v in self._raw["run"].items()},
        }
        raw[sec][key] = str(value)
        return resolve_config(raw)


def _resolve_section(section_name, raw, schema, errors):
    out = {}
    for key, spec in schema.items():
        if key in raw:
            try:
                out[key] = spec.parse(raw[key])
            except ValueError as exc:
                errors.append(f"{section_name}.{key}: {exc}")
        elif spec.required:
            errors.append(f"{section_name}.{key}: required key is missing")
        else:
            out[key] = spec.default
    for key in raw:
        if key not in schema:
            errors.append(f"{section_name}.{key}: unknown key")
    return out


def _canonical(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return ",".join(str(v) for v in value)
    if value is None:
        return ""
    return str(value)


def config_digest(resolved) -> str:
    """sha256 over the sorted resolved key=value lines, seeds excluded."""
    lines = sorted(f"{k}={v}" for k, v in resolved.items() if k != "run.seeds")
    return hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()


def resolve_config(raw) -> ExperimentConfig:
    """Validate a raw {section: {key: str}} mapping into an ExperimentConfig."""
    errors = []
    for sec in raw:
        if sec not in ("problem", "algorithm", "run"):
            errors.append(f"{sec}: unknown section")
    praw = dict(raw.get("problem", {}))
    araw = dict(raw.get("algorithm", {}))
    rraw = dict(raw.get("run", {}))

    kind = praw.get("kind")
    if kind not in _PROBLEM_KEYS:
        errors.append(
            f"problem.kind: expected one of {tuple(_PROBLEM_KEYS)}, got {kind!r}"
        )
        raise ConfigError(errors)
    name = araw.get("name")
    if name not in _ALGORITHM_KEYS:
        errors.append(
            f"algorithm.name: expected one of {tuple(_ALGORITHM_KEYS)}, got {name!r}"
        )
        raise ConfigError(errors)

    problem = _resolve_section(
        "problem", {k: v for k, v in praw.items() if k != "kind"},
        _PROBLEM_KEYS[kind], errors)
    problem["kind"] = kind
    algorithm = _resolve_section(
        "algorithm", {k: v for k, v in araw.items() if k != "name"},
        _ALGORITHM_KEYS[name], errors)
    algorithm["name"] = name
    run = _resolve_section("run", rraw, _RUN_KEYS, errors)

    # cross-field rules
    if kind in ("npc", "npc_synthetic") and not errors:
        has_hat = problem.get("c_hat") is not None
        has_target = problem.get("c_target") is not None
        if has_hat == has_target:
            errors.append("problem.c_hat: give exactly one of c_hat or c_target")
        if has_hat and problem.get("kappa"):
            errors.append("problem.kappa: kappa only applies together with c_target")
    saddle_problem = kind == "bilinear"
    saddle_algorithm = name == "apriad"
    if saddle_problem != saddle_algorithm:
        if saddle_problem:
            errors.append(
                f"algorithm.name: bilinear problems need the minimax solver, not {name!r}")
        else:
            errors.append(
                f"algorithm.name: the minimax solver only runs on bilinear problems, "
                f"not {kind!r}")
    if name == "pdsg_adp" and kind == "qcqp_expectation":
        errors.append(
            "algorithm.name: pdsg_adp needs exact per-constraint values; "
            "qcqp_expectation cannot provide them")
    if run.get("reference") is None:
        run["reference"] = "none" if saddle_problem else "exact"
    if saddle_algorithm and run.get("reference") != "none":
        errors.append(
            "run.reference: saddle runs report the exact gap; set reference = none")
    if name in ("aprid", "apriad"):
        b1 = algorithm.get("beta1")
        if b1 is not None and not 0 <= b1 < 1:
            errors.append(f"algorithm.beta1: must lie in [0, 1), got {b1}")
        b2 = algorithm.get("beta2")
        if b2 is not None and not 0 < b2 < 1:
            errors.append(f"algorithm.beta2: must lie in (0, 1), got {b2}")
    cps = run.get("checkpoints")
    horizon = run.get("horizon")
    if cps and horizon and len(cps) > 1:
        if cps[0] < 1 or cps[-1] > horizon:
            errors.append(
                f"run.checkpoints: explicit checkpoints must lie in [1, {horizon}]")
    if errors:
        raise ConfigError(errors)

    resolved = {}
    for sec_name, sec in (("problem", problem), ("algorithm", algorithm), ("run", run)):
        for key, value in sec.items():
            resolved[f"{sec_name}.{key}"] = _canonical(value)
    cfg = ExperimentConfig(
        problem=problem, algorithm=algorithm, run=run,
        resolved=resolved, digest=config_digest(resolved),
    )
    cfg._raw = {"problem": praw, "algorithm": araw, "run": rraw}
    return cfg


def parse_config(path) -> ExperimentConfig:
    """Read and validate an INI experiment config file."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError([f"cannot read config file {path}: {exc}"]) from None
    except configparser.Error as exc:
        raise ConfigError([f"cannot parse config file {path}: {exc}"]) from None
    raw = {sec: dict(parser.items(sec)) for sec in parser.sections()}
    return resolve_config(raw)
