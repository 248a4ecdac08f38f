"""Run configuration: an INI file with [model] and [run] sections, plus CSV output."""

from __future__ import annotations

import configparser
import csv
import math

import numpy as np

from .errors import ConfigError
from .geometry import GridSpec, ProductOfSpheres, TwoDWarp, WarpedLine
from .profiles import ConstantProfile, FlippedSecondDerivative, SineProfile

FORMAT_VERSION = 1

FAMILIES = (
    "torpedo",
    "torpedo-cylinder",
    "toe",
    "bend",
    "boot",
    "boot-sphere",
    "product-spheres",
    "round",
    "flat",
    "round-path",
    "product-path",
)

MODEL_KEYS = {
    "family": str,
    "n": int,
    "m": int,
    "delta": float,
    "lambda": float,
    "lambda2": float,
    "Lambda": float,
    "length": float,
    "l1": float,
    "l4": float,
    "dims": str,
    "start": str,
    "end": str,
    "fault": str,
}
RUN_KEYS = {"p": int, "grid": str, "seed": int, "tol": float, "threads": int, "h": float, "samples": int}
RUN_DEFAULTS = {"p": 0, "grid": "64x32", "seed": 0, "tol": 1e-7, "threads": 1, "h": 1e-4, "samples": 50}
FAULTS = ("flip-d2",)


def _parse_values(section, keys, name):
    out = {}
    for key, raw in section.items():
        if key not in keys:
            raise ConfigError(f"unknown key {key!r} in [{name}]")
        try:
            out[key] = keys[key](raw)
        except ValueError as exc:
            raise ConfigError(f"[{name}] {key} = {raw!r}: {exc}") from None
    return out


def load_config(path):
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keys are case sensitive: lambda vs Lambda
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    meta = parser["warpcurv"] if parser.has_section("warpcurv") else {}
    version = meta.get("format_version", str(FORMAT_VERSION))
    if version != str(FORMAT_VERSION):
        raise ConfigError(f"unsupported format_version {version}")
    extra = set(parser.sections()) - {"warpcurv", "model", "run"}
    if extra:
        raise ConfigError(f"unknown sections: {sorted(extra)}")
    model = _parse_values(parser["model"], MODEL_KEYS, "model") if parser.has_section("model") else {}
    run = _parse_values(parser["run"], RUN_KEYS, "run") if parser.has_section("run") else {}
    return model, run


def dump_config(model, run):
    """Config text reproducing a run. Derived keys are left out so the file loads back."""
    lines = ["[warpcurv]", f"format_version = {FORMAT_VERSION}", "", "[model]"]
    lines += [f"{k} = {v}" for k, v in model.items() if v is not None and k in MODEL_KEYS]
    lines += ["", "[run]"]
    lines += [f"{k} = {v}" for k, v in run.items() if v is not None and k in RUN_KEYS]
    return "\n".join(lines) + "\n"


def _ints(text):
    try:
        return tuple(int(x) for x in str(text).split(","))
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from None


def _floats(text):
    try:
        return tuple(float(x) for x in str(text).split(","))
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None


def _need(desc, key):
    if desc.get(key) is None:
        raise ConfigError(f"family {desc.get('family')!r} needs {key}")
    return desc[key]


def build_model(desc):
    """Model (or metric path) described by a [model] mapping."""
    from . import concordance, constructions

    family = desc.get("family")
    if family not in FAMILIES:
        raise ConfigError(f"unknown model family {family!r}; expected one of {', '.join(FAMILIES)}")
    delta = desc.get("delta", 1.0)
    lam = desc.get("lambda")
    if family == "torpedo":
        model = constructions.build_torpedo(_need(desc, "n"), delta, lam or 0.0)
    elif family == "torpedo-cylinder":
        model = constructions.build_torpedo_cylinder(_need(desc, "n"), delta, lam or 0.0, desc.get("length", 1.0))
    elif family == "toe":
        model = constructions.build_toe(_need(desc, "n"), delta, lam or 0.0, desc.get("lambda2", 0.0))
    elif family == "bend":
        model = constructions.build_bend(_need(desc, "n"), delta, desc.get("Lambda"))
    elif family == "boot":
        model = constructions.assemble_boot(
            _need(desc, "n"), delta, desc.get("Lambda"), desc.get("l1", 1.0), desc.get("l4", 1.0)
        )
    elif family == "boot-sphere":
        model = constructions.boot_cross_sphere(
            _need(desc, "n"), _need(desc, "m"), delta, desc.get("Lambda"), desc.get("l1", 1.0), desc.get("l4", 1.0)
        )
    elif family == "product-spheres":
        dims = _ints(_need(desc, "dims"))
        model = ProductOfSpheres(dims, (1.0,) * len(dims), label=f"product{dims}")
    elif family == "round":
        n = _need(desc, "n")
        model = WarpedLine(n - 1, SineProfile(delta), label=f"round S^{n}(delta={delta:g})")
    elif family == "flat":
        n = _need(desc, "n")
        length = desc.get("length", 1.0)
        model = TwoDWarp(n, ConstantProfile(delta, (0.0, length)), None, (0.0, length), label=f"flat(n={n})")
    elif family == "round-path":
        start, end = _floats(desc.get("start", "1")), _floats(desc.get("end", "2"))
        return concordance.round_path(_need(desc, "n"), start[0], end[0])
    else:
        return concordance.product_path(
            _ints(_need(desc, "dims")), _floats(_need(desc, "start")), _floats(_need(desc, "end"))
        )
    fault = desc.get("fault")
    if fault:
        model = inject_fault(model, fault)
    return model


def inject_fault(model, fault):
    """Corrupt the warping profile of a model (for testing the cross-check)."""
    import dataclasses

    if fault not in FAULTS:
        raise ConfigError(f"unknown fault {fault!r}")
    if not isinstance(model, (WarpedLine, TwoDWarp)):
        raise ConfigError("faults can be injected into warped models only")
    return dataclasses.replace(model, beta=FlippedSecondDerivative(model.beta), label=f"{model.label} [{fault}]")


def grid_of(text):
    try:
        return GridSpec.parse(text)
    except (ValueError, TypeError):
        raise ConfigError(f"bad grid {text!r}; expected e.g. 64x32") from None


def fmt(x):
    """17 significant digits; empty for None."""
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return "nan"
    return "%.17g" % (x + 0.0)  # folds -0 into 0


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(x) for x in row])
