"""Command-line front end.

Exit codes: certify 0/1/2 for positive/nonpositive/inconclusive, crosscheck
0 on pass and 1 on fail, 3 for an exhausted search, 64 for bad input, 70
for numerical failures.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import __version__
from .config import (
    FAMILIES,
    FAULTS,
    RUN_DEFAULTS,
    build_model,
    dump_config,
    grid_of,
    load_config,
    write_csv,
)
from .errors import ConfigError, DomainError, InvalidParams, SearchExhausted, UnsupportedModel, WarpcurvError
from .geometry import MultiplyWarpedLine, RegionAssembly, TwoDWarp, WarpedLine

log = logging.getLogger("warpcurv")

EXIT_OK, EXIT_FAIL, EXIT_INCONCLUSIVE = 0, 1, 2
EXIT_EXHAUSTED = 3
EXIT_USAGE = 64
EXIT_NUMERIC = 70
CROSSCHECK_TOL = 1e-5
VERDICT_EXIT = {"positive": EXIT_OK, "nonpositive": EXIT_FAIL, "inconclusive": EXIT_INCONCLUSIVE}

# flag name -> (config section, key)
OVERRIDES = {
    "model": ("model", "family"),
    "n": ("model", "n"),
    "m": ("model", "m"),
    "delta": ("model", "delta"),
    "lam": ("model", "lambda"),
    "lam2": ("model", "lambda2"),
    "Lambda": ("model", "Lambda"),
    "length": ("model", "length"),
    "dims": ("model", "dims"),
    "start": ("model", "start"),
    "end": ("model", "end"),
    "inject_fault": ("model", "fault"),
    "p": ("run", "p"),
    "grid": ("run", "grid"),
    "seed": ("run", "seed"),
    "tol": ("run", "tol"),
    "threads": ("run", "threads"),
    "h": ("run", "h"),
    "samples": ("run", "samples"),
}


def _common(parser):
    parser.add_argument("--config", help="INI file with [model] and [run] sections")
    parser.add_argument("--model", choices=FAMILIES, help="model family")
    parser.add_argument("--n", type=int)
    parser.add_argument("--m", type=int)
    parser.add_argument("--delta", type=float)
    parser.add_argument("--lambda", dest="lam", type=float, help="torpedo neck length (toe: first extension)")
    parser.add_argument("--lambda2", dest="lam2", type=float, help="toe: second extension")
    parser.add_argument("--Lambda", type=float, help="bend radius parameter")
    parser.add_argument("--length", type=float)
    parser.add_argument("--dims", help="sphere dimensions, e.g. 2,2")
    parser.add_argument("--start", help="path start radii")
    parser.add_argument("--end", help="path end radii")
    parser.add_argument("--p", type=int)
    parser.add_argument("--grid", help="grid as NRxNT, e.g. 64x32")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--tol", type=float)
    parser.add_argument("--threads", type=int)
    parser.add_argument("--out", default=".", help="output directory")


def make_parser():
    parser = argparse.ArgumentParser(prog="warpcurv", description="Intermediate curvature of warped metrics.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("certify", help="minimise the p-curvature over a grid")
    _common(p)

    p = sub.add_parser("crosscheck", help="closed forms against the finite-difference oracle")
    _common(p)
    p.add_argument("--h", type=float)
    p.add_argument("--samples", type=int)
    p.add_argument("--inject-fault", choices=FAULTS)

    p = sub.add_parser("search", help="search for a bend radius or a concordance constant")
    _common(p)
    p.add_argument("kind", choices=("bend-lambda", "concordance-C"))

    p = sub.add_parser("curves", help="write curve data as CSV")
    _common(p)
    p.add_argument("what", choices=("profile", "sectionals", "min-s"))
    p.add_argument("--t", type=float, default=None, help="fixed t for sectionals (default: middle of the t-range)")
    return parser


def resolve(args):
    """Merge config file values with command-line overrides.

    Crosscheck uses its own default tolerance unless one is given explicitly.
    """
    model, run = load_config(args.config) if args.config else ({}, {})
    explicit_tol = "tol" in run or args.tol is not None
    run = {**RUN_DEFAULTS, **run}
    for flag, (section, key) in OVERRIDES.items():
        value = getattr(args, flag, None)
        if value is not None:
            (model if section == "model" else run)[key] = value
    if "family" not in model and getattr(args, "kind", None) == "bend-lambda":
        model["family"] = "bend"
    if "family" not in model:
        raise ConfigError("no model family given (use --model or [model] family)")
    run["tol_crosscheck"] = run["tol"] if explicit_tol else CROSSCHECK_TOL
    return model, run


def _out_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


def _write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text if text.endswith("\n") else text + "\n")


# --- commands --------------------------------------------------------------------


def _certificate_rows(cert):
    r, t = cert.points
    rows = []
    for i, value in enumerate(cert.point_minima):
        frame = cert.point_frames[i].T.ravel()
        rows.append([r[i], None if t is None else t[i], value, *frame])
    d, k = cert.point_frames.shape[1:]
    header = ["r", "t", "min_s"] + [f"w{j}_{a}" for j in range(k) for a in range(d)]
    return header, rows


def _certify_one(model, run, model_id=None):
    from .positivity import certify

    return certify(
        model,
        run["p"],
        grid=grid_of(run["grid"]),
        tolerance=run["tol"],
        seed=run["seed"],
        threads=run["threads"],
        model_id=model_id,
    )


def _combined_verdict(verdicts):
    if all(v == "positive" for v in verdicts):
        return "positive"
    if any(v == "nonpositive" for v in verdicts):
        return "nonpositive"
    return "inconclusive"


def cmd_certify(model_spec, run, out):
    from .constructions import certify_regions

    model = build_model(model_spec)
    if not hasattr(model, "dim"):
        raise ConfigError("certify needs a model, not a path")
    certs = {}
    if isinstance(model, RegionAssembly):
        certs = certify_regions(model, run["p"], grid_of(run["grid"]), run["seed"], run["tol"], run["threads"])
    else:
        certs[""] = _certify_one(model, run)
    verdict = _combined_verdict([c.verdict for c in certs.values()])
    lines = ["# warpcurv certificate v1", f"model = {model.label or model.kind}", f"p = {run['p']}"]
    lines += [f"grid = {run['grid']}", f"seed = {run['seed']}", f"tolerance = {run['tol']!r}"]
    for name, cert in certs.items():
        x = cert.argmin_point
        lines.append(f"[{name or 'model'}]")
        lines.append(f"min = {cert.min_value!r}")
        lines.append(f"argmin_r = {x.r!r}")
        if x.t is not None:
            lines.append(f"argmin_t = {x.t!r}")
        lines.append(f"strategy = {cert.strategy}")
        lines.append(f"strategy_gap = {cert.strategy_gap:.3e}")
        lines.append(f"verdict = {cert.verdict}")
        header, rows = _certificate_rows(cert)
        suffix = f"_{name}" if name else ""
        write_csv(os.path.join(out, f"certificate{suffix}.csv"), header, rows)
    lines.append(f"verdict = {verdict}")
    report = "\n".join(lines)
    _write_text(os.path.join(out, "certificate.txt"), report)
    _write_text(os.path.join(out, "run.ini"), dump_config(model_spec, run))
    print(report)
    return VERDICT_EXIT[verdict]


def cmd_crosscheck(model_spec, run, out):
    from .oracle import crosscheck

    model = build_model(model_spec)
    parts = [(reg.name, reg.model) for reg in model.regions] if isinstance(model, RegionAssembly) else [("", model)]
    rows, passed = [], True
    text = []
    for name, sub in parts:
        if not hasattr(sub, "dim"):
            raise ConfigError("crosscheck needs a model, not a path")
        rep = crosscheck(sub, samples=run["samples"], h=run["h"], tol=run["tol_crosscheck"], seed=run["seed"],
                         threads=run["threads"], model_id=f"{name} {sub.label}".strip())
        passed &= rep.passed
        text.append(rep.table())
        rows += [[rep.model_id, r, t, res] for r, t, res in rep.rows]
    write_csv(os.path.join(out, "crosscheck.csv"), ["model", "r", "t", "residual"], rows)
    report = "\n\n".join(text)
    _write_text(os.path.join(out, "crosscheck.txt"), report)
    print(report)
    return EXIT_OK if passed else EXIT_FAIL


def cmd_search(kind, model_spec, run, out):
    grid = grid_of(run["grid"])
    if kind == "bend-lambda":
        from .constructions import bend_lambda_search

        res = bend_lambda_search(
            model_spec.get("n", 2), model_spec.get("delta", 1.0), run["p"], grid, run["seed"], threads=run["threads"]
        )
        write_csv(os.path.join(out, "search.csv"), ["Lambda", "min_s", "verdict"], res.trail)
        line = f"Lambda* = {res.Lambda!r}"
    else:
        from .concordance import MetricPath, find_C

        path = build_model(model_spec)
        if not isinstance(path, MetricPath):
            raise ConfigError("concordance-C needs a round-path or product-path family")
        C = find_C(path, run["p"], grid, run["seed"])
        line = f"C = {C!r}"
    _write_text(os.path.join(out, "search.txt"), line)
    print(line)
    return EXIT_OK


def cmd_curves(what, model_spec, run, out, t_fixed=None):
    from .concordance import MetricPath, build_concordance, min_s_profile
    from .curvature import sectional_rows
    from .profiles import profile_rows

    target = build_model(model_spec)
    if what == "min-s":
        if isinstance(target, MetricPath):
            conc = build_concordance(target, run["p"], run["seed"], grid_of(run["grid"]))
            write_csv(os.path.join(out, "min_s.csv"), ["t", "min_s"], min_s_profile(conc))
            print(conc.summary())
            return EXIT_OK
        cert = _certify_one(_single(target), run)
        r, t = cert.points
        cols = [r] + ([] if t is None else [t]) + [cert.point_minima]
        header = ["r"] + ([] if t is None else ["t"]) + ["min_s"]
        write_csv(os.path.join(out, "min_s.csv"), header, np.column_stack(cols))
        return EXIT_OK
    model = _single(target)
    grid = grid_of(run["grid"])
    rs = np.linspace(*model.domain, grid.n_r)
    if what == "profile":
        write_csv(os.path.join(out, "profile.csv"), ["r", "value", "d1", "d2"], profile_rows(model.beta, rs))
        return EXIT_OK
    if not isinstance(model, TwoDWarp):
        raise ConfigError("sectionals along r need a model with an (r, t) base")
    t = 0.5 * sum(model.t_domain) if t_fixed is None else t_fixed
    write_csv(os.path.join(out, "sectionals.csv"), ["r", "K_rt", "K_ri", "K_ti", "K_ij"], sectional_rows(model, rs, t))
    return EXIT_OK


def _single(model):
    if isinstance(model, RegionAssembly):
        raise ConfigError("pick a single region family for curve output")
    if not isinstance(model, (WarpedLine, TwoDWarp, MultiplyWarpedLine)):
        raise ConfigError(f"no radial profile for {model.kind}")
    return model


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        model_spec, run = resolve(args)
        out = _out_dir(args.out)
        if args.command == "certify":
            return cmd_certify(model_spec, run, out)
        if args.command == "crosscheck":
            return cmd_crosscheck(model_spec, run, out)
        if args.command == "search":
            return cmd_search(args.kind, model_spec, run, out)
        return cmd_curves(args.what, model_spec, run, out, args.t)
    except SearchExhausted as exc:
        print(f"search exhausted: {exc}", file=sys.stderr)
        return EXIT_EXHAUSTED
    except (ConfigError, InvalidParams, DomainError, UnsupportedModel) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (WarpcurvError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
