from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path
from typing import Any

from jsonschema import ValidationError

from . import __version__
from . import reports
from .estimators import EstimatorError, OptimizerSpec, RatioObjective, constants_report, estimate_sup
from .gsr_engine import (DomainError, FamilyError, GroundStateSpec, IntegrationSpec, TestFunctionSpec,
                         default_test_function, gsr_residual, hardy_deficit, parse_family)
from .identities import run_suite
from .inequalities import form_constant, hardy_form, ratio_objective
from .quantities import ConfigurationError, load_configuration, particle_sum, rho_sq
from .sharpness import SUITE_DELTAS, sharpness_suite, sweep

SEED_ENV = "GSRHARDY_SEED"

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

# defaults live here (not in argparse) so that --manifest values can sit between flags and defaults
DEFAULTS: dict[str, dict[str, Any]] = {
    "identities": {"trials": 100, "max_dim": 6, "config": None},
    "verify-gsr": {"family": None, "d": None, "N": 1, "p": 0, "alpha": None, "R": None,
                   "samples": 1_000_000, "block_size": 1 << 16, "center": None, "radius": None},
    "hardy": {"family": None, "d": None, "N": 1, "p": 0, "alpha": None, "R": None, "form": "standard",
              "constant": None, "ratio_value": None, "samples": 1_000_000, "block_size": 1 << 16,
              "center": None, "radius": None},
    "estimate": {"kind": None, "d": None, "N": None, "p": 0, "R": 1.0, "restarts": 8, "local_steps": 3000},
    "sharpness": {"family": None, "d": None, "N": 1, "p": 0, "deltas": list(SUITE_DELTAS),
                  "samples": 400_000, "block_size": 1 << 16, "suite": False},
}
REQUIRED = {"verify-gsr": ("family", "d"), "hardy": ("family", "d"), "estimate": ("kind", "d", "N")}


class UsageError(ValueError):
    pass


def _parse_float_list(raw: str) -> list[float]:
    return [float(x.strip()) for x in raw.split(",") if x.strip()]


def _write_json_file(path: str | Path, payload: Any) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


def _load_manifest(path: str | None, command: str) -> tuple[dict, int | None]:
    """Parameters and seed from a manifest file, a bare parameter object, or a previous report."""
    if path is None:
        return {}, None
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(payload, dict):
        raise UsageError(f"{path}: manifest must be a JSON object")
    if "manifest" in payload:
        payload = payload["manifest"]
    if payload.get("command", command) != command:
        raise UsageError(f"{path}: manifest is for {payload['command']!r}, not {command!r}")
    seed = payload.get("seed")
    params = payload.get("parameters", {k: v for k, v in payload.items() if k not in ("command", "seed")})
    unknown = sorted(set(params) - set(DEFAULTS[command]))
    if unknown:
        raise UsageError(f"{path}: unknown {command} parameters {unknown}")
    return params, seed


def _resolve_seed(flag: int | None, from_manifest: int | None) -> int:
    if flag is not None:
        return flag
    if from_manifest is not None:
        return int(from_manifest)
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return 0
    try:
        return int(raw)
    except ValueError as exc:
        raise UsageError(f"{SEED_ENV}={raw!r} is not an integer") from exc


def _resolve(args: argparse.Namespace) -> tuple[dict, int]:
    """Explicit flags beat manifest entries, which beat defaults."""
    from_file, file_seed = _load_manifest(args.manifest, args.command)
    params = {}
    for key, default in DEFAULTS[args.command].items():
        flag = getattr(args, key, None)
        # store_true flags read False when absent, so only True counts as explicit
        given = flag is not None and flag is not False
        params[key] = flag if given else from_file.get(key, default)
    for key in REQUIRED.get(args.command, ()):
        if params[key] is None:
            raise UsageError(f"{args.command}: --{key} is required (flag or manifest)")
    return params, _resolve_seed(args.seed, file_seed)


def _spec(params: dict) -> GroundStateSpec:
    return GroundStateSpec(parse_family(params["family"]), params["d"], params["N"], params["p"],
                           params["alpha"], params["R"])


def _integration(params: dict, seed: int) -> IntegrationSpec:
    return IntegrationSpec(samples=int(params["samples"]), seed=seed, block_size=int(params["block_size"]))


def _test_function(spec: GroundStateSpec, params: dict) -> TestFunctionSpec:
    u = default_test_function(spec)
    center = u.center if params["center"] is None else params["center"]
    radius = u.radius if params["radius"] is None else params["radius"]
    return TestFunctionSpec(center, float(radius))


# commands --------------------------------------------------------------------

def _cmd_identities(params: dict, seed: int) -> tuple[dict, dict, bool]:
    manifest: dict[str, Any] = {"trials": params["trials"], "max_dim": params["max_dim"]}
    results = run_suite(seed, int(params["trials"]), int(params["max_dim"]))
    if params["config"] is not None:
        cfg = load_configuration(params["config"])
        manifest["configuration"] = cfg.to_json()
        lhs, rho2 = particle_sum(cfg), rho_sq(cfg)
        err = abs(lhs - 0.5 * (cfg.N - 2) * rho2) / max(max(cfg.N - 2, 1) * rho2, 1e-300)
        check = {"name": "particle_sum_config", "d": cfg.d, "p": cfg.N, "trials": 1,
                 "max_rel_err": err, "tol": 1e-12, "passed": bool(err <= 1e-12)}
        results["checks"].append(check)
        results["passed"] = results["passed"] and check["passed"]
    return manifest, results, results["passed"]


def _cmd_verify_gsr(params: dict, seed: int) -> tuple[dict, dict, bool]:
    spec = _spec(params)
    quad = _integration(params, seed)
    u = _test_function(spec, params)
    res = gsr_residual(spec, u, quad)
    manifest = {"ground_state": spec.manifest(), "alpha_is_default": spec.is_optimal_alpha,
                "integration": quad.manifest(), "test_function": u.manifest()}
    results = {"lhs": res.lhs, "pot_term": res.pot_term, "rhs": res.rhs, "residual": res.residual,
               "stderr": res.stderr, "pass": res.passed}
    return manifest, results, res.passed


def _cmd_hardy(params: dict, seed: int) -> tuple[dict, dict, bool]:
    spec = _spec(params)
    form = hardy_form(spec.family, params["form"])
    obj = ratio_objective(spec, form)
    value = params["ratio_value"]
    if obj is not None and value is None:
        value = obj.stated_bound
    constant = params["constant"]
    if constant is None:
        constant = form_constant(spec, form, value)
    quad = _integration(params, seed)
    u = _test_function(spec, params)
    res = hardy_deficit(spec, float(constant), form.weight, u, quad)
    manifest = {"ground_state": spec.manifest(), "form": params["form"], "constant_tag": form.constant_tag,
                "ratio_kind": form.ratio_kind, "ratio_value": value,
                "integration": quad.manifest(), "test_function": u.manifest()}
    results = {"lhs": res.lhs, "weighted": res.weighted, "deficit": res.deficit, "stderr": res.stderr,
               "constant": float(constant), "weight": form.weight, "pass": res.passed}
    return manifest, results, res.passed


def _cmd_estimate(params: dict, seed: int) -> tuple[dict, dict, bool]:
    obj = RatioObjective(params["kind"], int(params["d"]), int(params["N"]), int(params["p"]), float(params["R"]))
    opt = OptimizerSpec(restarts=int(params["restarts"]), local_steps=int(params["local_steps"]), seed=seed)
    est = estimate_sup(obj, opt)
    manifest = {"objective": obj.manifest(), "optimizer": opt.manifest()}
    results = constants_report(obj, est)
    return manifest, results, bool(est.within_bound)


def _cmd_sharpness(params: dict, seed: int) -> tuple[dict, dict, bool]:
    deltas = params["deltas"]
    if isinstance(deltas, str):
        deltas = _parse_float_list(deltas)
    deltas = tuple(float(x) for x in deltas)
    quad = _integration(params, seed)
    manifest: dict[str, Any] = {"deltas": list(deltas), "integration": quad.manifest()}
    if params["suite"]:
        results = sharpness_suite(quad, deltas)
    else:
        if params["family"] is None or params["d"] is None:
            raise UsageError("sharpness: give --family and --d, or --suite")
        spec = GroundStateSpec(parse_family(params["family"]), params["d"], params["N"], params["p"])
        manifest["ground_state"] = spec.manifest()
        one = sweep(spec, deltas, quad)
        results = {"sweeps": [one], "all_consistent": one["sharpness_consistent"]}
    return manifest, results, bool(results["all_consistent"])


COMMANDS = {
    "identities": _cmd_identities,
    "verify-gsr": _cmd_verify_gsr,
    "hardy": _cmd_hardy,
    "estimate": _cmd_estimate,
    "sharpness": _cmd_sharpness,
}


def _cmd_report(args: argparse.Namespace) -> int:
    loaded = [(str(p), reports.load_report(p)) for p in args.inputs]
    text = reports.to_csv(loaded)
    if args.output in (None, "-"):
        sys.stdout.write(text)
    else:
        out = Path(args.output)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")
    return EXIT_OK


# parser ----------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help=f"RNG seed (default: ${SEED_ENV}, else 0)")
    p.add_argument("--manifest", default=None, help="JSON file of parameters (or a previous report); flags override it")
    p.add_argument("--output", "-o", default=None, help="report path (default: stdout)")
    p.add_argument("--timing", action="store_true",
                   help="embed wall-clock seconds in the report (reports then differ run to run)")


def _add_ground_state(p: argparse.ArgumentParser) -> None:
    p.add_argument("--family", default=None, help="ground-state family, e.g. point, subspace, pair3d, simplex")
    p.add_argument("--d", type=int, default=None, help="dimension per particle")
    p.add_argument("--N", type=int, default=None, help="number of particles (default 1)")
    p.add_argument("--p", type=int, default=None, help="subspace / simplex grade where applicable")
    p.add_argument("--alpha", type=float, default=None, help="GSR weight (default: the family's optimal weight)")
    p.add_argument("--R", type=float, default=None, help="length scale for the logarithmic families (default 1)")


def _add_integration(p: argparse.ArgumentParser) -> None:
    p.add_argument("--samples", type=int, default=None, help="Monte Carlo samples")
    p.add_argument("--block-size", dest="block_size", type=int, default=None, help="samples per seeded block")
    p.add_argument("--center", type=_parse_float_list, default=None, help="test-function centre, comma separated")
    p.add_argument("--radius", type=float, default=None, help="test-function support radius")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gsrhardy",
        description="Verify ground-state representations and many-particle Hardy inequalities numerically.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    ident = subparsers.add_parser("identities", help="blade-calculus and particle-sum identity suite")
    _add_common(ident)
    ident.add_argument("--trials", type=int, default=None, help="random instances per check (default 100)")
    ident.add_argument("--max-dim", dest="max_dim", type=int, default=None, help="largest d (default 6)")
    ident.add_argument("--config", default=None, help="configuration JSON {d, N, points} to check as well")

    ver = subparsers.add_parser("verify-gsr", help="Monte Carlo check of the GSR integral identity")
    _add_common(ver)
    _add_ground_state(ver)
    _add_integration(ver)

    hardy = subparsers.add_parser("hardy", help="Monte Carlo Hardy deficit for a family's inequality")
    _add_common(hardy)
    _add_ground_state(hardy)
    _add_integration(hardy)
    hardy.add_argument("--form", default=None, help="standard (default) or cross")
    hardy.add_argument("--constant", type=float, default=None, help="override the inequality constant")
    hardy.add_argument("--ratio-value", "--K", dest="ratio_value", type=float, default=None,
                       help="K or C value entering the constant (default: its stated upper bound)")

    est = subparsers.add_parser("estimate", help="estimate a sup-ratio constant by multistart search")
    _add_common(est)
    est.add_argument("--kind", default=None, choices=["K", "K2d", "C", "C3d", "Cp"])
    est.add_argument("--d", type=int, default=None)
    est.add_argument("--N", type=int, default=None)
    est.add_argument("--p", type=int, default=None, help="simplex grade for Cp")
    est.add_argument("--R", type=float, default=None, help="length scale for K2d / C3d (default 1)")
    est.add_argument("--restarts", type=int, default=None, help="random restarts (default 8)")
    est.add_argument("--local-steps", dest="local_steps", type=int, default=None, help="Nelder-Mead budget per stage")

    sharp = subparsers.add_parser("sharpness", help="Rayleigh-quotient sweep of the trial family")
    _add_common(sharp)
    sharp.add_argument("--family", default=None, choices=["subspace", "separation", "parallel", "simplex"])
    sharp.add_argument("--d", type=int, default=None)
    sharp.add_argument("--N", type=int, default=None)
    sharp.add_argument("--p", type=int, default=None)
    sharp.add_argument("--deltas", type=_parse_float_list, default=None, help="comma separated (default 0.2,0.1,0.05,0.01)")
    sharp.add_argument("--samples", type=int, default=None, help="Monte Carlo samples per delta (default 400000)")
    sharp.add_argument("--block-size", dest="block_size", type=int, default=None)
    sharp.add_argument("--suite", action="store_true", help="run the representative suite of families")

    rep = subparsers.add_parser("report", help="flatten JSON reports into one CSV table")
    rep.add_argument("inputs", nargs="+", help="report JSON files")
    rep.add_argument("--output", "-o", default=None, help="CSV path (default: stdout)")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "report":
            return _cmd_report(args)
        params, seed = _resolve(args)
        start = time.perf_counter()
        extra, results, passed = COMMANDS[args.command](params, seed)
        elapsed = time.perf_counter() - start
        manifest = {"command": args.command, "seed": seed, "parameters": params, **extra}
        report = reports.build_report(args.command, manifest, results, passed,
                                      wall_clock=elapsed if args.timing else None)
    except (UsageError, FamilyError, EstimatorError, ConfigurationError, DomainError,
            ValidationError, ValueError, KeyError, OSError) as exc:
        print(f"gsrhardy {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.output in (None, "-"):
        sys.stdout.write(reports.dumps(report))
    else:
        _write_json_file(args.output, report)
    if not args.timing:
        print(f"gsrhardy {args.command}: {elapsed:.2f} s wall-clock", file=sys.stderr)
    print(f"gsrhardy {args.command}: {'PASS' if passed else 'FAIL'}", file=sys.stderr)
    return EXIT_OK if passed else EXIT_FAIL
