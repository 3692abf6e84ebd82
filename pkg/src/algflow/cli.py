"""``algflow`` command-line front end.

Usage::

    algflow <command> --config cfg.json [--tol x] [--seed n] [--out path]
                      [--grid s0,s1,t0,t1,ns,nt] [--rule C|D|E]

Commands: ``verify``, ``scan``, ``limit``, ``density``, ``qsp-check``,
``sweep``.  The config is one JSON object: a flow spec (``family``, ``rule``,
``qsp``, ``params``) plus command keys.  A run report goes to stdout, the
artifact (CSV or JSON) to ``--out``.  Artifacts hold no timing information so
identical inputs give byte-identical files.

Exit codes: 0 success, 1 tolerance failure, 2 input or I/O error.
``ALGFLOW_THREADS`` caps the number of worker threads.
"""
from __future__ import annotations

import argparse
import hashlib
import io
import json
import math
import os
import sys
import time
from typing import Any, Mapping

from . import __version__
from .analysis import (
    TimeGrid,
    _map,
    density_witness,
    limit_search,
    scan_property,
    stochasticity_closure_sweep,
)
from .cubic import StochasticityKind
from .families import (
    FlowDomainError,
    FlowSpec,
    SingularFlowError,
    SpecError,
    admissible_triples,
    kc_residual,
    qsp_residual_A,
    qsp_residual_B,
)
from .functions import DescriptorError

__all__ = ["ConfigError", "dumps", "main", "parse_config", "run"]

COMMANDS = ("verify", "scan", "limit", "density", "qsp-check", "sweep")
EXIT_OK, EXIT_TOL, EXIT_INPUT = 0, 1, 2
SPEC_KEYS = ("family", "rule", "qsp", "params")
_EVAL_ERRORS = (FlowDomainError, SingularFlowError, DescriptorError)

DEFAULT_TOL = {
    "verify": 1e-9,
    "scan": 1e-9,
    "limit": 1e-5,
    "density": 1e-4,
    "qsp-check": 1e-9,
    "sweep": 1e-9,
}


class ConfigError(ValueError):
    """Invalid config; ``str()`` names the offending field or position."""


# --------------------------------------------------------------------------
# serialization
# --------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return format(x, ".17g")


def _emit(obj: Any, out: io.StringIO, indent: int) -> None:
    pad = "  " * indent
    if obj is None or (isinstance(obj, float) and not math.isfinite(obj)):
        out.write("null")
    elif isinstance(obj, bool):
        out.write("true" if obj else "false")
    elif isinstance(obj, int):
        out.write(str(obj))
    elif isinstance(obj, float):
        out.write(_fmt(obj))
    elif isinstance(obj, str):
        out.write(json.dumps(obj))
    elif isinstance(obj, Mapping):
        if not obj:
            out.write("{}")
            return
        out.write("{\n")
        for n, (k, v) in enumerate(obj.items()):
            out.write(f"{pad}  {json.dumps(str(k))}: ")
            _emit(v, out, indent + 1)
            out.write(",\n" if n < len(obj) - 1 else "\n")
        out.write(pad + "}")
    elif isinstance(obj, (list, tuple)):
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj):
            out.write("[" + ", ".join(_fmt(float(v)) if isinstance(v, float) else str(v) for v in obj) + "]")
            return
        out.write("[\n")
        for n, v in enumerate(obj):
            out.write(pad + "  ")
            _emit(v, out, indent + 1)
            out.write(",\n" if n < len(obj) - 1 else "\n")
        out.write(pad + "]")
    elif hasattr(obj, "item"):
        _emit(obj.item(), out, indent)
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj: Any) -> str:
    """JSON text with every float written to 17 significant digits."""
    buf = io.StringIO()
    _emit(obj, buf, 0)
    buf.write("\n")
    return buf.getvalue()


# --------------------------------------------------------------------------
# config
# --------------------------------------------------------------------------


def parse_config(path: str) -> tuple[FlowSpec | None, dict]:
    """Read a config file into an optional flow spec and the remaining keys.

    A spec is built when the object has a ``family`` key; otherwise ``rule``
    stays among the command keys (the closure sweep uses it).
    """
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    if "family" not in doc:
        return None, dict(doc)
    try:
        spec = FlowSpec.from_json({k: doc[k] for k in SPEC_KEYS if k in doc})
    except SpecError as exc:
        raise ConfigError(f"field {exc}") from None
    except (DescriptorError, ValueError, TypeError) as exc:
        raise ConfigError(f"field 'params': {exc}") from None
    return spec, {k: v for k, v in doc.items() if k not in SPEC_KEYS}


def _get(params: Mapping, key: str, kind, default=None, required: bool = False):
    if key not in params or params[key] is None:
        if required:
            raise ConfigError(f"field {key!r} is required for this command")
        return default
    v = params[key]
    try:
        if kind is int:
            if isinstance(v, bool) or float(v) != int(v):
                raise ValueError
            return int(v)
        if kind is float:
            if isinstance(v, bool):
                raise ValueError
            return float(v)
        return kind(v)
    except (TypeError, ValueError):
        raise ConfigError(f"field {key!r} has invalid value {v!r}") from None


def _grid(params: Mapping, override: str | None, require_gap: bool) -> TimeGrid:
    raw = override if override is not None else params.get("grid")
    if raw is None:
        raise ConfigError("field 'grid' is required for this command")
    try:
        if isinstance(raw, str):
            return TimeGrid.parse(raw, require_gap)
        if isinstance(raw, (list, tuple)):
            return TimeGrid.parse(",".join(str(v) for v in raw), require_gap)
        if isinstance(raw, Mapping):
            g = dict(raw)
            g.setdefault("require_gap", require_gap)
            return TimeGrid(
                float(g["s_min"]), float(g["s_max"]), float(g["t_min"]), float(g["t_max"]),
                int(g["n_s"]), int(g["n_t"]), bool(g["require_gap"]),
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"field 'grid': {exc}") from None
    raise ConfigError(f"field 'grid' has invalid value {raw!r}")


def _need_spec(spec: FlowSpec | None) -> FlowSpec:
    if spec is None:
        raise ConfigError("field 'family' is required for this command")
    return spec


def _workers() -> int:
    raw = os.environ.get("ALGFLOW_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"ALGFLOW_THREADS must be an integer, got {raw!r}") from None


# --------------------------------------------------------------------------
# commands; each returns (exit code, summary, artifact text)
# --------------------------------------------------------------------------


def _triple_table(rows) -> str:
    buf = io.StringIO()
    buf.write("s,tau,t,residual\n")
    for s, tau, t, r in rows:
        buf.write(f"{_fmt(s)},{_fmt(tau)},{_fmt(t)},{'undefined' if r is None else _fmt(r)}\n")
    return buf.getvalue()


def _residuals(fn, triples, workers):
    def one(tr):
        try:
            return fn(*tr)
        except _EVAL_ERRORS:
            return None

    return _map(one, triples, workers)


def _cmd_verify(spec, params, tol, seed, opts):
    spec = _need_spec(spec)
    rule = opts.rule or spec.rule
    triples = admissible_triples(
        spec, _get(params, "triples", int, 100), seed, _get(params, "sample_horizon", float, 5.0)
    )
    res = _residuals(lambda s, tau, t: kc_residual(spec, s, tau, t, rule), triples, opts.workers)
    ok = [r for r in res if r is not None]
    worst = max(ok) if ok else None
    passed = bool(ok) and worst <= tol
    summary = {
        "family": spec.family,
        "rule": rule,
        "triples": len(triples),
        "undefined": len(res) - len(ok),
        "max_residual": worst,
        "tol": tol,
        "passed": passed,
    }
    table = _triple_table([(*tr, r) for tr, r in zip(triples, res)])
    return (EXIT_OK if passed else EXIT_TOL), summary, table


def _cmd_scan(spec, params, tol, seed, opts):
    spec = _need_spec(spec)
    if opts.rule:
        spec = spec.with_rule(opts.rule)
    prop = _get(params, "property", str, required=True)
    grid = _grid(params, opts.grid, spec.qsp)
    expect = _get(params, "expect", str, "none")
    if expect not in ("none", "empty", "full"):
        raise ConfigError(f"field 'expect' must be one of none, empty, full; got {expect!r}")
    try:
        diagram = scan_property(spec, prop, grid, tol, opts.workers)
    except ValueError as exc:
        raise ConfigError(f"field 'property': {exc}") from None
    met = {"none": True, "empty": diagram.n_true == 0, "full": diagram.all_true()}[expect]
    summary = {
        "family": spec.family,
        "property": diagram.prop,
        "tol": tol,
        "cells": diagram.n_cells,
        "true": diagram.n_true,
        "false": diagram.n_false,
        "undefined": diagram.n_undefined,
        "expect": expect,
        "passed": met,
    }
    return (EXIT_OK if met else EXIT_TOL), summary, diagram.to_csv()


def _cmd_limit(spec, params, tol, seed, opts):
    spec = _need_spec(spec)
    s0 = _get(params, "s0", float, 0.0)
    horizon = _get(params, "horizon", float, 64.0)
    expect = _get(params, "expect", str, "none")
    if expect not in ("none", "exists", "absent"):
        raise ConfigError(f"field 'expect' must be one of none, exists, absent; got {expect!r}")
    try:
        result = limit_search(spec, s0, horizon, tol)
    except (FlowDomainError, SingularFlowError) as exc:
        raise ConfigError(f"field 's0': {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"field 'horizon': {exc}") from None
    found = result.limit is not None
    met = {"none": True, "exists": found, "absent": not found}[expect]
    doc = {"family": spec.family, **result.to_json()}
    summary = {
        "family": spec.family,
        "s0": s0,
        "horizon": horizon,
        "tol": tol,
        "limit": doc["limit"] if found else "none",
        "last_distances": list(result.distances[-2:]),
        "passed": met,
    }
    return (EXIT_OK if met else EXIT_TOL), summary, dumps(doc)


def _cmd_density(spec, params, tol, seed, opts):
    target = _get(params, "target", float, required=True)
    n_max = _get(params, "n_max", int, 100000)
    if spec is not None and spec.family != "E9":
        raise ConfigError("field 'family': density reports need the E9 family or no flow")
    try:
        w = density_witness(target, tol, n_max, spec)
    except ValueError as exc:
        raise ConfigError(f"field 'target': {exc}") from None
    doc = {"n_max": n_max, **w.to_json()}
    summary = dict(doc, passed=w.n is not None)
    return (EXIT_OK if w.n is not None else EXIT_TOL), summary, dumps(doc)


def qsp_type_flag(pass_a: bool, pass_b: bool) -> str:
    if pass_a and pass_b:
        return "types (A) and (B)"
    if pass_a:
        return "type (A) only"
    if pass_b:
        return "type (B) only"
    return "neither"


def _cmd_qsp_check(spec, params, tol, seed, opts):
    spec = _need_spec(spec)
    if not spec.qsp:
        raise ConfigError("field 'qsp': qsp-check needs a quadratic stochastic process")
    x0 = params.get("x0")
    triples = admissible_triples(
        spec, _get(params, "triples", int, 100), seed, _get(params, "sample_horizon", float, 5.0)
    )
    try:
        ra = _residuals(lambda s, r, t: qsp_residual_A(spec, x0, s, r, t), triples, opts.workers)
        rb = _residuals(lambda s, r, t: qsp_residual_B(spec, x0, s, r, t), triples, opts.workers)
    except ValueError as exc:
        raise ConfigError(f"field 'x0': {exc}") from None
    va = [r for r in ra if r is not None]
    vb = [r for r in rb if r is not None]
    max_a = max(va) if va else None
    max_b = max(vb) if vb else None
    pass_a = max_a is not None and max_a <= tol
    pass_b = max_b is not None and max_b <= tol
    flag = qsp_type_flag(pass_a, pass_b)
    declared = opts.rule or spec.rule
    passed = {"A": pass_a, "B": pass_b}.get(declared, pass_a or pass_b)
    summary = {
        "family": spec.family,
        "declared": declared,
        "triples": len(triples),
        "max_residual_A": max_a,
        "max_residual_B": max_b,
        "tol": tol,
        "type": flag,
        "passed": passed,
    }
    doc = dict(summary)
    doc["residuals"] = [
        {"s": s, "r": r, "t": t, "A": a, "B": b} for (s, r, t), a, b in zip(triples, ra, rb)
    ]
    return (EXIT_OK if passed else EXIT_TOL), summary, dumps(doc)


def _cmd_sweep(spec, params, tol, seed, opts):
    kind = _get(params, "kind", str, required=True)
    rule = opts.rule or _get(params, "rule", str, None)
    if spec is not None:
        rule = rule or spec.rule
    if rule is None or rule.upper() not in ("C", "D", "E"):
        raise ConfigError(f"field 'rule' must be C, D or E for a sweep; got {rule!r}")
    try:
        kind = StochasticityKind(kind)
    except ValueError:
        raise ConfigError(f"field 'kind' has invalid value {kind!r}") from None
    trials = _get(params, "trials", int, 1000)
    m = _get(params, "m", int, 2)
    try:
        report = stochasticity_closure_sweep(kind, rule.upper(), trials, seed, m, tol)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    doc = report.to_json()
    summary = {k: doc[k] for k in ("kind", "rule", "m", "trials", "seed", "fraction")}
    summary["witness_found"] = report.witness is not None
    return EXIT_OK, summary, dumps(doc)


_HANDLERS = {
    "verify": _cmd_verify,
    "scan": _cmd_scan,
    "limit": _cmd_limit,
    "density": _cmd_density,
    "qsp-check": _cmd_qsp_check,
    "sweep": _cmd_sweep,
}


def run(command: str, config: str, tol: float | None = None, seed: int | None = None,
        out: str | None = None, grid: str | None = None, rule: str | None = None) -> tuple[int, dict]:
    """Run one command; returns ``(exit code, run report)`` and writes the artifact."""
    start = time.perf_counter()
    spec, params = parse_config(config)
    with open(config, "rb") as fh:
        digest = hashlib.sha256(fh.read()).hexdigest()
    tol = tol if tol is not None else _get(params, "tol", float, DEFAULT_TOL[command])
    seed = seed if seed is not None else _get(params, "seed", int, 0)
    opts = argparse.Namespace(grid=grid, rule=rule.upper() if rule else None, workers=_workers())
    try:
        code, summary, artifact = _HANDLERS[command](spec, params, tol, seed, opts)
    except SpecError as exc:
        raise ConfigError(f"field {exc}") from None
    if out is not None:
        try:
            with open(out, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(artifact)
        except OSError as exc:
            raise ConfigError(f"cannot write {out!r}: {exc.strerror}") from None
    report = {
        "command": command,
        "version": __version__,
        "input_hash": "sha256:" + digest,
        "seed": seed,
        "wall_time": time.perf_counter() - start,
        "artifact": out,
        "exit_code": code,
        "summary": summary,
    }
    return code, report


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="algflow", description="Flows of algebras: verification and property scans.")
    p.add_argument("--version", action="version", version=f"algflow {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        c = sub.add_parser(name)
        c.add_argument("--config", required=True, help="JSON config: flow spec plus command keys")
        c.add_argument("--tol", type=float, help="tolerance (overrides config)")
        c.add_argument("--seed", type=int, help="random seed (overrides config)")
        c.add_argument("--out", help="artifact path (CSV for scan/verify, JSON otherwise)")
        c.add_argument("--grid", help="s0,s1,t0,t1,ns,nt (overrides config)")
        c.add_argument("--rule", type=str.upper, choices=["C", "D", "E", "A", "B"], help="product rule override")
    return p


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        code, report = run(args.command, args.config, args.tol, args.seed, args.out, args.grid, args.rule)
    except ConfigError as exc:
        print(f"algflow {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    sys.stdout.write(dumps(report))
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
