"""Command-line surface.

One subcommand per operation, machine-readable output only.  Reports use a
common JSON envelope {command, params, seed, tolerances, result} with floats
rendered at 17 significant digits (canonical key order), so identical inputs
and seeds produce byte-identical files.  Exit codes: 0 success, 1 domain
error (a machine-readable error object is emitted), 2 I/O, schema, or
argument errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from importlib import resources
from typing import Optional

import jsonschema

from . import engine, gadgets, moments, phasediagram, reductions
from .errors import SpinLabError
from .model import BipartiteMultigraph, SpinParams, graph_from_json_dict, to_weighted_network

_SAMPLING_COMMANDS = {"gadget-sample"}


def _schema(name: str) -> dict:
    text = resources.files("spinlab.schemas").joinpath(name).read_text()
    return json.loads(text)


def canonical_json(obj) -> str:
    """Deterministic JSON: sorted keys, floats at 17 significant digits."""

    def render(x) -> str:
        if isinstance(x, dict):
            items = sorted(x.items())
            return "{" + ",".join(f"{json.dumps(str(k))}:{render(v)}" for k, v in items) + "}"
        if isinstance(x, (list, tuple)):
            return "[" + ",".join(render(v) for v in x) + "]"
        if isinstance(x, bool):
            return "true" if x else "false"
        if isinstance(x, float):
            if math.isinf(x):
                return '"Infinity"' if x > 0 else '"-Infinity"'
            if math.isnan(x):
                return '"NaN"'
            return format(x, ".17g")
        if x is None:
            return "null"
        if isinstance(x, int):
            return str(x)
        return json.dumps(x)

    return render(obj) + "\n"


def load_graph(path: str) -> BipartiteMultigraph:
    with open(path, "r", encoding="utf-8") as handle:
        data = json.load(handle)
    jsonschema.validate(data, _schema("graph.schema.json"))
    return graph_from_json_dict(data)


def load_gadget(path: str) -> gadgets.Gadget:
    with open(path, "r", encoding="utf-8") as handle:
        data = json.load(handle)
    jsonschema.validate(data, _schema("graph.schema.json"))
    return gadgets.gadget_from_json_dict(data)


def emit_report(text: str, path: Optional[str]) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(text)


def _params_from_args(args) -> SpinParams:
    return SpinParams(args.beta, args.gamma, getattr(args, "lam"), args.delta, args.tol)


def _params_dict(params: SpinParams) -> dict:
    return {
        "beta": params.beta,
        "gamma": params.gamma,
        "lambda": params.lam,
        "delta": params.delta,
    }


def _envelope(command: str, result, params: Optional[SpinParams] = None,
              seed: Optional[int] = None, tolerances: Optional[dict] = None) -> dict:
    return {
        "command": command,
        "params": _params_dict(params) if params is not None else {},
        "seed": seed,
        "tolerances": tolerances or {},
        "result": result,
    }


def _add_param_flags(p: argparse.ArgumentParser, need_delta: bool = False) -> None:
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--delta", type=int, default=None, required=need_delta)
    p.add_argument("--tol", type=float, default=1e-9)


def _add_io_flags(p: argparse.ArgumentParser, graph: bool = False) -> None:
    if graph:
        p.add_argument("--graph", required=True, help="input graph JSON path")
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.add_argument("--format", choices=("json", "csv"), default="json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spinlab")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("z", help="exact partition function of a graph")
    _add_param_flags(p)
    _add_io_flags(p, graph=True)
    p.add_argument("--cap", type=int, default=engine.DEFAULT_ENUM_CAP)

    p = sub.add_parser("marginal", help="spin-1 marginal of one vertex")
    _add_param_flags(p)
    _add_io_flags(p, graph=True)
    p.add_argument("--vertex", required=True)
    p.add_argument("--cap", type=int, default=engine.DEFAULT_ENUM_CAP)

    p = sub.add_parser("classify", help="tree uniqueness classification")
    _add_param_flags(p, need_delta=True)
    _add_io_flags(p)

    p = sub.add_parser("thresholds", help="critical activity values")
    _add_param_flags(p, need_delta=True)
    _add_io_flags(p)

    p = sub.add_parser("sweep", help="CSV sweep of the phase diagram over lambda")
    _add_param_flags(p, need_delta=True)
    _add_io_flags(p)
    p.add_argument("--lambda-min", type=float, required=True)
    p.add_argument("--lambda-max", type=float, required=True)
    p.add_argument("--steps", type=int, default=20)

    p = sub.add_parser("moments", help="moment exponents at a density point")
    _add_param_flags(p, need_delta=True)
    _add_io_flags(p)
    p.add_argument("--chi-plus", type=float, required=True)
    p.add_argument("--chi-minus", type=float, required=True)

    p = sub.add_parser("condition1", help="product-overlap maximality check")
    _add_param_flags(p, need_delta=True)
    _add_io_flags(p)
    p.add_argument("--argmax-tol", type=float, default=1e-4)

    p = sub.add_parser("gadget-sample", help="sample a phase gadget")
    _add_param_flags(p, need_delta=True)
    _add_io_flags(p)
    p.add_argument("--n-side", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--tree-depth", type=int, default=0)
    p.add_argument("--seed", type=int, required=True)

    p = sub.add_parser("gadget-verify", help="exactly measure a gadget's properties")
    _add_param_flags(p, need_delta=True)
    _add_io_flags(p, graph=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--q-minus", type=float, default=None)
    p.add_argument("--q-plus", type=float, default=None)
    p.add_argument("--cap", type=int, default=engine.DEFAULT_ENUM_CAP)

    p = sub.add_parser("gadget-balance", help="two-copy balancing construction")
    _add_param_flags(p, need_delta=True)
    _add_io_flags(p, graph=True)
    p.add_argument("--t-prime", type=int, required=True)

    p = sub.add_parser("symbreak", help="unary symmetry-breaking search")
    _add_param_flags(p)
    _add_io_flags(p)

    p = sub.add_parser("reduce-bis", help="independent-set to nonuniform-activity plan")
    _add_param_flags(p)
    _add_io_flags(p, graph=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--instance-out", default=None, help="write the constructed instance here")

    p = sub.add_parser("reduce-ising", help="gadget wiring into a bounded-degree instance")
    _add_param_flags(p, need_delta=True)
    _add_io_flags(p, graph=True)
    p.add_argument("--gadget", required=True, help="gadget JSON path")
    p.add_argument("--q-minus", type=float, default=None)
    p.add_argument("--q-plus", type=float, default=None)
    p.add_argument("--instance-out", default=None)

    p = sub.add_parser("verify-bis", help="exact sandwich certificate")
    _add_param_flags(p)
    _add_io_flags(p, graph=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--cap", type=int, default=engine.DEFAULT_ENUM_CAP)

    p = sub.add_parser("verify-flip", help="two-sided flip identity check")
    _add_param_flags(p)
    _add_io_flags(p, graph=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--cap", type=int, default=engine.DEFAULT_ENUM_CAP)

    p = sub.add_parser("count-is", help="exact independent-set count")
    _add_param_flags(p)
    _add_io_flags(p, graph=True)
    p.add_argument("--cap", type=int, default=engine.DEFAULT_ENUM_CAP)

    return parser


def _q_values(args, params: SpinParams) -> tuple:
    if args.q_minus is not None and args.q_plus is not None:
        return args.q_minus, args.q_plus
    point = phasediagram.extremal_marginals(params)
    return point.q_minus, point.q_plus


def dispatch(args) -> tuple:
    """Run one parsed command; returns (text, out_path)."""
    cmd = args.subcommand
    tols = {"tol": args.tol}

    if cmd == "z":
        params = _params_from_args(args)
        graph = load_graph(args.graph)
        z = engine.partition_function(to_weighted_network(graph, params), cap=args.cap)
        result = {"log_z": z.log, "z": z.to_float()}
        return canonical_json(_envelope(cmd, result, params, tolerances=tols)), args.out

    if cmd == "marginal":
        params = _params_from_args(args)
        graph = load_graph(args.graph)
        prob = engine.marginal(to_weighted_network(graph, params), args.vertex, cap=args.cap)
        result = {"vertex": args.vertex, "pr_spin1": prob}
        return canonical_json(_envelope(cmd, result, params, tolerances=tols)), args.out

    if cmd == "classify":
        params = _params_from_args(args)
        point = phasediagram.extremal_marginals(params)
        result = {
            "regime": point.regime.value,
            "q_minus": point.q_minus,
            "q_plus": point.q_plus,
            "p_minus": point.p_minus,
            "p_plus": point.p_plus,
        }
        return canonical_json(_envelope(cmd, result, params, tolerances=tols)), args.out

    if cmd == "thresholds":
        params = _params_from_args(args)
        delta = params.require_delta()
        if params.beta == 1.0 and params.gamma == 0.0:
            result = {"lambda_c": phasediagram.hardcore_lambda_c(delta)}
        else:
            interval = phasediagram.lambda_interval(params.beta, params.gamma, delta)
            if interval is None:
                result = {"interval": None}
            else:
                result = {"interval": {"lambda1": interval[0], "lambda2": interval[1]}}
        return canonical_json(_envelope(cmd, result, params, tolerances=tols)), args.out

    if cmd == "sweep":
        params = _params_from_args(args)
        if not (0 < args.lambda_min <= args.lambda_max) or args.steps < 1:
            raise SpinLabError("sweep needs 0 < lambda-min <= lambda-max and steps >= 1")
        rows = ["beta,gamma,lambda,delta,regime,q_minus,q_plus,p_minus,p_plus"]
        for i in range(args.steps):
            if args.steps == 1:
                lam = args.lambda_min
            else:
                ratio = (args.lambda_max / args.lambda_min) ** (i / (args.steps - 1))
                lam = args.lambda_min * ratio
            pt = phasediagram.extremal_marginals(params.replace(lam=lam))
            rows.append(
                ",".join(
                    format(x, ".17g") if isinstance(x, float) else str(x)
                    for x in (params.beta, params.gamma, lam, params.delta,
                              pt.regime.value, pt.q_minus, pt.q_plus,
                              pt.p_minus, pt.p_plus)
                )
            )
        return "\n".join(rows) + "\n", args.out

    if cmd == "moments":
        params = _params_from_args(args)
        v1 = moments.psi1(params, args.chi_plus, args.chi_minus)
        v2, (u_p, u_m) = moments.psi2(params, args.chi_plus, args.chi_minus)
        result = {
            "psi1": v1,
            "psi2": v2,
            "psi2_argmax": [u_p, u_m],
            "chi_plus": args.chi_plus,
            "chi_minus": args.chi_minus,
        }
        return canonical_json(_envelope(cmd, result, params, tolerances=tols)), args.out

    if cmd == "condition1":
        params = _params_from_args(args)
        report = moments.check_condition1(params, argmax_tol=args.argmax_tol)
        tols = {"tol": args.tol, "argmax_tol": args.argmax_tol}
        return canonical_json(_envelope(cmd, report.to_json_dict(), params,
                                        tolerances=tols)), args.out

    if cmd == "gadget-sample":
        params = _params_from_args(args)
        gadget = gadgets.sample_phase_gadget(
            params, n_side=args.n_side, r=args.r, t=args.t,
            tree_depth=args.tree_depth, seed=args.seed,
        )
        # bare gadget document (graph schema), so it feeds gadget-verify/-balance
        return canonical_json(gadget.to_json_dict()), args.out

    if cmd == "gadget-verify":
        params = _params_from_args(args)
        gadget = load_gadget(args.graph)
        q_minus, q_plus = _q_values(args, params)
        verdict = gadgets.verify_gadget(gadget, params, args.eps, q_minus, q_plus,
                                        cap=args.cap)
        result = verdict.to_json_dict()
        result.update({"q_minus": q_minus, "q_plus": q_plus})
        return canonical_json(_envelope(cmd, result, params, tolerances=tols)), args.out

    if cmd == "gadget-balance":
        params = _params_from_args(args)
        gadget = load_gadget(args.graph)
        balanced = gadgets.balance_gadget(gadget, args.t_prime, params)
        return canonical_json(balanced.to_json_dict()), args.out

    if cmd == "symbreak":
        params = _params_from_args(args)
        found = gadgets.symmetry_breaking_search(params)
        if isinstance(found, gadgets.Unbreakable):
            result = {"unbreakable": True, "reason": found.reason}
        else:
            result = {
                "unbreakable": False,
                "k": found.k,
                "rho1": found.rho1,
                "gadget": found.graph.to_json_dict(),
                "attachment": found.attachment,
            }
        return canonical_json(_envelope(cmd, result, params, tolerances=tols)), args.out

    if cmd == "reduce-bis":
        params = _params_from_args(args)
        graph = load_graph(args.graph)
        plan = reductions.bis_to_ising(graph, args.alpha, params.lam, args.eps)
        if args.instance_out:
            emit_report(canonical_json(plan.b_prime.to_json_dict()), args.instance_out)
        return canonical_json(_envelope(cmd, plan.summary(), params,
                                        tolerances=tols)), args.out

    if cmd == "reduce-ising":
        params = _params_from_args(args)
        graph = load_graph(args.graph)
        gadget = load_gadget(args.gadget)
        q_minus, q_plus = _q_values(args, params)
        found = gadgets.symmetry_breaking_search(params)
        if isinstance(found, gadgets.Unbreakable):
            raise SpinLabError(f"no symmetry breaker: {found.reason}")
        plan = reductions.ising_to_2spin(
            graph, graph.field_subset, params, gadget,
            found.graph, found.attachment, q_minus, q_plus,
            (1.0 - found.rho1, found.rho1),
        )
        if args.instance_out:
            emit_report(canonical_json(plan.b_prime.to_json_dict()), args.instance_out)
        return canonical_json(_envelope(cmd, plan.summary(), params,
                                        tolerances=tols)), args.out

    if cmd == "verify-bis":
        params = _params_from_args(args)
        graph = load_graph(args.graph)
        cert, _ = reductions.verify_bis_reduction(graph, args.alpha, params.lam,
                                                  args.eps, cap=args.cap)
        text = canonical_json(_envelope(cmd, cert.to_json_dict(), params, tolerances=tols))
        if not cert.sandwich_ok:
            raise SpinLabError("sandwich inequality failed:\n" + text)
        return text, args.out

    if cmd == "verify-flip":
        params = _params_from_args(args)
        graph = load_graph(args.graph)
        lhs, rhs, gap = engine.flip_transform_check(graph, args.alpha, cap=args.cap)
        result = {
            "lhs_log": lhs.log,
            "rhs_log": rhs.log,
            "relative_gap": gap,
            "ok": gap <= args.tol,
        }
        return canonical_json(_envelope(cmd, result, params, tolerances=tols)), args.out

    if cmd == "count-is":
        graph = load_graph(args.graph)
        result = {"count": engine.count_independent_sets(graph, cap=args.cap)}
        return canonical_json(_envelope(cmd, result, tolerances=tols)), args.out

    raise SpinLabError(f"unknown subcommand {cmd!r}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        text, out = dispatch(args)
    except SpinLabError as exc:
        sys.stdout.write(canonical_json({"error": type(exc).__name__, "message": str(exc)}))
        return 1
    except (OSError, json.JSONDecodeError, jsonschema.ValidationError) as exc:
        sys.stderr.write(f"{type(exc).__name__}: {exc}\n")
        return 2
    emit_report(text, out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
