"""``sbmtest`` command line: sample, test, calibrate, simulate, limit-power, ingest, mle."""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings

import numpy as np

from .errors import ParameterError, SbmTestError
from .graph import ModelParams, count_cycles, read_edge_list, read_labels, sample_er, sample_sbm, write_labels
from .harness import ExperimentConfig, estimate_cost, mle_ab, run_experiment
from .limitlaw import (
    DEFAULT_NUM_SAMPLES,
    DEFAULT_TOLERANCE,
    CriticalValueCache,
    PowerLimitInputs,
    default_cache_path,
    limit_power,
)
from .lrtest import DEFAULT_EXACT_CAP, DEFAULT_M_CAP, largest_component, make_epsilon_config, run_test
from .rng import stream

STOCHASTIC = {"sample", "test", "calibrate"}
MAX_MARGIN_HALVINGS = 60


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ParameterError(message)


def auto_epsilon(a: float, b: float, margin: float | None = None) -> float:
    """``(a-b)/2 - margin``; the margin (default ``0.01 (a-b)``) is halved until ``kappa_eps < 1``.

    Halving the margin pushes ``epsilon`` toward ``(a-b)/2``, where
    ``kappa_eps`` vanishes, so the loop terminates.
    """
    if not a > b > 0:
        raise ParameterError(f"need a > b > 0, got a={a}, b={b}")
    margin = 0.01 * (a - b) if margin is None else float(margin)
    if not 0 < margin < (a - b) / 2:
        raise ParameterError(f"margin must lie in (0, (a-b)/2), got {margin}")
    for _ in range(MAX_MARGIN_HALVINGS):
        eps = (a - b) / 2 - margin
        if make_epsilon_config(a, b, eps).kappa_eps < 1:
            return eps
        margin /= 2
    raise ParameterError("could not find epsilon with kappa_eps < 1")


def _epsilon(args) -> float:
    if args.auto_epsilon:
        if args.epsilon is not None:
            raise ParameterError("--epsilon and --auto-epsilon are mutually exclusive")
        return auto_epsilon(args.a, args.b, args.margin)
    if args.epsilon is None:
        raise ParameterError("give --epsilon or --auto-epsilon")
    return args.epsilon


def _add_epsilon(p):
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--auto-epsilon", action="store_true", help="epsilon just below (a-b)/2")
    p.add_argument("--margin", type=float, help="auto-epsilon margin (default 0.01 (a-b))")
    p.add_argument("--alpha", type=float, default=0.05)


def _add_calibration(p):
    p.add_argument("--num-samples", type=int, default=DEFAULT_NUM_SAMPLES)
    p.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE)
    p.add_argument("--cache", help="critical-value cache file (default: user cache dir)")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--output", help="write the result here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")

    parser = _Parser(prog="sbmtest", description="Testing for community structure in sparse graphs.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("sample", parents=[common], help="draw an Erdos-Renyi or block-model graph")
    p.add_argument("--model", choices=("er", "sbm"), default="sbm")
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--labels-out", help="also write the block-model labels here")

    p = sub.add_parser("test", parents=[common], help="run the epsilon-LR test on an edge list")
    p.add_argument("graph")
    p.add_argument("--one-based", action="store_true")
    _add_epsilon(p)
    _add_calibration(p)
    p.add_argument("--M", type=int, help="force Monte Carlo with this many draws")
    p.add_argument("--M-cap", type=int, default=DEFAULT_M_CAP)
    p.add_argument("--exact-cap", type=int, default=DEFAULT_EXACT_CAP)

    p = sub.add_parser("calibrate", parents=[common], help="critical value from the null limit law")
    _add_epsilon(p)
    _add_calibration(p)

    p = sub.add_parser("simulate", parents=[common], help="size/power table from a JSON config")
    p.add_argument("config")
    p.add_argument("--dry-run", action="store_true", help="print cost estimates and stop")

    p = sub.add_parser("limit-power", parents=[common], help="large-degree power limit")
    p.add_argument("--k1", type=float, required=True)
    p.add_argument("--k2", type=float, required=True)
    p.add_argument("--alpha", type=float, default=0.05)

    p = sub.add_parser("ingest", parents=[common], help="validate and summarise an edge list")
    p.add_argument("graph")
    p.add_argument("--one-based", action="store_true")
    p.add_argument("--n", type=int, help="node count when the file has no header")

    p = sub.add_parser("mle", parents=[common], help="estimate (a, b) from a graph and labels")
    p.add_argument("graph")
    p.add_argument("labels")
    p.add_argument("--one-based", action="store_true")
    return parser


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True) + "\n"


def _cache(args) -> CriticalValueCache:
    return CriticalValueCache(args.cache if args.cache else default_cache_path())


def cmd_sample(args) -> str:
    params = ModelParams(args.a, args.b, args.n)
    rng = stream(args.seed, "sample", args.model)
    if args.model == "er":
        if args.labels_out:
            raise ParameterError("--labels-out needs --model sbm")
        g = sample_er(params, rng)
    else:
        g, labels = sample_sbm(params, rng)
        if args.labels_out:
            write_labels(labels, args.labels_out)
    return g.to_text()


def cmd_test(args) -> str:
    g = read_edge_list(args.graph, one_based=args.one_based)
    eps = _epsilon(args)
    params = ModelParams(args.a, args.b, g.n)
    params.require_strict()
    cfg = make_epsilon_config(args.a, args.b, eps)
    cv = _cache(args).get(
        cfg, args.alpha, args.seed,
        tolerance=args.tolerance, num_samples=args.num_samples, threads=args.threads,
    )
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = run_test(
            g, params, cfg, args.alpha, cv,
            seed=args.seed, exact_cap=args.exact_cap, M=args.M, M_cap=args.M_cap, threads=args.threads,
        )
    result.warnings.extend(str(w.message) for w in caught)
    out = result.to_dict()
    out["epsilon"] = eps
    return _json(out)


def cmd_calibrate(args) -> str:
    eps = _epsilon(args)
    cfg = make_epsilon_config(args.a, args.b, eps)
    cv = _cache(args).get(
        cfg, args.alpha, args.seed,
        tolerance=args.tolerance, num_samples=args.num_samples, threads=args.threads,
    )
    return _json({
        "a": args.a, "b": args.b, "epsilon": eps, "alpha": args.alpha,
        "w_log": cv.w_log, "w": cv.w, "half_width": cv.half_width,
        "num_samples": cv.num_samples, "seed": args.seed, "warnings": cfg.violations(),
    })


def cmd_simulate(args) -> str:
    data = json.loads(open(args.config).read())
    if args.seed is not None:
        data["master_seed"] = args.seed
    elif "master_seed" not in data:
        raise ParameterError("simulate needs --seed or master_seed in the config")
    data.setdefault("threads", args.threads)
    config = ExperimentConfig.from_dict(data)
    for est in estimate_cost(config):
        flag = " [expensive]" if est["expensive"] else ""
        print(f"estimate {est['cell']}: ~{est['seconds']:.3g} s{flag}", file=sys.stderr)
    if args.dry_run:
        return ""
    table = run_experiment(config)
    return table.to_csv() if args.format == "csv" else table.to_json() + "\n"


def cmd_limit_power(args) -> str:
    power = limit_power(PowerLimitInputs(args.k1, args.k2, args.alpha))
    return _json({"k1": args.k1, "k2": args.k2, "alpha": args.alpha, "power": power})


def cmd_ingest(args) -> str:
    g = read_edge_list(args.graph, one_based=args.one_based, n=args.n)
    deg = g.degrees()
    return _json({
        "n": g.n,
        "edges": g.num_edges,
        "mean_degree": float(deg.mean()) if g.n else 0.0,
        "max_degree": int(deg.max()) if g.n else 0,
        "isolated": int(np.count_nonzero(deg == 0)),
        "components": len(g.components()),
        "largest_component": largest_component(g),
        "triangles": count_cycles(g, 3) if g.n >= 3 else 0,
    })


def cmd_mle(args) -> str:
    g = read_edge_list(args.graph, one_based=args.one_based)
    a_hat, b_hat = mle_ab(g, read_labels(args.labels))
    return _json({"a_hat": a_hat, "b_hat": b_hat, "n": g.n})


COMMANDS = {
    "sample": cmd_sample,
    "test": cmd_test,
    "calibrate": cmd_calibrate,
    "simulate": cmd_simulate,
    "limit-power": cmd_limit_power,
    "ingest": cmd_ingest,
    "mle": cmd_mle,
}


def _validate(args):
    if args.command in STOCHASTIC and args.seed is None:
        raise ParameterError(f"{args.command} needs --seed")
    if args.seed is not None and args.seed < 0:
        raise ParameterError("--seed must be non-negative")
    if args.threads < 1:
        raise ParameterError("--threads must be at least 1")
    if args.format == "csv" and args.command != "simulate":
        raise ParameterError("--format csv only applies to simulate")
    for name in ("a", "b", "epsilon", "alpha", "k1", "k2"):
        value = getattr(args, name, None)
        if value is not None and not math.isfinite(value):
            raise ParameterError(f"--{name} must be finite")


def _fail(kind: str, message: str, code: int) -> int:
    print(json.dumps({"error": kind, "message": message, "exit_code": code}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        _validate(args)
        text = COMMANDS[args.command](args)
        if args.output:
            with open(args.output, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except SbmTestError as exc:
        return _fail(type(exc).__name__, str(exc), exc.exit_code)
    except (OSError, json.JSONDecodeError, TypeError) as exc:
        return _fail(type(exc).__name__, str(exc), 2)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
