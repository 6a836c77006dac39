"""Command line interface: ``rates``, ``simulate``, ``estimate``, ``bench``, ``check``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .bench import ExperimentConfig, gnuplot_script, run_experiment
from .checks import run_checks
from .circular import WeightSequence
from .estimate import empirical_coeffs, series_estimator, write_estimate
from .models import family_from_dict
from .select import full_adaptive, oracle_rates, partial_adaptive, rate_formula
from .simulate import Dataset, simulate_dataset


def weight_arg(text: str) -> WeightSequence:
    """``flat``, ``pol:E``, ``exp:E`` or a JSON object."""
    text = text.strip()
    if text.startswith("{"):
        return WeightSequence.from_dict(json.loads(text))
    kind, _, value = text.partition(":")
    if kind == "flat":
        return WeightSequence.flat()
    if kind in ("pol", "exp") and value:
        return WeightSequence(kind, float(value))
    raise argparse.ArgumentTypeError(f"bad weight sequence {text!r}")


def _family_arg(role):
    def parse(text):
        try:
            return family_from_dict(json.loads(text), role)
        except (ValueError, KeyError, json.JSONDecodeError) as exc:
            raise argparse.ArgumentTypeError(str(exc)) from exc

    return parse


def cmd_rates(args) -> int:
    rp = oracle_rates(args.omega, args.gamma, args.alpha, args.n, args.m, args.K_max)
    print(f"k_star={rp.k_star}")
    print(f"psi_n={rp.psi!r}")
    print(f"phi_m={rp.phi!r}")
    print(f"bias_term={rp.bias_term!r} variance_term={rp.variance_term!r}")
    if args.scenario:
        scen = tuple(args.scenario.split(","))
        print(f"closed_form_n={rate_formula(scen, args.s, args.p, args.a, args.n, 'n')!r}")
        print(f"closed_form_m={rate_formula(scen, args.s, args.p, args.a, args.m, 'm')!r}")
    return 0


def cmd_simulate(args) -> int:
    data = simulate_dataset(args.intensity, args.error, args.n, args.m, args.seed)
    data.to_csv(args.out)
    print(f"wrote {args.out}: n={data.n} m={data.m} points={data.all_points().size}")
    return 0


def cmd_estimate(args) -> int:
    data = Dataset.from_csv(args.data)
    K = args.K if args.K is not None else min(data.n, data.m)
    emp = empirical_coeffs(data, K)
    extra = {}
    if args.k is not None:
        k = args.k
    elif args.select == "partial":
        sel = partial_adaptive(emp, args.omega, args.alpha, args.d, args.constants_mode)
        k, extra = sel.k_selected, {"selection": json.loads(sel.to_json())}
    else:
        sel = full_adaptive(emp, args.omega, args.constants_mode)
        k, extra = sel.k_selected, {"selection": json.loads(sel.to_json())}
    write_estimate(series_estimator(emp, k), emp, args.out, extra)
    print(f"wrote {args.out} with k={k}")
    return 0


def cmd_bench(args) -> int:
    cfg = ExperimentConfig.from_json(args.config)
    if args.output:
        cfg.output = args.output
    if not cfg.output:
        print("no output path in config or --output", file=sys.stderr)
        return 2
    records = run_experiment(cfg, workers=args.workers)
    if args.emit_gnuplot:
        script = gnuplot_script(cfg.output, sorted({r.estimator for r in records}))
        Path(cfg.output).with_suffix(".gp").write_text(script)
    print(f"wrote {cfg.output}: {len(records)} records")
    return 0


def cmd_check(args) -> int:
    return run_checks()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="poisson-deconv", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rates", help="oracle dimension and rate functionals")
    p.add_argument("--omega", type=weight_arg, default=WeightSequence.flat())
    p.add_argument("--gamma", type=weight_arg, required=True)
    p.add_argument("--alpha", type=weight_arg, required=True)
    p.add_argument("-n", type=int, required=True)
    p.add_argument("-m", type=int, required=True)
    p.add_argument("--K-max", dest="K_max", type=int, default=10_000)
    p.add_argument("--scenario", help="gamma_kind,alpha_kind for the closed forms, e.g. pol,pol")
    p.add_argument("--s", type=float, default=0.0)
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--a", type=float, default=1.0)
    p.set_defaults(func=cmd_rates)

    p = sub.add_parser("simulate", help="write a dataset CSV")
    p.add_argument("--intensity", type=_family_arg("intensity"), required=True, help='JSON, e.g. {"family":"cosine","tau":50,"beta":0.5}')
    p.add_argument("--error", type=_family_arg("error-density"), required=True, help='JSON, e.g. {"family":"poisson_kernel","rate":0.7}')
    p.add_argument("-n", type=int, required=True)
    p.add_argument("-m", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate from a dataset CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--K", type=int, help="empirical window (default n^m)")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--k", type=int, help="fixed dimension")
    group.add_argument("--select", choices=("partial", "full"), default="full")
    p.add_argument("--omega", type=weight_arg, default=WeightSequence.flat())
    p.add_argument("--alpha", type=weight_arg, help="error smoothness (partial rule)")
    p.add_argument("--d", type=float, default=1.0)
    p.add_argument("--constants-mode", default="paper")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("bench", help="run an experiment config")
    p.add_argument("config")
    p.add_argument("--output")
    p.add_argument("--workers", type=int)
    p.add_argument("--emit-gnuplot", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("check", help="run the invariant suite (exit code = failures)")
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    if args.command == "estimate" and args.k is None and args.select == "partial" and args.alpha is None:
        parser.error("--select partial needs --alpha")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
