"""Command line entry point ``cbo-games``.

Exit status is 0 when every gate of the produced report passes, 2 when a
gate fails and 1 on any error (bad config, numerical failure, I/O).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import EXPERIMENTS, ConfigError, config_help, parse_config, parse_overrides
from .games import builtin_game

EXIT_OK, EXIT_ERROR, EXIT_GATE = 0, 1, 2


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="cbo-games",
        description="Consensus-based optimization for Nash equilibria of M-player games.",
        epilog="Experiment options: --config FILE plus any --section.key VALUE override. "
               "Run 'cbo-games keys' for the list of keys.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", help="INI config file")
        p.add_argument("--workers", type=int, default=None,
                       help="threads (0 = all cores; default from CBO_GAMES_THREADS)")
        p.add_argument("--quiet", action="store_true", help="only print the verdict lines")
    g = sub.add_parser("gamma", help="print the convergence exponent for (q, p, p_M)")
    g.add_argument("--q", type=float, required=True)
    g.add_argument("--p", type=float, required=True)
    g.add_argument("--pm", type=float, required=True)
    s = sub.add_parser("selftest", help="run the built-in invariant checks")
    s.add_argument("--seed", type=int, default=0)
    sub.add_parser("keys", help="list config keys and defaults")
    return parser


def run_experiment(cfg, workers=None):
    """Dispatch a parsed :class:`RunConfig` to its lab runner."""
    from . import lab
    from .dynamics import UniformInit

    game = builtin_game(cfg.game.name, cfg.game.M, cfg.game.d, cfg.game.coupling)
    params = cfg.cbo_params()
    seeds = cfg.seeds.seeds
    part, an = cfg.particles, cfg.analysis
    exp = cfg.experiment
    if exp == "simulate":
        report = lab.run_simulate(game, params, part.N, cfg.seeds.base_seed, cfg.record_every,
                                  workers=workers)
    elif exp == "variance-decay":
        report = lab.run_variance_decay(game, params, part.N, seeds,
                                        record_every=cfg.record_every, workers=workers)
    elif exp == "mf-rate":
        report = lab.run_mf_rate(game, params, part.n_list, part.n_ref, an.p, seeds,
                                 UniformInit(), workers=workers)
    elif exp == "iid-consensus":
        report = lab.run_iid_consensus(lab.GaussianSampler(cfg.game.d), lab.bounded_cost,
                                       params.alpha, part.n_list, an.trials, p=an.p, R=an.R,
                                       seed=cfg.seeds.base_seed)
    elif exp == "stability-probe":
        report = lab.run_stability_probe(game, an.R, an.p, an.trials, cfg.seeds.base_seed,
                                         alpha=params.alpha)
    elif exp == "moment-monitor":
        report = lab.run_moment_monitor(game, params, part.N, an.p, seeds, an.xis,
                                        workers=workers)
    elif exp == "nash-search":
        report = lab.run_nash_search(game, params, part.N, seeds, workers=workers)
    else:  # parse_config already rejects this
        raise ConfigError(f"unknown experiment {exp!r}")
    report.config["run_config"] = cfg.to_dict()
    return report


def write_outputs(report, cfg):
    out = Path(cfg.output.directory)
    paths = report.write(out, cfg.output.formats)
    if "png" in cfg.output.formats:
        from .plotting import render_report
        paths += render_report(report, out)
    return paths


def _experiment(args, rest):
    cfg = parse_config(args.config, parse_overrides(rest), experiment=args.command)
    report = run_experiment(cfg, workers=args.workers)
    paths = write_outputs(report, cfg)
    if args.quiet:
        print("\n".join(v.line() for v in report.verdicts))
    else:
        print(report.summary())
        for path in paths:
            print(f"wrote {path}")
    return EXIT_OK if report.passed else EXIT_GATE


def _selftest(args):
    from .selftest import run_selftest
    results = run_selftest(args.seed)
    for name, ok in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    return EXIT_OK if all(ok for _, ok in results) else EXIT_GATE


def main(argv=None) -> int:
    parser = _build_parser()
    args, rest = parser.parse_known_args(argv)
    try:
        if args.command in EXPERIMENTS:
            return _experiment(args, rest)
        if rest:
            parser.error(f"unrecognized arguments: {' '.join(rest)}")
        if args.command == "gamma":
            from .metrics import gamma_exponent
            print(repr(gamma_exponent(args.q, args.p, args.pm)))
            return EXIT_OK
        if args.command == "selftest":
            return _selftest(args)
        print(config_help())
        return EXIT_OK
    except (ConfigError, ValueError, ArithmeticError, OSError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"cbo-games: error: {msg}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
