"""Command line entry point: ``blockisd {run,trial,overhead}``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

import numpy as np

from .exceptions import ConfigurationError
from .harness import (
    RunConfig,
    load_config,
    overhead_report,
    run_sweep,
    simulate_trial,
    write_sweep,
)

log = logging.getLogger("blockisd")


def _algorithms(text):
    return tuple(a.strip() for a in text.split(",") if a.strip())


def _resolve_config(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["master_seed"] = args.seed
    if getattr(args, "workers", None) is not None:
        overrides["workers"] = args.workers
    if getattr(args, "algorithms", None):
        overrides["algorithms"] = args.algorithms
    if getattr(args, "out", None):
        overrides["output_dir"] = args.out
    if getattr(args, "trials", None) is not None:
        overrides["n_trials"] = args.trials
    return replace(config, **overrides) if overrides else config


def cmd_run(args):
    config = _resolve_config(args)
    total = len(config.snr_grid_db) * config.n_trials
    done = [0]

    def tick():
        done[0] += 1
        if done[0] % max(1, total // 20) == 0 or done[0] == total:
            log.info("%d/%d trials", done[0], total)

    result = run_sweep(config, progress=tick)
    paths = write_sweep(result, config, config.output_dir)
    print("snr_db,algorithm,mean_nmse,mean_nmse_db,n_trials")
    for row in result.summary:
        print(f"{row['snr_db']:g},{row['algorithm']},{row['mean_nmse']:.6g},"
              f"{row['mean_nmse_db']:.3f},{row['n_trials']}")
    for name, path in paths.items():
        log.info("wrote %s: %s", name, path)
    return 0


def cmd_trial(args):
    config = _resolve_config(args)
    tr = simulate_trial(config, args.snr, args.trial)
    true_blocks = tr.cir.tap_support
    print(f"snr_db={args.snr:g} trial={args.trial} seed={config.master_seed}")
    print(f"N={config.N} N_T={config.N_T} L={config.L} p={config.p}")
    print(f"true tap support: {true_blocks.tolist()}")
    print(f"noise variance: {tr.measurement.noise_variance:.6g}")
    for rec in tr.records:
        out = tr.outputs[rec.algorithm]
        blocks = np.unique(out.final_support // config.N_T).tolist()
        print(f"{rec.algorithm:>10}: nmse={rec.nmse:.6g} ({10 * np.log10(max(rec.nmse, 1e-300)):.2f} dB)"
              f" iterations={rec.iterations} stop={rec.termination_reason}"
              f" support_size={out.final_support.size} blocks={blocks[:16]}{'...' if len(blocks) > 16 else ''}")
    for name, why in tr.skipped.items():
        print(f"{name:>10}: skipped ({why})")
    return 0


def cmd_overhead(args):
    if args.L is not None or args.N_T is not None or args.p is not None:
        base = _resolve_config(args)
        rep = overhead_report(
            L=args.L if args.L is not None else base.L,
            N_T=args.N_T if args.N_T is not None else base.N_T,
            p=args.p if args.p is not None else base.p,
        )
    else:
        rep = overhead_report(_resolve_config(args))
    print("\n".join(rep.lines()))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="blockisd", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="YAML run configuration")
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--algorithms", type=_algorithms,
                       help="comma-separated subset of bp,isd,block_isd,oracle_ls")

    run = sub.add_parser("run", help="full NMSE-vs-SNR sweep")
    common(run)
    run.add_argument("--out", help="output directory")
    run.add_argument("--workers", type=int)
    run.add_argument("--trials", type=int, help="trials per SNR point override")
    run.set_defaults(func=cmd_run)

    trial = sub.add_parser("trial", help="one verbose trial")
    common(trial)
    trial.add_argument("--snr", type=float, required=True)
    trial.add_argument("--trial", type=int, default=0)
    trial.set_defaults(func=cmd_trial)

    over = sub.add_parser("overhead", help="pilot overhead arithmetic")
    over.add_argument("--config")
    over.add_argument("--L", type=int)
    over.add_argument("--N_T", type=int)
    over.add_argument("--p", type=int)
    over.set_defaults(func=cmd_overhead)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (ConfigurationError, OSError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
