"""Command line interface: ``gsrp simulate | localize | eval | selftest``.

Exit codes: 0 success, 1 failed self-test, 2 configuration error,
3 numerical error. The worker thread count for map evaluation is read from
the ``GSRP_THREADS`` environment variable.
"""

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .config import load_config
from .errors import ConfigError, NumericalError
from .pipeline import export_heatmap, format_number, localize_run, write_report
from .simulator import simulate_scene, write_wav

EXIT_OK = 0
EXIT_SELFTEST_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _load(path, seed):
    cfg = load_config(path)
    return cfg.with_seed(seed) if seed is not None else cfg


def cmd_simulate(args):
    cfg = _load(args.config, args.seed)
    if cfg.scene is None:
        raise ConfigError("simulate needs a scene description, not input.wav")
    scene = simulate_scene(cfg.scene)
    write_wav(args.output, scene.samples, scene.sample_rate)
    msg = f"wrote {scene.samples.shape[1]} channels, {scene.samples.shape[0]} samples to {args.output}"
    if scene.closest_mic_snr_db is not None:
        msg += f" (closest-mic SNR {scene.closest_mic_snr_db:.2f} dB)"
    print(msg)
    return EXIT_OK


def cmd_localize(args):
    cfg = _load(args.config, args.seed)
    report = localize_run(cfg, keep_maps=args.avg_heatmap)
    write_report(report, args.output)
    if args.heatmap:
        m = report.average_map if args.avg_heatmap else report.last_map
        if m is None:
            raise ConfigError("no active frames: nothing to export as a heatmap")
        export_heatmap(m, args.heatmap, normalize=not args.raw)
    q1, med, q3 = report.quartiles
    print(f"frames={report.n_frames} mle={report.mle:.6g} q25={q1:.6g} median={med:.6g} q75={q3:.6g}")
    return EXIT_OK


def cmd_eval(args):
    """Run every ``*.cfg`` in a directory over its ``eval.snr_db`` x ``eval.seeds`` sweep."""
    paths = sorted(Path(args.config_dir).glob("*.cfg"))
    if not paths:
        raise ConfigError(f"no *.cfg files in {args.config_dir}")
    rows = []
    for path in paths:
        cfg = load_config(path)
        if cfg.scene is None:
            raise ConfigError(f"{path}: eval needs simulated scenes")
        snrs = cfg.eval_snr_db or [cfg.scene.noise.snr_db]
        seeds = cfg.eval_seeds or [cfg.seed if args.seed is None else args.seed]
        for snr in snrs:
            errors = []
            for seed in seeds:
                errors.extend(localize_run(cfg.with_snr(snr).with_seed(seed)).errors.tolist())
            e = np.asarray(errors)
            stats = [np.mean(e), *np.percentile(e, [25, 50, 75])] if e.size else [float("nan")] * 4
            rows.append([path.stem, "none" if snr is None else format_number(snr), str(len(seeds)), str(e.size)]
                        + [format_number(v) for v in stats])
            print(f"{path.stem} snr={rows[-1][1]} frames={e.size} mle={rows[-1][4]}")
    with open(args.output, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["config", "snr_db", "runs", "frames", "mle", "q25", "median", "q75"])
        w.writerows(rows)
    return EXIT_OK


def cmd_selftest(args):
    from .acceptance import CRITERIA, run_all

    numbers = args.criteria or sorted(CRITERIA)
    unknown = [n for n in numbers if n not in CRITERIA]
    if unknown:
        raise ConfigError(f"unknown criteria {unknown}")
    results = run_all(numbers, echo=print)
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)} of {len(results)} criteria passed")
    return EXIT_SELFTEST_FAILED if failed else EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="gsrp", description="Generalized steered response power localization")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="render a scene to a multichannel WAV file")
    s.add_argument("config")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("localize", help="localize frame by frame and write a report CSV")
    s.add_argument("config")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--heatmap", help="write the last frame map (or the average with --avg-heatmap)")
    s.add_argument("--avg-heatmap", action="store_true", help="export the map averaged over active frames")
    s.add_argument("--raw", action="store_true", help="do not normalize the heatmap to a peak of 1")
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_localize)

    s = sub.add_parser("eval", help="batch evaluation over the SNR/seed sweep of each config")
    s.add_argument("config_dir")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--seed", type=int, help="seed for configs without eval.seeds")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("selftest", help="run the acceptance suite")
    s.add_argument("criteria", nargs="*", type=int, help="criterion numbers (default: all)")
    s.set_defaults(func=cmd_selftest)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
