"""
Command-line interface

Verbs:
    characterize   detector characterization from dark and cw tag files
    build-matrix   detector matrix and its factors as text matrices
    reconstruct    photon-number distribution from pulsed tag files
    simulate       simulated tag files from the [sim] section
    hist           first-and-n or full correlation histogram of a tag file
    uncertainty    Monte Carlo error bars for a reconstruction

Exit codes: 0 success, 2 input error, 3 fit or convergence failure.
"""

import argparse
import json
import logging
import os
import sys
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from spadrecon.cli.config import RunConfig, apply_environment, load_run_config
from spadrecon.core.distributions import poisson_pmf_vector
from spadrecon.core.profiles import PhotonProfile
from spadrecon.detmat.composition import build_detector_matrix
from spadrecon.errors import ConfigError, FitError, InputError
from spadrecon.sim.simulator import simulate_cw, simulate_with_tallies
from spadrecon.tags.extraction import estimate_photon_profile
from spadrecon.tags.histograms import first_and_n_histogram, full_correlation_histogram
from spadrecon.tags.stream import read_time_tags, write_time_tags
from spadrecon.uncertainty.propagation import propagate
from spadrecon.utils.run_tracker import get_global_tracker
from spadrecon.workflows.characterization_workflow import characterize_detector
from spadrecon.workflows.reconstruction_workflow import ReconstructionOutcome, reconstruct_stream

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_FIT = 3

LOG_FORMAT = "%(asctime)s [%(levelname)s] [%(name)s] %(message)s"


def _write_json(path: str, payload: Dict[str, Any]) -> str:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return path


def _write_columns(path: str, columns: List[np.ndarray], header: str, fmt: List[str]) -> str:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    np.savetxt(path, np.column_stack(columns), fmt=fmt, header=header)
    return path


def _label(path: str) -> str:
    return os.path.splitext(os.path.basename(path))[0]


# Commands

def cmd_characterize(args: argparse.Namespace, cfg: RunConfig) -> int:
    """Characterize a detector from a dark record and a cw rate sweep"""
    paths = cfg.output_paths("characterize")
    dark = (_label(args.dark), read_time_tags(args.dark))
    lit = [(_label(path), read_time_tags(path)) for path in args.lit]
    report = characterize_detector(
        dark, lit,
        settings=cfg.charfit,
        eta0=cfg.detector.eta0,
        eta0_sigma=cfg.detector.eta0_sigma,
        detector=args.name,
        seed=cfg.run.seed,
        n_jobs=cfg.run.threads,
    )
    report.save(paths.characterization)
    print(report.format_table())
    print(f"Characterization saved to: {paths.characterization}")
    return EXIT_OK


def _profile_for(args: argparse.Namespace, cfg: RunConfig) -> PhotonProfile:
    if getattr(args, "tags", None):
        return estimate_photon_profile(read_time_tags(args.tags), cfg.window.to_window())
    return cfg.sim.build_profile()


def cmd_build_matrix(args: argparse.Namespace, cfg: RunConfig) -> int:
    """Write D and its factors A, R, B, L with a provenance record"""
    paths = cfg.output_paths("build-matrix")
    if cfg.matrix.n_max is None or cfg.matrix.order is None:
        raise ConfigError("build-matrix needs [matrix] n_max and order (or --n-max / --order)")
    params = cfg.detector.load()
    profile = _profile_for(args, cfg)
    detector = build_detector_matrix(params, profile, cfg.matrix.n_max, cfg.matrix.order,
                                     ap_order=cfg.matrix.ap_order, n_jobs=cfg.run.threads)

    os.makedirs(paths.matrix_dir, exist_ok=True)
    matrices = {"D": detector.matrix, **detector.factors}
    for name, matrix in matrices.items():
        np.savetxt(os.path.join(paths.matrix_dir, f"{name}.txt"), matrix, fmt="%.12e",
                   header=f"{name}: rows = clicks m, columns = photons n, n_max = {detector.n_max}")
    provenance = dict(detector.parameters)
    provenance.update(n_max=detector.n_max, files=sorted(f"{name}.txt" for name in matrices),
                      profile_bins=profile.n_bins, profile_bin_width=profile.bin_width)
    _write_json(os.path.join(paths.matrix_dir, "provenance.json"), provenance)
    print(f"Detector matrix (n_max={detector.n_max}, o_R={cfg.matrix.order}) written to: {paths.matrix_dir}")
    return EXIT_OK


def _reconstruct(args: argparse.Namespace, cfg: RunConfig) -> ReconstructionOutcome:
    stream = read_time_tags(args.tags)
    outcome = reconstruct_stream(
        stream,
        cfg.detector.load(),
        cfg.window.to_window(),
        n_max=cfg.matrix.n_max,
        order=cfg.matrix.order,
        ap_order=cfg.matrix.ap_order,
        cfg=cfg.eme.solver(),
        nbar_exp=cfg.eme.nbar_exp,
        n_jobs=cfg.run.threads,
    )
    return outcome


def write_reconstruction(outcome: ReconstructionOutcome, cfg: RunConfig, verb: str) -> Dict[str, str]:
    """Distribution JSON, metrics JSON and the bar-chart columns"""
    paths = cfg.output_paths(verb)
    result = outcome.result
    directory = os.path.dirname(paths.distribution)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(paths.distribution, "w", encoding="utf-8") as handle:
        handle.write(result.model_dump_json(indent=2))

    metrics = {
        "tvd_to_fit": result.tvd_to_fit,
        "fitted_nbar": result.fitted_nbar,
        "nbar_exp": result.nbar_exp,
        "delta_nbar": result.delta_nbar,
        "g2_recon": result.g2_recon,
        "iterations": result.iterations,
        "converged": result.converged,
        "singular_rows": result.singular_rows,
        "n_max": outcome.clicks.n_max,
        "order": outcome.order,
        "ap_order": cfg.matrix.ap_order,
        "n_cycles": outcome.n_cycles,
        "mean_clicks": outcome.clicks.mean(),
        "order_scan": {str(k): v for k, v in (outcome.order_scan or {}).items()},
        "detector": {k: v for k, v in outcome.detector.parameters.items() if k != "profile_hash"},
    }
    _write_json(paths.metrics, metrics)

    n = np.arange(outcome.clicks.n_max + 1)
    fitted = poisson_pmf_vector(result.fitted_nbar, outcome.clicks.n_max).probs
    _write_columns(paths.bars, [n, result.distribution, fitted, outcome.clicks.probs],
                   "n recon fitted_poisson clicks", ["%d", "%.9e", "%.9e", "%.9e"])
    return {"distribution": paths.distribution, "metrics": paths.metrics, "bars": paths.bars}


def cmd_reconstruct(args: argparse.Namespace, cfg: RunConfig) -> int:
    """Reconstruct and write distribution, metrics and plot data"""
    outcome = _reconstruct(args, cfg)
    files = write_reconstruction(outcome, cfg, "reconstruct")
    result = outcome.result
    print("\n" + "=" * 80)
    print("RECONSTRUCTION")
    print("=" * 80)
    print(f"Cycles: {outcome.n_cycles}   n_max: {outcome.clicks.n_max}   o_R: {outcome.order}")
    print(f"Iterations: {result.iterations}   Converged: {result.converged}")
    print(f"Fitted nbar: {result.fitted_nbar:.5g}   Distance to fit: {result.tvd_to_fit:.3g}")
    if result.delta_nbar is not None:
        print(f"delta nbar: {result.delta_nbar:+.3%}")
    if result.g2_recon is not None:
        print(f"g2: {result.g2_recon:.4g}")
    print("=" * 80)
    for name, path in files.items():
        print(f"{name}: {path}")
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace, cfg: RunConfig) -> int:
    """Simulate a pulsed, cw or dark record as configured in [sim]"""
    paths = cfg.output_paths("simulate")
    spec = cfg.sim
    sim_cfg = spec.to_config(cfg.detector.load(), seed=cfg.run.seed, n_jobs=cfg.run.threads)
    if spec.record == "pulsed":
        result = simulate_with_tallies(sim_cfg)
    elif spec.record in ("cw", "dark"):
        rate = spec.cw_rate if spec.record == "cw" else 0.0
        result = simulate_cw(sim_cfg, rate, spec.cw_duration, return_tallies=True)
    else:
        raise ConfigError(f"Unknown [sim] record '{spec.record}' (use pulsed, cw or dark)")

    path = args.output or paths.tags
    write_time_tags(result.stream, path, args.format)
    tallies = result.tallies.as_dict()
    _write_json(os.path.splitext(path)[0] + "_tallies.json", tallies)
    print(f"Simulated {result.stream.n_cycles} cycle(s), {result.stream.total_clicks} clicks -> {path}")
    return EXIT_OK


def cmd_hist(args: argparse.Namespace, cfg: RunConfig) -> int:
    """Histogram a tag file"""
    paths = cfg.output_paths(f"{args.kind}")
    stream = read_time_tags(args.tags)
    if args.kind == "first_and_n":
        hist = first_and_n_histogram(stream, args.n, bin_width=args.bin, max_delay=args.max_delay,
                                     n_jobs=cfg.run.threads)
    else:
        hist = full_correlation_histogram(stream, bin_width=args.bin, max_delay=args.max_delay,
                                          n_jobs=cfg.run.threads)
    path = hist.to_text(args.output or paths.histogram)
    print(f"{hist.kind.value} histogram: {hist.total} delays in {hist.n_bins} bins -> {path}")
    return EXIT_OK


def cmd_uncertainty(args: argparse.Namespace, cfg: RunConfig) -> int:
    """Reconstruct, then propagate sampling and parameter uncertainty"""
    paths = cfg.output_paths("uncertainty")
    outcome = _reconstruct(args, cfg)
    write_reconstruction(outcome, cfg, "uncertainty")
    params = cfg.detector.load()
    report = propagate(
        outcome.clicks,
        outcome.n_cycles,
        params,
        outcome.profile,
        outcome.order,
        cfg=cfg.eme.solver(),
        mc_samples=cfg.uncertainty.mc_samples,
        seed=cfg.run.seed,
        ap_order=cfg.matrix.ap_order,
        recovery=outcome.detector.factors["R"],
        sources=cfg.uncertainty.sources,
        n_jobs=cfg.run.threads,
        progress=cfg.uncertainty.progress,
    )
    report.save(paths.uncertainty)
    report.to_error_bars(paths.uncertainty_bars)
    print(f"g2 sigma: {report.g2_sigma}   nbar sigma: {report.nbar_fit_sigma}")
    print(f"uncertainty: {paths.uncertainty}\nerror bars: {paths.uncertainty_bars}")
    return EXIT_OK


COMMANDS = {
    "characterize": cmd_characterize,
    "build-matrix": cmd_build_matrix,
    "reconstruct": cmd_reconstruct,
    "simulate": cmd_simulate,
    "hist": cmd_hist,
    "uncertainty": cmd_uncertainty,
}


# Argument parsing

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, help="Run config file (INI)")
    common.add_argument("--seed", type=int, help="Root seed (overrides config and SPADRECON_SEED)")
    common.add_argument("--threads", type=int, help="joblib workers (overrides SPADRECON_THREADS)")
    common.add_argument("--out", type=str, help="Output directory, the {out} placeholder")
    common.add_argument("--verbose", action="store_true", help="DEBUG logging")
    common.add_argument("--stats", action="store_true", help="Print the run summary")
    common.add_argument("--stats-file", type=str, help="Write the run summary JSON here")

    parser = argparse.ArgumentParser(
        prog="spad_recon",
        description="Photon-number reconstruction from single-SPAD time tags",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Simulate a pulsed record and reconstruct it
  python spad_recon.py simulate --config run.ini --seed 7
  python spad_recon.py reconstruct --config run.ini --tags runs/tags_7.txt

  # Characterize a detector from a dark record and a cw rate sweep
  python spad_recon.py characterize --dark dark.bin --lit cw_1.bin cw_2.bin cw_3.bin
        """,
    )
    verbs = parser.add_subparsers(dest="verb", required=True)

    characterize = verbs.add_parser("characterize", parents=[common], help=cmd_characterize.__doc__)
    characterize.add_argument("--dark", required=True, help="Dark (background-only) tag file")
    characterize.add_argument("--lit", nargs="*", default=[], help="cw tag files at distinct rates")
    characterize.add_argument("--name", default="SPAD", help="Detector label for the report")

    build = verbs.add_parser("build-matrix", parents=[common], help=cmd_build_matrix.__doc__)
    build.add_argument("--tags", help="Estimate the photon profile from this tag file instead of [sim]")
    build.add_argument("--n-max", type=int, help="Truncation n_max")
    build.add_argument("--order", type=int, help="Recovery order o_R")

    for name, command in (("reconstruct", cmd_reconstruct), ("uncertainty", cmd_uncertainty)):
        sub = verbs.add_parser(name, parents=[common], help=command.__doc__)
        sub.add_argument("--tags", required=True, help="Pulsed tag file")
        sub.add_argument("--n-max", type=int, help="Truncation n_max")
        sub.add_argument("--order", type=int, help="Recovery order o_R (default: doubling rule)")
        sub.add_argument("--nbar-exp", type=float, help="Calibrated mean photon number")
        if name == "uncertainty":
            sub.add_argument("--mc-samples", type=int, help="Monte Carlo samples per run")

    sim = verbs.add_parser("simulate", parents=[common], help=cmd_simulate.__doc__)
    sim.add_argument("--output", help="Tag file path (default: [output] tags)")
    sim.add_argument("--format", choices=["text", "binary", "auto"], default="auto")

    hist = verbs.add_parser("hist", parents=[common], help=cmd_hist.__doc__)
    hist.add_argument("--tags", required=True, help="Tag file")
    hist.add_argument("--kind", choices=["first_and_n", "full_correlation"], default="first_and_n")
    hist.add_argument("--n", type=int, default=2, help="n of the first-and-n histogram")
    hist.add_argument("--bin", type=int, default=6, help="Bin width in ticks")
    hist.add_argument("--max-delay", type=int, help="Longest delay in ticks")
    hist.add_argument("--output", help="Histogram file path (default: [output] histogram)")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Config file, then environment, then command-line flags"""
    cfg = apply_environment(load_run_config(args.config))
    run_update: Dict[str, Any] = {}
    if args.seed is not None:
        run_update["seed"] = args.seed
    if args.threads is not None:
        run_update["threads"] = args.threads
    if args.verbose:
        run_update["log_level"] = "DEBUG"
    update: Dict[str, Any] = {"run": cfg.run.model_copy(update=run_update)}
    if args.out is not None:
        update["output"] = cfg.output.model_copy(update={"out": args.out})

    matrix_update = {key: getattr(args, attr) for key, attr in (("n_max", "n_max"), ("order", "order"))
                     if getattr(args, attr, None) is not None}
    if matrix_update:
        update["matrix"] = cfg.matrix.model_copy(update=matrix_update)
    if getattr(args, "nbar_exp", None) is not None:
        update["eme"] = cfg.eme.model_copy(update={"nbar_exp": args.nbar_exp})
    if getattr(args, "mc_samples", None) is not None:
        update["uncertainty"] = cfg.uncertainty.model_copy(update={"mc_samples": args.mc_samples})
    return cfg.model_copy(update=update)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one command

    Returns:
        Exit code (0 success, 2 input error, 3 fit failure)
    """
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except (InputError, FileNotFoundError) as exc:
        logging.basicConfig(format=LOG_FORMAT, level=logging.INFO, force=True)
        logger.error(f"Configuration error: {exc}")
        return EXIT_INPUT

    level = getattr(logging, cfg.run.log_level.upper(), logging.INFO)
    logging.basicConfig(format=LOG_FORMAT, level=level, force=True)

    try:
        code = COMMANDS[args.verb](args, cfg)
    except (InputError, FileNotFoundError) as exc:
        logger.error(f"{args.verb}: {exc}")
        return EXIT_INPUT
    except FitError as exc:
        logger.error(f"{args.verb}: {exc}")
        return EXIT_FIT

    tracker = get_global_tracker()
    if args.stats:
        tracker.print_summary()
    if args.stats_file:
        tracker.save_to_file(args.stats_file)
    return code


if __name__ == "__main__":
    sys.exit(main())
