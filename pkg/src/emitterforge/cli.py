"""Command-line front end for reproducible batch runs.

Subcommands: pattern, simulate, g2, stats, saturation, decay, dw. Each
run is deterministic given its config file and seed; the seed resolves as
``--seed`` flag, then ``[run] seed`` in the config, then the
EMITTERFORGE_SEED environment variable.

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 data format
error, 5 fit failure.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import defectstats
from .analysis import (
    debye_waller,
    fit_decay,
    fit_saturation,
    read_saturation_csv,
    read_spectrum_csv,
)
from .config import RunConfig, load_config
from .correlator import background_correct, correlate, fit_g2, write_histogram_csv
from .errors import ConfigError, DomainError, FormatError
from .implantation import build_pattern, sample_ion_counts, write_pattern_csv
from .photonsim import (
    read_decay_csv,
    run_detection,
    simulate_background_tags,
    simulate_emitter_tags,
)
from .timetags import merge_streams, read_timetags, write_timetags
from .units import parse_quantity

SEED_ENV_VAR = "EMITTERFORGE_SEED"
MANIFEST_HEADER = "label,n_ions,n_centers,rate_a_cps,rate_b_cps"


def _quantity(kind: str):
    def parse(text: str) -> float:
        return parse_quantity(text, kind)

    return parse


def _resolve_seed(flag_seed: int | None, cfg: RunConfig | None) -> int:
    if flag_seed is not None:
        return flag_seed
    if cfg is not None and cfg.has("run", "seed"):
        return cfg.get("run", "seed")
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(
                f"{SEED_ENV_VAR} must be an integer, got {env!r}", key="seed"
            ) from None
    raise ConfigError(
        f"no seed: pass --seed, set [run] seed, or export {SEED_ENV_VAR}", key="seed"
    )


def _cmd_pattern(args) -> int:
    cfg = load_config(args.config)
    pattern = build_pattern(**cfg.pattern_args())
    write_pattern_csv(pattern, args.out)
    print(f"wrote {len(pattern.sites)} sites to {args.out}")
    return 0


def _cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    seed = _resolve_seed(args.seed, cfg)
    pattern = build_pattern(**cfg.pattern_args())
    creation = cfg.creation_model()
    emitter = cfg.emitter_model()
    background = cfg.background_model()
    detector = cfg.detector_model()
    split = cfg.split_ratio()
    duration = cfg.require("run", "duration")
    power = cfg.require("run", "power")
    resolution = cfg.get("run", "resolution", 1e-12)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    # label order fixes both file layout and manifest rows, so a future
    # parallel implementation cannot change the outputs
    sites = sorted(pattern.sites, key=lambda s: s.label)
    rows = []
    for index, site in enumerate(sites):
        streams = _simulate_site(
            site, index, seed, creation, emitter, background, detector,
            split, duration, power, resolution,
        )
        n_ions, n_centers, arm_a, arm_b = streams
        write_timetags(merge_streams(arm_a, arm_b), out_dir / f"{site.label}.ttg")
        rate_a = arm_a.n_tags / duration if duration > 0 else 0.0
        rate_b = arm_b.n_tags / duration if duration > 0 else 0.0
        rows.append((site.label, n_ions, n_centers, rate_a, rate_b))

    manifest = out_dir / "manifest.csv"
    with open(manifest, "w") as fh:
        fh.write(f"# config_hash={cfg.config_hash} seed={seed}\n")
        fh.write(MANIFEST_HEADER + "\n")
        for label, n_ions, n_centers, rate_a, rate_b in rows:
            fh.write(f"{label},{n_ions},{n_centers},{rate_a:.17g},{rate_b:.17g}\n")
    print(f"simulated {len(rows)} sites into {out_dir}")
    return 0


def _simulate_site(
    site, index, seed, creation, emitter, background, detector,
    split, duration, power, resolution,
):
    """One site's full chain: ions -> centers -> photons -> two detectors.

    Seeding is per (run seed, site index), so any site can be reproduced
    alone and processing order cannot matter.
    """
    k_ion, k_defect, k_emit, k_bg, k_det = np.random.SeedSequence(
        [seed, index]
    ).spawn(5)
    n_ions = int(sample_ion_counts(site.expected_ions, np.random.default_rng(k_ion)))
    n_centers = int(
        defectstats.sample_defect_count(n_ions, creation, np.random.default_rng(k_defect))
    )
    stream = simulate_emitter_tags([emitter] * n_centers, power, duration, k_emit, resolution)
    if background.rate > 0:
        stream = merge_streams(
            stream,
            simulate_background_tags(
                background.rate, duration, np.random.default_rng(k_bg), resolution
            ),
        )
    arm_a, arm_b = run_detection(stream, split, detector, detector, np.random.default_rng(k_det))
    return n_ions, n_centers, arm_a, arm_b


def _cmd_g2(args) -> int:
    stream = read_timetags(args.tagfile)
    channels = stream.channel_list()
    if len(channels) < 2:
        raise DomainError(
            f"correlation needs two channels, file has {channels or 'none'}"
        )
    hist = correlate(
        stream.select(channels[0]),
        stream.select(channels[1]),
        bin_width=args.bin,
        window=args.window,
    )
    if args.rho is not None:
        hist = background_correct(hist, args.rho)
    fit = fit_g2(hist)
    out = args.out or str(Path(args.tagfile).with_suffix("")) + "_g2.csv"
    write_histogram_csv(hist, out)

    sig = fit.param_sigma
    print(f"histogram {out}")
    print(f"g2_zero {fit.g2_zero:.6g} {fit.g2_zero_sigma:.3g}")
    print(f"n_emitters {fit.n_emitters:.6g} {sig[0]:.3g}")
    print(f"a {fit.a:.6g} {sig[1]:.3g}")
    print(f"tau1 {fit.tau1:.6g} {sig[2]:.3g}")
    print(f"tau2 {fit.tau2:.6g} {sig[3]:.3g}")
    print(f"reduced_chi2 {fit.reduced_chi2:.6g}")
    if args.rho is not None:
        print(f"rho {args.rho:.6g}")
    if fit.no_dip:
        print("flag no_dip")
    if not fit.converged:
        print(f"fit did not converge: {fit.message}", file=sys.stderr)
        return 5
    return 0


def _read_counts(path) -> np.ndarray:
    """Counts from a simulate manifest (n_centers column) or one-per-line."""
    with open(path) as fh:
        lines = fh.readlines()
    counts: list[int] = []
    is_manifest = any(line.strip() == MANIFEST_HEADER for line in lines[:3])
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line == MANIFEST_HEADER:
            continue
        try:
            if is_manifest:
                parts = line.split(",")
                if len(parts) != 5:
                    raise ValueError
                counts.append(int(parts[2]))
            else:
                counts.append(int(float(line)))
        except ValueError:
            raise FormatError(f"bad count on line {lineno}", offset=lineno) from None
    return np.asarray(counts, dtype=np.int64)


def _cmd_stats(args) -> int:
    counts = _read_counts(args.input)
    if counts.size == 0:
        raise ConfigError("input contains no counts")
    dist = defectstats.occurrence_histogram(counts)
    lines = [f"# samples={dist.sample_count}"]
    if dist.probabilities.size == 1:
        lines.append("# degenerate=true")
    if args.fit_mu:
        fit = defectstats.fit_mu(dist, args.k)
        lines.append(
            f"# fitted_mu={fit.mu:.17g} log_likelihood={fit.log_likelihood:.17g}"
            f" degenerate={'true' if fit.degenerate else 'false'}"
        )
    lines.append("N,probability,lo68,hi68")
    for n in range(dist.probabilities.size):
        lines.append(
            f"{n},{dist.probabilities[n]:.17g},{dist.lo68[n]:.17g},{dist.hi68[n]:.17g}"
        )
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_saturation(args) -> int:
    power, rate, sigma = read_saturation_csv(args.csvfile)
    fit = fit_saturation(power, rate, sigma, dwell_time=args.dwell)
    sig = fit.param_sigma()
    print(f"sat_rate {fit.sat_rate:.6g} {sig[0]:.3g}")
    print(f"sat_power {fit.sat_power:.6g} {sig[1]:.3g}")
    print(f"bg_slope {fit.bg_slope:.6g} {sig[2]:.3g}")
    print(f"reduced_chi2 {fit.reduced_chi2:.6g}")
    for flag in fit.flags:
        print(f"flag {flag}")
    if not fit.converged:
        print("saturation fit did not converge", file=sys.stderr)
        return 5
    return 0


def _cmd_decay(args) -> int:
    hist = read_decay_csv(args.csvfile)
    fit = fit_decay(hist)
    if "no_fit" in fit.flags:
        print(f"no fit: {fit.flags['no_fit']}", file=sys.stderr)
        return 5
    print(f"amp_fast {fit.amp_fast:.6g}")
    print(f"tau_fast {fit.tau_fast:.6g}")
    print(f"amp_slow {fit.amp_slow:.6g}")
    print(f"tau_slow {fit.tau_slow:.6g}")
    print(f"baseline {fit.baseline:.6g}")
    print(f"reduced_chi2 {fit.reduced_chi2:.6g}")
    for flag in fit.flags:
        print(f"flag {flag}")
    if not fit.converged:
        print("decay fit did not converge", file=sys.stderr)
        return 5
    return 0


def _cmd_dw(args) -> int:
    spectrum = read_spectrum_csv(args.csvfile, zpl_wavelength=args.zpl)
    result = debye_waller(
        spectrum, zpl_halfwidth=args.halfwidth, n_psb=args.psb, method=args.method
    )
    print(f"dw {result.dw:.6g}")
    print(f"zpl_area {result.zpl_area:.6g}")
    print(f"psb_area {result.psb_area:.6g}")
    for center, amplitude, sigma, area in result.components:
        print(f"component {center * 1e9:.4f}nm amp {amplitude:.6g} area {area:.6g}")
    print(f"method {result.flags.get('method', 'fit')}")
    for flag in result.flags:
        if flag != "method":
            print(f"flag {flag}")
    if not result.converged:
        print("spectrum fit did not converge", file=sys.stderr)
        return 5
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emitterforge",
        description="Simulate and analyze single-photon-emitter fabrication runs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pattern", help="build an implant pattern CSV from a config")
    p.add_argument("config")
    p.add_argument("out")
    p.set_defaults(func=_cmd_pattern)

    p = sub.add_parser("simulate", help="simulate per-site photon streams + manifest")
    p.add_argument("config")
    p.add_argument("out_dir")
    p.add_argument("--seed", type=int, default=None, help="overrides config/env seed")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("g2", help="correlate a two-channel tag file and fit the dip")
    p.add_argument("tagfile")
    p.add_argument("--bin", type=_quantity("time"), default=1e-9, help="bin width (e.g. '1 ns')")
    p.add_argument("--window", type=_quantity("time"), default=250e-9, help="max |tau| (e.g. '250 ns')")
    p.add_argument("--rho", type=float, default=None, help="signal fraction for background correction")
    p.add_argument("--out", default=None, help="histogram CSV path")
    p.set_defaults(func=_cmd_g2)

    p = sub.add_parser("stats", help="defect-count distribution from manifest or counts")
    p.add_argument("input", help="simulate manifest CSV or one count per line")
    p.add_argument("--k", type=int, default=1, help="successes consumed per center")
    p.add_argument("--fit-mu", action="store_true", help="fit the composite-Poisson mu")
    p.add_argument("--out", default=None, help="distribution CSV path (default stdout)")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("saturation", help="fit the saturation curve in a CSV")
    p.add_argument("csvfile", help="power_uw,rate_cps[,sigma_cps]")
    p.add_argument("--dwell", type=_quantity("time"), default=1.0, help="dwell per point for Poisson sigmas")
    p.set_defaults(func=_cmd_saturation)

    p = sub.add_parser("decay", help="fit a bi-exponential decay histogram CSV")
    p.add_argument("csvfile", help="time_ns,counts")
    p.set_defaults(func=_cmd_decay)

    p = sub.add_parser("dw", help="Debye-Waller factor from a spectrum CSV")
    p.add_argument("csvfile", help="wavelength_nm,intensity")
    p.add_argument("--zpl", type=_quantity("length"), default=None, help="ZPL wavelength (e.g. '1278 nm')")
    p.add_argument("--halfwidth", type=_quantity("length"), default=6e-9, help="ZPL window halfwidth")
    p.add_argument("--psb", type=int, default=3, help="number of side-band components")
    p.add_argument("--method", choices=("fit", "window"), default="fit")
    p.set_defaults(func=_cmd_dw)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FormatError as exc:
        print(f"data format error: {exc}", file=sys.stderr)
        return 4
    except DomainError as exc:
        print(f"invalid value: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
