"""Command-line front end tying the pipeline together.

Subcommands: simulate, detect, correlate, fit, pipeline, validate.

Exit codes:
    0  success
    1  unexpected internal error
    2  configuration error            (error[config])
    3  I/O or file-format error       (error[io])
    4  stream/click validation failed (error[validate])

The default output directory is --outdir, else $PHOTONLAB_OUTDIR, else the
current directory.  Same config + seed always produces byte-identical output
files.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, replace

import numpy as np

from photonlab import __version__
from photonlab.core import RngSeed, ClickStream, validate_stream
from photonlab.correlation import (
    MODE_ALL_PAIRS,
    MODE_CROSS,
    MODE_START_STOP,
    correlate_all_pairs,
    correlate_cross,
    fold_two_sided,
    normalize_g2,
    start_stop_first,
)
from photonlab.detectors import detect, beam_splitter, validate_clicks
from photonlab.emitters import (
    simulate_fock_modes,
    simulate_poisson,
    simulate_three_level,
)
from photonlab.fitting import fit_g2, fit_linear
from photonlab.io import (
    ConfigError,
    CorruptFileError,
    ExperimentConfig,
    load_config,
    read_curve,
    read_stream,
    write_curve,
    write_stream,
)

BUNDLED = ("fig3a", "fig3b", "fig4")


class ValidationFailure(Exception):
    pass


def bundled_config_path(name: str) -> str:
    from importlib.resources import files

    return str(files("photonlab").joinpath(f"configs/{name}.json"))


def _resolve_config(arg: str) -> str:
    if arg in BUNDLED and not os.path.exists(arg):
        return bundled_config_path(arg)
    return arg


def simulate_source(cfg: ExperimentConfig):
    seed = RngSeed(cfg.seed, stream_id=0)
    src = cfg.source
    if src.kind == "poisson":
        return simulate_poisson(src.rate, cfg.duration, seed)
    if src.kind == "fock":
        return simulate_fock_modes(src.fock, seed)
    return simulate_three_level(src.three_level, cfg.duration, seed)


def _correlate_single(clicks: ClickStream, cfg: ExperimentConfig):
    c = cfg.correlation
    if c.mode == MODE_START_STOP:
        return start_stop_first(clicks, c.tau_min, c.tau_max, c.bin_width)
    return correlate_all_pairs(clicks, c.tau_min, c.tau_max, c.bin_width)


def run_pipeline(cfg: ExperimentConfig, outdir: str) -> dict:
    """simulate -> (optional split) -> detect -> correlate -> normalize -> fit.

    Writes curve.csv, fit.json and summary.json into outdir and returns the
    summary dictionary.
    """
    os.makedirs(outdir, exist_ok=True)
    photons = simulate_source(cfg)
    summary = {
        "version": __version__,
        "config": cfg.name,
        "configuration": cfg.configuration,
        "seed": cfg.seed,
        "duration_ticks": cfg.duration if cfg.source.kind != "fock" else photons.duration,
        "n_photons": len(photons),
        "photon_rate_hz": photons.rate,
    }
    if cfg.configuration == "single_detector":
        clicks = detect(photons, cfg.detector, RngSeed(cfg.seed, stream_id=10))
        hist = _correlate_single(clicks, cfg)
        curve = normalize_g2(hist, exp_correction=cfg.correlation.exp_correction)
        summary["n_clicks"] = len(clicks)
        summary["click_rate_hz"] = clicks.rate
        if cfg.save_streams:
            write_stream(os.path.join(outdir, "clicks.pts"), clicks)
    else:
        a, b = beam_splitter(photons, cfg.hbt.transmittance,
                             RngSeed(cfg.seed, stream_id=1))
        ca = detect(a, cfg.hbt.detectors[0], RngSeed(cfg.seed, stream_id=10),
                    detector_id=0)
        cb = detect(b, cfg.hbt.detectors[1], RngSeed(cfg.seed, stream_id=11),
                    detector_id=1)
        hist = correlate_cross(ca, cb, cfg.correlation.tau_max,
                               cfg.correlation.bin_width)
        curve = normalize_g2(hist)
        summary["n_clicks"] = [len(ca), len(cb)]
        summary["click_rate_hz"] = [ca.rate, cb.rate]
        if cfg.save_streams:
            write_stream(os.path.join(outdir, "clicks_a.pts"), ca)
            write_stream(os.path.join(outdir, "clicks_b.pts"), cb)
    if cfg.save_streams:
        write_stream(os.path.join(outdir, "photons.pts"), photons)

    curve_path = os.path.join(outdir, "curve.csv")
    write_curve(curve_path, curve)
    summary["curve"] = "curve.csv"
    summary["total_counts"] = int(np.sum(curve.counts))

    fit_doc = {"kind": cfg.fit}
    if cfg.fit != "none":
        fit_curve = curve
        if curve.mode == MODE_CROSS:
            fit_curve = normalize_g2(fold_two_sided(curve.histogram))
        if cfg.fit == "three_level":
            r = fit_g2(fit_curve)
            fit_doc.update(
                a=r.model.a, lambda1=r.model.lambda1, lambda2=r.model.lambda2,
                param_errors=list(r.param_errors), residual_sum=r.residual_sum,
                n_iterations=r.n_iterations, converged=r.converged)
        else:
            r = fit_linear(fit_curve)
            fit_doc.update(asdict(r))
    fit_path = os.path.join(outdir, "fit.json")
    with open(fit_path, "w") as f:
        json.dump(fit_doc, f, indent=2, sort_keys=True)
        f.write("\n")
    summary["fit"] = "fit.json"

    with open(os.path.join(outdir, "summary.json"), "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
    return summary


def _outdir(args) -> str:
    return args.outdir or os.environ.get("PHOTONLAB_OUTDIR", ".")


def _load(args, require_seed_override=True) -> ExperimentConfig:
    cfg = load_config(_resolve_config(args.config))
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "configuration", None):
        if args.configuration not in ("single_detector", "hbt"):
            raise ConfigError("--configuration must be single_detector or hbt")
        cfg = replace(cfg, configuration=args.configuration)
        if cfg.configuration == "single_detector" and cfg.detector is None:
            raise ConfigError("config has no 'detector' block")
        if cfg.configuration == "hbt" and cfg.hbt is None:
            raise ConfigError("config has no 'hbt' block")
    return cfg


def cmd_simulate(args):
    cfg = _load(args)
    stream = simulate_source(cfg)
    write_stream(args.out, stream)
    print(f"wrote {len(stream)} events to {args.out}")
    return 0


def cmd_detect(args):
    cfg = _load(args)
    if cfg.detector is None:
        raise ConfigError("detector: required for the detect subcommand")
    photons = read_stream(args.infile)
    if isinstance(photons, ClickStream):
        raise ConfigError(f"{args.infile}: expected a photon stream, got clicks")
    clicks = detect(photons, cfg.detector, RngSeed(cfg.seed, stream_id=10))
    write_stream(args.out, clicks)
    print(f"wrote {len(clicks)} clicks to {args.out}")
    return 0


def cmd_correlate(args):
    cfg = _load(args)
    stream = read_stream(args.infile)
    if cfg.correlation.mode == MODE_CROSS:
        other = read_stream(args.second)
        hist = correlate_cross(stream, other, cfg.correlation.tau_max,
                               cfg.correlation.bin_width)
    else:
        hist = _correlate_single(stream, cfg)
    curve = normalize_g2(hist, exp_correction=cfg.correlation.exp_correction)
    write_curve(args.out, curve)
    print(f"wrote {len(curve.g2)} bins to {args.out}")
    return 0


def cmd_fit(args):
    curve = read_curve(args.infile)
    if args.kind == "linear":
        r = fit_linear(curve)
        doc = {"kind": "linear", **asdict(r)}
    else:
        r = fit_g2(curve)
        doc = {"kind": "three_level", "a": r.model.a, "lambda1": r.model.lambda1,
               "lambda2": r.model.lambda2, "param_errors": list(r.param_errors),
               "residual_sum": r.residual_sum, "n_iterations": r.n_iterations,
               "converged": r.converged}
    with open(args.out, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")
    print(f"wrote fit to {args.out}")
    return 0


def cmd_pipeline(args):
    cfg = _load(args)
    summary = run_pipeline(cfg, _outdir(args))
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def cmd_validate(args):
    stream = read_stream(args.infile)
    rep = validate_stream(stream)
    if not rep:
        raise ValidationFailure(f"{args.infile}: {rep.reason} at index {rep.index}")
    if args.dead_time_ns is not None and isinstance(stream, ClickStream):
        from photonlab.detectors import DetectorParams
        from photonlab.core import ns_to_ticks

        rep = validate_clicks(stream, DetectorParams(
            efficiency=1.0, dead_time=ns_to_ticks(args.dead_time_ns)))
        if not rep:
            raise ValidationFailure(
                f"{args.infile}: {rep.reason} at index {rep.index}")
    print(f"{args.infile}: ok ({len(stream)} events)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="photonlab", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(sp, config=True):
        if config:
            sp.add_argument("--config", required=True,
                            help="config path or bundled name (fig3a, fig3b, fig4)")
            sp.add_argument("--seed", type=int, help="override the config seed")

    sp = sub.add_parser("simulate", help="generate a photon stream")
    add_common(sp)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("detect", help="run a photon stream through a detector")
    add_common(sp)
    sp.add_argument("--in", dest="infile", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_detect)

    sp = sub.add_parser("correlate", help="histogram and normalize g2")
    add_common(sp)
    sp.add_argument("--in", dest="infile", required=True)
    sp.add_argument("--second", help="second channel for cross mode")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_correlate)

    sp = sub.add_parser("fit", help="fit a saved curve")
    sp.add_argument("--in", dest="infile", required=True)
    sp.add_argument("--kind", choices=("g2", "linear"), default="g2")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("pipeline", help="full simulate/detect/correlate/fit run")
    add_common(sp)
    sp.add_argument("--configuration", help="override: single_detector or hbt")
    sp.add_argument("--outdir", help="output directory (default $PHOTONLAB_OUTDIR or .)")
    sp.set_defaults(func=cmd_pipeline)

    sp = sub.add_parser("validate", help="validate a stream file")
    sp.add_argument("--in", dest="infile", required=True)
    sp.add_argument("--dead-time-ns", type=float)
    sp.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error[config]: {e}", file=sys.stderr)
        return 2
    except (CorruptFileError, OSError) as e:
        print(f"error[io]: {e}", file=sys.stderr)
        return 3
    except ValidationFailure as e:
        print(f"error[validate]: {e}", file=sys.stderr)
        return 4
    except (ValueError, TypeError) as e:
        print(f"error[config]: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
