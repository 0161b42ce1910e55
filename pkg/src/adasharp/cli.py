"""Command-line interface: ``adasharp <command> [options]``.

Exit codes: 0 success, 1 internal or external-tool failure, 2 bad arguments or
configuration, 3 unreadable/inconsistent input or I/O failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import harness
from .degradation import (
    AlphaTable,
    build_hard_alpha_map,
    degrade_direct_plane,
    degrade_fixed_point_plane,
)
from .errors import AdaSharpError, ArityError, ConfigError, InputError, OverlapError
from .frame_io import load_mask, load_y4m, save_mask, save_y4m, to_uint8
from .metrics import METRICS, RdCurve, bd_rate, evaluate
from .partition import RdoParams, partition_frame
from .sharpen import BLUR_TAPS, build_alpha_map, usm_plane

log = logging.getLogger("adasharp")

EXIT_OK, EXIT_INTERNAL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


# ------------------------------------------------------------ argument types


def _alpha_table(text):
    try:
        return AlphaTable.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _metric_list(text):
    names = [v.strip() for v in text.split(",") if v.strip()]
    unknown = sorted(set(names) - set(METRICS))
    if unknown or not names:
        raise argparse.ArgumentTypeError(f"unknown metrics {unknown}; choose from {sorted(METRICS)}")
    return names


def _nonneg_float(text):
    value = float(text)
    if not (math.isfinite(value) and value >= 0):
        raise argparse.ArgumentTypeError(f"expected a finite value >= 0, got {text}")
    return value


def _pattern(text):
    try:
        text % 0
    except (TypeError, ValueError):
        raise argparse.ArgumentTypeError(
            f"pattern {text!r} needs exactly one integer field such as %05d"
        )
    return text


def _add_rdo_args(p):
    g = p.add_argument_group("partitioning")
    g.add_argument("--lambda", dest="lambda_rdo", type=_nonneg_float, default=10.0,
                   help="Lagrange multiplier, distortion units per bit (default 10)")
    g.add_argument("--leaf-bits", type=float, default=32.0, help="bits charged per leaf CU (default 32)")
    g.add_argument("--split-bits", type=_nonneg_float, default=1.0, help="bits per split flag (default 1)")


def _rdo(args) -> RdoParams:
    try:
        return RdoParams(args.lambda_rdo, args.leaf_bits, args.split_bits)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _jobs_arg(p):
    p.add_argument("--jobs", type=int, default=None, help="worker threads (default: CPU count)")


def _map(fn, items, jobs):
    items = list(items)
    if jobs == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------- helpers


def _load_masks(pattern, count, shape):
    masks = []
    for index in range(count):
        path = Path(pattern % index)
        if not path.exists():
            raise InputError(f"mask for frame {index} is missing: {path}")
        masks.append(load_mask(path, shape))
    return masks


def _masks_for(seq, pattern, params, jobs):
    if pattern:
        return _load_masks(pattern, len(seq), (seq.height, seq.width))
    return _map(lambda f: partition_frame(f.luma, params), seq.frames, jobs)


def _save_masks(masks, pattern):
    for index, mask in enumerate(masks):
        path = Path(pattern % index)
        path.parent.mkdir(parents=True, exist_ok=True)
        save_mask(mask, path)


def degrade_sequence(seq, masks, table, mode="direct", tol=1e-6, max_iter=1000, jobs=None):
    """Returns ``(lq_sequence, mean_alpha)``."""

    def one(item):
        frame, mask = item
        alpha = build_hard_alpha_map(mask, table)
        if mode == "direct":
            plane = degrade_direct_plane(frame.luma, alpha)
        else:
            plane = degrade_fixed_point_plane(frame.luma, alpha, tol, max_iter).plane
        return frame.with_luma(to_uint8(plane)), float(alpha.mean())

    out = _map(one, zip(seq.frames, masks), jobs)
    return seq.replace_frames(f for f, _ in out), float(np.mean([a for _, a in out]))


def sharpen_sequence(seq, masks, table, smooth_sigma=2.0, taps=3, jobs=None):
    """Returns ``(sharpened_sequence, mean_alpha)``."""

    def one(item):
        frame, mask = item
        amap = build_alpha_map(mask, table, smooth_sigma)
        return frame.with_luma(to_uint8(usm_plane(frame.luma, amap, taps))), float(amap.mean())

    out = _map(one, zip(seq.frames, masks), jobs)
    return seq.replace_frames(f for f, _ in out), float(np.mean([a for _, a in out]))


def usm_sequence(seq, alpha, taps=3):
    return seq.replace_frames(f.with_luma(to_uint8(usm_plane(f.luma, alpha, taps))) for f in seq)


def _write_json(data, path):
    text = json.dumps(data, indent=2)
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text)


# --------------------------------------------------------------- commands


def cmd_partition(args):
    seq = load_y4m(args.input)
    masks = _map(lambda f: partition_frame(f.luma, _rdo(args)), seq.frames, args.jobs)
    _save_masks(masks, args.output)
    for index, mask in enumerate(masks):
        counts = mask.leaf_counts()
        detail = " ".join(f"{s}x{s}:{n}" for s, n in counts.items())
        print(f"frame {index}: {sum(counts.values())} leaves ({detail})")
    return EXIT_OK


def cmd_degrade(args):
    seq = load_y4m(args.input)
    masks = _masks_for(seq, args.masks, _rdo(args), args.jobs)
    if args.save_masks:
        _save_masks(masks, args.save_masks)
    lq, mean_alpha = degrade_sequence(
        seq, masks, args.alpha_table, args.mode, args.tol, args.max_iter, args.jobs
    )
    save_y4m(lq, args.output)
    print(f"mean alpha applied: {mean_alpha:.6f}")
    return EXIT_OK


def cmd_sharpen(args):
    seq = load_y4m(args.input)
    masks = _masks_for(seq, args.masks, _rdo(args), args.jobs)
    out, mean_alpha = sharpen_sequence(
        seq, masks, args.alpha_table, args.smooth_sigma, args.blur_taps, args.jobs
    )
    save_y4m(out, args.output)
    print(f"mean alpha applied: {mean_alpha:.6f}")
    return EXIT_OK


def cmd_metrics(args):
    report = evaluate(load_y4m(args.ref), load_y4m(args.dist), args.metrics)
    _write_json(report.to_dict(), args.output)
    return EXIT_OK


def _encoder_from_args(args):
    try:
        if args.encode_template or args.decode_template:
            if not (args.encode_template and args.decode_template):
                raise ConfigError("--encode-template and --decode-template must be given together")
            return harness.EncoderSpec(args.encoder, args.encode_template, args.decode_template, args.preset)
        return harness.get_encoder(args.encoder, args.preset)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _parse_scores(items):
    scores = {}
    for item in items or ():
        metric, sep, path = item.partition("=")
        if not sep or not metric or not path:
            raise ConfigError(f"--scores expects METRIC=CSV, got {item!r}")
        scores[metric] = path
    return scores


def cmd_rd_sweep(args):
    spec = _encoder_from_args(args)
    if not args.crf:
        raise ConfigError("--crf must list at least one value")
    if len(set(args.crf)) != len(args.crf):
        raise ConfigError(f"--crf has duplicate values: {args.crf}")
    scores = _parse_scores(args.scores)
    workdir = Path(args.workdir)
    result = harness.rd_sweep(spec, args.input, workdir, args.crf, args.metrics, args.ref, args.jobs)
    curves = result.curves
    for metric, path in scores.items():
        curves[metric] = harness.import_external_scores(result, path, metric)
    for metric, curve in curves.items():
        curve.write_csv(workdir / f"curve_{metric}.csv")
    result.write_manifest(workdir)
    for rung in result.rungs:
        quality = " ".join(f"{k}={v:.4f}" for k, v in rung.quality.items())
        print(f"crf {rung.crf}: {rung.rate_kbps:.3f} kbps {quality}")
    for message in result.warnings:
        print(f"warning: {message}", file=sys.stderr)
    return EXIT_OK


def cmd_bdrate(args):
    anchor = RdCurve.read_csv(args.anchor)
    test = RdCurve.read_csv(args.test)
    if anchor.metric_name != test.metric_name:
        raise InputError(f"metric mismatch: anchor {anchor.metric_name!r}, test {test.metric_name!r}")
    result = bd_rate(anchor, test)
    _write_json(result.to_dict(), args.output)
    return EXIT_OK


# --------------------------------------------------------------- pipeline


@dataclass
class PipelineConfig:
    input: str
    output_dir: str
    rdo: dict = field(default_factory=dict)
    alpha_table: str = "8:1.5,16:3.0,32:3.0,64:1.5"
    smooth_sigma: float = 2.0
    degrade_mode: str = "direct"  # direct | fixedpoint | none
    encoder: dict = field(default_factory=lambda: {"name": "h264"})
    crf_list: list = field(default_factory=lambda: list(harness.DEFAULT_CRFS))
    metrics: list = field(default_factory=lambda: ["psnr"])
    usm_baselines: list = field(default_factory=lambda: [1.5, 3.0])
    jobs: Optional[int] = None

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        missing = sorted(k for k in ("input", "output_dir") if k not in data)
        if missing:
            raise ConfigError(f"missing config keys: {', '.join(missing)}")
        config = cls(**data)
        config.validate()
        return config

    def validate(self):
        try:
            self.rdo_params()
            self.table()
            self.encoder_spec()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        if self.degrade_mode not in ("direct", "fixedpoint", "none"):
            raise ConfigError(f"degrade_mode must be direct, fixedpoint or none, not {self.degrade_mode!r}")
        if not (isinstance(self.smooth_sigma, (int, float)) and math.isfinite(self.smooth_sigma) and self.smooth_sigma >= 0):
            raise ConfigError("smooth_sigma must be a finite number >= 0")
        if not self.crf_list or len(set(self.crf_list)) != len(self.crf_list):
            raise ConfigError("crf_list must be non-empty with distinct values")
        unknown = sorted(set(self.metrics) - set(METRICS))
        if unknown or not self.metrics:
            raise ConfigError(f"unknown metrics {unknown}; choose from {sorted(METRICS)}")
        if any(not (isinstance(a, (int, float)) and a >= 0) for a in self.usm_baselines):
            raise ConfigError("usm_baselines must be non-negative numbers")

    def rdo_params(self) -> RdoParams:
        allowed = {"lambda_rdo", "leaf_bits", "split_bits"}
        unknown = sorted(set(self.rdo) - allowed)
        if unknown:
            raise ConfigError(f"unknown rdo keys: {', '.join(unknown)}")
        return RdoParams(**self.rdo)

    def table(self) -> AlphaTable:
        if isinstance(self.alpha_table, dict):
            return AlphaTable(self.alpha_table)
        return AlphaTable.parse(self.alpha_table)

    def encoder_spec(self) -> harness.EncoderSpec:
        enc = dict(self.encoder)
        unknown = sorted(set(enc) - {"name", "encode_template", "decode_template", "preset"})
        if unknown:
            raise ConfigError(f"unknown encoder keys: {', '.join(unknown)}")
        name = enc.get("name", "h264")
        preset = enc.get("preset", harness.DEFAULT_PRESET)
        if "encode_template" in enc or "decode_template" in enc:
            return harness.EncoderSpec(name, enc.get("encode_template", ""), enc.get("decode_template", ""), preset)
        return harness.get_encoder(name, preset)


def _stage(name, fn, *a, **kw):
    try:
        return fn(*a, **kw)
    except AdaSharpError as exc:
        exc.args = (f"[{name}] {exc}",) + exc.args[1:]
        raise


def run_pipeline(config: PipelineConfig) -> dict:
    """partition -> degrade -> partition -> sharpen -> rd-sweep -> bdrate -> report."""
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    params, table, spec, jobs = config.rdo_params(), config.table(), config.encoder_spec(), config.jobs
    gt_path = Path(config.input)
    gt = _stage("load", load_y4m, gt_path)
    artifacts = {"input": str(gt_path)}

    if config.degrade_mode == "none":
        lq_path = gt_path
    else:
        gt_masks = _stage("partition", _masks_for, gt, None, params, jobs)
        _save_masks(gt_masks, str(out / "masks_gt" / "mask_%05d.pgm"))
        lq, _ = _stage("degrade", degrade_sequence, gt, gt_masks, table, config.degrade_mode, jobs=jobs)
        lq_path = out / "lq.y4m"
        save_y4m(lq, lq_path)
        artifacts["masks_gt"] = str(out / "masks_gt")
    artifacts["lq"] = str(lq_path)
    lq = load_y4m(lq_path)

    lq_masks = _stage("partition", _masks_for, lq, None, params, jobs)
    _save_masks(lq_masks, str(out / "masks_lq" / "mask_%05d.pgm"))
    artifacts["masks_lq"] = str(out / "masks_lq")
    sharpened, mean_alpha = _stage("sharpen", sharpen_sequence, lq, lq_masks, table, config.smooth_sigma, jobs=jobs)
    conditions = {"anchor": lq_path, "adaptive": out / "adaptive.y4m"}
    save_y4m(sharpened, conditions["adaptive"])
    for alpha in config.usm_baselines:
        path = out / f"usm_{alpha:g}.y4m"
        save_y4m(usm_sequence(lq, alpha), path)
        conditions[f"usm_{alpha:g}"] = path
    artifacts["conditions"] = {k: str(v) for k, v in conditions.items()}

    sweeps = {}
    for label, path in conditions.items():
        sweeps[label] = _stage(
            f"rd-sweep:{label}", harness.rd_sweep, spec, path, out / "sweeps" / label,
            config.crf_list, config.metrics, gt_path, jobs,
        )

    bd = {}
    plots = {}
    for metric in config.metrics:
        curves = {label: s.curve(metric) for label, s in sweeps.items()}
        for label, curve in curves.items():
            curve.write_csv(out / "sweeps" / label / f"curve_{metric}.csv")
        if len(config.crf_list) >= 4:
            bd[metric] = {}
            for label, curve in curves.items():
                if label == "anchor":
                    continue
                try:
                    bd[metric][label] = bd_rate(curves["anchor"], curve).to_dict()
                except AdaSharpError as exc:
                    bd[metric][label] = {"error": str(exc)}
        plot_path = out / f"rd_{metric}.svg"
        from .report import plot_rd_curves

        plot_rd_curves(curves, plot_path, f"{spec.name}: {metric}")
        plots[metric] = str(plot_path)

    report = {
        "config": {f.name: getattr(config, f.name) for f in fields(config)},
        "encoder": spec.name,
        "mean_alpha_adaptive": mean_alpha,
        "artifacts": artifacts,
        "sweeps": {label: s.to_dict() for label, s in sweeps.items()},
        "bd_rate": bd,
        "plots": plots,
    }
    (out / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    return report


def cmd_pipeline(args):
    try:
        data = json.loads(Path(args.config).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{args.config}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{args.config}: top level must be an object")
    for key in ("output_dir", "jobs"):
        value = getattr(args, key)
        if value is not None:
            data[key] = value
    if args.encoder is not None:
        data["encoder"] = {**data.get("encoder", {}), "name": args.encoder}
    if args.crf is not None:
        data["crf_list"] = args.crf
    report = run_pipeline(PipelineConfig.from_dict(data))
    for metric, rows in report["bd_rate"].items():
        for label, row in rows.items():
            value = row.get("bd_rate_percent")
            text = f"{value:+.2f}%" if value is not None else row.get("error")
            print(f"BD-Rate[{metric}] {label} vs anchor: {text}")
    print(f"report: {Path(report['config']['output_dir']) / 'report.json'}")
    return EXIT_OK


# ----------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adasharp",
        description="CTU-partition-guided adaptive sharpening and rate-quality evaluation.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    p = sub.add_parser("partition", help="write per-frame CU-size masks (PGM)")
    p.add_argument("--input", required=True, help="input Y4M")
    p.add_argument("--output", required=True, type=_pattern, help="mask path pattern, e.g. masks/%%05d.pgm")
    _add_rdo_args(p)
    _jobs_arg(p)
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("degrade", help="region-adaptive blur of a ground-truth Y4M")
    p.add_argument("--input", required=True, help="ground-truth Y4M")
    p.add_argument("--output", required=True, help="low-quality Y4M to write")
    p.add_argument("--masks", type=_pattern, help="mask pattern; partition the input if omitted")
    p.add_argument("--save-masks", type=_pattern, help="also write the masks used")
    p.add_argument("--alpha-table", type=_alpha_table, default=AlphaTable(),
                   help='CU size to alpha, e.g. "8:1.5,16:3.0,32:3.0,64:1.5" (default)')
    p.add_argument("--mode", choices=("direct", "fixedpoint"), default="direct",
                   help="blur the ground truth (direct) or solve for the exact sharpening preimage")
    p.add_argument("--tol", type=float, default=1e-6, help="fixed-point stopping tolerance")
    p.add_argument("--max-iter", type=int, default=1000, help="fixed-point iteration cap")
    _add_rdo_args(p)
    _jobs_arg(p)
    p.set_defaults(func=cmd_degrade)

    p = sub.add_parser("sharpen", help="mask-adaptive unsharp masking")
    p.add_argument("--input", required=True, help="input Y4M")
    p.add_argument("--output", required=True, help="sharpened Y4M to write")
    p.add_argument("--masks", type=_pattern, help="mask pattern; partition the input if omitted")
    p.add_argument("--alpha-table", type=_alpha_table, default=AlphaTable(),
                   help='CU size to alpha, e.g. "8:1.5,16:3.0,32:3.0,64:1.5" (default)')
    p.add_argument("--smooth-sigma", type=_nonneg_float, default=2.0,
                   help="Gaussian sigma for smoothing the alpha map; 0 disables (default 2)")
    p.add_argument("--blur-taps", type=int, choices=BLUR_TAPS, default=3,
                   help="binomial blur length inside the unsharp mask (default 3)")
    _add_rdo_args(p)
    _jobs_arg(p)
    p.set_defaults(func=cmd_sharpen)

    p = sub.add_parser("metrics", help="PSNR / MS-SSIM / Charbonnier report as JSON")
    p.add_argument("--ref", required=True, help="reference Y4M")
    p.add_argument("--dist", required=True, help="distorted Y4M")
    p.add_argument("--metrics", type=_metric_list, default=["psnr", "ms_ssim", "charbonnier"],
                   help="comma-separated subset of psnr,ms_ssim,charbonnier")
    p.add_argument("--output", help="JSON path (default: stdout)")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("rd-sweep", help="encode/decode/score over a CRF ladder")
    p.add_argument("--input", required=True, help="Y4M to encode")
    p.add_argument("--ref", help="reference Y4M for scoring (default: --input)")
    p.add_argument("--workdir", required=True, help="directory for bitstreams, decodes, manifest")
    p.add_argument("--encoder", default="h264", help=f"built-in encoder {sorted(harness.BUILTIN_ENCODERS)} or a label for custom templates")
    p.add_argument("--encode-template", help="custom encode command with {input} {output} {crf} {preset}")
    p.add_argument("--decode-template", help="custom decode command with {input} {output}")
    p.add_argument("--preset", default=harness.DEFAULT_PRESET, help="encoder preset (default medium)")
    p.add_argument("--crf", type=_int_list, default=list(harness.DEFAULT_CRFS),
                   help="comma-separated CRF/QP values (default 21,24,27,30,33)")
    p.add_argument("--metrics", type=_metric_list, default=["psnr"], help="comma-separated metrics (default psnr)")
    p.add_argument("--scores", action="append", metavar="METRIC=CSV",
                   help="import external scores (CSV header crf,score); repeatable")
    _jobs_arg(p)
    p.set_defaults(func=cmd_rd_sweep)

    p = sub.add_parser("bdrate", help="BD-Rate of a test RD curve against an anchor")
    p.add_argument("--anchor", required=True, help="anchor curve CSV (crf,rate_kbps,<metric>)")
    p.add_argument("--test", required=True, help="test curve CSV")
    p.add_argument("--output", help="JSON path (default: stdout)")
    p.set_defaults(func=cmd_bdrate)

    p = sub.add_parser("pipeline", help="run every stage from a JSON config")
    p.add_argument("--config", required=True, help="pipeline config JSON")
    p.add_argument("--output-dir", help="override output_dir")
    p.add_argument("--encoder", help="override encoder name")
    p.add_argument("--crf", type=_int_list, help="override crf_list")
    _jobs_arg(p)
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"adasharp {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InputError, ArityError, OverlapError, OSError) as exc:
        print(f"adasharp {args.command}: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:  # noqa: BLE001
        log.debug("unhandled error", exc_info=True)
        print(f"adasharp {args.command}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
