"""Drive external encoders over a CRF ladder and collect rate/quality curves.

Encoders are described by command templates.  A template is split with shell
rules first and placeholders are substituted per argument afterwards, so a
path containing spaces stays a single argument and nothing passes through a
shell.  The executable is looked up on ``ADASHARP_ENCODER_PATH`` (if set)
before ``PATH``.

Workdir layout of a sweep::

    <workdir>/manifest.json
    <workdir>/crf21.bin   elementary bitstream
    <workdir>/crf21.y4m   decoded pictures
    <workdir>/crf21.log   captured encoder/decoder stderr
"""

from __future__ import annotations

import csv
import json
import logging
import os
import shlex
import shutil
import string
import subprocess
import warnings
from concurrent.futures import ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import (
    EncoderError,
    EncoderNotFoundError,
    EncoderOutputError,
    ScoreImportError,
    SweepError,
)
from .frame_io import load_y4m, probe_y4m
from .metrics import METRICS, RdCurve, RdPoint

log = logging.getLogger(__name__)

ENCODER_PATH_ENV = "ADASHARP_ENCODER_PATH"
DEFAULT_CRFS = (21, 24, 27, 30, 33)
DEFAULT_PRESET = "medium"
ENCODE_FIELDS = ("input", "output", "crf", "preset")
DECODE_FIELDS = ("input", "output")

_FFMPEG = "ffmpeg -hide_banner -nostdin -y -loglevel error"
_FFMPEG_DECODE = f"{_FFMPEG} -i {{input}} -f yuv4mpegpipe -pix_fmt yuv420p {{output}}"


def _placeholders(template: str) -> list:
    return [name for _, name, _, _ in string.Formatter().parse(template) if name is not None]


@dataclass(frozen=True)
class EncoderSpec:
    name: str
    encode_template: str
    decode_template: str
    preset: str = DEFAULT_PRESET

    def __post_init__(self):
        for label, template, required in (
            ("encode", self.encode_template, ENCODE_FIELDS),
            ("decode", self.decode_template, DECODE_FIELDS),
        ):
            names = _placeholders(template)
            unknown = sorted(set(names) - set(required))
            if unknown:
                raise ValueError(f"{label} template has unknown placeholders {unknown}")
            for key in required:
                if names.count(key) != 1:
                    raise ValueError(
                        f"{label} template must contain {{{key}}} exactly once, "
                        f"found {names.count(key)}"
                    )

    def encode_argv(self, input, output, crf: int) -> list:
        return substitute(self.encode_template, input=input, output=output, crf=crf, preset=self.preset)

    def decode_argv(self, input, output) -> list:
        return substitute(self.decode_template, input=input, output=output)


def substitute(template: str, **values) -> list:
    """Split ``template`` into argv and fill placeholders in each argument."""
    values = {k: os.fspath(v) if isinstance(v, os.PathLike) else str(v) for k, v in values.items()}
    return [token.format(**values) for token in shlex.split(template)]


# Single-threaded encoder settings keep bitstream sizes reproducible.
BUILTIN_ENCODERS = {
    "h264": EncoderSpec(
        "h264",
        f"{_FFMPEG} -i {{input}} -an -c:v libx264 -preset {{preset}} -crf {{crf}} "
        "-threads 1 -f h264 {output}",
        _FFMPEG_DECODE,
    ),
    "h265": EncoderSpec(
        "h265",
        f"{_FFMPEG} -i {{input}} -an -c:v libx265 -preset {{preset}} -crf {{crf}} "
        "-x265-params pools=none:frame-threads=1:log-level=error -f hevc {output}",
        _FFMPEG_DECODE,
    ),
    # Untested: {crf} is passed as the VVC QP.
    "h266": EncoderSpec(
        "h266",
        "vvencapp --preset {preset} --qp {crf} --threads 1 -i {input} -o {output}",
        "vvdecapp -b {input} --y4m -o {output}",
    ),
}


def get_encoder(name: str, preset: str = DEFAULT_PRESET) -> EncoderSpec:
    try:
        spec = BUILTIN_ENCODERS[name]
    except KeyError:
        raise ValueError(f"unknown encoder {name!r}; built-in: {sorted(BUILTIN_ENCODERS)}") from None
    return EncoderSpec(spec.name, spec.encode_template, spec.decode_template, preset)


def resolve_executable(command: str) -> str:
    search = os.environ.get("PATH", os.defpath)
    extra = os.environ.get(ENCODER_PATH_ENV)
    if extra:
        search = extra + os.pathsep + search
    found = shutil.which(command, path=search)
    if found is None:
        raise EncoderNotFoundError(
            f"executable {command!r} not found (searched ${ENCODER_PATH_ENV} and $PATH)"
        )
    return found


def _run(argv: list, output: Path, log_path: Optional[Path], what: str) -> None:
    argv = [resolve_executable(argv[0])] + argv[1:]
    log.debug("running %s", shlex.join(argv))
    try:
        proc = subprocess.run(argv, capture_output=True, text=True, errors="replace")
    except OSError as exc:
        output.unlink(missing_ok=True)
        raise EncoderError(f"{what} could not be started: {exc}") from exc
    if log_path is not None:
        with open(log_path, "a") as f:
            f.write(f"$ {shlex.join(argv)}\n{proc.stderr}")
    if proc.returncode != 0:
        output.unlink(missing_ok=True)
        raise EncoderError(f"{what} exited with status {proc.returncode}", proc.stderr)
    if not output.exists() or output.stat().st_size == 0:
        output.unlink(missing_ok=True)
        raise EncoderOutputError(f"{what} produced no output at {output}", proc.stderr)


def rung_stem(crf: int) -> str:
    return f"crf{crf:02d}"


def rate_kbps(size_bytes: int, frames: int, fps_num: int, fps_den: int) -> float:
    """Bitstream size in bits over the sequence duration, in kbit/s."""
    duration = frames * fps_den / fps_num
    return size_bytes * 8 / duration / 1000.0


def run_encode(spec: EncoderSpec, input, crf: int, workdir, output=None) -> tuple:
    """Encode ``input`` at ``crf``; returns ``(bitstream path, rate in kbit/s)``."""
    workdir = Path(workdir)
    header, frames = probe_y4m(input)
    output = Path(output) if output is not None else workdir / f"{rung_stem(crf)}.bin"
    _run(
        spec.encode_argv(input, output, crf),
        output,
        workdir / f"{rung_stem(crf)}.log",
        f"{spec.name} encoder (crf {crf})",
    )
    size = output.stat().st_size
    return output, rate_kbps(size, frames, header.fps_num, header.fps_den)


def run_decode(spec: EncoderSpec, bitstream, output, log_path=None) -> Path:
    output = Path(output)
    _run(spec.decode_argv(bitstream, output), output, log_path, f"{spec.name} decoder")
    return output


@dataclass
class Rung:
    crf: int
    rate_kbps: float
    quality: dict
    bitstream: str
    decoded_path: str


@dataclass
class SweepResult:
    encoder: str
    input: str
    ref: str
    rungs: list  # of Rung, sorted by crf
    partial: bool = False
    warnings: list = field(default_factory=list)

    def curve(self, metric: str) -> RdCurve:
        return RdCurve(metric, [RdPoint(r.rate_kbps, r.quality[metric], r.crf) for r in self.rungs])

    @property
    def curves(self) -> dict:
        names = sorted({m for r in self.rungs for m in r.quality})
        return {m: self.curve(m) for m in names}

    def to_dict(self) -> dict:
        return {
            "encoder": self.encoder,
            "input": self.input,
            "ref": self.ref,
            "partial": self.partial,
            "warnings": self.warnings,
            "rungs": [vars(r) for r in self.rungs],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SweepResult":
        rungs = [Rung(**r) for r in data["rungs"]]
        return cls(data["encoder"], data["input"], data["ref"], rungs, data.get("partial", False), data.get("warnings", []))

    def write_manifest(self, workdir) -> Path:
        path = Path(workdir) / "manifest.json"
        path.write_text(json.dumps(self.to_dict(), indent=2))
        return path


def _score(ref_seq, decoded_path, metrics) -> dict:
    decoded = load_y4m(decoded_path)
    if len(decoded) != len(ref_seq):
        raise EncoderOutputError(
            f"decoded {len(decoded)} frames from {decoded_path}, reference has {len(ref_seq)}"
        )
    return {m: METRICS[m](ref_seq, decoded) for m in metrics}


def rd_sweep(
    spec: EncoderSpec,
    input,
    workdir,
    crf_list=DEFAULT_CRFS,
    metrics=("psnr",),
    ref=None,
    jobs: Optional[int] = None,
) -> SweepResult:
    """Encode, decode and score every rung; writes ``manifest.json`` to workdir.

    ``ref`` defaults to ``input``.  Rungs run concurrently on up to ``jobs``
    threads (default: one per rung).  On failure the completed rungs are saved
    in a manifest marked partial and :class:`SweepError` names the rung.
    """
    crfs = [int(c) for c in crf_list]
    if not crfs:
        raise ValueError("crf_list must not be empty")
    if len(set(crfs)) != len(crfs):
        raise ValueError(f"crf_list has duplicates: {crfs}")
    unknown = sorted(set(metrics) - set(METRICS))
    if unknown:
        raise ValueError(f"unknown metrics {unknown}; available: {sorted(METRICS)}")
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    input = Path(input)
    ref = Path(ref) if ref is not None else input
    ref_seq = load_y4m(ref)

    def rung(crf):
        bitstream, rate = run_encode(spec, input, crf, workdir)
        stem = rung_stem(crf)
        decoded = run_decode(spec, bitstream, workdir / f"{stem}.y4m", workdir / f"{stem}.log")
        quality = _score(ref_seq, decoded, metrics)
        return Rung(crf, rate, quality, str(bitstream), str(decoded))

    with ThreadPoolExecutor(max_workers=jobs or len(crfs)) as pool:
        futures = {crf: pool.submit(rung, crf) for crf in crfs}
        wait(futures.values())
    done, failed = [], {}
    for crf in sorted(crfs):
        exc = futures[crf].exception()
        if exc is None:
            done.append(futures[crf].result())
        else:
            failed[crf] = exc
    result = SweepResult(spec.name, str(input), str(ref), done)
    if failed:
        result.partial = True
        result.write_manifest(workdir)
        crf = min(failed)
        raise SweepError(str(failed[crf]), crf) from failed[crf]

    for lower, higher in zip(done, done[1:]):
        if higher.rate_kbps > lower.rate_kbps:
            message = (
                f"rate rises from {lower.rate_kbps:.3f} kbps at crf {lower.crf} "
                f"to {higher.rate_kbps:.3f} kbps at crf {higher.crf}"
            )
            result.warnings.append(message)
            warnings.warn(message, stacklevel=2)
    result.write_manifest(workdir)
    return result


def _skeleton_rates(skeleton) -> dict:
    if isinstance(skeleton, SweepResult):
        return {r.crf: r.rate_kbps for r in skeleton.rungs}
    points = skeleton.points
    if any(p.crf is None for p in points):
        raise ValueError("skeleton curve points must carry their crf")
    return {p.crf: p.rate for p in points}


def import_external_scores(skeleton, csv_path, metric_name: str) -> RdCurve:
    """Attach externally computed scores (CSV ``crf,score``) to the sweep rates.

    ``skeleton`` is a :class:`SweepResult` or an :class:`RdCurve` whose points
    carry crf values.  Every crf must appear exactly once and no others.
    """
    rates = _skeleton_rates(skeleton)
    with open(csv_path, newline="") as f:
        rows = [row for row in csv.reader(f) if row]
    if not rows or [c.strip() for c in rows[0]] != ["crf", "score"]:
        raise ScoreImportError(f"{csv_path}: expected header 'crf,score'")
    scores, duplicates = {}, []
    for lineno, row in enumerate(rows[1:], start=2):
        try:
            crf, score = int(row[0]), float(row[1])
        except (ValueError, IndexError):
            raise ScoreImportError(f"{csv_path}:{lineno}: bad row {row!r}") from None
        if crf in scores:
            duplicates.append(crf)
        scores[crf] = score
    missing = sorted(set(rates) - set(scores))
    extra = sorted(set(scores) - set(rates))
    if missing or extra or duplicates:
        problems = []
        if missing:
            problems.append(f"missing crf {', '.join(map(str, missing))}")
        if duplicates:
            problems.append(f"duplicate crf {', '.join(map(str, sorted(set(duplicates))))}")
        if extra:
            problems.append(f"unknown crf {', '.join(map(str, extra))}")
        raise ScoreImportError(f"{csv_path}: {'; '.join(problems)}", missing + sorted(set(duplicates)) + extra)
    curve = RdCurve(metric_name, [RdPoint(rates[c], scores[c], c) for c in rates])
    if isinstance(skeleton, SweepResult):
        for r in skeleton.rungs:
            r.quality[metric_name] = scores[r.crf]
    return curve
