"""Fidelity metrics, training-objective scores and Bjontegaard delta rate.

All fidelity metrics compare luma only.  Inputs may be ``Frame`` objects,
``Sequence`` objects or bare 2-D arrays.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import ndimage
from scipy.interpolate import PchipInterpolator

from .errors import ArityError, DimensionError, FormatError, OverlapError
from .frame_io import Frame, Sequence

PEAK = 255.0
CHARBONNIER_EPS = 1e-12
MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)
MS_SSIM_WINDOW = 11
MS_SSIM_SIGMA = 1.5
MS_SSIM_K1 = 0.01
MS_SSIM_K2 = 0.03
MS_SSIM_MIN_SIZE = 176
DEFAULT_RD_LAMBDA = 85.0
DEFAULT_GAMMA = 10.0


def _planes(x) -> list:
    if isinstance(x, Sequence):
        return [f.luma for f in x]
    if isinstance(x, Frame):
        return [x.luma]
    x = np.asarray(x)
    if x.ndim == 2:
        return [x]
    if x.ndim == 3:
        return list(x)
    raise DimensionError(f"cannot interpret array of shape {x.shape} as luma planes")


def _pairs(ref, dist) -> list:
    a, b = _planes(ref), _planes(dist)
    if len(a) != len(b):
        raise DimensionError(f"frame counts differ: {len(a)} vs {len(b)}")
    for i, (p, q) in enumerate(zip(a, b)):
        if p.shape != q.shape:
            raise DimensionError(f"frame {i}: shapes differ, {p.shape} vs {q.shape}")
    return [(p.astype(np.float64), q.astype(np.float64)) for p, q in zip(a, b)]


def _mse(p, q) -> float:
    d = p - q
    return float(np.mean(d * d))


def _psnr_from_mse(mse: float) -> float:
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(PEAK * PEAK / mse)


def psnr(ref, dist) -> float:
    """Luma PSNR in dB; ``math.inf`` when the inputs are identical.

    For sequences the MSE is pooled over all frames before conversion.
    """
    pairs = _pairs(ref, dist)
    return _psnr_from_mse(float(np.mean([_mse(p, q) for p, q in pairs])))


def psnr_per_frame(ref, dist) -> list:
    return [_psnr_from_mse(_mse(p, q)) for p, q in _pairs(ref, dist)]


def _gaussian_window() -> np.ndarray:
    coords = np.arange(MS_SSIM_WINDOW, dtype=np.float64) - MS_SSIM_WINDOW // 2
    g = np.exp(-(coords**2) / (2.0 * MS_SSIM_SIGMA**2))
    return g / g.sum()


def _filter_valid(x: np.ndarray, window: np.ndarray) -> np.ndarray:
    r = len(window) // 2
    out = ndimage.correlate1d(x, window, axis=0, mode="constant")
    out = ndimage.correlate1d(out, window, axis=1, mode="constant")
    return out[r:-r, r:-r]


def _ssim_terms(x, y, window) -> tuple:
    c1 = (MS_SSIM_K1 * PEAK) ** 2
    c2 = (MS_SSIM_K2 * PEAK) ** 2
    mu_x = _filter_valid(x, window)
    mu_y = _filter_valid(y, window)
    var_x = _filter_valid(x * x, window) - mu_x * mu_x
    var_y = _filter_valid(y * y, window) - mu_y * mu_y
    cov = _filter_valid(x * y, window) - mu_x * mu_y
    cs = (2.0 * cov + c2) / (var_x + var_y + c2)
    luminance = (2.0 * mu_x * mu_y + c1) / (mu_x * mu_x + mu_y * mu_y + c1)
    return float(np.mean(luminance * cs)), float(np.mean(cs))


def _halve(x: np.ndarray) -> np.ndarray:
    h, w = x.shape[0] // 2 * 2, x.shape[1] // 2 * 2
    x = x[:h, :w]
    return 0.25 * (x[0::2, 0::2] + x[1::2, 0::2] + x[0::2, 1::2] + x[1::2, 1::2])


def _ms_ssim_plane(x: np.ndarray, y: np.ndarray) -> float:
    if np.array_equal(x, y):
        return 1.0
    window = _gaussian_window()
    score = 1.0
    last = len(MS_SSIM_WEIGHTS) - 1
    for level, weight in enumerate(MS_SSIM_WEIGHTS):
        ssim, cs = _ssim_terms(x, y, window)
        # Negative terms would make fractional powers complex; clip at zero.
        term = ssim if level == last else cs
        score *= max(term, 0.0) ** weight
        if level != last:
            x, y = _halve(x), _halve(y)
    return float(score)


def ms_ssim_per_frame(ref, dist) -> list:
    pairs = _pairs(ref, dist)
    for p, _ in pairs:
        if min(p.shape) < MS_SSIM_MIN_SIZE:
            raise DimensionError(
                f"MS-SSIM needs at least {MS_SSIM_MIN_SIZE}x{MS_SSIM_MIN_SIZE} pixels, "
                f"got {p.shape[1]}x{p.shape[0]}"
            )
    return [_ms_ssim_plane(p, q) for p, q in pairs]


def ms_ssim(ref, dist) -> float:
    """5-scale MS-SSIM on luma, averaged over frames."""
    return float(np.mean(ms_ssim_per_frame(ref, dist)))


def _charbonnier_plane(p, q) -> float:
    penalty = np.hypot(p - q, CHARBONNIER_EPS)
    # Averaging the excess over eps keeps identical inputs at exactly eps.
    return CHARBONNIER_EPS + float(np.mean(penalty - CHARBONNIER_EPS))


def charbonnier_per_frame(ref, dist) -> list:
    return [_charbonnier_plane(p, q) for p, q in _pairs(ref, dist)]


def charbonnier(ref, dist) -> float:
    """Mean per-pixel ``sqrt(d**2 + eps**2)`` with eps = 1e-12."""
    pairs = _pairs(ref, dist)
    if len(pairs) == 1:
        return _charbonnier_plane(*pairs[0])
    penalty = np.concatenate([np.hypot(p - q, CHARBONNIER_EPS).ravel() for p, q in pairs])
    return CHARBONNIER_EPS + float(np.mean(penalty - CHARBONNIER_EPS))


def rd_cost(rate_bits: float, mse: float, lam: float = DEFAULT_RD_LAMBDA) -> float:
    """Rate plus lambda-weighted mean squared error."""
    if not all(math.isfinite(v) for v in (rate_bits, mse, lam)):
        raise ValueError("rd_cost inputs must be finite")
    if rate_bits < 0 or mse < 0:
        raise ValueError("rate_bits and mse must be >= 0")
    return rate_bits + lam * mse


def overall_score(l_rec: float, l_rd: float, gamma: float = DEFAULT_GAMMA) -> float:
    if not all(math.isfinite(v) for v in (l_rec, l_rd, gamma)):
        raise ValueError("overall_score inputs must be finite")
    return l_rec + gamma * l_rd


METRICS = {
    "psnr": psnr,
    "ms_ssim": ms_ssim,
    "charbonnier": charbonnier,
}


@dataclass
class QualityReport:
    psnr_db: Optional[float] = None
    ms_ssim: Optional[float] = None
    charbonnier: Optional[float] = None
    per_frame: dict = field(default_factory=dict)

    @property
    def psnr_infinite(self) -> bool:
        return self.psnr_db is not None and math.isinf(self.psnr_db)

    def to_dict(self) -> dict:
        def enc(v):
            return "inf" if isinstance(v, float) and math.isinf(v) else v

        return {
            "psnr_db": enc(self.psnr_db),
            "psnr_infinite": self.psnr_infinite,
            "ms_ssim": self.ms_ssim,
            "charbonnier": self.charbonnier,
            "per_frame": {k: [enc(v) for v in vs] for k, vs in self.per_frame.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def evaluate(ref, dist, metrics=("psnr", "ms_ssim", "charbonnier")) -> QualityReport:
    report = QualityReport()
    unknown = set(metrics) - set(METRICS)
    if unknown:
        raise ValueError(f"unknown metrics {sorted(unknown)}; available: {sorted(METRICS)}")
    if "psnr" in metrics:
        report.psnr_db = psnr(ref, dist)
        report.per_frame["psnr"] = psnr_per_frame(ref, dist)
    if "ms_ssim" in metrics:
        series = ms_ssim_per_frame(ref, dist)
        report.ms_ssim = float(np.mean(series))
        report.per_frame["ms_ssim"] = series
    if "charbonnier" in metrics:
        report.charbonnier = charbonnier(ref, dist)
        report.per_frame["charbonnier"] = charbonnier_per_frame(ref, dist)
    return report


# ----------------------------------------------------------------- RD curves


@dataclass(frozen=True)
class RdPoint:
    rate: float  # kbit/s
    quality: float
    crf: Optional[int] = None

    def __post_init__(self):
        if not (math.isfinite(self.rate) and self.rate > 0):
            raise ValueError(f"rate must be finite and > 0, got {self.rate}")
        if not math.isfinite(self.quality):
            raise ValueError(f"quality must be finite, got {self.quality}")


class RdCurve:
    """Rate/quality samples of one metric, kept sorted by increasing rate."""

    def __init__(self, metric_name: str, points):
        points = sorted(
            (p if isinstance(p, RdPoint) else RdPoint(*p) for p in points),
            key=lambda p: p.rate,
        )
        for a, b in zip(points, points[1:]):
            if a.rate == b.rate:
                raise ValueError(f"duplicate rate {a.rate} in RD curve")
        self.metric_name = metric_name
        self.points = tuple(points)

    def __len__(self):
        return len(self.points)

    @property
    def rates(self) -> np.ndarray:
        return np.array([p.rate for p in self.points])

    @property
    def qualities(self) -> np.ndarray:
        return np.array([p.quality for p in self.points])

    def is_monotone(self) -> bool:
        return bool(np.all(np.diff(self.qualities) >= 0))

    def scaled(self, factor: float) -> "RdCurve":
        return RdCurve(
            self.metric_name, [RdPoint(p.rate * factor, p.quality, p.crf) for p in self.points]
        )

    def __repr__(self):
        pts = ", ".join(f"({p.rate:g}, {p.quality:g})" for p in self.points)
        return f"RdCurve({self.metric_name!r}, [{pts}])"

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["crf", "rate_kbps", self.metric_name])
            for p in sorted(self.points, key=lambda p: (p.crf is None, p.crf, p.rate)):
                writer.writerow(["" if p.crf is None else p.crf, repr(p.rate), repr(p.quality)])

    @classmethod
    def read_csv(cls, path) -> "RdCurve":
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
        if not rows or len(rows[0]) != 3 or rows[0][:2] != ["crf", "rate_kbps"]:
            raise FormatError(f"{path}: RD curve CSV needs header 'crf,rate_kbps,<metric>'")
        metric = rows[0][2]
        points = []
        for lineno, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            try:
                crf = int(row[0]) if row[0].strip() else None
                points.append(RdPoint(float(row[1]), float(row[2]), crf))
            except (ValueError, IndexError) as exc:
                raise FormatError(f"{path}:{lineno}: bad RD curve row {row!r} ({exc})") from None
        return cls(metric, points)


@dataclass
class BdRateResult:
    percent: float
    overlap: tuple
    metric: str
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "bd_rate_percent": self.percent,
            "overlap_interval": list(self.overlap),
            "warnings": list(self.warnings),
        }


def _log_rate_interpolant(curve: RdCurve, label: str, notes: list) -> PchipInterpolator:
    quality = curve.qualities
    log_rate = np.log2(curve.rates)
    if not curve.is_monotone():
        message = f"{label} curve quality is not monotone in rate; using its monotone rearrangement"
        notes.append(message)
        warnings.warn(message, stacklevel=3)
        quality = np.sort(quality)
    if np.any(np.diff(quality) == 0):
        raise ValueError(f"{label} curve has repeated quality values; interpolation is ill-posed")
    return PchipInterpolator(quality, log_rate)


def bd_rate(anchor: RdCurve, test: RdCurve) -> BdRateResult:
    """Average bitrate difference of ``test`` against ``anchor`` at equal quality.

    log2(rate) is interpolated as a monotone piecewise cubic (PCHIP) function
    of quality for each curve, and the gap is averaged over the common
    quality interval.  Negative percentages mean ``test`` needs fewer bits.
    """
    for label, curve in (("anchor", anchor), ("test", test)):
        if len(curve) < 4:
            raise ArityError(f"{label} curve has {len(curve)} points; BD-Rate needs at least 4")
    notes = []
    fa = _log_rate_interpolant(anchor, "anchor", notes)
    ft = _log_rate_interpolant(test, "test", notes)
    lo = max(anchor.qualities.min(), test.qualities.min())
    hi = min(anchor.qualities.max(), test.qualities.max())
    if not hi > lo:
        raise OverlapError(
            f"quality ranges do not overlap: anchor [{anchor.qualities.min():g}, "
            f"{anchor.qualities.max():g}], test [{test.qualities.min():g}, {test.qualities.max():g}]"
        )
    mean_gap = (ft.integrate(lo, hi) - fa.integrate(lo, hi)) / (hi - lo)
    percent = (2.0 ** float(mean_gap) - 1.0) * 100.0
    return BdRateResult(percent, (float(lo), float(hi)), anchor.metric_name, notes)
