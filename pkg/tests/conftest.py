import os
import shutil
import sys
from pathlib import Path

import numpy as np
import pytest
from scipy import ndimage

sys.path.insert(0, str(Path(__file__).parent))

from adasharp.frame_io import Frame, Sequence  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def natural_images():
    """Standard grayscale test pictures shipped with scikit-image."""
    from skimage import color, data

    return {
        "camera": data.camera(),
        "moon": data.moon(),
        "coins": data.coins(),
        "astronaut": np.round(color.rgb2gray(data.astronaut()) * 255).astype(np.uint8),
    }


@pytest.fixture(scope="session")
def naturals():
    return natural_images()


def random_ctu(rng, kind=None):
    """64x64 uint8 CTU: constant, noise, smooth texture, quadrant mix, etc."""
    kinds = ("constant", "noise", "texture", "quadrants", "checker", "gradient")
    kind = kind or kinds[rng.integers(len(kinds))]
    if kind == "constant":
        return np.full((64, 64), rng.integers(256), dtype=np.uint8)
    if kind == "noise":
        return rng.integers(0, 256, (64, 64), dtype=np.uint8)
    if kind == "texture":
        field = ndimage.gaussian_filter(rng.normal(128, 70, (64, 64)), rng.uniform(0.7, 4))
        return np.clip(np.round(field), 0, 255).astype(np.uint8)
    if kind == "quadrants":
        out = np.empty((64, 64), dtype=np.uint8)
        for y in (0, 32):
            for x in (0, 32):
                sub = random_ctu(rng, kinds[rng.integers(3)])
                out[y : y + 32, x : x + 32] = sub[:32, :32]
        return out
    if kind == "checker":
        period = int(rng.choice([1, 2, 4, 8, 16]))
        ys, xs = np.indices((64, 64))
        return np.where((ys // period + xs // period) % 2, 255, 0).astype(np.uint8)
    ys, xs = np.indices((64, 64))
    return np.clip(xs * rng.uniform(0, 4) + ys * rng.uniform(0, 4), 0, 255).astype(np.uint8)


def textured_sequence(frames=16, width=192, height=144, seed=0, chroma=True):
    """Moving band-limited texture plus mild noise, with flat chroma."""
    rng = np.random.default_rng(seed)
    base = ndimage.gaussian_filter(rng.normal(128, 50, (height, width)), 1.5)
    out = []
    for t in range(frames):
        luma = np.clip(np.roll(base, t, axis=1) + rng.normal(0, 4, base.shape), 0, 255)
        luma = np.round(luma).astype(np.uint8)
        if chroma:
            c = np.full((height // 2, width // 2), 128, dtype=np.uint8)
            out.append(Frame(luma, c, c))
        else:
            out.append(Frame(luma))
    return Sequence(tuple(out), 30, 1)


def find_ffmpeg():
    """An ffmpeg executable with libx264, or None."""
    for var in ("ADASHARP_ENCODER_PATH", "PATH"):
        found = shutil.which("ffmpeg", path=os.environ.get(var, ""))
        if found:
            return found
    try:
        import imageio_ffmpeg
    except ImportError:
        return None
    try:
        return imageio_ffmpeg.get_ffmpeg_exe()
    except RuntimeError:
        return None


@pytest.fixture(scope="session")
def encoder_path(tmp_path_factory):
    """Directory holding an ``ffmpeg`` executable; exported as ADASHARP_ENCODER_PATH."""
    exe = find_ffmpeg()
    if exe is None:
        pytest.skip("no ffmpeg encoder available")
    bindir = tmp_path_factory.mktemp("bin")
    (bindir / "ffmpeg").symlink_to(exe)
    old = os.environ.get("ADASHARP_ENCODER_PATH")
    os.environ["ADASHARP_ENCODER_PATH"] = str(bindir)
    yield bindir
    if old is None:
        os.environ.pop("ADASHARP_ENCODER_PATH", None)
    else:
        os.environ["ADASHARP_ENCODER_PATH"] = old


# One verdict line per acceptance criterion, echoed in the terminal summary.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
