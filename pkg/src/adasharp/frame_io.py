"""Frames, sequences and their on-disk formats (Y4M video, P5 PGM masks).

Pixel data is held in numpy arrays: ``uint8`` rasters of shape ``(height,
width)`` for 8-bit planes, ``float64`` arrays of the same shape for the
intermediate float planes used by the filters.
"""

from __future__ import annotations

import io
import os
import re
from dataclasses import dataclass, field
from typing import BinaryIO, Optional

import numpy as np

from .errors import (
    DimensionError,
    FormatError,
    InvalidMaskError,
    TruncationError,
    UnsupportedFormatError,
)
from .partition import CU_SIZES, PartitionMask

Y4M_MAGIC = b"YUV4MPEG2"
FRAME_MARKER = b"FRAME"
# All of these share the 4:2:0 plane geometry; chroma siting is irrelevant here.
CHROMA_420_TAGS = ("420", "420jpeg", "420mpeg2", "420paldv")


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=np.uint8, copy=True)
    array.setflags(write=False)
    return array


def _as_samples(plane, name: str) -> np.ndarray:
    plane = np.asarray(plane)
    if plane.ndim != 2:
        raise DimensionError(f"{name} plane must be 2-D, got shape {plane.shape}")
    if plane.dtype != np.uint8:
        if plane.size and (plane.min() < 0 or plane.max() > 255):
            raise ValueError(f"{name} samples must lie in [0, 255]")
        if np.issubdtype(plane.dtype, np.floating) and not np.all(plane == np.round(plane)):
            raise ValueError(f"{name} samples must be integers; use to_uint8() to quantize")
    return _frozen(plane)


@dataclass(frozen=True)
class Frame:
    """One 8-bit picture: a luma plane plus optional 4:2:0 chroma planes."""

    luma: np.ndarray
    cb: Optional[np.ndarray] = None
    cr: Optional[np.ndarray] = None

    def __post_init__(self):
        luma = _as_samples(self.luma, "luma")
        height, width = luma.shape
        if width < 1 or height < 1:
            raise DimensionError("frame must be at least 1x1")
        object.__setattr__(self, "luma", luma)
        if (self.cb is None) != (self.cr is None):
            raise ValueError("chroma planes must be present together or not at all")
        if self.cb is not None:
            if width % 2 or height % 2:
                raise DimensionError(
                    f"4:2:0 frames need even dimensions, got {width}x{height}"
                )
            expected = ((height + 1) // 2, (width + 1) // 2)
            for name in ("cb", "cr"):
                plane = _as_samples(getattr(self, name), name)
                if plane.shape != expected:
                    raise DimensionError(
                        f"{name} plane has shape {plane.shape}, expected {expected}"
                    )
                object.__setattr__(self, name, plane)

    @property
    def width(self) -> int:
        return self.luma.shape[1]

    @property
    def height(self) -> int:
        return self.luma.shape[0]

    @property
    def has_chroma(self) -> bool:
        return self.cb is not None

    def with_luma(self, luma) -> "Frame":
        """Return a copy with the luma replaced and chroma carried over untouched."""
        return Frame(luma, self.cb, self.cr)

    def luma_float(self) -> np.ndarray:
        return self.luma.astype(np.float64)

    def __eq__(self, other):
        if not isinstance(other, Frame):
            return NotImplemented
        if not np.array_equal(self.luma, other.luma) or self.has_chroma != other.has_chroma:
            return False
        return not self.has_chroma or (
            np.array_equal(self.cb, other.cb) and np.array_equal(self.cr, other.cr)
        )

    __hash__ = None


@dataclass(frozen=True)
class Sequence:
    frames: tuple
    fps_num: int = 30
    fps_den: int = 1

    def __post_init__(self):
        frames = tuple(self.frames)
        if not frames:
            raise ValueError("a sequence needs at least one frame")
        first = frames[0]
        for index, frame in enumerate(frames):
            if not isinstance(frame, Frame):
                raise TypeError(f"frame {index} is not a Frame")
            if (frame.width, frame.height) != (first.width, first.height):
                raise DimensionError(
                    f"frame {index} is {frame.width}x{frame.height}, "
                    f"expected {first.width}x{first.height}"
                )
            if frame.has_chroma != first.has_chroma:
                raise DimensionError(f"frame {index} differs in chroma presence")
        if self.fps_num <= 0 or self.fps_den <= 0:
            raise ValueError(f"frame rate must be positive, got {self.fps_num}:{self.fps_den}")
        object.__setattr__(self, "frames", frames)

    def __len__(self):
        return len(self.frames)

    def __iter__(self):
        return iter(self.frames)

    def __getitem__(self, index):
        return self.frames[index]

    @property
    def width(self) -> int:
        return self.frames[0].width

    @property
    def height(self) -> int:
        return self.frames[0].height

    @property
    def has_chroma(self) -> bool:
        return self.frames[0].has_chroma

    @property
    def duration(self) -> float:
        """Length in seconds."""
        return len(self.frames) * self.fps_den / self.fps_num

    def replace_frames(self, frames) -> "Sequence":
        return Sequence(tuple(frames), self.fps_num, self.fps_den)


def to_uint8(plane: np.ndarray) -> np.ndarray:
    """Quantize a float plane: round half away from zero, clamp to [0, 255]."""
    # Clamping first is equivalent, since everything below 0 ends at 0 anyway.
    clipped = np.clip(np.asarray(plane, dtype=np.float64), 0.0, 255.0)
    return np.floor(clipped + 0.5).astype(np.uint8)


# --------------------------------------------------------------------------- Y4M


@dataclass
class Y4MHeader:
    width: int
    height: int
    fps_num: int = 30
    fps_den: int = 1
    colorspace: str = "420jpeg"
    extra: list = field(default_factory=list)

    @property
    def has_chroma(self) -> bool:
        return self.colorspace != "mono"

    @property
    def frame_bytes(self) -> int:
        luma = self.width * self.height
        if not self.has_chroma:
            return luma
        return luma + 2 * ((self.width + 1) // 2) * ((self.height + 1) // 2)


def parse_y4m_header(line: bytes) -> Y4MHeader:
    """Parse the stream header line (without its trailing newline)."""
    tokens = line.split(b" ")
    if tokens[0] != Y4M_MAGIC:
        raise FormatError(f"bad Y4M magic {tokens[0][:16]!r}, expected {Y4M_MAGIC!r}", 0)
    values = {}
    extra = []
    offset = len(Y4M_MAGIC) + 1
    for token in tokens[1:]:
        if not token:
            raise FormatError("empty Y4M header parameter", offset)
        tag, value = chr(token[0]), token[1:].decode("ascii", "replace")
        if tag in "WHFICA":
            values[tag] = (value, offset)
        elif tag == "X":
            extra.append(token.decode("ascii", "replace"))
        else:
            raise FormatError(f"unknown Y4M header tag {tag!r}", offset)
        offset += len(token) + 1

    def dimension(tag):
        if tag not in values:
            raise FormatError(f"Y4M header lacks the {tag} parameter", 0)
        text, pos = values[tag]
        if not text.isdigit() or int(text) < 1:
            raise FormatError(f"invalid {tag} value {text!r}", pos)
        return int(text)

    width, height = dimension("W"), dimension("H")
    fps_num, fps_den = 30, 1
    if "F" in values:
        text, pos = values["F"]
        match = re.fullmatch(r"(\d+):(\d+)", text)
        if not match or int(match.group(1)) == 0 or int(match.group(2)) == 0:
            raise FormatError(f"invalid frame rate {text!r}", pos)
        fps_num, fps_den = int(match.group(1)), int(match.group(2))
    if "I" in values and values["I"][0] != "p":
        raise UnsupportedFormatError(
            f"interlacing mode I{values['I'][0]} is not supported (progressive only)"
        )
    colorspace = values.get("C", ("420jpeg", 0))[0]
    if colorspace not in CHROMA_420_TAGS + ("mono",):
        raise UnsupportedFormatError(
            f"colorspace C{colorspace} is not supported; "
            "use 8-bit 4:2:0 (C420, C420jpeg, C420mpeg2, C420paldv) or Cmono"
        )
    return Y4MHeader(width, height, fps_num, fps_den, colorspace, extra)


def _split_header(data: bytes) -> tuple:
    if not data.startswith(Y4M_MAGIC):
        raise FormatError(f"bad Y4M magic {data[:len(Y4M_MAGIC)]!r}", 0)
    end = data.find(b"\n")
    if end < 0:
        raise FormatError("unterminated Y4M stream header", len(data))
    return parse_y4m_header(data[:end]), end + 1


def _iter_frame_payloads(data: bytes, header: Y4MHeader, offset: int):
    """Yield ``(index, payload_offset)`` for each FRAME record."""
    index = 0
    size = header.frame_bytes
    while offset < len(data):
        if not data.startswith(FRAME_MARKER, offset):
            if FRAME_MARKER.startswith(data[offset:]):
                raise TruncationError("truncated FRAME marker", index, offset)
            raise FormatError(f"expected FRAME marker in frame {index}", offset)
        end = data.find(b"\n", offset)
        if end < 0:
            raise TruncationError("unterminated FRAME header", index, offset)
        start = end + 1
        if start + size > len(data):
            raise TruncationError(
                f"frame payload has {len(data) - start} of {size} bytes", index, start
            )
        yield index, start
        offset = start + size
        index += 1


def read_y4m(stream: BinaryIO) -> Sequence:
    """Decode a whole Y4M stream into a :class:`Sequence`."""
    data = stream.read()
    header, offset = _split_header(data)
    w, h = header.width, header.height
    cw, ch = (w + 1) // 2, (h + 1) // 2
    frames = []
    for _, start in _iter_frame_payloads(data, header, offset):
        buf = np.frombuffer(data, dtype=np.uint8, count=header.frame_bytes, offset=start)
        luma = buf[: w * h].reshape(h, w)
        if header.has_chroma:
            cb = buf[w * h : w * h + cw * ch].reshape(ch, cw)
            cr = buf[w * h + cw * ch :].reshape(ch, cw)
            frames.append(Frame(luma, cb, cr))
        else:
            frames.append(Frame(luma))
    if not frames:
        raise FormatError("Y4M stream contains no frames", offset)
    return Sequence(tuple(frames), header.fps_num, header.fps_den)


def probe_y4m(path) -> tuple:
    """Return ``(header, frame_count)`` without decoding the planes."""
    with open(path, "rb") as f:
        data = f.read()
    header, offset = _split_header(data)
    count = sum(1 for _ in _iter_frame_payloads(data, header, offset))
    return header, count


def write_y4m(seq: Sequence, stream: BinaryIO) -> None:
    if not isinstance(seq, Sequence):
        raise TypeError("write_y4m expects a Sequence")
    colorspace = "C420jpeg" if seq.has_chroma else "Cmono"
    stream.write(
        f"YUV4MPEG2 W{seq.width} H{seq.height} F{seq.fps_num}:{seq.fps_den} "
        f"Ip A1:1 {colorspace}\n".encode("ascii")
    )
    for frame in seq:
        stream.write(FRAME_MARKER + b"\n")
        stream.write(frame.luma.tobytes())
        if frame.has_chroma:
            stream.write(frame.cb.tobytes())
            stream.write(frame.cr.tobytes())


def load_y4m(path) -> Sequence:
    with open(path, "rb") as f:
        return read_y4m(f)


def save_y4m(seq: Sequence, path) -> None:
    try:
        with open(path, "wb") as f:
            write_y4m(seq, f)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write Y4M file: {exc.strerror}", os.fspath(path)) from exc


def y4m_bytes(seq: Sequence) -> bytes:
    buf = io.BytesIO()
    write_y4m(seq, buf)
    return buf.getvalue()


# --------------------------------------------------------------------------- PGM


def _pgm_tokens(data: bytes, count: int) -> tuple:
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    tokens = []
    pos = 0
    while len(tokens) < count:
        while pos < len(data) and (data[pos : pos + 1].isspace() or data[pos : pos + 1] == b"#"):
            if data[pos : pos + 1] == b"#":
                nl = data.find(b"\n", pos)
                pos = len(data) if nl < 0 else nl + 1
            else:
                pos += 1
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise FormatError("truncated PGM header", pos)
        tokens.append((data[start:pos], start))
    # Exactly one whitespace byte separates the header from the raster.
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise FormatError("PGM header not terminated by whitespace", pos)
    return tokens, pos + 1


def read_mask_pgm(stream: BinaryIO, expected_shape=None) -> PartitionMask:
    """Read a binary PGM whose gray values are CU sizes.

    ``expected_shape`` is an optional ``(height, width)``; a mismatch raises
    :class:`DimensionError`.
    """
    data = stream.read()
    if not data.startswith(b"P5"):
        raise FormatError(f"bad PGM magic {data[:2]!r}, expected b'P5'", 0)
    tokens, raster = _pgm_tokens(data[2:], 3)
    raster += 2
    fields = []
    for text, pos in tokens:
        if not text.isdigit():
            raise FormatError(f"invalid PGM header value {text!r}", pos + 2)
        fields.append(int(text))
    width, height, maxval = fields
    if maxval != 255:
        raise UnsupportedFormatError(f"PGM maxval {maxval} is not supported (need 255)")
    if width < 1 or height < 1:
        raise FormatError(f"invalid PGM dimensions {width}x{height}", 2)
    if len(data) - raster < width * height:
        raise TruncationError(
            f"PGM raster has {len(data) - raster} of {width * height} bytes", offset=raster
        )
    sizes = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=raster)
    sizes = sizes.reshape(height, width)
    if expected_shape is not None and tuple(expected_shape) != (height, width):
        eh, ew = expected_shape
        raise DimensionError(f"mask is {width}x{height}, expected {ew}x{eh}")
    bad = ~np.isin(sizes, CU_SIZES)
    if bad.any():
        y, x = np.argwhere(bad)[0]
        raise InvalidMaskError(
            f"mask value {sizes[y, x]} is not a CU size {CU_SIZES}", int(x), int(y)
        )
    return PartitionMask(sizes)


def write_mask_pgm(mask: PartitionMask, stream: BinaryIO) -> None:
    stream.write(f"P5\n{mask.width} {mask.height}\n255\n".encode("ascii"))
    stream.write(np.ascontiguousarray(mask.sizes, dtype=np.uint8).tobytes())


def load_mask(path, expected_shape=None) -> PartitionMask:
    with open(path, "rb") as f:
        return read_mask_pgm(f, expected_shape)


def save_mask(mask: PartitionMask, path) -> None:
    with open(path, "wb") as f:
        write_mask_pgm(mask, f)
