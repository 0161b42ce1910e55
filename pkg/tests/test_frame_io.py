import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adasharp.errors import (
    DimensionError,
    FormatError,
    InvalidMaskError,
    TruncationError,
    UnsupportedFormatError,
)
from adasharp.frame_io import (
    Frame,
    Sequence,
    probe_y4m,
    read_mask_pgm,
    read_y4m,
    to_uint8,
    write_mask_pgm,
    y4m_bytes,
)
from adasharp.partition import PartitionMask

HEADER_420 = b"YUV4MPEG2 W4 H4 F25:1 C420jpeg\n"
LUMA = bytes(range(16))
CB = bytes([100, 101, 102, 103])
CR = bytes([200, 201, 202, 203])
MONO_FIXTURE = (
    b"YUV4MPEG2 W4 H4 F30:1 Ip A1:1 Cmono\n"
    + b"FRAME\n" + bytes(range(16))
    + b"FRAME\n" + bytes(range(100, 116))
)


def test_read_hand_written_420_fixture():
    seq = read_y4m(io.BytesIO(HEADER_420 + b"FRAME\n" + LUMA + CB + CR))
    assert len(seq) == 1
    assert (seq.width, seq.height, seq.fps_num, seq.fps_den) == (4, 4, 25, 1)
    frame = seq[0]
    assert frame.luma.tolist() == [[0, 1, 2, 3], [4, 5, 6, 7], [8, 9, 10, 11], [12, 13, 14, 15]]
    assert frame.cb.tolist() == [[100, 101], [102, 103]]
    assert frame.cr.tolist() == [[200, 201], [202, 203]]


def test_mono_round_trip_is_byte_identical():
    seq = read_y4m(io.BytesIO(MONO_FIXTURE))
    assert not seq.has_chroma and len(seq) == 2
    assert y4m_bytes(seq) == MONO_FIXTURE


def test_write_mono_header_exact():
    seq = Sequence((Frame(np.arange(16, dtype=np.uint8).reshape(4, 4)),))
    data = y4m_bytes(seq)
    assert data == b"YUV4MPEG2 W4 H4 F30:1 Ip A1:1 Cmono\nFRAME\n" + bytes(range(16))


def test_write_420_uses_c420jpeg_and_plane_order():
    seq = read_y4m(io.BytesIO(HEADER_420 + b"FRAME\n" + LUMA + CB + CR))
    data = y4m_bytes(seq)
    assert data.startswith(b"YUV4MPEG2 W4 H4 F25:1 Ip A1:1 C420jpeg\nFRAME\n")
    assert data.endswith(LUMA + CB + CR)
    assert read_y4m(io.BytesIO(data))[0] == seq[0]


def test_default_fps_and_colorspace():
    seq = read_y4m(io.BytesIO(b"YUV4MPEG2 W2 H2\nFRAME\n" + bytes(6)))
    assert (seq.fps_num, seq.fps_den) == (30, 1)
    assert seq.has_chroma


@pytest.mark.parametrize("tag", [b"C420", b"C420mpeg2", b"C420paldv", b"C420jpeg"])
def test_all_420_variants_accepted(tag):
    data = b"YUV4MPEG2 W2 H2 F30:1 " + tag + b"\nFRAME\n" + bytes(6)
    assert read_y4m(io.BytesIO(data))[0].cb.shape == (1, 1)


def test_extension_tags_and_frame_params_tolerated():
    data = b"YUV4MPEG2 W2 H2 F30:1 Ip A1:1 C420jpeg XYSCSS=420JPEG\nFRAME Ixyz\n" + bytes(6)
    assert len(read_y4m(io.BytesIO(data))) == 1


def test_bad_magic_is_format_error_at_offset_zero():
    with pytest.raises(FormatError) as info:
        read_y4m(io.BytesIO(b"YUV4MPEG3 W4 H4\nFRAME\n" + bytes(24)))
    assert info.value.offset == 0
    assert "offset 0" in str(info.value)


def test_truncated_frame_names_index():
    data = MONO_FIXTURE[:-3]
    with pytest.raises(TruncationError) as info:
        read_y4m(io.BytesIO(data))
    assert info.value.frame_index == 1
    assert "frame 1" in str(info.value)


def test_garbage_between_frames_is_format_error_with_offset():
    first_frame_end = MONO_FIXTURE.index(b"\n") + 1 + len(b"FRAME\n") + 16
    data = MONO_FIXTURE[:first_frame_end] + b"JUNK\n"
    with pytest.raises(FormatError) as info:
        read_y4m(io.BytesIO(data))
    assert info.value.offset == first_frame_end


@pytest.mark.parametrize("tag", [b"C444", b"C422", b"C420p10", b"Cmono16"])
def test_unsupported_colorspace(tag):
    with pytest.raises(UnsupportedFormatError):
        read_y4m(io.BytesIO(b"YUV4MPEG2 W2 H2 " + tag + b"\nFRAME\n" + bytes(12)))


def test_interlaced_rejected():
    with pytest.raises(UnsupportedFormatError):
        read_y4m(io.BytesIO(b"YUV4MPEG2 W2 H2 It Cmono\nFRAME\n" + bytes(4)))


def test_empty_stream_has_no_frames():
    with pytest.raises(FormatError):
        read_y4m(io.BytesIO(b"YUV4MPEG2 W2 H2 Cmono\n"))


def test_empty_sequence_rejected():
    with pytest.raises(ValueError):
        Sequence(())


def test_frame_invariants():
    with pytest.raises(ValueError):
        Frame(np.zeros((4, 4), dtype=np.uint8), np.zeros((2, 2), dtype=np.uint8))
    with pytest.raises(DimensionError):
        Frame(np.zeros((4, 4)), np.zeros((2, 3)), np.zeros((2, 3)))
    with pytest.raises(DimensionError):
        Frame(np.zeros((5, 4)), np.zeros((3, 2)), np.zeros((3, 2)))
    with pytest.raises(ValueError):
        Frame(np.full((4, 4), 256))
    frame = Frame(np.zeros((4, 4), dtype=np.uint8))
    with pytest.raises(ValueError):
        frame.luma[0, 0] = 1


def test_sequence_rejects_mixed_dimensions():
    with pytest.raises(DimensionError):
        Sequence((Frame(np.zeros((4, 4))), Frame(np.zeros((4, 6)))))


def test_probe_counts_frames(tmp_path):
    path = tmp_path / "a.y4m"
    path.write_bytes(MONO_FIXTURE)
    header, count = probe_y4m(path)
    assert (header.width, header.height, count) == (4, 4, 2)


def test_to_uint8_rounds_half_away_from_zero_and_clamps():
    values = np.array([[-3.0, -0.5, 0.49, 0.5, 1.5, 2.5, 254.5, 300.0]])
    assert to_uint8(values).tolist() == [[0, 0, 0, 1, 2, 3, 255, 255]]


@settings(max_examples=40, deadline=None)
@given(
    w=st.integers(1, 9).map(lambda v: 2 * v),
    h=st.integers(1, 9).map(lambda v: 2 * v),
    n=st.integers(1, 3),
    chroma=st.booleans(),
    seed=st.integers(0, 2**32 - 1),
    fps=st.tuples(st.integers(1, 120000), st.integers(1, 1001)),
)
def test_y4m_round_trip_property(w, h, n, chroma, seed, fps):
    rng = np.random.default_rng(seed)
    frames = []
    for _ in range(n):
        luma = rng.integers(0, 256, (h, w), dtype=np.uint8)
        if chroma:
            cb, cr = (rng.integers(0, 256, (h // 2, w // 2), dtype=np.uint8) for _ in range(2))
            frames.append(Frame(luma, cb, cr))
        else:
            frames.append(Frame(luma))
    seq = Sequence(tuple(frames), *fps)
    data = y4m_bytes(seq)
    back = read_y4m(io.BytesIO(data))
    assert back == seq
    assert y4m_bytes(back) == data


# ----------------------------------------------------------------- PGM masks


def _pgm(width, height, values):
    return f"P5\n{width} {height}\n255\n".encode() + bytes(values)


def test_uniform_64_mask():
    mask = read_mask_pgm(io.BytesIO(_pgm(64, 64, [64] * 4096)))
    assert mask.leaf_count() == 1
    assert np.all(mask.sizes == 64)


def test_mask_round_trip(rng):
    from oracles import random_mask

    mask = random_mask(rng, 100, 150)
    buf = io.BytesIO()
    write_mask_pgm(mask, buf)
    assert buf.getvalue().startswith(b"P5\n150 100\n255\n")
    buf.seek(0)
    assert read_mask_pgm(buf) == mask


def test_mask_invalid_value_reports_first_pixel():
    values = [8] * 64
    values[8 * 3 + 5] = 12
    values[8 * 6 + 1] = 13
    with pytest.raises(InvalidMaskError) as info:
        read_mask_pgm(io.BytesIO(_pgm(8, 8, values)))
    assert (info.value.x, info.value.y) == (5, 3)


def test_mask_dimension_mismatch():
    with pytest.raises(DimensionError):
        read_mask_pgm(io.BytesIO(_pgm(8, 8, [8] * 64)), expected_shape=(16, 8))


def test_mask_with_comment_in_header():
    data = b"P5\n# cu sizes\n8 8\n255\n" + bytes([8] * 64)
    assert read_mask_pgm(io.BytesIO(data)).shape == (8, 8)


def test_mask_truncated_raster():
    with pytest.raises(TruncationError):
        read_mask_pgm(io.BytesIO(_pgm(8, 8, [8] * 60)))


def test_mask_quadtree_inconsistency_rejected():
    sizes = np.full((64, 64), 16, dtype=np.uint8)
    sizes[0:8, 0:8] = 32
    with pytest.raises(InvalidMaskError):
        PartitionMask(sizes)
