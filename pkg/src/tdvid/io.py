"""Video file ingestion and export.

Supported containers:
  * raw-f64: lossless float64 container for unclipped intermediates.
    Header: 4-byte magic b"TDVV" then five little-endian u32 fields
    (version, M, N, T, C), followed by C*M*N*T float64 little-endian
    values, channel-major, frames varying fastest within a channel.
  * Y4M (YUV4MPEG2): mono, 4:2:0 (chroma upsampled nearest-neighbour on
    read) and 4:4:4. Colour is kept as per-channel planes.
  * numbered image sequences (PGM/PNG), ordered by the numeric suffix.

8-bit formats clamp to [0, 255] and round half away from zero at export
only; pipeline values are never clipped.
"""

from __future__ import annotations

import os
import re
import struct
from pathlib import Path

import numpy as np

from .volume import as_channels

__all__ = [
    "VideoFormatError",
    "read_video",
    "write_video",
    "video_info",
    "read_raw_f64",
    "write_raw_f64",
    "read_y4m",
    "write_y4m",
    "read_image_sequence",
    "write_image_sequence",
    "to_uint8",
]

RAW_MAGIC = b"TDVV"
RAW_VERSION = 1


class VideoFormatError(ValueError):
    """Malformed or unsupported video file."""


def to_uint8(v) -> np.ndarray:
    """Clamp to [0, 255] and round half away from zero."""
    v = np.asarray(v, dtype=np.float64)
    return np.floor(np.clip(v, 0.0, 255.0) + 0.5).astype(np.uint8)


# ---------------------------------------------------------------------------
# raw-f64 container
# ---------------------------------------------------------------------------

def write_raw_f64(video, path) -> None:
    v = as_channels(video)
    c, m, n, t = v.shape
    with open(path, "wb") as fh:
        fh.write(RAW_MAGIC)
        fh.write(struct.pack("<5I", RAW_VERSION, m, n, t, c))
        fh.write(np.ascontiguousarray(v).astype("<f8").tobytes())


def read_raw_f64(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != RAW_MAGIC:
            raise VideoFormatError(f"{path}: bad magic {magic!r}")
        header = fh.read(20)
        if len(header) != 20:
            raise VideoFormatError(f"{path}: truncated header")
        version, m, n, t, c = struct.unpack("<5I", header)
        if version != RAW_VERSION:
            raise VideoFormatError(f"{path}: unsupported version {version}")
        payload = fh.read()
    expected = c * m * n * t * 8
    if len(payload) != expected:
        raise VideoFormatError(
            f"{path}: payload is {len(payload)} bytes, header implies {expected}"
        )
    data = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    return data.reshape(c, m, n, t)


# ---------------------------------------------------------------------------
# Y4M
# ---------------------------------------------------------------------------

def _parse_y4m_header(line: bytes, path):
    fields = line.decode("ascii", "replace").split()
    if not fields or fields[0] != "YUV4MPEG2":
        raise VideoFormatError(f"{path}: not a YUV4MPEG2 stream")
    width = height = None
    colour = "420"
    for tok in fields[1:]:
        if tok.startswith("W"):
            width = int(tok[1:])
        elif tok.startswith("H"):
            height = int(tok[1:])
        elif tok.startswith("C"):
            colour = tok[1:]
    if width is None or height is None:
        raise VideoFormatError(f"{path}: header missing W/H")
    return width, height, colour


def read_y4m(path) -> np.ndarray:
    """Read a Y4M stream into (C, M, N, T) planes in [0, 255]."""
    with open(path, "rb") as fh:
        header = fh.readline()
        if not header:
            raise VideoFormatError(f"{path}: empty file")
        width, height, colour = _parse_y4m_header(header.rstrip(b"\n"), path)
        if colour.startswith("420"):
            mode, cw, ch = "420", (width + 1) // 2, (height + 1) // 2
        elif colour == "444":
            mode, cw, ch = "444", width, height
        elif colour == "mono":
            mode, cw, ch = "mono", 0, 0
        else:
            raise VideoFormatError(f"{path}: unsupported colour space C{colour}")
        ysize = width * height
        csize = cw * ch
        frames = []
        idx = 0
        while True:
            marker = fh.readline()
            if not marker:
                break
            if not marker.startswith(b"FRAME"):
                raise VideoFormatError(f"{path}: bad FRAME marker at frame {idx}")
            raw = fh.read(ysize + 2 * csize)
            if len(raw) != ysize + 2 * csize:
                raise VideoFormatError(f"{path}: truncated frame {idx}")
            buf = np.frombuffer(raw, dtype=np.uint8)
            y = buf[:ysize].reshape(height, width)
            if mode == "mono":
                frames.append(y[None].astype(np.float64))
            else:
                u = buf[ysize : ysize + csize].reshape(ch, cw)
                v = buf[ysize + csize :].reshape(ch, cw)
                if mode == "420":
                    u = np.repeat(np.repeat(u, 2, axis=0), 2, axis=1)[:height, :width]
                    v = np.repeat(np.repeat(v, 2, axis=0), 2, axis=1)[:height, :width]
                frames.append(np.stack([y, u, v]).astype(np.float64))
            idx += 1
    if not frames:
        raise VideoFormatError(f"{path}: no frames")
    # frames list of (C, M, N) -> (C, M, N, T)
    return np.stack(frames, axis=-1)


def write_y4m(video, path) -> None:
    """Write as mono (1 channel) or 4:4:4 (3 channels), 8-bit."""
    v = to_uint8(as_channels(video))
    c, m, n, t = v.shape
    colour = "mono" if c == 1 else "444"
    with open(path, "wb") as fh:
        fh.write(f"YUV4MPEG2 W{n} H{m} F25:1 Ip A1:1 C{colour}\n".encode("ascii"))
        for k in range(t):
            fh.write(b"FRAME\n")
            for ch in range(c):
                fh.write(np.ascontiguousarray(v[ch, :, :, k]).tobytes())


# ---------------------------------------------------------------------------
# image sequences
# ---------------------------------------------------------------------------

_NUM_SUFFIX = re.compile(r"(\d+)\D*$")


def _sequence_files(path):
    p = Path(path)
    if p.is_dir():
        files = [f for f in p.iterdir() if f.suffix.lower() in (".png", ".pgm")]
    else:
        files = [Path(f) for f in sorted(Path(p.parent).glob(p.name))]
    keyed = []
    for f in files:
        m = _NUM_SUFFIX.search(f.stem)
        if m is None:
            raise VideoFormatError(f"{f}: no numeric frame suffix")
        keyed.append((int(m.group(1)), f))
    keyed.sort()
    return [f for _, f in keyed]


def read_image_sequence(path) -> np.ndarray:
    from PIL import Image

    files = _sequence_files(path)
    if not files:
        raise VideoFormatError(f"{path}: no frames found")
    frames = []
    for idx, f in enumerate(files):
        img = np.asarray(Image.open(f))
        if img.ndim == 2:
            img = img[None]
        else:
            img = np.moveaxis(img[..., :3], -1, 0)
        if frames and img.shape != frames[0].shape:
            raise VideoFormatError(
                f"{path}: frame {idx} has shape {img.shape[1:]}, expected {frames[0].shape[1:]}"
            )
        frames.append(img.astype(np.float64))
    return np.stack(frames, axis=-1)


def write_image_sequence(video, path, fmt: str = "png") -> None:
    from PIL import Image

    v = to_uint8(as_channels(video))
    c, m, n, t = v.shape
    os.makedirs(path, exist_ok=True)
    for k in range(t):
        frame = v[0, :, :, k] if c == 1 else np.moveaxis(v[:, :, :, k], 0, -1)
        Image.fromarray(frame).save(Path(path) / f"frame_{k:05d}.{fmt}")


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

def _guess_format(path, hint):
    if hint:
        return hint
    p = Path(path)
    if p.is_dir() or "*" in p.name:
        return "image-sequence"
    suffix = p.suffix.lower()
    if suffix == ".y4m":
        return "y4m"
    if suffix in (".tdvv", ".raw", ".f64"):
        return "raw-f64"
    if suffix in (".png", ".pgm"):
        return "image-sequence"
    raise VideoFormatError(f"{path}: cannot infer format, pass a hint")


def read_video(path, fmt: str | None = None) -> np.ndarray:
    """Read a video as (C, M, N, T) float64 in [0, 255] (raw-f64: as written)."""
    fmt = _guess_format(path, fmt)
    if fmt == "raw-f64":
        return read_raw_f64(path)
    if fmt == "y4m":
        return read_y4m(path)
    if fmt == "image-sequence":
        return read_image_sequence(path)
    raise VideoFormatError(f"unknown format {fmt!r}")


def write_video(video, path, fmt: str | None = None) -> None:
    fmt = _guess_format(path, fmt)
    if fmt == "raw-f64":
        write_raw_f64(video, path)
    elif fmt == "y4m":
        write_y4m(video, path)
    elif fmt == "image-sequence":
        write_image_sequence(video, path)
    else:
        raise VideoFormatError(f"unknown format {fmt!r}")


def video_info(path, fmt: str | None = None) -> dict:
    """Header dump: format, dimensions, channel count, bit depth."""
    fmt = _guess_format(path, fmt)
    if fmt == "raw-f64":
        v = read_raw_f64(path)
        depth = "float64"
    else:
        v = read_video(path, fmt)
        depth = "8-bit"
    c, m, n, t = v.shape
    return {
        "format": fmt,
        "rows": m,
        "cols": n,
        "frames": t,
        "channels": c,
        "bit_depth": depth,
    }
