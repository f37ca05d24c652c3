"""Readers and writers for event/trigger CSV, Netpbm images and ASCII PLY.

Byte layouts
------------
events.csv    one ``t_us,x,y,p`` line per event, ``p`` in {1, -1}, no header,
              sorted by ``(t_us, y, x, p)``. ``100,5,7,-1`` is an OFF event
              at t = 100 us, x = 5, y = 7.
triggers.csv  one ``t_us,slot,channel,pattern_id`` line per slot start with
              channel ``R``, ``G`` or ``B``, e.g. ``0,0,R,3``; timestamps
              strictly increase.
PPM           binary P6, maxval 255: ``b"P6\\n1 1\\n255\\n\\xff\\xff\\xff"`` is a
              single white pixel.
PBM           binary P4, rows padded to whole bytes, most significant bit
              first. Netpbm convention: bit 1 is black, so lit projector
              pixels are written as 0.
PGM           binary P5, maxval 65535, big-endian samples.
PLY           ASCII 1.0, ``element vertex`` with float x, y, z and uchar
              red, green, blue; coordinates written with 9 significant digits
              so 32-bit floats round-trip exactly.
"""

from __future__ import annotations

import os
import tempfile
import warnings
from pathlib import Path

import numpy as np

from .errors import FormatError, UnsortedStreamError
from .patterns import CHANNELS
from .sensor import empty_events, is_sorted, make_events, make_triggers, sort_events
from .validation import check_frame


def atomic_write(path, data):
    """Write bytes or text via a temporary file and an atomic rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("ascii")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _ascii_digits(values):
    """Right-aligned ASCII digits of nonnegative ints, NUL-padded, shape ``(N, width)``."""
    v = np.asarray(values, dtype=np.int64)
    width = len(str(int(v.max()))) if v.size else 1
    out = np.zeros((v.shape[0], width), dtype=np.uint8)
    for k in range(width):
        p = 10**k
        digit = (v // p) % 10 + 48
        out[:, width - 1 - k] = np.where((v >= p) | (k == 0), digit, 0)
    return out


def format_events(events):
    """Event CSV text; vectorized so that millions of rows stay fast."""
    n = events.shape[0]
    if n == 0:
        return ""
    comma = np.full((n, 1), ord(","), dtype=np.uint8)
    sign = np.where(events["p"] < 0, ord("-"), 0).astype(np.uint8)[:, None]
    one = np.full((n, 1), ord("1"), dtype=np.uint8)
    newline = np.full((n, 1), ord("\n"), dtype=np.uint8)
    rows = np.concatenate(
        [_ascii_digits(events["t"]), comma, _ascii_digits(events["x"]), comma, _ascii_digits(events["y"]), comma,
         sign, one, newline],
        axis=1,
    ).ravel()
    return rows[rows != 0].tobytes().decode("ascii")


def write_event_csv(events, path):
    """Write events in canonical order (the stream is sorted first if needed)."""
    if not is_sorted(events):
        events = sort_events(events)
    atomic_write(path, format_events(events))


def _parse_event_line(line, lineno):
    parts = line.split(",")
    if len(parts) != 4:
        raise FormatError(f"expected 4 fields t_us,x,y,p, got {len(parts)}", lineno)
    try:
        t, x, y, p = (int(v) for v in parts)
    except ValueError:
        raise FormatError(f"non-integer field in {line!r}", lineno) from None
    if p not in (1, -1):
        raise FormatError(f"polarity must be 1 or -1, got {p}", lineno)
    if t < 0 or not (0 <= x < 65536 and 0 <= y < 65536):
        raise FormatError(f"field out of range in {line!r}", lineno)
    return t, x, y, p


def read_event_csv(path):
    text = Path(path).read_text()
    if not text.strip():
        return empty_events()
    arr = None
    lines = text.count("\n") + (not text.endswith("\n"))
    if text.count(",") == 3 * lines:
        # fast path; anything odd falls through to the line-numbered parser
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            flat = np.fromstring(text.replace("\n", ","), dtype=np.int64, sep=",")
        if flat.size == 4 * lines:
            arr = flat.reshape(-1, 4)
    if arr is None:
        rows = []
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                raise FormatError("blank line", lineno)
            rows.append(_parse_event_line(line.strip(), lineno))
        arr = np.array(rows, dtype=np.int64).reshape(-1, 4)
    bad = np.flatnonzero(~np.isin(arr[:, 3], (1, -1)) | (arr[:, 0] < 0) | (arr[:, 1] < 0) | (arr[:, 2] < 0)
                         | (arr[:, 1] > 65535) | (arr[:, 2] > 65535))
    if bad.size:
        raise FormatError(f"field out of range in {text.splitlines()[bad[0]]!r}", int(bad[0]) + 1)
    events = make_events(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3])
    if not is_sorted(events):
        raise UnsortedStreamError("unsorted stream: events must be ordered by (t_us, y, x, p)")
    return events


def write_trigger_csv(triggers, path):
    t = triggers["t"]
    if np.any(t[1:] <= t[:-1]):
        raise UnsortedStreamError("unsorted stream: trigger timestamps must strictly increase")
    lines = [f"{int(r['t'])},{int(r['slot'])},{CHANNELS[int(r['channel'])]},{int(r['pattern'])}\n" for r in triggers]
    atomic_write(path, "".join(lines))


def read_trigger_csv(path):
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line:
            raise FormatError("blank line", lineno)
        parts = line.split(",")
        if len(parts) != 4:
            raise FormatError(f"expected 4 fields t_us,slot,channel,pattern_id, got {len(parts)}", lineno)
        if parts[2] not in CHANNELS:
            raise FormatError(f"channel must be one of R, G, B, got {parts[2]!r}", lineno)
        try:
            t, slot, pid = int(parts[0]), int(parts[1]), int(parts[3])
        except ValueError:
            raise FormatError(f"non-integer field in {line!r}", lineno) from None
        if rows and t <= rows[-1][0]:
            raise UnsortedStreamError("unsorted stream: trigger timestamps must strictly increase", lineno)
        rows.append((t, slot, parts[2], pid))
    if not rows:
        return make_triggers([], [], [], [])
    t, slot, ch, pid = zip(*rows)
    return make_triggers(t, slot, ch, pid)


def encode_ppm(frame):
    img = check_frame(frame)
    h, w = img.shape[:2]
    return f"P6\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(img).tobytes()


def write_ppm(frame, path):
    atomic_write(path, encode_ppm(frame))


def _read_header(data, n_fields):
    """Parse Netpbm header tokens; return them and the offset of the raster."""
    tokens, pos = [], 0
    while len(tokens) < n_fields:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError("truncated Netpbm header")
        tokens.append(data[start:pos].decode("ascii"))
    return tokens, pos + 1


def read_ppm(path):
    data = Path(path).read_bytes()
    (magic, w, h, maxval), off = _read_header(data, 4)
    if magic != "P6" or int(maxval) != 255:
        raise FormatError(f"expected binary P6 with maxval 255, got {magic} maxval {maxval}")
    w, h = int(w), int(h)
    raster = data[off : off + w * h * 3]
    if len(raster) != w * h * 3:
        raise FormatError("truncated PPM raster")
    return np.frombuffer(raster, dtype=np.uint8).reshape(h, w, 3).copy()


def encode_pbm(bitmap):
    bm = np.asarray(getattr(bitmap, "bitmap", bitmap), dtype=bool)
    h, w = bm.shape
    return f"P4\n{w} {h}\n".encode("ascii") + np.packbits(~bm, axis=1).tobytes()


def write_pbm(pattern, path):
    atomic_write(path, encode_pbm(pattern))


def read_pbm(path):
    """Bitmap with True for lit (white) pixels."""
    data = Path(path).read_bytes()
    (magic, w, h), off = _read_header(data, 3)
    if magic != "P4":
        raise FormatError(f"expected binary P4, got {magic}")
    w, h = int(w), int(h)
    row_bytes = (w + 7) // 8
    raster = data[off : off + row_bytes * h]
    if len(raster) != row_bytes * h:
        raise FormatError("truncated PBM raster")
    bits = np.unpackbits(np.frombuffer(raster, dtype=np.uint8).reshape(h, row_bytes), axis=1)[:, :w]
    return bits == 0


def encode_pgm16(values, scale=None):
    v = np.asarray(getattr(values, "values", values), dtype=np.float64)
    if scale is None:
        peak = float(v.max()) if v.size else 0.0
        scale = 65535.0 / peak if peak > 0 else 1.0
    q = np.clip(np.floor(v * scale + 0.5), 0, 65535).astype(">u2")
    h, w = q.shape
    return f"P5\n{w} {h}\n65535\n".encode("ascii") + q.tobytes()


def write_pgm16(values, path, scale=None):
    """16-bit PGM of an irradiance frame, scaled so its peak maps to 65535."""
    atomic_write(path, encode_pgm16(values, scale))


def read_pgm16(path):
    data = Path(path).read_bytes()
    (magic, w, h, maxval), off = _read_header(data, 4)
    if magic != "P5" or int(maxval) != 65535:
        raise FormatError("expected binary P5 with maxval 65535")
    w, h = int(w), int(h)
    return np.frombuffer(data[off : off + 2 * w * h], dtype=">u2").reshape(h, w).astype(np.uint16)


def encode_ply(cloud):
    pts = np.asarray(cloud.points, dtype=np.float32).reshape(-1, 3)
    cols = np.asarray(cloud.colors, dtype=np.uint8).reshape(-1, 3)
    header = (
        "ply\nformat ascii 1.0\n"
        f"element vertex {pts.shape[0]}\n"
        "property float x\nproperty float y\nproperty float z\n"
        "property uchar red\nproperty uchar green\nproperty uchar blue\n"
        "end_header\n"
    )
    body = "".join(
        f"{float(x):.9g} {float(y):.9g} {float(z):.9g} {r} {g} {b}\n"
        for (x, y, z), (r, g, b) in zip(pts.tolist(), cols.tolist())
    )
    return header + body


def write_ply(cloud, path):
    atomic_write(path, encode_ply(cloud))

