"""Synthetic corpora, PGM image IO and benchmark report files."""
import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import BadMagicError, MalformedHeaderError, TruncatedPayloadError, UnsupportedMaxvalError

STYLES = ("blobs", "rects", "mixed")
MIN_NONZERO = 0.10
_SIDES = ("top", "left", "bottom", "right")


@dataclass(frozen=True)
class CorpusSpec:
    count: int = 20
    n: int = 32
    seed: int = 0
    style: str = "mixed"

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if self.n < 16:
            raise ValueError("image side must be >= 16")
        if self.style not in STYLES:
            raise ValueError(f"style must be one of {STYLES}, got {self.style!r}")


def _draw_image(rng, n, style):
    img = np.zeros((n, n))
    yy, xx = np.mgrid[0:n, 0:n]
    for j in range(int(rng.integers(3, 9))):
        amp = rng.uniform(30, 255)
        side = _SIDES[j] if j < len(_SIDES) else None
        kind = style if style != "mixed" else ("rects" if rng.random() < 0.5 else "blobs")
        if kind == "rects":
            h, w = rng.integers(n // 8, int(0.4 * n) + 1, size=2)
            r0 = rng.integers(0, n - h + 1)
            c0 = rng.integers(0, n - w + 1)
            if side == "top":
                r0 = 0
            elif side == "left":
                c0 = 0
            elif side == "bottom":
                r0 = n - h
            elif side == "right":
                c0 = n - w
            img[r0:r0 + h, c0:c0 + w] += amp
        else:
            cy, cx = rng.uniform(0, n, size=2)
            s = rng.uniform(n / 16, n / 5)
            if side == "top":
                cy = 0.0
            elif side == "left":
                cx = 0.0
            elif side == "bottom":
                cy = n - 1.0
            elif side == "right":
                cx = n - 1.0
            d2 = ((yy - cy) ** 2 + (xx - cx) ** 2) / (s * s)
            # Gaussian profile cut at one sigma: a soft disc with a sharp rim
            img += np.where(d2 <= 1.0, amp * np.exp(-0.5 * d2), 0.0)
    return np.clip(img, 0.0, 255.0)


def generate_corpus(spec):
    """Seeded images of 3-8 superposed rectangles and/or truncated Gaussian blobs.

    The first four shapes of every image are pinned to the top, left, bottom
    and right edges respectively, so content spans the full support frame.
    Images with fewer than 10% nonzero pixels are redrawn.
    """
    rng = np.random.default_rng(spec.seed)
    out = []
    while len(out) < spec.count:
        img = _draw_image(rng, spec.n, spec.style)
        if np.mean(img > 0) >= MIN_NONZERO:
            out.append(img)
    return out


def save_pgm(image, path):
    """Write a binary P5 PGM (maxval 255); pixels are rounded half up."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError(f"PGM images are 2-D, got shape {img.shape}")
    data = np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def _header_tokens(raw, path):
    # magic, width, height, maxval; comments run from '#' to end of line
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if pos >= len(raw):
            raise MalformedHeaderError(f"{path}: header ends after {len(tokens)} fields")
        if raw[pos:pos + 1] == b"#":
            while pos < len(raw) and raw[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace() and raw[pos:pos + 1] != b"#":
            pos += 1
        tokens.append(raw[start:pos])
        if len(tokens) == 1 and tokens[0] != b"P5":
            raise BadMagicError(f"{path}: expected binary PGM magic 'P5', got {tokens[0]!r}")
    # exactly one whitespace byte separates maxval from the raster
    if pos >= len(raw) or not raw[pos:pos + 1].isspace():
        raise MalformedHeaderError(f"{path}: missing whitespace after maxval")
    return tokens, pos + 1


def load_pgm(path):
    """Read a binary P5 PGM with maxval 255 into a float64 array."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:2] != b"P5":
        raise BadMagicError(f"{path}: expected binary PGM magic 'P5', got {raw[:2]!r}")
    tokens, offset = _header_tokens(raw, path)
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise MalformedHeaderError(f"{path}: non-integer header field: {exc}") from exc
    if w <= 0 or h <= 0:
        raise MalformedHeaderError(f"{path}: bad dimensions {w}x{h}")
    if maxval != 255:
        raise UnsupportedMaxvalError(f"{path}: maxval {maxval} unsupported, need 255")
    payload = raw[offset:offset + w * h]
    if len(payload) < w * h:
        raise TruncatedPayloadError(f"{path}: expected {w * h} raster bytes, got {len(payload)}")
    return np.frombuffer(payload, dtype=np.uint8).reshape(h, w).astype(np.float64)


REPORT_COLUMNS = (
    "image_id", "run", "method", "alpha",
    "psnr_registered", "ssim_registered", "residual", "runtime_s",
    "psnr_raw", "ssim_raw",
)


@dataclass
class BenchRow:
    image_id: str
    run: int
    method: str
    alpha: float
    psnr_registered: float
    ssim_registered: float
    residual: float
    runtime_s: float | None
    psnr_raw: float
    ssim_raw: float


@dataclass
class BenchReport:
    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def aggregate(self):
        """Per ``(method, alpha)`` means, in first-appearance order."""
        groups = {}
        for r in self.rows:
            groups.setdefault((r.method, r.alpha), []).append(r)
        out = []
        for (method, alpha), rows in groups.items():
            times = [r.runtime_s for r in rows if r.runtime_s is not None]
            out.append({
                "method": method,
                "alpha": alpha,
                "count": len(rows),
                "mean_psnr": float(np.mean([r.psnr_registered for r in rows])),
                "mean_ssim": float(np.mean([r.ssim_registered for r in rows])),
                "mean_runtime_s": float(np.mean(times)) if times else None,
            })
        return out


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_report(report, out_dir):
    """Write ``report.csv`` (one row per record) and ``summary.json`` into ``out_dir``."""
    if not report.rows:
        raise ValueError("cannot write an empty report")
    try:
        os.makedirs(out_dir, exist_ok=True)
        csv_path = os.path.join(out_dir, "report.csv")
        with open(csv_path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(REPORT_COLUMNS)
            for r in report.rows:
                wr.writerow([_fmt(getattr(r, c)) for c in REPORT_COLUMNS])
        json_path = os.path.join(out_dir, "summary.json")
        with open(json_path, "w") as fh:
            json.dump({"meta": report.meta, "aggregate": report.aggregate()}, fh, indent=2, sort_keys=True)
    except OSError as exc:
        raise OSError(f"writing report to {out_dir!r} failed: {exc}") from exc
    return csv_path, json_path


def read_report_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        for key in ("psnr_registered", "ssim_registered", "residual", "psnr_raw", "ssim_raw", "alpha"):
            r[key] = float(r[key])
        r["run"] = int(r["run"])
        r["runtime_s"] = float(r["runtime_s"]) if r["runtime_s"] else None
    return rows
