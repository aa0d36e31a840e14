"""Bit-exact file formats: the TENV1 tensor container, binary PGM images,
flat key=value configuration files, and round-trip CSV numbers.

All writers and readers round-trip bitwise.  Tensor payloads are raw
little-endian 64-bit floats in vec (first index fastest) order; big-endian
hosts byte-swap on read and write.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

MAGIC = b"TENV1\n"


class FormatError(ValueError):
    """Malformed file contents (wrong magic, bad header, short payload)."""


class ConfigError(ValueError):
    """Bad key=value configuration; carries the offending line number."""

    def __init__(self, message: str, lineno: Optional[int] = None):
        self.lineno = lineno
        prefix = f"line {lineno}: " if lineno is not None else ""
        super().__init__(prefix + message)


# ---------------------------------------------------------------------------
# TENV1 tensor container


def write_tensor(path: str, t: np.ndarray) -> None:
    t = np.asarray(t, dtype=np.float64)
    header = (
        MAGIC
        + f"order {t.ndim}\n".encode()
        + ("dims " + " ".join(str(d) for d in t.shape) + "\n").encode()
        + b"byteorder LE\n"
        + b"dtype f64\n"
    )
    payload = t.reshape(-1, order="F").astype("<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_tensor(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(MAGIC):
        raise FormatError(f"{path}: bad magic, not a TENV1 tensor file")
    rest = blob[len(MAGIC) :]
    lines = []
    pos = 0
    for _ in range(4):
        nl = rest.find(b"\n", pos)
        if nl < 0:
            raise FormatError(f"{path}: truncated header")
        lines.append(rest[pos:nl].decode("ascii", errors="replace"))
        pos = nl + 1
    try:
        order = int(lines[0].removeprefix("order "))
        dims = tuple(int(v) for v in lines[1].removeprefix("dims ").split())
    except ValueError:
        raise FormatError(f"{path}: unparseable header fields") from None
    if not lines[0].startswith("order ") or not lines[1].startswith("dims "):
        raise FormatError(f"{path}: malformed header")
    if lines[2] != "byteorder LE" or lines[3] != "dtype f64":
        raise FormatError(f"{path}: unsupported byte order or element type")
    if len(dims) != order:
        raise FormatError(f"{path}: order {order} disagrees with {len(dims)} dimensions")
    count = int(np.prod(dims)) if dims else 1
    payload = rest[pos:]
    if len(payload) != 8 * count:
        raise FormatError(f"{path}: payload has {len(payload)} bytes, expected {8 * count}")
    flat = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    return flat.reshape(dims, order="F")


# ---------------------------------------------------------------------------
# binary PGM (P5)


def write_pgm(path: str, pixels: np.ndarray) -> None:
    """8-bit binary PGM; input must already be integer-valued in 0..255."""
    pixels = np.asarray(pixels)
    if pixels.ndim != 2:
        raise FormatError("PGM needs a 2-D array")
    if pixels.dtype != np.uint8:
        if np.any(pixels < 0) or np.any(pixels > 255):
            raise FormatError("pixel values outside 0..255")
        pixels = pixels.astype(np.uint8)
    rows, cols = pixels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n255\n".encode())
        fh.write(pixels.tobytes())


def read_pgm(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(b"P5"):
        raise FormatError(f"{path}: not a binary PGM (P5) file")
    # header = three whitespace-separated tokens after the magic, then one
    # whitespace byte, then the raster
    tokens, pos = [], 2
    while len(tokens) < 3:
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        if pos < len(blob) and blob[pos : pos + 1] == b"#":
            nl = blob.find(b"\n", pos)
            pos = nl + 1 if nl >= 0 else len(blob)
            continue
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: truncated PGM header")
        tokens.append(blob[start:pos])
    pos += 1
    try:
        cols, rows, maxval = (int(t) for t in tokens)
    except ValueError:
        raise FormatError(f"{path}: bad PGM header") from None
    if maxval != 255:
        raise FormatError(f"{path}: only maxval 255 supported")
    raster = blob[pos : pos + rows * cols]
    if len(raster) != rows * cols:
        raise FormatError(f"{path}: truncated PGM raster")
    return np.frombuffer(raster, dtype=np.uint8).reshape(rows, cols).astype(np.float64)


def render_to_bytes(slice2d: np.ndarray) -> np.ndarray:
    """Linear min-max scaling of a 2-D slice to 0..255; constant slices
    (including all ties) map to zero."""
    slice2d = np.asarray(slice2d, dtype=np.float64)
    lo, hi = float(np.min(slice2d)), float(np.max(slice2d))
    if hi == lo:
        return np.zeros(slice2d.shape, dtype=np.uint8)
    scaled = np.rint((slice2d - lo) / (hi - lo) * 255.0)
    return np.clip(scaled, 0, 255).astype(np.uint8)


# ---------------------------------------------------------------------------
# flat key=value configuration


def parse_keyvalues(text: str) -> list:
    """(lineno, key, value) triples from flat "key = value" text with '#'
    comments; anything else is rejected with its line number."""
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, value = line.split("=", 1)
        key, value = key.strip(), value.strip()
        if not key:
            raise ConfigError("empty key", lineno)
        out.append((lineno, key, value))
    return out


def parse_int_list(value: str) -> tuple:
    parts = value.replace(",", " ").split()
    return tuple(int(v) for v in parts)


MANIFEST_KEYS = {"x_csv", "y_tensor", "n", "p", "dims", "labels"}


@dataclass(frozen=True)
class Manifest:
    x_csv: str
    y_tensor: str
    n: int
    p: int
    dims: tuple
    labels: Optional[str] = None
    base_dir: str = "."

    def x_path(self) -> str:
        return os.path.join(self.base_dir, self.x_csv)

    def y_path(self) -> str:
        return os.path.join(self.base_dir, self.y_tensor)


def read_manifest(path: str) -> Manifest:
    with open(path, "r", encoding="utf-8") as fh:
        entries = parse_keyvalues(fh.read())
    fields: dict = {}
    for lineno, key, value in entries:
        if key not in MANIFEST_KEYS:
            raise ConfigError(f"unknown manifest key {key!r}", lineno)
        if key in fields:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        fields[key] = (lineno, value)
    for required in ("x_csv", "y_tensor", "n", "p", "dims"):
        if required not in fields:
            raise ConfigError(f"manifest is missing required key {required!r}")
    try:
        manifest = Manifest(
            x_csv=fields["x_csv"][1],
            y_tensor=fields["y_tensor"][1],
            n=int(fields["n"][1]),
            p=int(fields["p"][1]),
            dims=parse_int_list(fields["dims"][1]),
            labels=fields["labels"][1] if "labels" in fields else None,
            base_dir=os.path.dirname(os.path.abspath(path)),
        )
    except ValueError as exc:
        raise ConfigError(f"bad manifest value: {exc}") from None
    return manifest


def load_dataset(manifest: Manifest) -> tuple:
    """(x, y) arrays for a manifest, validated against its declared sizes."""
    x = np.loadtxt(manifest.x_path(), delimiter=",", ndmin=2, dtype=np.float64)
    if x.shape != (manifest.n, manifest.p):
        raise FormatError(
            f"{manifest.x_path()}: X is {x.shape}, manifest declares ({manifest.n}, {manifest.p})"
        )
    y = read_tensor(manifest.y_path())
    if y.shape != manifest.dims + (manifest.n,):
        raise FormatError(
            f"{manifest.y_path()}: Y has dims {y.shape}, manifest declares {manifest.dims + (manifest.n,)}"
        )
    return x.T.copy(), y


def write_manifest(path: str, manifest: Manifest) -> None:
    lines = [
        f"x_csv = {manifest.x_csv}",
        f"y_tensor = {manifest.y_tensor}",
        f"n = {manifest.n}",
        f"p = {manifest.p}",
        "dims = " + " ".join(str(d) for d in manifest.dims),
    ]
    if manifest.labels is not None:
        lines.append(f"labels = {manifest.labels}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_x_csv(path: str, x: np.ndarray) -> None:
    """Predictor matrix (p x n) as an n-row, p-column CSV."""
    with open(path, "w", encoding="utf-8") as fh:
        for row in np.asarray(x, dtype=np.float64).T:
            fh.write(",".join(format_float(v) for v in row) + "\n")


def format_float(x: float) -> str:
    """Shortest decimal that round-trips the 64-bit value."""
    return repr(float(x))


# ---------------------------------------------------------------------------
# scenario files

SCENARIO_KEYS = {
    "dims", "p", "n", "snr", "sigma0_sq", "u", "reps", "seed",
    "shape", "size", "block_side", "bar_width", "radius", "mask_path",
    "estimators", "tol", "max_iter", "starts", "grassmann_tol",
}


def read_scenario(path: str) -> tuple:
    """Parse a scenario file into (ScenarioConfig, FitOptions, estimator
    names).  Unknown keys are rejected with their line number."""
    from .estimators import FitOptions
    from .simulation import ScenarioConfig, ShapeSpec

    with open(path, "r", encoding="utf-8") as fh:
        entries = parse_keyvalues(fh.read())
    fields: dict = {}
    for lineno, key, value in entries:
        if key not in SCENARIO_KEYS:
            raise ConfigError(f"unknown scenario key {key!r}", lineno)
        if key in fields:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        fields[key] = (lineno, value)

    def take(key, conv, default=None):
        if key not in fields:
            return default
        lineno, value = fields[key]
        try:
            return conv(value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}", lineno) from None

    dims = take("dims", parse_int_list)
    u = take("u", parse_int_list)
    if dims is None or u is None:
        raise ConfigError("scenario needs 'dims' and 'u'")

    shape = None
    kind = take("shape", str)
    if kind is not None:
        shape = ShapeSpec(
            kind=kind,
            size=take("size", int, dims[0]),
            block_side=take("block_side", int),
            bar_width=take("bar_width", int),
            radius=take("radius", float),
            path=take("mask_path", str),
        )
    try:
        config = ScenarioConfig(
            dims=dims,
            p=take("p", int, 1),
            n=take("n", int, 20),
            snr=take("snr", float, 0.1),
            sigma0_sq=take("sigma0_sq", float, 1.0),
            u=u,
            reps=take("reps", int, 1),
            seed=take("seed", int, 0),
            shape=shape,
        )
    except ValueError as exc:
        raise ConfigError(f"inconsistent scenario: {exc}") from None
    opts = FitOptions(
        tol=take("tol", float, 1e-6),
        max_iter=take("max_iter", int, 50),
        random_starts=take("starts", int, 3),
        grassmann_tol=take("grassmann_tol", float, 1e-8),
        seed=take("seed", int, 0),
    )
    names = take("estimators", str, "ols env-iterative").split()
    return config, opts, names
