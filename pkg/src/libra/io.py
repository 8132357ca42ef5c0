"""File formats: LBG1 grids, LBF1 fields, PNG frames, manifests and configs.

LBG1 (grid)::

    b"LBG1" | u8 kind (0 chromatic, 1 temporal) | 4 x u32le dims | f32le payload

LBF1 (depth/transmission/flow field)::

    b"LBF1" | u8 channels (1 or 2) | u32le H | u32le W | f32le payload

The LBG1 payload is channel-major ``(12, D, Gh, Gw)``; the LBF1 payload is
row-major with channels interleaved last, ``(H, W, C)``.  In memory, flows
are planar ``(2, H, W)`` stacks of ``(u, v)``.
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional
import struct

import cv2
import numpy as np

from .errors import FormatError
from .grid import ChromaticGrid, TemporalGrid

GRID_MAGIC = b"LBG1"
FIELD_MAGIC = b"LBF1"


def write_grid(path, grid):
    if isinstance(grid, ChromaticGrid):
        kind = 0
    elif isinstance(grid, TemporalGrid):
        kind = 1
    else:
        raise TypeError("expected a ChromaticGrid or TemporalGrid")
    c = np.ascontiguousarray(grid.coeffs, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(GRID_MAGIC)
        fh.write(struct.pack("<B4I", kind, *c.shape))
        fh.write(c.tobytes())


def read_grid(path):
    data = Path(path).read_bytes()
    if data[:4] != GRID_MAGIC:
        raise FormatError(f"{path}: magic mismatch (expected {GRID_MAGIC!r}, got {data[:4]!r})")
    if len(data) < 21:
        raise FormatError(f"{path}: truncated header")
    kind, *dims = struct.unpack("<B4I", data[4:21])
    n = int(np.prod(dims))
    if len(data) != 21 + 4 * n:
        raise FormatError(f"{path}: payload holds {len(data) - 21} bytes, dims {dims} need {4 * n}")
    coeffs = np.frombuffer(data, dtype="<f4", offset=21).reshape(dims).astype(np.float64)
    if kind == 0:
        return ChromaticGrid(coeffs)
    if kind == 1:
        return TemporalGrid(coeffs)
    raise FormatError(f"{path}: unknown grid kind {kind}")


def write_field(path, values):
    v = np.asarray(values, dtype=np.float64)
    if v.ndim == 2:
        v = v[None]
    if v.ndim != 3 or v.shape[0] not in (1, 2):
        raise FormatError(f"LBF1 holds 1 or 2 channels, got shape {np.shape(values)}")
    C, H, W = v.shape
    payload = np.ascontiguousarray(np.moveaxis(v, 0, -1), dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(FIELD_MAGIC)
        fh.write(struct.pack("<B2I", C, H, W))
        fh.write(payload.tobytes())


def read_field(path):
    """Load an LBF1 file as ``(H, W)`` or planar ``(2, H, W)``."""
    data = Path(path).read_bytes()
    if data[:4] != FIELD_MAGIC:
        raise FormatError(f"{path}: magic mismatch (expected {FIELD_MAGIC!r}, got {data[:4]!r})")
    if len(data) < 13:
        raise FormatError(f"{path}: truncated header")
    C, H, W = struct.unpack("<B2I", data[4:13])
    if C not in (1, 2):
        raise FormatError(f"{path}: channel count must be 1 or 2, got {C}")
    if len(data) != 13 + 4 * C * H * W:
        raise FormatError(f"{path}: payload size does not match ({C}, {H}, {W})")
    v = np.frombuffer(data, dtype="<f4", offset=13).reshape(H, W, C).astype(np.float64)
    return v[..., 0] if C == 1 else np.moveaxis(v, -1, 0)


def read_frame(path):
    """Read an 8- or 16-bit PNG as a planar RGB float frame in [0, 1]."""
    img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise FileNotFoundError(f"cannot read image {path}")
    if img.dtype == np.uint8:
        scale = 255.0
    elif img.dtype == np.uint16:
        scale = 65535.0
    else:
        raise FormatError(f"{path}: unsupported sample type {img.dtype}")
    if img.ndim == 2:
        img = np.repeat(img[..., None], 3, axis=2)
    elif img.shape[2] == 4:
        img = img[..., :3]
    rgb = img[..., ::-1].astype(np.float64) / scale
    return np.ascontiguousarray(np.moveaxis(rgb, -1, 0))


def write_frame(path, frame):
    """Write a planar RGB frame as a 16-bit PNG."""
    f = np.clip(np.asarray(frame, dtype=np.float64), 0.0, 1.0)
    img = np.round(np.moveaxis(f, 0, -1)[..., ::-1] * 65535.0).astype(np.uint16)
    if not cv2.imwrite(str(path), img):
        raise OSError(f"cannot write image {path}")


def parse_keyvalue(text, source="<text>"):
    """Yield ``(key, value, lineno)`` from ``key = value`` lines; ``#`` starts a comment."""
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"{source}:{n}: expected key = value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        yield key, value, n


_LIST_KEYS = ("clean", "depth", "flow", "hazy", "trans")


@dataclass
class Manifest:
    clean: List[Path] = field(default_factory=list)
    depth: List[Path] = field(default_factory=list)
    flow: List[Path] = field(default_factory=list)
    hazy: List[Path] = field(default_factory=list)
    trans: List[Path] = field(default_factory=list)
    beta: Optional[float] = None
    a_inf: Optional[tuple] = None
    fps: Optional[float] = None

    def to_text(self, root=None):
        lines = ["# sequence manifest"]
        if self.beta is not None:
            lines.append(f"beta = {self.beta!r}")
        if self.a_inf is not None:
            lines.append("a_inf = " + " ".join(repr(float(a)) for a in self.a_inf))
        if self.fps is not None:
            lines.append(f"fps = {self.fps!r}")
        for key in _LIST_KEYS:
            for p in getattr(self, key):
                p = Path(p)
                if root is not None:
                    try:
                        p = p.relative_to(root)
                    except ValueError:
                        pass
                lines.append(f"{key} = {p.as_posix()}")
        return "\n".join(lines) + "\n"


def read_manifest(path):
    path = Path(path)
    text = path.read_text()
    root = path.parent
    m = Manifest()
    for key, value, n in parse_keyvalue(text, str(path)):
        if key in _LIST_KEYS:
            p = Path(value)
            getattr(m, key).append(p if p.is_absolute() else root / p)
        elif key == "beta":
            m.beta = float(value)
        elif key == "fps":
            m.fps = float(value)
        elif key == "a_inf":
            vals = [float(v) for v in value.replace(",", " ").split()]
            if len(vals) not in (1, 3):
                raise FormatError(f"{path}:{n}: a_inf needs 1 or 3 values")
            m.a_inf = tuple(vals * 3 if len(vals) == 1 else vals)
        else:
            raise FormatError(f"{path}:{n}: unknown manifest key {key!r}")
    return m


def write_manifest(path, manifest):
    path = Path(path)
    path.write_text(manifest.to_text(root=path.parent))


def load_fit_config(path):
    """Read a FitConfig from a flat ``key = value`` file."""
    from .fit import FILE_KEYS, OPTIONAL_KEYS, FitConfig

    defaults = FitConfig()
    kw = {}
    for key, value, n in parse_keyvalue(Path(path).read_text(), str(path)):
        if key not in FILE_KEYS and key not in OPTIONAL_KEYS:
            raise FormatError(f"{path}:{n}: unknown config key {key!r}")
        try:
            kw[key] = type(getattr(defaults, key))(float(value))
        except ValueError:
            raise FormatError(f"{path}:{n}: {key} needs a number, got {value!r}") from None
    return FitConfig(**kw)


def write_fit_config(path, config):
    from .fit import FILE_KEYS

    lines = [f"{k} = {getattr(config, k)!r}" for k in FILE_KEYS]
    Path(path).write_text("\n".join(lines) + "\n")


def write_keyvalue(path, mapping):
    Path(path).write_text("".join(f"{k}={v}\n" for k, v in mapping.items()))
