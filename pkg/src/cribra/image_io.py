"""Tile loading/saving, grayscale conversion, box downscaling and rotated
region extraction."""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import InvalidTheta, NonSquareTile, UnreadableFile, UnsupportedPixelFormat, UpscaleRequested
from .manifest import Label, ManifestRow

DEFAULT_THETAS = (0.0, 60.0, 120.0)
DOWNSCALE_SIDES = (256, 128, 64, 32, 16)

# ITU-R BT.601 luma weights
GRAY_WEIGHTS = np.array([0.299, 0.587, 0.114])


class PixelFormatWarning(UserWarning):
    """Input was promoted or truncated to 8-bit RGB."""


@dataclass(frozen=True)
class Transform:
    dx: int
    dy: int
    theta: float


@dataclass(frozen=True, eq=False)
class Tile:
    """An immutable 8-bit RGB raster with provenance.

    ``pixels`` has shape (height, width, 3) and dtype uint8, i.e. row-major
    and channel-interleaved.
    """

    pixels: np.ndarray
    id: str = ""
    patient_id: str = ""
    label: Label = Label.UNLABELED
    transform: Transform | None = None
    source_id: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3 or px.dtype != np.uint8:
            raise UnsupportedPixelFormat(f"tile pixels must be (H, W, 3) uint8, got {px.shape} {px.dtype}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise UnsupportedPixelFormat("tile has no pixels")
        if px.flags.writeable or px is not self.pixels:
            px = px.copy()
            px.flags.writeable = False
            object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def with_pixels(self, pixels: np.ndarray, **changes) -> "Tile":
        return replace(self, pixels=pixels, **changes)


@dataclass(frozen=True)
class Rejection:
    reason: str


def _to_rgb8(img: Image.Image, path) -> np.ndarray:
    mode = img.mode
    if mode == "RGB":
        return np.asarray(img, dtype=np.uint8)
    if mode in ("RGBA", "RGBa"):
        return np.asarray(img, dtype=np.uint8)[..., :3]
    if mode in ("L", "LA", "1", "P", "PA"):
        warnings.warn(f"{path}: {mode} image promoted to 8-bit RGB", PixelFormatWarning, stacklevel=3)
        return np.asarray(img.convert("RGB"), dtype=np.uint8)
    if mode.startswith("I;16") or mode == "I":
        arr = np.asarray(img)
        if mode == "I":
            arr = np.clip(arr, 0, 65535)
        gray = (arr.astype(np.uint32) >> 8).astype(np.uint8)
        warnings.warn(f"{path}: 16-bit image truncated to 8-bit RGB", PixelFormatWarning, stacklevel=3)
        return np.repeat(gray[..., None], 3, axis=2)
    raise UnsupportedPixelFormat(f"{path}: unsupported pixel format {mode!r}")


def load_tile(path: str | os.PathLike, meta: ManifestRow | None = None) -> Tile:
    """Decode a PNG/TIFF into a :class:`Tile`, attaching manifest metadata."""
    try:
        with Image.open(path) as img:
            img.load()
            pixels = _to_rgb8(img, path)
    except FileNotFoundError as exc:
        raise UnreadableFile(f"{path}: no such file") from exc
    except UnidentifiedImageError as exc:
        raise UnsupportedPixelFormat(f"{path}: not a recognised image") from exc
    except (OSError, SyntaxError, ValueError) as exc:
        raise UnreadableFile(f"{path}: {exc}") from exc
    if meta is None:
        return Tile(pixels, id=os.path.splitext(os.path.basename(path))[0])
    transform = None
    if meta.dx is not None and meta.dy is not None and meta.theta is not None:
        transform = Transform(meta.dx, meta.dy, meta.theta)
    return Tile(
        pixels,
        id=meta.tile_id,
        patient_id=meta.patient_id,
        label=meta.label,
        transform=transform,
        source_id=meta.source_id,
    )


def save_tile(tile: Tile, path: str | os.PathLike) -> None:
    """Write a tile as PNG (atomic rename)."""
    from .manifest import atomic_write

    with atomic_write(path, "wb") as fh:
        Image.fromarray(np.ascontiguousarray(tile.pixels), mode="RGB").save(fh, format="PNG")


def to_gray(tile: Tile | np.ndarray) -> np.ndarray:
    """Real-valued luminance image (float64, values in [0, 255])."""
    px = tile.pixels if isinstance(tile, Tile) else np.asarray(tile)
    gray = px.astype(np.float64) @ GRAY_WEIGHTS
    # 0.299 + 0.587 + 0.114 rounds above 1 for v=255; keep the documented range
    np.clip(gray, 0.0, 255.0, out=gray)
    # gray inputs map to themselves exactly
    same = (px[..., 0] == px[..., 1]) & (px[..., 1] == px[..., 2])
    gray[same] = px[..., 0][same]
    return gray


def _box_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Row i holds the overlap fractions of input cells with output cell i."""
    scale = n_in / n_out
    edges_out = np.arange(n_out + 1) * scale
    lo = edges_out[:-1, None]
    hi = edges_out[1:, None]
    cells = np.arange(n_in)[None, :]
    overlap = np.clip(np.minimum(hi, cells + 1) - np.maximum(lo, cells), 0.0, None)
    return overlap / scale


def downscale(tile: Tile, side: int) -> Tile:
    """Area-average a square tile down to ``side`` x ``side``."""
    if tile.width != tile.height:
        raise NonSquareTile(f"tile {tile.id!r} is {tile.width}x{tile.height}")
    if side > tile.width:
        raise UpscaleRequested(f"cannot downscale {tile.width} px tile to {side} px")
    if side < 1:
        raise UpscaleRequested(f"invalid target side {side}")
    if side == tile.width:
        return tile
    a = _box_matrix(tile.width, side)
    px = tile.pixels.astype(np.float64)
    out = np.einsum("ij,jkc,lk->ilc", a, px, a, optimize=True)
    out = np.clip(np.rint(out), 0, 255).astype(np.uint8)
    return tile.with_pixels(out)


def _check_theta(theta: float, allowed) -> None:
    if allowed is None:
        if not np.isfinite(theta):
            raise InvalidTheta(f"rotation angle {theta!r} is not finite")
        return
    if not any(abs(theta - a) < 1e-9 for a in allowed):
        raise InvalidTheta(f"rotation {theta} not in {tuple(allowed)}")


def sample_rotated(pixels: np.ndarray, center: tuple[float, float], side: int, theta: float):
    """Bilinear inverse mapping of a rotated ``side`` x ``side`` window.

    Output pixel (i, j) sits at offset (j - side//2, i - side//2) from
    ``center`` in the rotated frame. Returns ``None`` when any sample falls
    outside the source raster.
    """
    h, w = pixels.shape[:2]
    cx, cy = center
    t = np.deg2rad(theta)
    c, s = np.cos(t), np.sin(t)
    if abs(c - round(c)) < 1e-15:
        c = float(round(c))
    if abs(s - round(s)) < 1e-15:
        s = float(round(s))
    off = np.arange(side, dtype=np.float64) - side // 2
    u = off[None, :]
    v = off[:, None]
    x = cx + c * u - s * v
    y = cy + s * u + c * v
    eps = 1e-9
    if x.min() < -eps or y.min() < -eps or x.max() > w - 1 + eps or y.max() > h - 1 + eps:
        return None
    x = np.clip(x, 0.0, w - 1)
    y = np.clip(y, 0.0, h - 1)
    x0 = np.minimum(np.floor(x).astype(np.intp), max(w - 2, 0))
    y0 = np.minimum(np.floor(y).astype(np.intp), max(h - 2, 0))
    fx = (x - x0)[..., None]
    fy = (y - y0)[..., None]
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    src = pixels.astype(np.float64)
    top = src[y0, x0] * (1 - fx) + src[y0, x1] * fx
    bot = src[y1, x0] * (1 - fx) + src[y1, x1] * fx
    out = top * (1 - fy) + bot * fy
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def extract_region(context: Tile, center: tuple[float, float], side: int, theta: float = 0.0,
                   thetas=DEFAULT_THETAS) -> Tile | Rejection:
    """Cut a ``side``-pixel window around ``center`` after rotating the context
    by ``theta`` degrees about that point.

    ``thetas`` restricts the admissible angles (``None`` allows any).
    Out-of-bounds sampling yields ``Rejection("OutOfBounds")``.
    """
    _check_theta(theta, thetas)
    if side < 1 or side > min(context.width, context.height):
        return Rejection("OutOfBounds")
    cx, cy = center
    if theta == 0 and float(cx).is_integer() and float(cy).is_integer():
        # exact crop path, equivalent to the bilinear one at integer offsets
        x0, y0 = int(cx) - side // 2, int(cy) - side // 2
        if x0 < 0 or y0 < 0 or x0 + side > context.width or y0 + side > context.height:
            return Rejection("OutOfBounds")
        out = context.pixels[y0:y0 + side, x0:x0 + side]
    else:
        out = sample_rotated(context.pixels, (cx, cy), side, theta)
        if out is None:
            return Rejection("OutOfBounds")
    return Tile(out, id=context.id, patient_id=context.patient_id, label=context.label,
                source_id=context.source_id or context.id)
