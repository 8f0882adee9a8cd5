"""Seeded synthetic H&E-like tiles with ground-truth nuclei.

This is a caricature, not a pathology simulator. Cribriform-like tiles hold
one large epithelial disk packed with dark nuclei and perforated by several
round lumina; non-cribriform-like tiles hold a few small glands, each a
single lumen ringed by nuclei. The point is to give the pipeline something
with known answers.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import InfeasibleGeometry
from .image_io import Tile, save_tile
from .manifest import Label, ManifestRow, write_manifest

CLASS_DEFAULTS = {
    # n_glands, nuclei_per_gland, lumina_per_gland
    Label.CRIBRIFORM: (1, 60, 5),
    Label.NON_CRIBRIFORM: (3, 9, 1),
}


@dataclass(frozen=True)
class NucleusMorphology:
    """Per-class nucleus appearance at 256 px scale (semi-axes in px)."""

    major: tuple[float, float]
    minor: tuple[float, float]
    rgb: tuple[int, int, int]
    color_jitter: float
    # luminance multiplier runs from centre_shade (rho=0) to centre_shade + rim_gain (rho=1)
    centre_shade: float
    rim_gain: float


MORPHOLOGY = {
    # atypical: large, rounder, pleomorphic, dark with coarse chromatin
    Label.CRIBRIFORM: NucleusMorphology((4.4, 5.2), (3.7, 4.4), (62, 42, 112), 18.0, 0.70, 0.60),
    # bland: small, elongated, uniform, paler
    Label.NON_CRIBRIFORM: NucleusMorphology((4.0, 4.3), (2.5, 2.7), (96, 72, 140), 3.0, 0.97, 0.06),
}


@dataclass(frozen=True)
class SynthSpec:
    seed: int | tuple = 0
    side: int = 256
    label: Label = Label.CRIBRIFORM
    n_glands: int | None = None
    nuclei_per_gland: int | None = None
    lumina_per_gland: int | None = None
    noise_sigma: float = 4.0
    background_rgb: tuple[int, int, int] = (232, 190, 212)
    epithelium_rgb: tuple[int, int, int] = (216, 172, 200)
    nucleus_rgb: tuple[int, int, int] | None = None
    lumen_rgb: tuple[int, int, int] = (247, 243, 247)
    patient_id: str = ""
    tile_id: str = ""

    def resolved(self) -> "SynthSpec":
        g, n, l = CLASS_DEFAULTS.get(self.label, CLASS_DEFAULTS[Label.NON_CRIBRIFORM])
        if self.label is Label.CRIBRIFORM and self.side < 256:
            # keep nuclear density, not count, on smaller tiles
            n = max(3, round(n * (self.side / 256.0) ** 2))
        spec = replace(
            self,
            n_glands=g if self.n_glands is None else self.n_glands,
            nuclei_per_gland=n if self.nuclei_per_gland is None else self.nuclei_per_gland,
            lumina_per_gland=l if self.lumina_per_gland is None else self.lumina_per_gland,
        )
        if spec.label is Label.CRIBRIFORM and spec.lumina_per_gland < 3:
            raise InfeasibleGeometry("cribriform-like glands need at least 3 lumina")
        if spec.label is not Label.CRIBRIFORM and spec.lumina_per_gland != 1:
            raise InfeasibleGeometry("non-cribriform-like glands have exactly one lumen")
        if spec.side < 64:
            raise InfeasibleGeometry("synthetic tiles need side >= 64")
        return spec


@dataclass(frozen=True, eq=False)
class GroundTruth:
    mask: np.ndarray
    n_nuclei: int
    label: Label
    centers: np.ndarray

    @property
    def mask_fraction(self) -> float:
        return float(self.mask.mean())


def _rng(seed) -> np.random.Generator:
    seq = seed if isinstance(seed, (tuple, list)) else (seed,)
    return np.random.default_rng(np.random.SeedSequence([int(s) for s in seq]))


def _paint_disk(img, cx, cy, r, rgb):
    h, w = img.shape[:2]
    y0, y1 = max(int(cy - r) - 1, 0), min(int(cy + r) + 2, h)
    x0, x1 = max(int(cx - r) - 1, 0), min(int(cx + r) + 2, w)
    yy, xx = np.mgrid[y0:y1, x0:x1]
    inside = (xx - cx) ** 2 + (yy - cy) ** 2 <= r * r
    img[y0:y1, x0:x1][inside] = rgb


def _paint_nucleus(img, mask, cx, cy, a, b, phi, rgb, centre_shade, rim_gain):
    h, w = mask.shape
    y0, y1 = max(int(cy - a) - 1, 0), min(int(cy + a) + 2, h)
    x0, x1 = max(int(cx - a) - 1, 0), min(int(cx + a) + 2, w)
    yy, xx = np.mgrid[y0:y1, x0:x1]
    u = (xx - cx) * math.cos(phi) + (yy - cy) * math.sin(phi)
    v = -(xx - cx) * math.sin(phi) + (yy - cy) * math.cos(phi)
    rho2 = (u / a) ** 2 + (v / b) ** 2
    inside = rho2 <= 1.0
    shade = (centre_shade + rim_gain * rho2)[..., None] * np.asarray(rgb, dtype=np.float64)
    img[y0:y1, x0:x1][inside] = shade[inside]
    mask[y0:y1, x0:x1][inside] = True


def _place(rng, n, sampler, ok, tries=4000):
    out = []
    attempts = 0
    while len(out) < n:
        attempts += 1
        if attempts > tries * max(n, 1):
            raise InfeasibleGeometry(f"could only place {len(out)} of {n} items")
        p = sampler()
        if ok(p, out):
            out.append(p)
    return out


def generate(spec: SynthSpec) -> tuple[Tile, GroundTruth]:
    """Render one synthetic tile and its ground truth (deterministic per seed)."""
    spec = spec.resolved()
    rng = _rng(spec.seed)
    side = spec.side
    s = side / 256.0
    img = np.empty((side, side, 3), dtype=np.float64)
    img[:] = spec.background_rgb
    mask = np.zeros((side, side), dtype=bool)

    morph = MORPHOLOGY.get(spec.label, MORPHOLOGY[Label.NON_CRIBRIFORM])
    nucleus_rgb = spec.nucleus_rgb if spec.nucleus_rgb is not None else morph.rgb
    a_max = morph.major[1] * s
    nuc_gap = 2 * a_max + 3.0 * s
    margin = a_max + 3.0

    centres: list[tuple[float, float]] = []

    def far_from_nuclei(p, placed):
        return all((p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2 >= nuc_gap ** 2 for q in placed + centres)

    if spec.label is Label.CRIBRIFORM:
        big_r = 0.38 * side / math.sqrt(spec.n_glands)
        glands = _place(
            rng, spec.n_glands,
            lambda: (rng.uniform(big_r + 4, side - big_r - 4), rng.uniform(big_r + 4, side - big_r - 4)),
            lambda p, got: all(math.dist(p, q) >= 2 * big_r + 6 for q in got),
        )
        for gx, gy in glands:
            _paint_disk(img, gx, gy, big_r, spec.epithelium_rgb)

            def sample_lumen():
                r = rng.uniform(0.16, 0.22) * big_r
                ang = rng.uniform(0, 2 * math.pi)
                dist = math.sqrt(rng.uniform(0, 1)) * (big_r - r - 2 * a_max)
                return (gx + dist * math.cos(ang), gy + dist * math.sin(ang), r)

            lumina = _place(
                rng, spec.lumina_per_gland, sample_lumen,
                lambda p, got: all(math.dist(p[:2], q[:2]) >= p[2] + q[2] + 2 * a_max + 4 * s for q in got),
            )
            for lx, ly, r in lumina:
                _paint_disk(img, lx, ly, r, spec.lumen_rgb)

            def sample_nucleus():
                ang = rng.uniform(0, 2 * math.pi)
                dist = math.sqrt(rng.uniform(0, 1)) * (big_r - margin)
                return (gx + dist * math.cos(ang), gy + dist * math.sin(ang))

            def ok_nucleus(p, got):
                if any(math.dist(p, l[:2]) < l[2] + margin for l in lumina):
                    return False
                return far_from_nuclei(p, got)

            centres += _place(rng, spec.nuclei_per_gland, sample_nucleus, ok_nucleus)
    else:
        g_r = 0.16 * side
        lum_frac = 0.55
        glands = _place(
            rng, spec.n_glands,
            lambda: (rng.uniform(g_r + 4 * s, side - g_r - 4 * s), rng.uniform(g_r + 4 * s, side - g_r - 4 * s)),
            lambda p, got: all(math.dist(p, q) >= 2 * g_r + 8 * s for q in got),
        )
        for gx, gy in glands:
            _paint_disk(img, gx, gy, g_r, spec.epithelium_rgb)
            _paint_disk(img, gx, gy, lum_frac * g_r, spec.lumen_rgb)
            ring_r = (1 + lum_frac) / 2 * g_r
            k = spec.nuclei_per_gland
            phase = rng.uniform(0, 2 * math.pi)
            pts = []
            for i in range(k):
                ang = phase + 2 * math.pi * i / k + rng.uniform(-0.15, 0.15) * 2 * math.pi / k
                rr = ring_r + rng.uniform(-1.0, 1.0) * s
                pts.append((gx + rr * math.cos(ang), gy + rr * math.sin(ang)))
            for p in pts:
                if not far_from_nuclei(p, []):
                    raise InfeasibleGeometry("ring nuclei too crowded; lower nuclei_per_gland")
                centres.append(p)

    for cx, cy in centres:
        a = rng.uniform(*morph.major) * s
        b = min(rng.uniform(*morph.minor) * s, a)
        phi = rng.uniform(0, math.pi)
        jitter = rng.uniform(-morph.color_jitter, morph.color_jitter)
        rgb = np.clip(np.asarray(nucleus_rgb, dtype=np.float64) + jitter, 0, 255)
        _paint_nucleus(img, mask, cx, cy, a, b, phi, rgb, morph.centre_shade, morph.rim_gain)

    if spec.noise_sigma > 0:
        img += rng.normal(0.0, spec.noise_sigma, size=img.shape)
    pixels = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    tile = Tile(pixels, id=spec.tile_id, patient_id=spec.patient_id, label=spec.label)
    truth = GroundTruth(mask, len(centres), spec.label, np.asarray(centres, dtype=np.float64).reshape(-1, 2))
    return tile, truth


def patient_ids(n: int, prefix: str = "SYN") -> list[str]:
    return [f"{prefix}-{i:02d}" for i in range(1, n + 1)]


def iter_dataset_specs(patients, tiles_per_class: int, side: int = 256, seed: int = 0, noise_sigma: float = 4.0):
    """Specs for every (patient, class, index); each patient owns its seed range."""
    for p_idx, pid in enumerate(patients):
        for label in (Label.CRIBRIFORM, Label.NON_CRIBRIFORM):
            for i in range(tiles_per_class):
                tag = "crib" if label is Label.CRIBRIFORM else "noncrib"
                yield SynthSpec(
                    seed=(seed, p_idx, label.class_index, i),
                    side=side,
                    label=label,
                    noise_sigma=noise_sigma,
                    patient_id=pid,
                    tile_id=f"{pid}_{tag}_{i:04d}",
                )


def write_dataset(out_dir: str | os.PathLike, patients, tiles_per_class: int, side: int = 256,
                  seed: int = 0, noise_sigma: float = 4.0, masks: bool = True) -> list[ManifestRow]:
    """Render a synthetic dataset: tiles/, masks/ and manifest.csv."""
    from PIL import Image

    from .manifest import atomic_write

    out = Path(out_dir)
    (out / "tiles").mkdir(parents=True, exist_ok=True)
    if masks:
        (out / "masks").mkdir(parents=True, exist_ok=True)
    rows = []
    for spec in iter_dataset_specs(patients, tiles_per_class, side, seed, noise_sigma):
        tile, truth = generate(spec)
        path = out / "tiles" / f"{spec.tile_id}.png"
        save_tile(tile, path)
        if masks:
            with atomic_write(out / "masks" / f"{spec.tile_id}.png", "wb") as fh:
                Image.fromarray(truth.mask.astype(np.uint8) * 255).save(fh, format="PNG")
        rows.append(ManifestRow(str(path), spec.tile_id, spec.patient_id, spec.label, spec.tile_id))
    write_manifest(out / "manifest.csv", rows)
    return rows
