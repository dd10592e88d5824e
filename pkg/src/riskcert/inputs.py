"""Input distributions and image perturbation models."""
from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import ConfigError, OutOfRange


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


def rotate_image(img, angle: float) -> np.ndarray:
    """Rotate counter-clockwise by ``angle`` degrees about the image centre.

    Bilinear interpolation; samples falling outside the frame read as 0.
    """
    img = np.asarray(img, dtype=float)
    h, w = img.shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    th = np.deg2rad(angle)
    c, s = np.cos(th), np.sin(th)
    rr, cc = np.mgrid[0:h, 0:w].astype(float)
    dy, dx = rr - cy, cc - cx
    # inverse map in display coordinates (row axis points down)
    src_r = cy + c * dy + s * dx
    src_c = cx + c * dx - s * dy
    coords = np.round(np.stack([src_r, src_c]), 10)
    out = ndimage.map_coordinates(img, coords, order=1, mode="grid-constant", cval=0.0)
    return np.clip(out, 0.0, 1.0)


def adjust_contrast(img, factor: float) -> np.ndarray:
    if factor < 0:
        raise OutOfRange("contrast factor must be nonnegative")
    img = np.asarray(img, dtype=float)
    if factor == 1.0:
        return np.clip(img, 0.0, 1.0)
    return np.clip(0.5 + factor * (img - 0.5), 0.0, 1.0)


class InputDistribution:
    """Common interface: ``dim`` and ``sample(rng, k) -> (k, dim)``."""

    dim: int

    def sample(self, rng: np.random.Generator, k: int) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        d = {"kind": KIND_OF[type(self)]}
        for f in fields(self):
            v = getattr(self, f.name)
            d[f.name] = v.tolist() if isinstance(v, np.ndarray) else v
        return d

    def dist_id(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class PointMass(InputDistribution):
    x: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", _frozen(np.ravel(self.x)))

    @property
    def dim(self) -> int:
        return self.x.size

    def sample(self, rng, k):
        return np.tile(self.x, (k, 1))


@dataclass(frozen=True)
class UniformBox(InputDistribution):
    """Uniform on ``center ± radius`` per coordinate, optionally clipped (e.g. to [0, 1] pixels)."""

    center: np.ndarray
    radius: np.ndarray | float
    clip: tuple[float, float] | None = None

    def __post_init__(self):
        center = _frozen(np.ravel(self.center))
        radius = _frozen(np.broadcast_to(np.asarray(self.radius, dtype=float), center.shape))
        if (radius < 0).any():
            raise OutOfRange("box radius must be nonnegative")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "radius", radius)
        if self.clip is not None:
            object.__setattr__(self, "clip", (float(self.clip[0]), float(self.clip[1])))

    @property
    def dim(self) -> int:
        return self.center.size

    def sample(self, rng, k):
        u = rng.uniform(-1.0, 1.0, size=(k, self.dim))
        x = self.center + self.radius * u
        if self.clip is not None:
            x = np.clip(x, *self.clip)
        return x


@dataclass(frozen=True)
class Gaussian(InputDistribution):
    mean: np.ndarray
    std: np.ndarray | float

    def __post_init__(self):
        mean = _frozen(np.ravel(self.mean))
        std = _frozen(np.broadcast_to(np.asarray(self.std, dtype=float), mean.shape))
        if (std < 0).any():
            raise OutOfRange("std must be nonnegative")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    @property
    def dim(self) -> int:
        return self.mean.size

    def sample(self, rng, k):
        return self.mean + self.std * rng.standard_normal((k, self.dim))


def _check_image(img) -> np.ndarray:
    img = _frozen(img)
    if img.ndim != 2:
        raise OutOfRange("base image must be a 2-D grid")
    if img.min() < 0 or img.max() > 1:
        raise OutOfRange("image pixels must lie in [0, 1]")
    return img


@dataclass(frozen=True)
class RotationPerturb(InputDistribution):
    base_image: np.ndarray
    angle_range: tuple[float, float]

    def __post_init__(self):
        object.__setattr__(self, "base_image", _check_image(self.base_image))
        lo, hi = map(float, self.angle_range)
        if lo > hi:
            raise OutOfRange("angle_range must be ordered")
        object.__setattr__(self, "angle_range", (lo, hi))

    @property
    def dim(self) -> int:
        return self.base_image.size

    def sample(self, rng, k):
        angles = rng.uniform(*self.angle_range, size=k)
        return np.stack([rotate_image(self.base_image, a).ravel() for a in angles])


@dataclass(frozen=True)
class ContrastPerturb(InputDistribution):
    base_image: np.ndarray
    factor_range: tuple[float, float]

    def __post_init__(self):
        object.__setattr__(self, "base_image", _check_image(self.base_image))
        lo, hi = map(float, self.factor_range)
        if not 0.0 <= lo <= hi <= 2.0:
            raise OutOfRange("factor_range must be an ordered pair inside [0, 2]")
        object.__setattr__(self, "factor_range", (lo, hi))

    @property
    def dim(self) -> int:
        return self.base_image.size

    def sample(self, rng, k):
        factors = rng.uniform(*self.factor_range, size=k)
        flat = self.base_image.ravel()
        return np.clip(0.5 + factors[:, None] * (flat - 0.5), 0.0, 1.0)


KIND_OF = {
    PointMass: "point_mass",
    UniformBox: "uniform_box",
    Gaussian: "gaussian",
    RotationPerturb: "rotation",
    ContrastPerturb: "contrast",
}


def sample_input(dist: InputDistribution, rng) -> np.ndarray:
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    return dist.sample(rng, 1)[0]


def load_image(spec, base_dir: Path | None = None) -> np.ndarray:
    """Image given inline (nested list) or as ``{"csv": path, "shape": [h, w]}``.

    The CSV holds the pixel values in row-major order, on one line or several.
    """
    if isinstance(spec, dict):
        path = Path(spec["csv"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        if not path.exists():
            raise ConfigError(f"image file {path} does not exist")
        with open(path) as fh:
            flat = np.array([float(v) for row in csv.reader(fh) for v in row if v.strip()])
        h, w = spec["shape"]
        if flat.size != h * w:
            raise ConfigError(f"image file {path} has {flat.size} pixels, expected {h * w}")
        return flat.reshape(h, w)
    return np.asarray(spec, dtype=float)


def distribution_from_dict(d: dict, base_dir: Path | None = None) -> InputDistribution:
    try:
        kind = d["kind"]
        if kind == "point_mass":
            return PointMass(d["x"])
        if kind == "uniform_box":
            return UniformBox(d["center"], d["radius"], clip=d.get("clip"))
        if kind == "gaussian":
            return Gaussian(d["mean"], d["std"])
        if kind == "rotation":
            return RotationPerturb(load_image(d["base_image"], base_dir), tuple(d["angle_range"]))
        if kind == "contrast":
            return ContrastPerturb(load_image(d["base_image"], base_dir), tuple(d["factor_range"]))
    except KeyError as exc:
        raise ConfigError(f"input distribution missing field {exc}") from exc
    except OutOfRange as exc:
        raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown input distribution kind {d.get('kind')!r}")
