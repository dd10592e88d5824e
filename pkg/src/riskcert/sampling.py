"""Reproducible output sampling and Monte Carlo performance estimates.

Randomness is counter based: the samples in block ``b`` (``BLOCK`` consecutive
indices) come from a generator seeded by ``(root seed, stage label, b)`` alone,
so results do not depend on how blocks are scheduled over workers.
"""
from __future__ import annotations

import csv
import json
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bnn import BnnModel, forward_batch, sample_weight_matrix
from .errors import DimensionMismatch, MalformedFile, OutOfRange
from .inputs import InputDistribution

BLOCK = 256


def stage_rng(seed: int, label: str, index: int = 0) -> np.random.Generator:
    """Independent stream for (seed, label, index)."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(zlib.crc32(label.encode()), int(index)))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, label: str, index: int = 0) -> int:
    return int(stage_rng(seed, label, index).integers(0, 2**63 - 1))


@dataclass(frozen=True)
class OutputSamples:
    points: np.ndarray
    seed: int = 0
    model_id: str = ""
    dist_id: str = ""

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise OutOfRange("need at least one output sample")
        if not np.isfinite(pts).all():
            raise OutOfRange("output samples must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def N(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def metadata(self) -> dict:
        return {"seed": self.seed, "N": self.N, "model_id": self.model_id, "dist_id": self.dist_id}


def as_points(samples) -> np.ndarray:
    if isinstance(samples, OutputSamples):
        return samples.points
    pts = np.asarray(samples, dtype=float)
    return pts[:, None] if pts.ndim == 1 else pts


def collect_outputs(
    model: BnnModel,
    dist: InputDistribution,
    N: int,
    seed: int,
    *,
    label: str = "outputs",
    threads: int = 1,
) -> OutputSamples:
    """Draw ``N`` independent (input, weights) pairs and push them through the network."""
    if N < 1:
        raise OutOfRange("N must be at least 1")
    if dist.dim != model.input_dim:
        raise DimensionMismatch(f"input distribution has dim {dist.dim}, model expects {model.input_dim}")
    out = np.empty((N, model.output_dim))
    n_blocks = -(-N // BLOCK)

    def run(b: int) -> None:
        lo, hi = b * BLOCK, min(N, (b + 1) * BLOCK)
        rng = stage_rng(seed, label, b)
        # always draw a full block so a prefix of a longer run matches a shorter one
        w = sample_weight_matrix(model, rng, BLOCK)[: hi - lo]
        x = dist.sample(rng, BLOCK)[: hi - lo]
        out[lo:hi] = forward_batch(model, w, x)

    if threads > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run, range(n_blocks)))
    else:
        for b in range(n_blocks):
            run(b)
    return OutputSamples(out, seed=int(seed), model_id=model.model_id(), dist_id=dist.dist_id())


def perf_samples(samples, h) -> np.ndarray:
    pts = as_points(samples)
    if h.dim is not None and pts.shape[1] != h.dim:
        raise DimensionMismatch(f"performance function takes dim {h.dim}, samples have dim {pts.shape[1]}")
    return h(pts)


def monte_carlo_perf(samples, h) -> float:
    return float(np.mean(perf_samples(samples, h)))


def save_samples(samples: OutputSamples, path, h=None) -> None:
    """CSV with columns y_1..y_n (and a trailing ``h`` column when ``h`` is given) plus a JSON sidecar."""
    path = Path(path)
    pts = samples.points
    header = [f"y_{j + 1}" for j in range(pts.shape[1])]
    rows = pts
    if h is not None:
        header.append("h")
        rows = np.column_stack([pts, perf_samples(samples, h)])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows([[repr(float(v)) for v in row] for row in rows])
    path.with_suffix(".meta.json").write_text(json.dumps(samples.metadata(), indent=1, sort_keys=True))


def load_samples(path) -> OutputSamples:
    path = Path(path)
    try:
        with open(path) as fh:
            reader = csv.reader(fh)
            header = next(reader)
            data = np.array([[float(v) for v in row] for row in reader])
    except (StopIteration, ValueError) as exc:
        raise MalformedFile(f"{path}: {exc}") from exc
    ycols = [i for i, name in enumerate(header) if name.startswith("y_")]
    meta_path = path.with_suffix(".meta.json")
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    return OutputSamples(
        data[:, ycols],
        seed=meta.get("seed", 0),
        model_id=meta.get("model_id", ""),
        dist_id=meta.get("dist_id", ""),
    )
