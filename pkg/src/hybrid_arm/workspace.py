"""Monte Carlo workspace sampling, envelopes, voxel volume and point-cloud export."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .kinematics import fk_positions
from .model import JointState, StructuralParams

ALGORITHM_ID = "numpy-pcg64/seedsequence-spawn/chunk65536/rejection-v1"
CHUNK = 65536
CLOUD_HEADER = ("x_mm", "y_mm", "z_mm", "a_mm", "b_mm", "theta1", "theta2", "theta3", "theta4")


@dataclass(frozen=True, eq=False)
class WorkspaceCloud:
    """Sampled TCP positions with the joint states that produced them."""

    positions: np.ndarray  # (n, 3) mm
    states: np.ndarray  # (n, 6)
    seed: int | None = None
    algorithm: str = ALGORITHM_ID
    params_digest: str = ""

    @property
    def sample_count(self) -> int:
        return len(self.positions)

    def __len__(self) -> int:
        return self.sample_count

    def point(self, i: int) -> tuple[np.ndarray, JointState]:
        return self.positions[i], JointState.from_array(self.states[i])

    def __iter__(self):
        return (self.point(i) for i in range(len(self)))

    def concat(self, other: WorkspaceCloud) -> WorkspaceCloud:
        return WorkspaceCloud(
            np.vstack([self.positions, other.positions]),
            np.vstack([self.states, other.states]),
            self.seed,
            self.algorithm,
            self.params_digest,
        )

    def head(self, n: int) -> WorkspaceCloud:
        return WorkspaceCloud(self.positions[:n], self.states[:n], self.seed, self.algorithm, self.params_digest)

    def metadata(self) -> dict:
        return {
            "seed": self.seed,
            "n": self.sample_count,
            "algorithm": self.algorithm,
            "params_digest": self.params_digest,
        }


def _joint_bounds(p: StructuralParams) -> tuple[np.ndarray, np.ndarray]:
    lo = np.array([p.a_min, p.b_min, *(lim[0] for lim in p.theta_limits)])
    hi = np.array([p.a_max, p.b_max, *(lim[1] for lim in p.theta_limits)])
    return lo, hi


def _chunk_states(p: StructuralParams, seed: int, index: int) -> np.ndarray:
    """CHUNK valid states from the stream of chunk ``index``.

    Draws are uniform over the joint box; states whose sliders overrun the
    rail are rejected, which keeps the result uniform over the valid set.
    """
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))
    lo, hi = _joint_bounds(p)
    kept: list[np.ndarray] = []
    have = 0
    while have < CHUNK:
        draw = lo + (hi - lo) * rng.random((CHUNK, 6))
        draw = draw[draw[:, 0] + draw[:, 1] + p.carriage <= p.rail_length]
        kept.append(draw)
        have += len(draw)
    return np.vstack(kept)[:CHUNK]


def sample_states(p: StructuralParams, n: int, seed: int) -> np.ndarray:
    """``n`` joint states drawn uniformly from the valid joint set.

    Chunk ``k`` uses its own derived stream, so any range of chunks can be
    generated independently and the first ``m`` states of a larger draw equal
    a draw of ``m``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    chunks = [_chunk_states(p, seed, k) for k in range(-(-n // CHUNK))]
    return np.vstack(chunks)[:n]


def sample_workspace(p: StructuralParams, n: int, seed: int) -> WorkspaceCloud:
    states = sample_states(p, n, seed)
    return WorkspaceCloud(fk_positions(states, p), states, seed, ALGORITHM_ID, p.digest())


@dataclass(frozen=True)
class Envelope:
    lower: np.ndarray
    upper: np.ndarray

    @property
    def span(self) -> np.ndarray:
        return self.upper - self.lower

    def contains(self, pts, tol: float = 0.0) -> bool:
        pts = np.atleast_2d(pts)
        return bool(np.all(pts >= self.lower - tol) and np.all(pts <= self.upper + tol))

    def as_dict(self) -> dict:
        return {
            "x": [float(self.lower[0]), float(self.upper[0])],
            "y": [float(self.lower[1]), float(self.upper[1])],
            "z": [float(self.lower[2]), float(self.upper[2])],
        }


def envelope(cloud: WorkspaceCloud) -> Envelope:
    if cloud.sample_count == 0:
        raise ValueError("envelope of an empty cloud")
    return Envelope(cloud.positions.min(axis=0), cloud.positions.max(axis=0))


def occupied_cells(positions: np.ndarray, voxel: float) -> np.ndarray:
    """Unique integer voxel indices, shape ``(k, 3)``."""
    idx = np.floor(np.asarray(positions, dtype=float) / voxel).astype(np.int64)
    return np.unique(idx, axis=0)


def voxel_volume(cloud: WorkspaceCloud, voxel: float = 10.0) -> float:
    """Occupied-cell count times the cell volume (mm^3)."""
    if not voxel > 0:
        raise ValueError("voxel size must be positive")
    if cloud.sample_count == 0:
        raise ValueError("volume of an empty cloud")
    return len(occupied_cells(cloud.positions, voxel)) * voxel**3


def export_cloud(cloud: WorkspaceCloud, destination, metadata: bool = True) -> Path:
    """Write the cloud as CSV (full precision, sampling order) plus a JSON sidecar."""
    path = Path(destination)
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CLOUD_HEADER)
            for pos, state in zip(cloud.positions, cloud.states):
                writer.writerow([repr(float(v)) for v in (*pos, *state)])
        if metadata:
            sidecar = path.with_name(path.name + ".meta.json")
            sidecar.write_text(json.dumps(cloud.metadata(), indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write point cloud to {path}: {exc}") from exc
    return path


def read_cloud(source) -> WorkspaceCloud:
    path = Path(source)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CLOUD_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        rows = np.array([[float(v) for v in row] for row in reader], dtype=float).reshape(-1, 9)
    meta = {}
    sidecar = path.with_name(path.name + ".meta.json")
    if sidecar.exists():
        meta = json.loads(sidecar.read_text(encoding="utf-8"))
    return WorkspaceCloud(
        rows[:, :3],
        rows[:, 3:],
        meta.get("seed"),
        meta.get("algorithm", ALGORITHM_ID),
        meta.get("params_digest", ""),
    )
