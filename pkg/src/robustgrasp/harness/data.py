"""Seeded synthetic datasets: Gaussian blobs and grasp corpora."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import InvalidInputError


@dataclass(frozen=True)
class BlobParams:
    n_train: int = 600
    n_test: int = 600
    classes: int = 3
    dimension: int = 2
    cluster_spread: float = 1.0
    center_scale: float = 1.0

    def __post_init__(self):
        if self.classes < 2 or self.dimension < 1:
            raise InvalidInputError("blobs need classes >= 2 and dimension >= 1")
        if self.n_train < 1 or self.n_test < 0 or self.cluster_spread < 0:
            raise InvalidInputError("invalid blob sizes or spread")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Dataset:
    x_train: np.ndarray
    y_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray

    def to_dict(self) -> dict:
        return {
            "x_train": self.x_train.tolist(),
            "y_train": self.y_train.tolist(),
            "x_test": self.x_test.tolist(),
            "y_test": self.y_test.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Dataset":
        def feats(rows):
            return np.array(rows, dtype=np.float64).reshape(len(rows), -1)
        return cls(feats(doc["x_train"]), np.array(doc["y_train"], dtype=np.int64),
                   feats(doc["x_test"]), np.array(doc["y_test"], dtype=np.int64))


def _balanced_labels(n: int, classes: int, rng) -> np.ndarray:
    return rng.permutation(np.arange(n) % classes)


def gen_blobs(params: BlobParams, seed: int) -> Dataset:
    """Isotropic Gaussian clusters around seeded centers.

    Centers are drawn from ``N(0, center_scale**2 I)``; each point adds
    ``N(0, cluster_spread**2 I)`` noise. Class counts are as equal as
    ``n % classes`` allows.
    """
    rng = np.random.default_rng(seed)
    centers = rng.normal(0.0, params.center_scale, size=(params.classes, params.dimension))

    def draw(n):
        y = _balanced_labels(n, params.classes, rng)
        x = centers[y] + rng.normal(0.0, params.cluster_spread, size=(n, params.dimension))
        return x, y.astype(np.int64)

    x_train, y_train = draw(params.n_train)
    x_test, y_test = draw(params.n_test)
    return Dataset(x_train, y_train, x_test, y_test)


def rotation_bin(angle, bins: int) -> np.ndarray:
    """Class index of an angle in ``[0, 2 pi)`` split into equal sectors."""
    a = np.mod(np.asarray(angle, dtype=np.float64), 2.0 * math.pi)
    return np.minimum((a / (2.0 * math.pi) * bins).astype(np.int64), bins - 1)


@dataclass(frozen=True)
class GraspTaskParams:
    """Rotation-class prediction from noisy observations of the in-plane angle.

    Features are ``radius * (cos r, sin r)`` plus ``dimension - 2`` pure-noise
    coordinates, all with ``cluster_spread`` Gaussian noise; the label is the
    sector of ``r`` among ``classes`` equal sectors of ``[0, 2 pi)``.
    """

    n_train: int = 600
    n_test: int = 600
    classes: int = 6
    dimension: int = 2
    cluster_spread: float = 0.2
    radius: float = 1.0

    def __post_init__(self):
        if self.classes < 2 or self.dimension < 2:
            raise InvalidInputError("grasp task needs classes >= 2 and dimension >= 2")
        if self.n_train < 1 or self.n_test < 0 or self.cluster_spread < 0:
            raise InvalidInputError("invalid grasp task sizes or spread")

    def to_dict(self) -> dict:
        return asdict(self)


def grasp_features(angles, params: GraspTaskParams, rng) -> np.ndarray:
    angles = np.asarray(angles, dtype=np.float64)
    x = np.zeros((angles.shape[0], params.dimension))
    x[:, 0] = params.radius * np.cos(angles)
    x[:, 1] = params.radius * np.sin(angles)
    return x + rng.normal(0.0, params.cluster_spread, size=x.shape)


def gen_grasp_classification(params: GraspTaskParams, seed: int):
    """Returns ``(dataset, train_angles)``; angles feed the multiplicative noise."""
    rng = np.random.default_rng(seed)
    a_train = rng.uniform(0.0, 2.0 * math.pi, size=params.n_train)
    a_test = rng.uniform(0.0, 2.0 * math.pi, size=params.n_test)
    ds = Dataset(grasp_features(a_train, params, rng), rotation_bin(a_train, params.classes),
                 grasp_features(a_test, params, rng), rotation_bin(a_test, params.classes))
    return ds, a_train
