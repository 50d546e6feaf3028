"""Grasp poses as ``[R t w]`` and as ``[v d r t w]``.

Frame convention: the gripper approaches along its local x axis, so the first
column of ``R`` is the approach vector ``v``. ``compose_rotation(v, r)`` is the
shortest-arc rotation taking x onto ``v`` followed by a turn of ``r`` radians
about ``v``; equivalently ``align(v) @ rot_x(r)``.

Near the antipode (``v`` within ``ANTIPODAL_TOL`` of ``-x``, measured as
``1 + v_x``) the shortest arc is ill-defined. There the alignment is a half
turn about z followed by the shortest arc from x to the mirrored direction
``(-v_x, -v_y, v_z)``; at ``v = -x`` exactly it is ``diag(-1, -1, 1)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

ROTATION_TOL = 1e-9
UNIT_TOL = 1e-6
ANTIPODAL_TOL = 1e-6
APPROACH_AXIS = np.array([1.0, 0.0, 0.0])
_HALF_TURN_Z = np.diag([-1.0, -1.0, 1.0])


def validate_rotation(R) -> bool:
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        return False
    if abs(np.linalg.det(R) - 1.0) > ROTATION_TOL:
        return False
    return bool(np.all(np.abs(R.T @ R - np.eye(3)) <= ROTATION_TOL))


def _unit(v, name="vector") -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (3,) or not np.all(np.isfinite(v)):
        raise InvalidInputError(f"{name} must be a finite 3-vector")
    if abs(np.linalg.norm(v) - 1.0) > UNIT_TOL:
        raise InvalidInputError(f"{name} must have unit norm, got {np.linalg.norm(v)}")
    return v


def rot_x(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _shortest_arc_from_x(v: np.ndarray) -> np.ndarray:
    # Rodrigues with axis x cross v = (0, -vz, vy) and cos = vx.
    c = v[0]
    k = np.array([0.0, -v[2], v[1]])
    K = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + K + (K @ K) / (1.0 + c)


def align_approach(v) -> np.ndarray:
    """Rotation taking the gripper's approach axis onto ``v``."""
    v = _unit(v, "approach")
    if 1.0 + v[0] < ANTIPODAL_TOL:
        return _HALF_TURN_Z @ _shortest_arc_from_x(_HALF_TURN_Z @ v)
    return _shortest_arc_from_x(v)


def wrap_angle(angle: float) -> float:
    """Map to ``[-pi, pi)``."""
    wrapped = (angle + math.pi) % (2.0 * math.pi) - math.pi
    return -math.pi if wrapped >= math.pi else wrapped


def compose_rotation(approach, in_plane: float) -> np.ndarray:
    return align_approach(approach) @ rot_x(in_plane)


def decouple_rotation(R):
    """Split a rotation into ``(approach, in_plane)``; inverse of compose."""
    R = np.asarray(R, dtype=np.float64)
    if not validate_rotation(R):
        raise InvalidInputError("not a proper rotation matrix")
    v = R[:, 0].copy()
    v /= np.linalg.norm(v)
    M = align_approach(v).T @ R
    return v, wrap_angle(math.atan2(M[2, 1], M[1, 1]))


def approach_angle_deg(v1, v2) -> float:
    v1 = _unit(v1, "v1")
    v2 = _unit(v2, "v2")
    return math.degrees(math.acos(min(1.0, max(-1.0, float(v1 @ v2)))))


@dataclass(frozen=True)
class Grasp:
    rotation: np.ndarray
    translation: np.ndarray
    width: float

    def __post_init__(self):
        if not validate_rotation(self.rotation):
            raise InvalidInputError("grasp rotation is not a proper rotation")
        if self.width < 0:
            raise InvalidInputError("width must be non-negative")

    def decouple(self, depth: float = 0.0) -> "DecoupledGrasp":
        v, r = decouple_rotation(self.rotation)
        return DecoupledGrasp(v, depth, r, np.asarray(self.translation, dtype=np.float64),
                              self.width)

    def to_dict(self) -> dict:
        return {
            "rotation": [float(x) for x in np.asarray(self.rotation).ravel()],
            "translation": [float(x) for x in self.translation],
            "width": float(self.width),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Grasp":
        return cls(np.array(doc["rotation"], dtype=np.float64).reshape(3, 3),
                   np.array(doc["translation"], dtype=np.float64), float(doc["width"]))


@dataclass(frozen=True)
class DecoupledGrasp:
    approach: np.ndarray
    depth: float
    in_plane_rotation: float
    translation: np.ndarray
    width: float

    def __post_init__(self):
        v = np.asarray(self.approach, dtype=np.float64)
        if abs(np.linalg.norm(v) - 1.0) > 1e-12:
            raise InvalidInputError("approach must be a unit vector")
        if not -math.pi <= self.in_plane_rotation < math.pi:
            raise InvalidInputError("in-plane rotation must lie in [-pi, pi)")
        if self.width < 0:
            raise InvalidInputError("width must be non-negative")

    def compose(self) -> Grasp:
        return Grasp(compose_rotation(self.approach, self.in_plane_rotation),
                     np.asarray(self.translation, dtype=np.float64), self.width)

    def to_dict(self) -> dict:
        return {
            "approach": [float(x) for x in self.approach],
            "depth": float(self.depth),
            "in_plane_rotation": float(self.in_plane_rotation),
            "translation": [float(x) for x in self.translation],
            "width": float(self.width),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DecoupledGrasp":
        return cls(np.array(doc["approach"], dtype=np.float64), float(doc["depth"]),
                   float(doc["in_plane_rotation"]),
                   np.array(doc["translation"], dtype=np.float64), float(doc["width"]))


def grasps_to_json(grasps) -> str:
    return json.dumps([g.to_dict() for g in grasps])
