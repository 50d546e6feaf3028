import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import angle_deg
from robustgrasp.errors import InvalidInputError
from robustgrasp.grasp_repr import (
    APPROACH_AXIS,
    DecoupledGrasp,
    Grasp,
    approach_angle_deg,
    compose_rotation,
    decouple_rotation,
    grasps_to_json,
    rot_x,
    validate_rotation,
    wrap_angle,
)


def unit_vectors():
    return st.tuples(*[st.floats(-1, 1)] * 3).map(np.array).filter(
        lambda v: np.linalg.norm(v) > 1e-3).map(lambda v: v / np.linalg.norm(v))


def random_unit(rng):
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


class TestValidate:
    def test_identity(self):
        assert validate_rotation(np.eye(3))

    def test_perturbed_identity(self):
        R = np.eye(3)
        R[0, 1] = 0.1
        assert not validate_rotation(R)

    def test_reflection_rejected(self):
        assert not validate_rotation(np.diag([1.0, 1.0, -1.0]))

    def test_wrong_shape_or_nan(self):
        assert not validate_rotation(np.eye(2))
        bad = np.eye(3)
        bad[0, 0] = np.nan
        assert not validate_rotation(bad)


class TestCompose:
    def test_canonical_axis_no_turn_is_identity(self):
        np.testing.assert_allclose(compose_rotation(APPROACH_AXIS, 0.0), np.eye(3), atol=1e-15)

    def test_canonical_axis_quarter_turn(self):
        R = compose_rotation(APPROACH_AXIS, math.pi / 2)
        expected = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]])
        np.testing.assert_allclose(R, expected, atol=1e-15)

    def test_first_column_is_approach(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            v = random_unit(rng)
            R = compose_rotation(v, rng.uniform(-math.pi, math.pi))
            assert validate_rotation(R)
            assert np.max(np.abs(R[:, 0] - v)) < 1e-9

    def test_in_plane_turn_about_approach(self):
        v = np.array([0.0, 0.6, 0.8])
        a, b = compose_rotation(v, 0.3), compose_rotation(v, 1.1)
        # Rotating by the difference about v maps one frame to the other.
        rel = b @ a.T
        np.testing.assert_allclose(rel @ v, v, atol=1e-14)
        assert math.acos((np.trace(rel) - 1) / 2) == pytest.approx(0.8, abs=1e-12)

    def test_antipodal_is_fixed_half_turn(self):
        R = compose_rotation(-APPROACH_AXIS, 0.0)
        np.testing.assert_array_equal(R, np.diag([-1.0, -1.0, 1.0]))

    def test_near_antipodal_continuity(self):
        for eps in (1e-3, 1e-5, 1e-7, 1e-9):
            v = np.array([-1.0, eps, 0.0])
            v /= np.linalg.norm(v)
            R = compose_rotation(v, 0.4)
            assert validate_rotation(R)
            assert np.max(np.abs(R[:, 0] - v)) < 1e-12

    def test_rejects_non_unit(self):
        with pytest.raises(InvalidInputError):
            compose_rotation([1.0, 1.0, 0.0], 0.0)
        with pytest.raises(InvalidInputError):
            compose_rotation([1.0, 0.0], 0.0)


class TestDecouple:
    def test_identity(self):
        v, r = decouple_rotation(np.eye(3))
        np.testing.assert_array_equal(v, APPROACH_AXIS)
        assert r == 0.0

    def test_round_trip(self):
        rng = np.random.default_rng(1)
        worst = 0.0
        for _ in range(1000):
            v, r = random_unit(rng), rng.uniform(-math.pi, math.pi)
            R = compose_rotation(v, r)
            v2, r2 = decouple_rotation(R)
            worst = max(worst, np.max(np.abs(compose_rotation(v2, r2) - R)))
            assert abs(wrap_angle(r2 - r)) < 1e-9
        assert worst < 1e-9

    @pytest.mark.parametrize("r", [-math.pi, -1.0, 0.0, 2.5])
    def test_antipodal_round_trip(self, r):
        R = compose_rotation(-APPROACH_AXIS, r)
        v, r2 = decouple_rotation(R)
        np.testing.assert_array_equal(v, -APPROACH_AXIS)
        assert np.max(np.abs(compose_rotation(v, r2) - R)) < 1e-15

    def test_rejects_invalid(self):
        with pytest.raises(InvalidInputError):
            decouple_rotation(2 * np.eye(3))

    def test_wrap_range(self):
        assert wrap_angle(math.pi) == -math.pi
        assert wrap_angle(3 * math.pi / 2) == pytest.approx(-math.pi / 2)
        for a in np.linspace(-20, 20, 101):
            w = wrap_angle(a)
            assert -math.pi <= w < math.pi
            assert math.cos(w) == pytest.approx(math.cos(a), abs=1e-12)


class TestApproachAngle:
    def test_identical(self):
        assert approach_angle_deg(APPROACH_AXIS, APPROACH_AXIS) == 0.0

    def test_orthogonal(self):
        assert approach_angle_deg([1, 0, 0], [0, 1, 0]) == 90.0

    def test_gate_boundary(self):
        a = math.radians(5.0)
        assert abs(approach_angle_deg([1, 0, 0], [math.cos(a), math.sin(a), 0]) - 5.0) < 1e-9

    def test_clamped_for_rounding(self):
        v = np.array([1.0, 1e-9, 0.0])
        assert approach_angle_deg(v / np.linalg.norm(v), v / np.linalg.norm(v)) == 0.0

    @given(unit_vectors(), unit_vectors())
    def test_symmetric_and_in_range(self, a, b):
        d = approach_angle_deg(a, b)
        assert d == approach_angle_deg(b, a)
        assert 0.0 <= d <= 180.0
        # arccos is ill-conditioned near 0 and 180 degrees, so compare cosines.
        assert math.cos(math.radians(d)) == pytest.approx(float(a @ b), abs=1e-12)
        assert d == pytest.approx(angle_deg(a, b), abs=1e-5)

    @settings(max_examples=100)
    @given(unit_vectors(), unit_vectors(), unit_vectors())
    def test_triangle_inequality(self, a, b, c):
        assert approach_angle_deg(a, c) <= approach_angle_deg(a, b) + approach_angle_deg(b, c) + 1e-6


class TestGraspRecords:
    def test_decouple_compose_round_trip(self):
        R = compose_rotation(np.array([0.0, 0.0, 1.0]), 0.7)
        g = Grasp(R, np.array([0.1, 0.2, 0.3]), 0.05)
        d = g.decouple(depth=0.02)
        assert d.depth == 0.02 and d.width == 0.05
        np.testing.assert_array_equal(d.translation, g.translation)
        np.testing.assert_allclose(d.compose().rotation, R, atol=1e-12)

    def test_json(self):
        g = Grasp(rot_x(0.3), np.array([1.0, 2.0, 3.0]), 0.04)
        doc = json.loads(grasps_to_json([g]))[0]
        assert len(doc["rotation"]) == 9 and doc["width"] == 0.04
        back = Grasp.from_dict(doc)
        np.testing.assert_array_equal(back.rotation, g.rotation)
        d = g.decouple(0.01)
        assert DecoupledGrasp.from_dict(d.to_dict()).to_dict() == d.to_dict()

    def test_invalid_records(self):
        with pytest.raises(InvalidInputError):
            Grasp(np.eye(3), np.zeros(3), -0.1)
        with pytest.raises(InvalidInputError):
            Grasp(2 * np.eye(3), np.zeros(3), 0.1)
        with pytest.raises(InvalidInputError):
            DecoupledGrasp(np.array([1.0, 0, 0]), 0.0, math.pi, np.zeros(3), 0.1)
