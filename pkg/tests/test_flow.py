import math

import numpy as np
import pytest

from evcam import flow
from evcam.errors import ConfigError, ShapeError

import oracles


class TestFlowConfig:
    def test_bad_mode(self):
        with pytest.raises(ConfigError):
            flow.FlowConfig(mode="spiral")

    def test_fixed_theta_range(self):
        with pytest.raises(ConfigError):
            flow.FlowConfig(mode="fixed", theta=4.0)
        flow.FlowConfig(mode="fixed", theta=-math.pi)  # boundary ok

    def test_seed_range(self):
        with pytest.raises(ConfigError):
            flow.FlowConfig(seed=-1)
        flow.FlowConfig(seed=2**64 - 1)


class TestFixedMode:
    def test_theta_zero(self):
        f = flow.generate_flow(5, 3, flow.FlowConfig(mode="fixed", theta=0.0))
        np.testing.assert_array_equal(f.vx, 1.0)
        np.testing.assert_array_equal(f.vy, 0.0)

    def test_theta_half_pi(self):
        f = flow.generate_flow(4, 4, flow.FlowConfig(mode="fixed", theta=math.pi / 2))
        assert np.max(np.abs(f.vx)) <= 1e-7
        np.testing.assert_allclose(f.vy, 1.0, atol=1e-7)


class TestRandomMode:
    def test_statistics_and_norm(self):
        f = flow.generate_flow(64, 64, flow.FlowConfig(mode="random", seed=42))
        assert abs(float(f.vx.mean())) < 0.05
        assert abs(float(f.vy.mean())) < 0.05
        norm = f.vx.astype(np.float64) ** 2 + f.vy.astype(np.float64) ** 2
        assert np.max(np.abs(norm - 1.0)) < 1e-5

    def test_determinism(self):
        cfg = flow.FlowConfig(mode="random", seed=7)
        a = flow.generate_flow(33, 17, cfg)
        b = flow.generate_flow(33, 17, cfg)
        np.testing.assert_array_equal(a.vx, b.vx)
        np.testing.assert_array_equal(a.vy, b.vy)

    def test_value_depends_only_on_seed_and_coordinates(self):
        # enlarging the field must not change values at shared coordinates
        cfg = flow.FlowConfig(mode="random", seed=99)
        small = flow.generate_flow(16, 16, cfg)
        large = flow.generate_flow(64, 48, cfg)
        np.testing.assert_array_equal(small.vx, large.vx[:16, :16])
        np.testing.assert_array_equal(small.vy, large.vy[:16, :16])

    def test_matches_scalar_hash_oracle(self):
        cfg = flow.FlowConfig(mode="random", seed=1234)
        f = flow.generate_flow(8, 6, cfg)
        for y in range(6):
            for x in range(8):
                vx, vy = oracles.flow_vector(1234, x, y)
                assert f.vx[y, x] == vx
                assert f.vy[y, x] == vy

    def test_different_seeds_differ(self):
        a = flow.generate_flow(16, 16, flow.FlowConfig(mode="random", seed=1))
        b = flow.generate_flow(16, 16, flow.FlowConfig(mode="random", seed=2))
        assert not np.array_equal(a.vx, b.vx)


class TestFlowField:
    def test_unit_norm_enforced(self):
        with pytest.raises(ShapeError):
            flow.FlowField(vx=np.full((2, 2), 0.5, np.float32),
                           vy=np.full((2, 2), 0.5, np.float32))

    def test_negation(self):
        f = flow.generate_flow(6, 6, flow.FlowConfig(mode="random", seed=3))
        neg = f.negated()
        np.testing.assert_array_equal(neg.vx, -f.vx)
        np.testing.assert_array_equal(neg.vy, -f.vy)

    def test_bad_dims(self):
        with pytest.raises(ShapeError):
            flow.generate_flow(0, 4, flow.FlowConfig())


class TestDebugImage:
    def test_angle_to_hue_rendering(self):
        f = flow.generate_flow(8, 8, flow.FlowConfig(mode="fixed", theta=0.0))
        img = flow.flow_to_image(f)
        assert img.shape == (8, 8, 3)
        # theta=0 maps to hue 0.5 (cyan): zero red, full green and blue
        np.testing.assert_allclose(img[..., 0], 0.0, atol=1e-6)
        np.testing.assert_allclose(img[..., 1], 1.0, atol=1e-6)
        np.testing.assert_allclose(img[..., 2], 1.0, atol=1e-6)
