import numpy as np
import pytest

from lbm.core import RngStream
from lbm.errors import FormatError, ShapeError
from lbm.model import (
    DriftModel,
    backward,
    default_widths,
    forward,
    init_params,
    load_checkpoint,
    param_count,
    save_checkpoint,
)


def random_model(widths, seed, cond_dim=0, bias_scale=0.3):
    m = init_params(widths, RngStream(seed), cond_dim=cond_dim)
    g = np.random.default_rng(seed)
    for _, b in m.layers():
        b[:] = bias_scale * g.standard_normal(b.shape)
    return m


def fd_gradient(m, zt, t, c, up, h=1e-4):
    """Central finite differences of <forward, up> w.r.t. every parameter."""
    out = np.zeros_like(m.params)
    for i in range(m.params.size):
        keep = m.params[i]
        m.params[i] = keep + h
        fp = np.sum(forward(m, zt, t, c) * up)
        m.params[i] = keep - h
        fm = np.sum(forward(m, zt, t, c) * up)
        m.params[i] = keep
        out[i] = (fp - fm) / (2 * h)
    return out


def max_rel_err(a, b, floor=1e-8):
    keep = np.maximum(np.abs(a), np.abs(b)) > floor
    return float(np.max(np.abs(a - b)[keep] / np.maximum(np.abs(a), np.abs(b))[keep]))


class TestInit:
    def test_param_count(self):
        assert param_count([3, 4, 2]) == 26
        m = init_params([3, 4, 2], RngStream(0))
        assert m.params.size == 26

    def test_deterministic(self):
        a = init_params([3, 8, 2], RngStream(5)).params
        b = init_params([3, 8, 2], RngStream(5)).params
        np.testing.assert_array_equal(a, b)

    def test_zero_biases_and_scale(self):
        m = init_params([201, 300, 200], RngStream(1))
        for W, b in m.layers():
            assert np.all(b == 0)
        W0 = m.layers()[0][0]
        assert abs(W0.var() - 1 / 201) < 0.05 / 201

    @pytest.mark.parametrize("widths,cond", [([3], 0), ([4, 8, 2], 0), ([3, 8, 2], 1), ([3, 0, 2], 0)])
    def test_inconsistent_widths(self, widths, cond):
        with pytest.raises(ShapeError):
            init_params(widths, RngStream(0), cond_dim=cond)

    def test_default_widths(self):
        assert default_widths(4, 4) == (9, 128, 128, 4)
        assert default_widths(1, 0, (64, 64)) == (2, 64, 64, 1)


class TestForward:
    def test_zero_params(self, rng):
        m = DriftModel((3, 5, 2), np.zeros(param_count((3, 5, 2))))
        np.testing.assert_array_equal(forward(m, rng.standard_normal((4, 2)), 0.3), np.zeros((4, 2)))

    def test_identity_linear_layer(self, rng):
        m = DriftModel((4, 3), np.zeros(param_count((4, 3))))
        W, _ = m.layers()[0]
        W[:3, :3] = np.eye(3)
        z = rng.standard_normal((5, 3))
        np.testing.assert_array_equal(forward(m, z, rng.uniform(size=5)), z)

    def test_output_shape_rank4(self, rng):
        m = init_params(default_widths(8, 8, (16,)), RngStream(0), cond_dim=8)
        z, c = rng.standard_normal((3, 2, 2, 2)), rng.standard_normal((3, 2, 2, 2))
        assert forward(m, z, 0.5, c).shape == z.shape

    def test_condition_checks(self, rng):
        cm = init_params([5, 4, 2], RngStream(0), cond_dim=2)
        um = init_params([3, 4, 2], RngStream(0))
        z = rng.standard_normal((2, 2))
        with pytest.raises(ShapeError):
            forward(cm, z, 0.1)
        with pytest.raises(ShapeError):
            forward(um, z, 0.1, np.zeros((2, 2)))
        with pytest.raises(ShapeError):
            forward(cm, z, 0.1, np.zeros((2, 3)))
        with pytest.raises(ShapeError):
            forward(um, rng.standard_normal((2, 3)), 0.1)

    def test_condition_changes_output(self, rng):
        m = random_model([5, 8, 2], 0, cond_dim=2)
        z = rng.standard_normal((2, 2))
        assert not np.allclose(forward(m, z, 0.2, np.zeros((2, 2))), forward(m, z, 0.2, np.ones((2, 2))))

    def test_lipschitz_perturbation(self, rng):
        m = random_model([3, 16, 16, 2], 3)
        z = rng.standard_normal((1, 2))
        dz = np.zeros_like(z)
        dz[0, 1] = 1e-6
        # tanh is 1-Lipschitz, so the product of spectral norms bounds the map
        bound = np.prod([np.linalg.norm(W, 2) for W, _ in m.layers()])
        change = np.linalg.norm(forward(m, z + dz, 0.4) - forward(m, z, 0.4))
        assert 0 < change <= bound * 1e-6

    def test_batch_consistency(self, rng):
        m = random_model([3, 16, 2], 4)
        z, t = rng.standard_normal((6, 2)), rng.uniform(size=6)
        full = forward(m, z, t)
        rows = np.concatenate([forward(m, z[i : i + 1], t[i]) for i in range(6)])
        np.testing.assert_allclose(full, rows, atol=1e-6)


class TestBackward:
    @pytest.mark.parametrize("widths", [(3, 8, 2), (4, 8, 3)])
    @pytest.mark.parametrize("seed", range(10))
    def test_matches_finite_differences(self, seed, widths):
        g = np.random.default_rng(seed)
        m = random_model(widths, seed)
        z = g.standard_normal((4, widths[-1]))
        t = g.uniform(size=4)
        up = g.standard_normal((4, widths[-1]))
        fd = fd_gradient(m, z, t, None, up)
        assert max_rel_err(backward(m, z, t, None, up), fd) <= 1e-3

    def test_conditional_deep_net(self, rng):
        m = random_model([7, 6, 5, 2], 11, cond_dim=4)
        z, c, up = rng.standard_normal((3, 2)), rng.standard_normal((3, 4)), rng.standard_normal((3, 2))
        t = rng.uniform(size=3)
        assert max_rel_err(backward(m, z, t, c, up), fd_gradient(m, z, t, c, up)) <= 1e-3

    def test_zero_upstream(self, rng):
        m = random_model([3, 8, 2], 1)
        grad = backward(m, rng.standard_normal((4, 2)), 0.5, None, np.zeros((4, 2)))
        assert np.all(grad == 0)

    def test_linear_in_upstream(self, rng):
        m = random_model([3, 8, 2], 2)
        z, up = rng.standard_normal((4, 2)), rng.standard_normal((4, 2))
        np.testing.assert_array_equal(backward(m, z, 0.5, None, 2 * up), 2 * backward(m, z, 0.5, None, up))

    def test_upstream_shape_checked(self, rng):
        m = random_model([3, 8, 2], 2)
        with pytest.raises(ShapeError):
            backward(m, rng.standard_normal((4, 2)), 0.5, None, np.zeros((4, 3)))


class TestCheckpoint:
    def test_roundtrip(self, tmp_path):
        m = init_params([9, 16, 4], RngStream(0), cond_dim=4)
        save_checkpoint(tmp_path / "ck.lbmt", m)
        back = load_checkpoint(tmp_path / "ck.lbmt")
        assert back.widths == m.widths and back.cond_dim == 4
        np.testing.assert_array_equal(back.params, m.params.astype(np.float32))
        assert "widths=9,16,4" in (tmp_path / "ck.txt").read_text()

    def test_bad_sidecar(self, tmp_path):
        m = init_params([3, 4, 2], RngStream(0))
        save_checkpoint(tmp_path / "ck.lbmt", m)
        (tmp_path / "ck.txt").write_text("nonsense\n")
        with pytest.raises(FormatError):
            load_checkpoint(tmp_path / "ck.lbmt")
