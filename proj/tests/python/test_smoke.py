import json

import numpy as np
import pytest

import latscat


def test_fibonacci_directions_are_unit_vectors():
    d = latscat.fibonacci_directions(64)
    assert d.shape == (64, 3)
    np.testing.assert_allclose(np.linalg.norm(d, axis=1), 1.0, atol=1e-14)
    with pytest.raises(latscat.NonPositiveN):
        latscat.fibonacci_directions(0)


def test_loss_matches_numpy():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(3, 5)) + 1j * rng.normal(size=(3, 5))
    b = rng.normal(size=(3, 5)) + 1j * rng.normal(size=(3, 5))
    expected = np.sum(np.abs(a - b) ** 2) / (2 * a.size)
    assert latscat.loss(a, b) == pytest.approx(expected, rel=1e-14)
    with pytest.raises(latscat.DimensionMismatch):
        latscat.loss(a, b[:, :4])


def test_adam_first_step_moves_by_alpha_against_the_sign():
    z = np.array([0.3, -1.0, 2.0])
    g = np.array([4.0, -0.5, 1e-3])
    state, z1 = latscat.adam_step(latscat.AdamState(3), z, g, 0.01)
    assert state.step == 1
    # No bias correction: the first step is alpha * 0.1 / sqrt(0.001) per coordinate.
    np.testing.assert_allclose(z1 - z, -0.01 * (0.1 / np.sqrt(0.001)) * np.sign(g), rtol=1e-3)


def test_mesh_far_field_agrees_with_sphere_series():
    k = np.pi
    vertices, faces = latscat.sphere_surface(0.5, 0.1)
    d = np.array([[0.0, 0.0, 1.0]])
    xhat = latscat.fibonacci_directions(12)
    u = latscat.far_field(vertices, faces, k, d, xhat)
    exact = latscat.mie_far_field(0.5, k, d[0], xhat)
    assert u.shape == (1, 12)
    assert np.linalg.norm(u[0] - exact) / np.linalg.norm(exact) < 0.03


def test_analytic_gradient_points_downhill():
    fam = latscat.AnalyticFamily()
    k = np.pi
    inc = latscat.fibonacci_directions(2)
    obs = latscat.fibonacci_directions(20)
    data = np.array([latscat.mie_far_field(0.4, k, d, obs) for d in inc])
    z = fam.sphere(0.3)
    loss0, grad = latscat.analytic_loss_and_gradient(z, k, inc, obs, data, h=0.1)
    assert grad.shape == (fam.latent_dim,)
    step = 0.02 * grad / np.linalg.norm(grad)
    loss1, _ = latscat.analytic_loss_and_gradient(z - step, k, inc, obs, data, h=0.1)
    assert loss1 < loss0


def test_run_config_defaults_and_strictness():
    filled = json.loads(latscat.parse_run_config(json.dumps({"schema_version": 1})))
    assert filled["measurement"]["incident"] == 4
    with pytest.raises(latscat.ConfigError):
        latscat.parse_run_config(json.dumps({"schema_version": 1, "bogus": 1}))


def test_simulate_and_reconstruct_round_trip(tmp_path):
    config = {
        "schema_version": 1,
        "measurement": {"k": float(np.pi), "incident": 1, "observation": 12},
        "optimizer": {"learning_rate": 0.02},
        "stop": {"max_iters": 2},
        "grid": {"h": 0.12},
        "indicator_grid": {"h": 0.1},
        "target": {"kind": "sphere", "radius": 0.45, "refine": False},
        "output": {"save_meshes": False},
    }
    text = json.dumps(config)
    data_path = tmp_path / "data.txt"
    latscat.simulate(text, str(data_path))
    data = latscat.read_far_field(str(data_path))
    assert data["values"].shape == (1, 12)
    z, losses, indicator = latscat.reconstruct(text, str(data_path), str(tmp_path / "run"))
    assert len(losses) == 3
    assert len(indicator) == 3 and all(i >= 0 for i in indicator)
    assert (tmp_path / "run" / "latent_final.csv").exists()
    assert z.shape == (7,)
