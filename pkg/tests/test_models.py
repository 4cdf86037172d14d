"""Benchmark model tests: substitution values, consistency, geometry."""

import numpy as np
import pytest
from matplotlib.path import Path

from dyndisc import models
from dyndisc.exceptions import DomainError


def central_difference_state(state, t, step=1e-6):
    return (np.asarray(state(t + step)) - np.asarray(state(t - step))) / (2 * step)


def test_trig_substitution():
    m = models.trig_model()
    np.testing.assert_allclose(m.field(np.array([0.0, 1.0, 0.0])), [1.0, 0.0, 1.0])
    np.testing.assert_allclose(m.analytic_state(0.0), [0.0, 1.0, 0.0])


def test_trig_domain_error():
    m = models.trig_model()
    with pytest.raises(DomainError):
        m.field(np.array([0.5, 0.0, 1.0]))


def test_trig_analytic_consistency():
    # field equation residual at 100 random times, derivative by central diff
    m = models.trig_model()
    rng = np.random.default_rng(0)
    for t in rng.uniform(0.01, 0.99, size=100):
        lhs = central_difference_state(m.analytic_state, t)
        rhs = m.field(m.analytic_state(t))
        assert np.max(np.abs(lhs - rhs)) < 1e-8


def test_lorenz_substitution():
    m = models.lorenz_model()
    np.testing.assert_allclose(m.field(np.array([-8.0, 7.0, 27.0])), [150.0, -15.0, -128.0])
    np.testing.assert_allclose(m.field(np.zeros(3)), [0.0, 0.0, 0.0])
    np.testing.assert_allclose(m.default_x0, [-8.0, 7.0, 27.0])


def test_glycolytic_initial_value():
    m = models.glycolytic_model()
    np.testing.assert_allclose(
        m.default_x0, [1.125, 0.95, 0.075, 0.16, 0.265, 0.7, 0.092]
    )
    assert m.dim == 7


def test_glycolytic_coupling_vanishes():
    m = models.glycolytic_model()
    x = np.array([1.0, 0.9, 0.1, 0.2, 0.3, 0.7, 0.2])
    x[6] = x[3]  # S_7 = S_4 kills the kappa coupling
    f = m.field(x)
    p = m.params
    # rows 4 and 7 reduce to their non-coupling parts
    v3 = p["k3"] * x[2] * (p["A"] - x[5])
    v4 = p["k4"] * x[3] * x[4]
    assert f[3] == pytest.approx(v3 - v4)
    assert f[6] == pytest.approx(-p["k"] * x[6])


def test_glycolytic_trajectory_positive_bounded():
    m = models.glycolytic_model()
    dense = models.reference_trajectory(m)
    assert np.all(dense.states > 0.0)
    assert np.all(dense.states < 10.0)


def test_glycolytic_oscillates():
    m = models.glycolytic_model()
    data = models.sample_model(m, 1000)
    s1 = data.states[:, 0]
    interior = (s1[1:-1] > s1[:-2]) & (s1[1:-1] > s1[2:])
    assert int(np.sum(interior)) >= 2


def test_glycolytic_param_override():
    m = models.glycolytic_model({"k1": 50.0})
    assert m.params["k1"] == 50.0
    with pytest.raises(ValueError):
        models.glycolytic_model({"nope": 1.0})


def test_planar_substitution():
    m = models.planar_model()
    np.testing.assert_allclose(m.field(np.array([-0.5, 0.5])), [-0.5, 0.0])
    np.testing.assert_allclose(m.field(np.array([0.0, 2.0])), [0.0, 2.0])


def test_region_spec_endpoints():
    spec = models.default_region_spec()
    np.testing.assert_allclose(spec.start, [-0.5, 0.5])
    np.testing.assert_allclose(spec.end, [-0.5, 1.0])
    pts = spec.initial_points()
    assert pts.shape == (10, 2)
    np.testing.assert_allclose(pts[:, 0], -0.5)


def test_region_dataset_counts_and_bounds():
    m = models.planar_model()
    spec = models.default_region_spec(n_trajectories=10)
    data = models.region_dataset(m, spec, N=10)
    assert data.states.shape == (10, 11, 2)
    # on the segment x1 = -0.5 < 0 and x2 > 0, so x1' = 2 x1 x2 < 0:
    # first coordinates can only move left of the segment
    assert np.all(data.states[:, :, 0] <= -0.5 + 1e-12)


def test_region_dataset_two_trajectories():
    m = models.planar_model()
    spec = models.default_region_spec(n_trajectories=2)
    data = models.region_dataset(m, spec, N=5)
    assert data.n_trajectories == 2
    np.testing.assert_allclose(data.states[0, 0], spec.start)
    np.testing.assert_allclose(data.states[1, 0], spec.end)


def test_region_nesting():
    m = models.planar_model()
    coarse = models.region_dataset(m, models.default_region_spec(n_trajectories=4), N=5)
    fine = models.region_dataset(m, models.default_region_spec(n_trajectories=7), N=5)
    # 4 points at spacing 1/3 sit inside 7 points at spacing 1/6
    np.testing.assert_allclose(coarse.states, fine.states[::2], atol=1e-12)


def test_region_points_inside_boundary_polygon():
    m = models.planar_model()
    spec = models.default_region_spec(n_trajectories=6)
    data = models.region_dataset(m, spec, N=8)
    poly = models.region_boundary_polygon(m, spec, samples_per_edge=400)
    path = Path(poly)
    pts = data.states.reshape(-1, 2)
    # buffer covers chord sagitta of the sampled boundary curves
    inside = path.contains_points(pts, radius=1e-4) | path.contains_points(pts, radius=-1e-4)
    assert np.all(inside)


def test_region_sampler_deterministic():
    m = models.planar_model()
    sampler = models.RegionSampler(m, models.default_region_spec(4))
    a = sampler.sample(64, np.random.default_rng(5))
    b = models.RegionSampler(m, models.default_region_spec(4)).sample(
        64, np.random.default_rng(5)
    )
    np.testing.assert_array_equal(a, b)


def test_network_governed_zero_nets():
    from dyndisc.fnn import FnnArchitecture, FnnParams, init_params

    arch = FnnArchitecture.uniform(3, 2, 4)
    nets = []
    for seed in range(3):
        p = init_params(arch, seed)
        p.out[:] = 0.0
        nets.append(p)
    m = models.network_governed_model(nets)
    assert m.dim == 3
    np.testing.assert_allclose(m.field(np.array([0.3, -1.0, 2.0])), np.zeros(3))
    np.testing.assert_allclose(m.field(np.zeros((5, 3))), np.zeros((5, 3)))


def test_sample_model_analytic_vs_integrated():
    m = models.trig_model()
    analytic = models.sample_model(m, 16)
    assert analytic.origin == "analytic"
    forced = models.sample_model(m, 16, force_integration=True)
    assert forced.origin == "integrated"
    assert np.max(np.abs(analytic.states - forced.states)) < 1e-9


def test_registry():
    assert models.model_names() == ["glycolytic", "lorenz", "planar", "trig"]
    m = models.get_model("lorenz")
    assert m.name == "lorenz"
    with pytest.raises(ValueError):
        models.get_model("unknown")
    with pytest.raises(ValueError):
        models.get_model("trig", {"a": 1.0})
