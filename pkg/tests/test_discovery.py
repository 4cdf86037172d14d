"""Loss functional and training-driver tests."""

import numpy as np
import pytest

from dyndisc import assembly, discovery, fnn, lmm
from dyndisc.discovery import LossSpec, TrainConfig, make_loss_spec
from dyndisc.integrate import TrajectoryData, stack_trajectories
from dyndisc.lmm import SchemeFamily, build_scheme
from dyndisc.models import sample_model, trig_model

AB = SchemeFamily.ADAMS_BASHFORTH
AM = SchemeFamily.ADAMS_MOULTON
BDF = SchemeFamily.BDF


def test_loss_plain_zero_on_constant_data():
    data = TrajectoryData(0.1, 10, np.full((11, 2), 4.0))
    scheme = build_scheme(AB, 2)
    assert discovery.loss_plain(lambda X: np.zeros(len(X)), data, 0, scheme) == 0.0


def test_loss_plain_single_term_when_N_equals_M():
    scheme = build_scheme(AB, 2)
    data = TrajectoryData(0.5, 2, np.arange(6, dtype=float).reshape(3, 2))
    # N = M: exactly one scheme residual in the mean
    c, q = assembly.assemble_rhs(scheme, data, 0)
    u = np.array([1.0, -2.0])  # values at the two involved points
    expected = (1.5 * u[1] - 0.5 * u[0] - q[0]) ** 2
    assert discovery.loss_plain(u, data, 0, scheme) == pytest.approx(expected)


def test_loss_plain_exact_field_truncation_scale():
    # substituting the exact field leaves only squared O(h^p) residuals
    model = trig_model()
    scheme = build_scheme(BDF, 2)
    h = 2.0**-6
    data = sample_model(model, int(round(1.0 / h)))
    loss = discovery.loss_plain(lambda X: model.field(X)[:, 0], data, 0, scheme)
    tau = assembly.truncation_residuals(scheme, data, model.field)[:, 0]
    assert loss == pytest.approx(float(np.mean(tau**2)), rel=1e-10)
    assert loss < (20.0 * h**2) ** 2


def test_loss_augmented_bdf_matches_plain_up_to_normalization():
    model = trig_model()
    scheme = build_scheme(BDF, 3)
    data = sample_model(model, 24)
    spec = make_loss_spec(scheme, with_aux=True)
    u = lambda X: model.field(X)[:, 1]
    idx = lmm.scheme_indices(scheme, data.N)
    plain = discovery.loss_plain(u, data, 1, scheme)
    aug = discovery.loss_augmented(u, data, 1, spec)
    # N_a = 0: identical sums, different divisors (here equal: t(N) = N-M+1)
    assert idx.aux_count == 0
    assert aug == pytest.approx(plain * (data.N - scheme.steps + 1) / idx.count)


def test_loss_augmented_exact_field_stable_constant():
    model = trig_model()
    scheme = build_scheme(AB, 2)
    spec = make_loss_spec(scheme)
    ratios = []
    for k in (4, 5, 6, 7):
        h = 2.0**-k
        data = sample_model(model, int(round(1.0 / h)))
        loss = discovery.loss_augmented(lambda X: model.field(X)[:, 0], data, 0, spec)
        ratios.append(loss / h**4)  # squared O(h^2) residuals
    ratios = np.array(ratios)
    assert np.max(ratios) / np.min(ratios) < 25.0


def test_loss_augmented_grid_solution_is_floor():
    model = trig_model()
    scheme = build_scheme(AB, 2)
    spec = make_loss_spec(scheme)
    data = sample_model(model, 64)
    result = assembly.grid_discovery(scheme, data, solver="fs")
    for j in range(3):
        loss = discovery.loss_augmented(result.values[:, j], data, j, spec)
        assert loss <= 1e-20


def test_loss_multi_identities():
    model = trig_model()
    scheme = build_scheme(AB, 2)
    spec = make_loss_spec(scheme)
    data = sample_model(model, 16)
    multi1 = stack_trajectories([data])
    multi2 = stack_trajectories([data, data])
    u = lambda X: model.field(X)[:, 2]
    single = discovery.loss_augmented(u, data, 2, spec)
    assert discovery.loss_multi(u, multi1, 2, spec) == pytest.approx(single)
    assert discovery.loss_multi(u, multi2, 2, spec) == pytest.approx(single)


def test_loss_constant_shift_algebra():
    # shifting u by c changes each scheme residual by c*sum(beta) exactly
    scheme = build_scheme(AB, 2)
    data = TrajectoryData(0.25, 8, np.full((9, 1), 2.0))
    base = discovery.loss_plain(np.zeros(8), data, 0, scheme)
    shifted = discovery.loss_plain(np.full(8, 3.0), data, 0, scheme)
    beta_sum = float(sum(scheme.beta))
    assert base == 0.0
    assert shifted == pytest.approx((3.0 * beta_sum) ** 2)


@pytest.mark.parametrize("with_aux", [True, False])
def test_loss_gradients_match_finite_differences(with_aux):
    model = trig_model()
    scheme = build_scheme(AB, 2)
    spec = LossSpec(scheme, with_aux, lmm.fdm_stencil(scheme.order) if with_aux else None)
    data = sample_model(model, 12)
    design = discovery._Design(data, 0, spec)
    rng = np.random.default_rng(1)
    arch = fnn.FnnArchitecture.uniform(3, 2, 6)
    params = fnn.init_params(arch, seed=3)
    X = design.points

    def loss_fn(u):
        return design.value_and_outgrad(u)

    value, grad = fnn.loss_gradient(params, X, loss_fn)
    step = 1e-6
    checked = 0
    for _ in range(50):
        if checked >= 10:
            break
        direction = fnn.FnnParams(
            [rng.standard_normal(w.shape) for w in params.weights],
            [rng.standard_normal(b.shape) for b in params.biases],
            rng.standard_normal(params.out.shape),
        )
        plus, minus = params.copy(), params.copy()
        for arr_p, arr_m, dd in zip(plus.flat_arrays(), minus.flat_arrays(), direction.flat_arrays()):
            arr_p += step * dd
            arr_m -= step * dd
        # reject kink-crossing directions: activation signs must agree
        def signs(p):
            A = X
            sgn = []
            for W, b in zip(p.weights, p.biases):
                Z = A @ W.T + b
                sgn.append(Z > 0)
                A = np.maximum(Z, 0.0)
            return sgn
        if any(np.any(a != b) for a, b in zip(signs(plus), signs(minus))):
            continue
        checked += 1
        fd = (design.value(fnn.forward_batch(plus, X)) - design.value(fnn.forward_batch(minus, X))) / (2 * step)
        analytic = sum(float(np.sum(g * dd)) for g, dd in zip(grad.flat_arrays(), direction.flat_arrays()))
        assert abs(fd - analytic) / max(abs(fd), abs(analytic), 1e-12) < 1e-4
    assert checked == 10


def test_train_discovery_deterministic():
    model = trig_model()
    data = sample_model(model, 16)
    spec = make_loss_spec(build_scheme(BDF, 2))
    config = TrainConfig(fnn.FnnArchitecture.uniform(3, 2, 8), epochs=50, seed=7, record_every=10)
    a = discovery.train_discovery(data, spec, config, truth=model.field)
    b = discovery.train_discovery(data, spec, config, truth=model.field)
    assert [r.loss for r in a.history] == [r.loss for r in b.history]
    for na, nb in zip(a.nets, b.nets):
        for x, y in zip(na.flat_arrays(), nb.flat_arrays()):
            np.testing.assert_array_equal(x, y)


def test_train_discovery_learns_small_case():
    model = trig_model()
    data = sample_model(model, 32)
    spec = make_loss_spec(build_scheme(BDF, 2))
    config = TrainConfig(fnn.FnnArchitecture.uniform(3, 3, 32), epochs=1500, seed=0, record_every=500)
    result = discovery.train_discovery(data, spec, config, truth=model.field)
    assert not result.aborted
    assert result.history[-1].loss < result.history[0].loss
    assert result.history[-1].grid_error < 0.1
    assert len(result.nets) == 3


def test_train_discovery_history_epochs():
    model = trig_model()
    data = sample_model(model, 8)
    spec = make_loss_spec(build_scheme(AB, 1))
    config = TrainConfig(fnn.FnnArchitecture.uniform(3, 1, 4), epochs=25, seed=1, record_every=10)
    result = discovery.train_discovery(data, spec, config)
    assert [r.epoch for r in result.history] == [0, 10, 20, 25]
    assert all(np.isnan(r.grid_error) for r in result.history)
