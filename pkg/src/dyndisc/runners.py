"""Experiment runners: one function per CLI subcommand.

Each runner takes a resolved ExperimentConfig and an output directory and
writes delimited results, a reproducibility manifest, and (by default) a
rendered figure.  Cell failures are recorded in the rows and never abort
sibling cells.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import assembly, discovery, fnn, metrics, models, plots, stability
from .config import ExperimentConfig, ManifestWriter, write_csv
from .exceptions import ConfigError, DyndiscError
from .fnn import FnnArchitecture
from .integrate import (
    DenseTrajectory,
    TrajectoryData,
    integrate_fixed_rk4,
    read_trajectory_csv,
    sample_equidistant,
    write_trajectory_csv,
)
from .lmm import LmmScheme, SchemeFamily, build_scheme, scheme_indices
from .models import DynamicalModel


def _schemes(config: ExperimentConfig) -> list[LmmScheme]:
    return [
        build_scheme(SchemeFamily.parse(fam), M)
        for fam in config.families
        for M in config.steps
    ]


def _model(config: ExperimentConfig) -> DynamicalModel:
    return models.get_model(config.model, config.model_params or None)


def _steps_for(h: float, T: float) -> int:
    N = int(round(T / h))
    if N < 1 or abs(N * h - T) > 1e-9 * max(T, 1.0):
        raise ConfigError(f"h={h} does not divide T={T} into whole steps")
    return N


class _DataSource:
    """Equidistant samples of one model at many grid sizes, integrated once."""

    def __init__(self, model: DynamicalModel, T: Optional[float] = None, x0=None):
        self.model = model
        self.T = model.default_T if T is None else T
        self.x0 = x0
        self._dense: Optional[DenseTrajectory] = None

    def dense(self) -> DenseTrajectory:
        if self._dense is None:
            self._dense = models.reference_trajectory(self.model, self.T, self.x0)
        return self._dense

    def sample(self, N: int) -> TrajectoryData:
        if self.model.analytic_state is not None and self.x0 is None:
            return models.sample_model(self.model, N, self.T)
        return sample_equidistant(self.dense(), N)


def _grid_values_error(result, model, data) -> float:
    X = data.states[result.first : result.last + 1]
    return metrics.relative_l2(result.values, np.asarray(model.field(X), float))[0]


def _train_config(config: ExperimentConfig, input_dim: int, seed: int) -> discovery.TrainConfig:
    overrides = {}
    if config.width is not None:
        overrides["width"] = config.width
    if config.depth is not None:
        overrides["depth"] = config.depth
    if config.epochs is not None:
        overrides["epochs"] = config.epochs
    overrides["record_every"] = config.record_every
    return discovery.TrainConfig.profile(config.profile, input_dim, seed=seed, **overrides)


def _figures_dir(out_dir: Path) -> Path:
    d = Path(out_dir) / "figures"
    d.mkdir(parents=True, exist_ok=True)
    return d


# --------------------------------------------------------------------------
# simple table runners


def run_coeffs(config: ExperimentConfig, out_dir: Path) -> dict:
    manifest = ManifestWriter(config)
    schemes = _schemes(config)
    manifest.record_schemes(schemes)
    rows = []
    for s in schemes:
        for m in range(s.steps + 1):
            rows.append(
                [
                    s.family.value,
                    s.steps,
                    m,
                    str(s.alpha[m]),
                    str(s.beta[m]),
                    float(s.alpha[m]),
                    float(s.beta[m]),
                    s.order,
                ]
            )
    columns = ["family", "M", "index", "alpha", "beta", "alpha_decimal", "beta_decimal", "p"]
    write_csv(
        Path(out_dir) / "coeffs.csv",
        ["scheme coefficients, exact rationals with decimal companions",
         "alpha/beta: coefficient at lag index; p: truncation error order"],
        columns,
        rows,
    )
    manifest.write(out_dir)
    return {"rows": rows, "columns": columns}


def run_stability(config: ExperimentConfig, out_dir: Path) -> dict:
    manifest = ManifestWriter(config)
    schemes = _schemes(config)
    manifest.record_schemes(schemes)
    root_rows, scan_rows = [], []
    roots_by_label, scans_by_label = {}, {}
    for s in schemes:
        report = stability.classify(s)
        roots_by_label[s.label] = report.roots
        if report.roots.size == 0:
            root_rows.append([s.family.value, s.steps, "", "", "", report.classification.value])
        for r in report.roots:
            root_rows.append(
                [s.family.value, s.steps, float(r.real), float(r.imag), float(abs(r)),
                 report.classification.value]
            )
        if config.scan_N:
            samples = stability.boundedness_scan(s, sorted(config.scan_N))
            scans_by_label[s.label] = [(c.N, c.kappa2) for c in samples]
            for c in samples:
                scan_rows.append([s.family.value, s.steps, c.N, c.kappa2])
    write_csv(
        Path(out_dir) / "stability_roots.csv",
        ["window-polynomial roots and the resulting classification"],
        ["family", "M", "root_re", "root_im", "modulus", "classification"],
        root_rows,
    )
    if scan_rows:
        write_csv(
            Path(out_dir) / "stability_kappa.csv",
            ["kappa_2 of the augmented matrix versus grid size"],
            ["family", "M", "N", "kappa2"],
            scan_rows,
        )
    if config.figures:
        figs = _figures_dir(out_dir)
        all_roots = np.concatenate([r for r in roots_by_label.values() if r.size] or [np.zeros(0)])
        plots.stability_figure(figs / "roots.png", all_roots, ", ".join(roots_by_label))
        if scans_by_label:
            plots.condition_growth_figure(
                figs / "kappa_growth.png", scans_by_label, "condition number growth"
            )
    manifest.write(out_dir)
    return {"root_rows": root_rows, "scan_rows": scan_rows}


def run_gen_data(config: ExperimentConfig, out_dir: Path) -> dict:
    manifest = ManifestWriter(config)
    model = _model(config)
    T = config.T or model.default_T
    N = config.N or _steps_for(config.h_values[0], T)
    source = _DataSource(model, T, config.x0)
    data = source.sample(N)
    path = Path(out_dir) / "data.csv"
    write_trajectory_csv(
        path, data, comments=[f"model={model.name} T={T} N={N} origin={data.origin}"]
    )
    if config.figures:
        figs = _figures_dir(out_dir)
        plots.trajectory_compare_figure(
            figs / "trajectory.png", data.times, data.states, [], [],
            f"{model.name} trajectory", component=0,
        )
    manifest.write(out_dir)
    return {"path": str(path), "N": N}


# --------------------------------------------------------------------------
# discovery runners


def _load_or_sample(config: ExperimentConfig, model, h: float) -> TrajectoryData:
    if config.data_file:
        return read_trajectory_csv(config.data_file)
    T = config.T or model.default_T
    return _DataSource(model, T, config.x0).sample(_steps_for(h, T))


def run_grid_discover(config: ExperimentConfig, out_dir: Path) -> dict:
    manifest = ManifestWriter(config)
    model = _model(config)
    scheme = _schemes(config)[0]
    h = config.h_values[0]
    data = _load_or_sample(config, model, h)
    manifest.record_schemes([scheme])
    result = assembly.grid_discovery(
        scheme, data, solver=config.solver, tol=config.gmres_tol,
        max_iter=config.gmres_max_iter, restart=config.gmres_restart,
    )
    X = data.states[result.first : result.last + 1]
    truth = model.field(X)
    rows = []
    for i in range(result.values.shape[0]):
        n = result.first + i
        for j in range(data.dim):
            rows.append(
                [n, n * data.h, j + 1, float(result.values[i, j]), float(truth[i, j]),
                 float(abs(result.values[i, j] - truth[i, j]))]
            )
    write_csv(
        Path(out_dir) / "grid_discover.csv",
        [f"grid discovery: model={model.name} scheme={scheme.label} h={h} solver={config.solver}",
         "f_hat: recovered grid value; f_true: governing function at the sample"],
        ["n", "t_n", "component", "f_hat", "f_true", "abs_err"],
        rows,
    )
    err = _grid_values_error(result, model, data)
    manifest.record("grid_error", err)
    manifest.record("solver_converged", result.converged)
    if config.figures:
        figs = _figures_dir(out_dir)
        ts = data.h * np.arange(result.first, result.last + 1)
        plots.trajectory_compare_figure(
            figs / "recovered_field.png", ts, truth, [result.values],
            ["recovered"], f"{scheme.label} recovered field on the grid",
        )
    manifest.write(out_dir)
    return {"grid_error": err, "converged": result.converged}


def _history_rows(result) -> list:
    return [[r.epoch, r.loss, r.grid_error, r.test_error] for r in result.history]


def run_discover(config: ExperimentConfig, out_dir: Path) -> dict:
    manifest = ManifestWriter(config)
    model = _model(config) if not config.data_file else None
    scheme = _schemes(config)[0]
    h = config.h_values[0]
    data = _load_or_sample(config, model, h) if model else read_trajectory_csv(config.data_file)
    manifest.record_schemes([scheme])
    spec = discovery.make_loss_spec(scheme, with_aux=config.with_aux)
    seed = config.seeds[0]
    tc = _train_config(config, data.dim, seed)

    truth = model.field if model else None
    test_metric = None
    if model is not None and not config.data_file:
        source = _DataSource(model, config.T or model.default_T, config.x0)

        def test_metric(nets):
            evals = [(lambda X, p=p: fnn.forward_batch(p, X)) for p in nets]
            return metrics.test_error_trajectory(evals, model.field, source.dense())

    result = discovery.train_discovery(data, spec, tc, truth=truth, test_metric=test_metric)
    fnn.save_params(
        Path(out_dir) / "params.npz",
        result.nets,
        meta={
            "model": config.model if model else config.data_file,
            "scheme": scheme.label,
            "h": data.h,
            "seed": seed,
            "epochs": tc.epochs,
            "with_aux": config.with_aux,
            "profile": config.profile,
        },
    )
    write_csv(
        Path(out_dir) / "history.csv",
        [f"training history: scheme={scheme.label} h={data.h} seed={seed} aux={config.with_aux}",
         "e_train: relative l2 grid error (nan without truth); e_test: trajectory metric"],
        ["epoch", "loss", "e_train", "e_test"],
        _history_rows(result),
    )
    if config.figures:
        plots.history_figure(
            _figures_dir(out_dir) / "history.png",
            [[r.epoch, r.loss, r.grid_error, r.test_error] for r in result.history],
            f"{scheme.label} h={data.h}",
        )
    manifest.record("final_loss", float(np.sum(result.component_losses)))
    manifest.record("aborted", result.aborted)
    manifest.write(out_dir)
    return {"result": result}


def run_grid_converge(config: ExperimentConfig, out_dir: Path) -> dict:
    manifest = ManifestWriter(config)
    model = _model(config)
    schemes = _schemes(config)
    manifest.record_schemes(schemes)
    source = _DataSource(model, config.T or model.default_T, config.x0)
    rows, order_rows = [], []
    series = {}
    for scheme in schemes:
        pts = []
        for h in sorted(config.h_values, reverse=True):
            try:
                data = source.sample(_steps_for(h, source.T))
                result = assembly.grid_discovery(
                    scheme, data, solver=config.solver, tol=config.gmres_tol,
                    max_iter=config.gmres_max_iter, restart=config.gmres_restart,
                )
                err = _grid_values_error(result, model, data)
                rows.append(
                    [scheme.family.value, scheme.steps, h, err, "",
                     all(result.converged)]
                )
                pts.append((h, err))
            except DyndiscError as exc:
                rows.append([scheme.family.value, scheme.steps, h, "", type(exc).__name__, ""])
        if len(pts) >= 2:
            fit = metrics.convergence_order(pts)
            order_rows.append(
                [scheme.family.value, scheme.steps, fit.slope, fit.intercept, fit.r2,
                 f"{fit.window[0]}:{fit.window[1]}", len(pts)]
            )
            series[scheme.label] = pts
    write_csv(
        Path(out_dir) / "results.csv",
        [f"grid-path convergence: model={model.name} solver={config.solver}",
         "e_train: relative l2 grid error of the solved grid values; error: failed-cell tag"],
        ["family", "M", "h", "e_train", "error", "converged"],
        rows,
    )
    write_csv(
        Path(out_dir) / "orders.csv",
        ["least-squares log-log slopes over the h grid"],
        ["family", "M", "slope", "intercept", "r2", "slope_window", "n_points"],
        order_rows,
    )
    if config.figures and series:
        plots.error_decay_figure(
            _figures_dir(out_dir) / "error_decay.png", series,
            f"grid discovery error decay: {model.name}",
        )
    manifest.write(out_dir)
    return {"orders": order_rows, "rows": rows}


def run_net_converge(config: ExperimentConfig, out_dir: Path) -> dict:
    manifest = ManifestWriter(config)
    model = _model(config)
    schemes = _schemes(config)
    manifest.record_schemes(schemes)
    source = _DataSource(model, config.T or model.default_T, config.x0)
    aux_variants = [True, False] if config.compare_aux else [config.with_aux]
    rows = []
    medians: dict[tuple, list] = {}
    for scheme in schemes:
        for h in sorted(config.h_values, reverse=True):
            for aux in aux_variants:
                errs = []
                for seed in config.seeds:
                    try:
                        data = source.sample(_steps_for(h, source.T))
                        spec = discovery.make_loss_spec(scheme, with_aux=aux)
                        tc = _train_config(config, data.dim, seed)
                        result = discovery.train_discovery(data, spec, tc, truth=model.field)
                        e_train = result.history[-1].grid_error
                        evals = result.evaluators()
                        e_test = metrics.test_error_trajectory(evals, model.field, source.dense())
                        rows.append(
                            [scheme.family.value, scheme.steps, h, aux, seed,
                             e_train, e_test, float(np.sum(result.component_losses)), ""]
                        )
                        errs.append(e_train)
                    except DyndiscError as exc:
                        rows.append(
                            [scheme.family.value, scheme.steps, h, aux, seed,
                             "", "", "", type(exc).__name__]
                        )
                if errs:
                    medians.setdefault((scheme.label, aux), []).append(
                        (h, float(np.median(errs)))
                    )
    order_rows = []
    for (label, aux), pts in medians.items():
        if len(pts) >= 2:
            fit = metrics.convergence_order(pts)
            order_rows.append([label, aux, fit.slope, fit.r2, len(pts)])
    write_csv(
        Path(out_dir) / "results.csv",
        [f"network-path convergence: model={model.name} profile={config.profile}",
         "e_train: Eq-style relative l2 grid error; e_test: trajectory metric; seed medians feed orders.csv"],
        ["family", "M", "h", "aux", "seed", "e_train", "e_test", "final_loss", "error"],
        rows,
    )
    write_csv(
        Path(out_dir) / "orders.csv",
        ["slopes of per-h seed medians"],
        ["scheme", "aux", "slope", "r2", "n_points"],
        order_rows,
    )
    if config.figures and medians:
        series = {f"{label} (aux={aux})": pts for (label, aux), pts in medians.items()}
        plots.error_decay_figure(
            _figures_dir(out_dir) / "error_decay.png", series,
            f"network discovery error decay: {model.name} ({config.profile})",
        )
    manifest.write(out_dir)
    return {"rows": rows, "orders": order_rows}


def run_netsize(config: ExperimentConfig, out_dir: Path) -> dict:
    manifest = ManifestWriter(config)
    model = _model(config)
    scheme = _schemes(config)[0]
    manifest.record_schemes([scheme])
    h = config.h_values[0]
    source = _DataSource(model, config.T or model.default_T, config.x0)
    data = source.sample(_steps_for(h, source.T))
    spec = discovery.make_loss_spec(scheme, with_aux=config.with_aux)
    rows = []
    for depth in config.depths:
        for width in config.widths:
            arch = FnnArchitecture.uniform(data.dim, depth, width)
            epochs = config.epochs or discovery.PROFILES[config.profile]["epochs"]
            tc = discovery.TrainConfig(arch, epochs, seed=config.seeds[0],
                                       record_every=config.record_every)
            try:
                result = discovery.train_discovery(data, spec, tc, truth=model.field)
                e_train = result.history[-1].grid_error
                e_test = metrics.test_error_trajectory(
                    result.evaluators(), model.field, source.dense()
                )
                rows.append([width, depth, e_train, e_test,
                             float(np.sum(result.component_losses)), ""])
            except DyndiscError as exc:
                rows.append([width, depth, "", "", "", type(exc).__name__])
    write_csv(
        Path(out_dir) / "results.csv",
        [f"network size sweep: model={model.name} scheme={scheme.label} h={h}"],
        ["width", "depth", "e_train", "e_test", "final_loss", "error"],
        rows,
    )
    if config.figures:
        ok = [r for r in rows if r[2] != ""]
        if ok:
            plots.netsize_figure(
                _figures_dir(out_dir) / "netsize.png", ok,
                f"error vs network size: {model.name}",
            )
    manifest.write(out_dir)
    return {"rows": rows}


def run_opt_probe(config: ExperimentConfig, out_dir: Path) -> dict:
    """Optimization-error probe: regression-fit nets become the system to discover.

    Self-discovery has zero approximation error by construction, so its
    error isolates the optimizer's contribution; a paired run on the
    original field at the same budget provides the contrast.
    """
    manifest = ManifestWriter(config)
    model = _model(config)
    scheme = _schemes(config)[0]
    manifest.record_schemes([scheme])
    h = config.h_values[0]
    T = config.T or model.default_T
    N = _steps_for(h, T)
    source = _DataSource(model, T, config.x0)
    data = source.sample(N)
    seed = config.seeds[0]
    tc = _train_config(config, data.dim, seed)
    sched = tc.lr_schedule

    # stage 1: plain least-squares regression of each field component
    X = data.states
    targets = model.field(X)
    stage1 = []
    for j in range(data.dim):
        params = fnn.init_params(tc.architecture, tc.seed + j)
        state = fnn.AdamState.zeros_like(params)
        tj = targets[:, j]

        def loss_fn(u, tj=tj):
            r = u - tj
            return float(np.mean(r**2)), 2.0 * r / len(r)

        for epoch in range(tc.epochs):
            _, grad = fnn.loss_gradient(params, X, loss_fn)
            params, state = fnn.adam_step(params, state, grad, sched.rate(epoch))
        stage1.append(params)
    reg_residuals = [
        float(np.sqrt(np.mean((fnn.forward_batch(p, X) - targets[:, j]) ** 2)))
        for j, p in enumerate(stage1)
    ]

    # stage 2: the fitted nets become the governing system; integrate it
    net_model = models.network_governed_model(stage1, x0=model.default_x0, T=T)
    per_step = max(1, math.ceil(config.rk4_steps_per_unit * T / N))
    fine = integrate_fixed_rk4(net_model.field, net_model.default_x0, T, N * per_step)
    net_data = TrajectoryData(h, N, fine.states[::per_step].copy(), origin="integrated")

    # stage 3: discover the network-governed system with a matched architecture
    spec = discovery.make_loss_spec(scheme, with_aux=config.with_aux)
    self_result = discovery.train_discovery(
        net_data, spec, tc, truth=net_model.field
    )
    e_self = self_result.history[-1].grid_error

    # paired baseline: same budget on the original field
    base_result = discovery.train_discovery(data, spec, tc, truth=model.field)
    e_base = base_result.history[-1].grid_error

    rows = [
        ["stage1_regression_rmse"] + [repr(v) for v in reg_residuals],
        ["stage3_self_discovery_grid_error", repr(e_self)],
        ["baseline_discovery_grid_error", repr(e_base)],
    ]
    write_csv(
        Path(out_dir) / "results.csv",
        [f"optimization-error probe: scheme={scheme.label} h={h} profile={config.profile}",
         "row 1: stage-1 regression residual per component (separate from discovery error)"],
        ["quantity", "value", "value2", "value3"],
        rows,
    )
    if config.figures:
        plots.history_figure(
            _figures_dir(out_dir) / "self_discovery_history.png",
            _history_rows(self_result),
            "self-discovery of the network-governed system",
        )
    manifest.record("self_discovery_error", e_self)
    manifest.record("baseline_error", e_base)
    manifest.record("regression_rmse", reg_residuals)
    manifest.write(out_dir)
    return {
        "e_self": e_self,
        "e_base": e_base,
        "regression_rmse": reg_residuals,
        "self_result": self_result,
    }


def _first_divergence_time(times, truth, pred, theta, window) -> float:
    rel = np.max(np.abs(pred - truth) / np.maximum(1.0, np.abs(truth)), axis=1)
    over = rel > theta
    run = 0
    for i, flag in enumerate(over):
        run = run + 1 if flag else 0
        if run >= window:
            return float(times[i - window + 1])
    return float("nan")


def run_predict(config: ExperimentConfig, out_dir: Path) -> dict:
    manifest = ManifestWriter(config)
    model = _model(config)
    scheme = _schemes(config)[0]
    manifest.record_schemes([scheme])
    h = config.h_values[0]
    T = config.T or model.default_T
    N = _steps_for(h, T)
    seed = config.seeds[0]
    spec = discovery.make_loss_spec(scheme, with_aux=config.with_aux)

    div_rows = []
    files = []
    for eps in config.epsilons:
        x0_train = model.default_x0 + eps  # perturbation added to every component
        train_source = _DataSource(model, T, x0_train if eps != 0.0 else None)
        data = train_source.sample(N)
        tc = _train_config(config, data.dim, seed)
        result = discovery.train_discovery(data, spec, tc, truth=model.field)
        fhat = result.field()
        for delta in config.deltas:
            x0_pred = model.default_x0 + delta
            truth_dense = models.reference_trajectory(model, T, x0_pred)
            truth_data = sample_equidistant(truth_dense, N)
            steps = N * max(1, math.ceil(config.rk4_steps_per_unit * T / N))
            try:
                pred_fine = integrate_fixed_rk4(fhat, x0_pred, T, steps)
                pred_states = pred_fine.states[:: steps // N].copy()
            except DyndiscError:
                pred_states = np.full_like(truth_data.states, np.nan)
            t_div = _first_divergence_time(
                truth_data.times, truth_data.states, pred_states,
                config.theta_div, config.div_window,
            )
            div_rows.append([eps, delta, t_div])
            rows = []
            for n in range(N + 1):
                rows.append(
                    [n, n * h]
                    + [float(v) for v in truth_data.states[n]]
                    + [float(v) for v in pred_states[n]]
                )
            name = f"predict_eps{eps}_delta{delta}.csv"
            write_csv(
                Path(out_dir) / name,
                [f"prediction: train x0+{eps}, predict from x0+{delta}",
                 "x_j: reference trajectory; xhat_j: discovered-field trajectory"],
                ["n", "t"]
                + [f"x_{j + 1}" for j in range(data.dim)]
                + [f"xhat_{j + 1}" for j in range(data.dim)],
                rows,
            )
            files.append(name)
            if config.figures:
                plots.trajectory_compare_figure(
                    _figures_dir(out_dir) / f"predict_eps{eps}_delta{delta}.png",
                    truth_data.times, truth_data.states, [pred_states],
                    [f"eps={eps}, delta={delta}"],
                    f"{model.name}: prediction vs truth",
                )
    write_csv(
        Path(out_dir) / "divergence.csv",
        [f"first time the relative component error exceeds {config.theta_div} "
         f"for {config.div_window} consecutive steps (nan: never)"],
        ["epsilon", "delta", "t_divergence"],
        div_rows,
    )
    manifest.record("trajectory_files", files)
    manifest.write(out_dir)
    return {"divergence": div_rows}


def run_region(config: ExperimentConfig, out_dir: Path) -> dict:
    manifest = ManifestWriter(config)
    model = _model(config)
    if model.dim != 2:
        raise ConfigError("region runs need the planar model")
    schemes = _schemes(config)
    manifest.record_schemes(schemes)
    T = config.T or model.default_T
    spec_region = models.default_region_spec(config.n_trajectories, T)
    sampler = models.RegionSampler(model, spec_region)
    rows, order_rows = [], []
    series = {}
    last_net = None
    for scheme in schemes:
        pts = []
        for h in sorted(config.h_values, reverse=True):
            try:
                N = _steps_for(h, T)
                data = models.region_dataset(model, spec_region, N)
                if config.discovery_path == "grid":
                    idx = scheme_indices(scheme, N)
                    per_traj = [
                        assembly.grid_discovery(scheme, data.trajectory(i), solver=config.solver,
                                                tol=config.gmres_tol)
                        for i in range(data.n_trajectories)
                    ]
                    apx = np.concatenate([r.values for r in per_traj])
                    X = data.states[:, idx.first : idx.last + 1, :].reshape(-1, 2)
                    e_train = metrics.relative_l2(apx, np.asarray(model.field(X), float))[0]
                    e_test = float("nan")
                else:
                    spec = discovery.make_loss_spec(scheme, with_aux=config.with_aux)
                    tc = _train_config(config, 2, config.seeds[0])
                    result = discovery.train_discovery(data, spec, tc, truth=model.field)
                    last_net = result
                    e_train = result.history[-1].grid_error
                    e_test = metrics.test_error_region(
                        result.evaluators(), model.field, sampler,
                        n_samples=config.mc_samples, seed=config.seeds[0],
                    )
                rows.append([scheme.family.value, scheme.steps, h, e_train, e_test, ""])
                pts.append((h, e_train))
            except DyndiscError as exc:
                rows.append([scheme.family.value, scheme.steps, h, "", "", type(exc).__name__])
        if len(pts) >= 2:
            fit = metrics.convergence_order(pts)
            order_rows.append([scheme.family.value, scheme.steps, fit.slope, fit.r2, len(pts)])
            series[scheme.label] = pts
    write_csv(
        Path(out_dir) / "results.csv",
        [f"region discovery ({config.discovery_path} path): N'={config.n_trajectories}",
         "e_train: relative l2 over all involved samples; e_test: Monte Carlo region metric"],
        ["family", "M", "h", "e_train", "e_test", "error"],
        rows,
    )
    write_csv(
        Path(out_dir) / "orders.csv",
        ["slopes over the h grid"],
        ["family", "M", "slope", "r2", "n_points"],
        order_rows,
    )

    # evaluation-lattice dump for profile plots, clipped to the swept region
    lattice_rows = []
    if config.discovery_path == "net" and last_net is not None:
        from matplotlib.path import Path as MplPath

        poly = models.region_boundary_polygon(model, spec_region, samples_per_edge=100)
        lo = poly.min(axis=0)
        hi = poly.max(axis=0)
        g1 = np.linspace(lo[0], hi[0], config.lattice)
        g2 = np.linspace(lo[1], hi[1], config.lattice)
        G1, G2 = np.meshgrid(g1, g2)
        pts_all = np.stack([G1.ravel(), G2.ravel()], axis=-1)
        inside = MplPath(poly).contains_points(pts_all)
        lattice_pts = pts_all[inside]
        fhat_vals = np.stack(
            [fnn.forward_batch(p, lattice_pts) for p in last_net.nets], axis=-1
        )
        f_vals = model.field(lattice_pts)
        for p, a, t in zip(lattice_pts, fhat_vals, f_vals):
            lattice_rows.append(
                [float(p[0]), float(p[1]), float(a[0]), float(a[1]), float(t[0]), float(t[1])]
            )
        write_csv(
            Path(out_dir) / "field_profile.csv",
            ["recovered and true field on an evaluation lattice clipped to the region"],
            ["x1", "x2", "fhat_1", "fhat_2", "f_1", "f_2"],
            lattice_rows,
        )
        if config.figures and lattice_rows:
            plots.region_profile_figure(
                _figures_dir(out_dir) / "field_profile.png",
                lattice_pts, fhat_vals, f_vals,
                "region field profiles",
            )
    if config.figures and series:
        plots.error_decay_figure(
            _figures_dir(out_dir) / "error_decay.png", series,
            f"region discovery error decay (N'={config.n_trajectories})",
        )
    manifest.write(out_dir)
    return {"rows": rows, "orders": order_rows}


def run_appendix_unstable(config: ExperimentConfig, out_dir: Path) -> dict:
    """Forward substitution vs GMRES(1e-4) vs GMRES(1e-8) on the unstable 2-step scheme."""
    manifest = ManifestWriter(config)
    model = _model(config)
    scheme = build_scheme(SchemeFamily.ADAMS_MOULTON, 2)
    manifest.record_schemes([scheme])
    source = _DataSource(model, config.T or model.default_T, config.x0)
    settings = [
        ("fs", None),
        ("gmres", 1e-4),
        ("gmres", 1e-8),
    ]
    rows = []
    series = {}
    for solver, tol in settings:
        label = solver if tol is None else f"{solver}({tol:g})"
        pts = []
        for h in sorted(config.h_values, reverse=True):
            try:
                data = source.sample(_steps_for(h, source.T))
                result = assembly.grid_discovery(
                    scheme, data, solver=solver, tol=tol or 0.0,
                    max_iter=config.gmres_max_iter, restart=config.gmres_restart,
                )
                err = _grid_values_error(result, model, data)
                rows.append([label, h, err, all(result.converged), ""])
                pts.append((h, err))
            except DyndiscError as exc:
                rows.append([label, h, "", "", type(exc).__name__])
        series[label] = pts
    write_csv(
        Path(out_dir) / "results.csv",
        ["unstable-scheme solver contrast on the 2-step implicit Adams scheme",
         "error: relative l2 grid discovery error; converged: solver hit its tolerance"],
        ["setting", "h", "error", "converged", "failure"],
        rows,
    )
    if config.figures:
        plots.error_decay_figure(
            _figures_dir(out_dir) / "solver_contrast.png", series,
            "discovery error by solver setting",
        )
    manifest.write(out_dir)
    return {"rows": rows, "series": series}


RUNNERS: dict[str, Callable[[ExperimentConfig, Path], dict]] = {
    "coeffs": run_coeffs,
    "stability": run_stability,
    "gen-data": run_gen_data,
    "grid-discover": run_grid_discover,
    "discover": run_discover,
    "grid-converge": run_grid_converge,
    "net-converge": run_net_converge,
    "netsize": run_netsize,
    "opt-probe": run_opt_probe,
    "predict": run_predict,
    "region": run_region,
    "appendix-unstable": run_appendix_unstable,
}


def dispatch(config: ExperimentConfig, out_dir: Path) -> dict:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return RUNNERS[config.kind](config, out_dir)


def rerun_manifest(manifest_path, out_dir: Path) -> dict:
    """Re-execute a finished run from its manifest; outputs are bitwise equal."""
    import json

    manifest = json.loads(Path(manifest_path).read_text())
    config = ExperimentConfig.from_dict(manifest["config"])
    return dispatch(config, out_dir)
