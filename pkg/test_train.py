#!/usr/bin/env python3
"""
Tests for collocation sampling, loss assembly, ADAM, the plateau schedule and the training loop
"""
import logging
import math
import sys
from pathlib import Path

import numpy as np
import pytest

# Add the project root to Python path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from pinn_network.model import forward, forward_with_jets, init_parameters
from pinn_network.variants import build_network_config
from pinn_pde.catalogue import BatchComposition, exact_solution, get_problem, make_inverse_variant
from pinn_pde.domain import Location, LocationKind, sample_location
from pinn_train.loss import LossSpec, compute_loss
from pinn_train.metrics import (
    ReferenceGrid,
    evaluate_mse,
    evaluate_residual_rms,
    field_error,
    reference_grid,
    sample_observations,
)
from pinn_train.optim import AdamState, PlateauSchedule, PlateauState, adam_step, plateau_schedule
from pinn_train.sampling import Batch, BatchSampler, latin_hypercube, sample_collocation, uniform_grid
from pinn_train.trainer import TrainConfig, train
from shared.errors import ConfigurationError, DivergenceError, UnsupportedError, UsageError
from shared.rng import make_rng

logging.basicConfig(level=logging.WARNING)


def _convdiff_setup(arch="(x)-8-(u)", variant="standard", seed=0):
    problem = get_problem("convdiff")
    config = build_network_config(variant, arch, sigma=0.5 if variant != "standard" else None)
    params = init_parameters(config, make_rng(seed))
    return problem, config, params


def _convdiff_batch(problem):
    boundary = Location(LocationKind.BOUNDARY)
    return Batch(
        interior=np.array([[0.2], [0.5], [0.7]]),
        conditions={boundary: sample_location(problem.domain, boundary, 1, make_rng(0))},
    )


# --- loss -------------------------------------------------------------------


def test_loss_spec_validation():
    with pytest.raises(ConfigurationError):
        LossSpec(lam=0.0, n_pde=1)
    with pytest.raises(ConfigurationError):
        LossSpec(lam=1.0)
    with pytest.raises(ConfigurationError):
        LossSpec(lam=1.0, n_pde=1, lambda_bc=-1.0)
    spec = LossSpec(lam=1.0, n_pde=1, n_data=5)
    assert not spec.active("data")


def test_loss_spec_for_problem():
    spec = LossSpec.for_problem(get_problem("convdiff"), 500.0)
    assert (spec.n_pde, spec.n_bc, spec.n_ic) == (499, 1, 0)
    assert not spec.use_data
    assert spec.lam == 500.0


def test_loss_terms_match_direct_evaluation():
    """total = L_pde / lambda + L_bc with L_bc over the two end points"""
    problem, config, params = _convdiff_setup()
    batch = _convdiff_batch(problem)
    spec = LossSpec(lam=2.0, n_pde=3, n_bc=1)
    report = compute_loss(config, params, problem, spec, batch)

    ends = forward(config, params, np.array([[0.0], [1.0]]))["u"]
    assert report.bc == pytest.approx(0.5 * (ends[0] ** 2 + (ends[1] - 1.0) ** 2), rel=1e-12)

    jets, _ = forward_with_jets(config, params, batch.interior, 0, 2)
    u = jets["u"]
    residual = 50.0 * u.deriv(1) - u.deriv(2)
    assert report.pde == pytest.approx(float(np.mean(residual**2)), rel=1e-10)
    assert report.total == pytest.approx(report.pde / 2.0 + report.bc, rel=1e-12)
    assert report.ic == 0.0 and report.data == 0.0
    assert report.equations == {"convection_diffusion": pytest.approx(report.pde)}


def test_zero_bias_network_starts_at_zero_on_the_left_boundary():
    problem, config, params = _convdiff_setup(arch="(x)-64-(u)")
    assert forward(config, params, np.array([0.0]))["u"] == 0.0


def test_loss_gradient_matches_finite_differences():
    problem, config, params = _convdiff_setup(variant="sf")
    batch = _convdiff_batch(problem)
    spec = LossSpec(lam=500.0, n_pde=3, n_bc=1)
    report = compute_loss(config, params, problem, spec, batch)
    step = 1e-6
    for i in range(0, params.size, 3):
        up, down = params.copy(), params.copy()
        up.values[i] += step
        down.values[i] -= step
        fd = (
            compute_loss(config, up, problem, spec, batch).total
            - compute_loss(config, down, problem, spec, batch).total
        ) / (2 * step)
        assert report.gradient[i] == pytest.approx(fd, rel=1e-5, abs=1e-8)


def test_loss_rejects_inconsistent_inputs():
    problem, config, params = _convdiff_setup()
    spec = LossSpec(lam=1.0, n_pde=3, n_bc=1)
    with pytest.raises(UsageError):
        compute_loss(config, params, problem, spec, _convdiff_batch(problem), mode="inverse")
    with pytest.raises(ConfigurationError):
        compute_loss(config, params, problem, spec, Batch(interior=np.zeros((0, 1))))


def test_inverse_loss_has_physics_gradient():
    problem = get_problem("wave1d")
    observations = sample_observations(problem, "sparse", make_rng(2))
    inverse = make_inverse_variant(problem, observations)
    config = build_network_config("sf", "(x,t)-8-(u)", sigma=1.0)
    params = init_parameters(config, make_rng(0), inverse.trainable_physics())
    assert params.physics_values() == {"c": 1.0}
    spec = LossSpec.for_problem(inverse, 1.0)
    assert spec.use_data and spec.n_data == 50
    batch = BatchSampler(inverse, inverse.batch, make_rng(3), interior="lhs").next()
    report = compute_loss(config, params, inverse, spec, batch)
    assert report.data > 0.0
    assert report.ic == 0.0 and report.bc == 0.0
    block = params.layout.block("phys.c")
    assert report.gradient[block.offset] != 0.0


# --- optimiser and schedule ---------------------------------------------------


def test_first_adam_step_moves_by_learning_rate():
    config = build_network_config("rf", "(x)-8-(u)")
    params = init_parameters(config, make_rng(0))
    before = params.values.copy()
    gradient = np.where(np.arange(params.size) % 2, 1.0, -0.5)
    adam_step(params, gradient, AdamState.zeros(params.size), 0.1)
    moved = before - params.values
    mask = params.trainable
    np.testing.assert_allclose(moved[mask], 0.1 * np.sign(gradient[mask]), rtol=1e-5)
    np.testing.assert_array_equal(moved[~mask], 0.0)


def test_zero_gradient_leaves_parameters_unchanged():
    config = build_network_config("sf", "(x)-8-4-(u)")
    params = init_parameters(config, make_rng(3))
    before = params.values.copy()
    state = AdamState.zeros(params.size)
    for _ in range(3):
        adam_step(params, np.zeros(params.size), state, 0.1)
    np.testing.assert_array_equal(params.values, before)
    assert state.t == 3


def test_adam_rejects_bad_input():
    config = build_network_config("sf", "(x)-4-(u)")
    params = init_parameters(config, make_rng(0))
    state = AdamState.zeros(params.size)
    with pytest.raises(UsageError):
        adam_step(params, np.zeros(params.size + 1), state, 0.1)
    with pytest.raises(ConfigurationError):
        adam_step(params, np.zeros(params.size), state, 0.0)
    bad = np.zeros(params.size)
    bad[0] = np.inf
    with pytest.raises(DivergenceError):
        adam_step(params, bad, state, 0.1)


def test_plateau_schedule_decays_to_floor():
    schedule = PlateauSchedule(patience=2, factor=0.5, threshold=0.0, min_lr=0.1)
    state = PlateauState(lr=1.0)
    losses = [1.0]
    assert plateau_schedule(losses, state, schedule) == 1.0
    expected = [0.5, 0.25, 0.125, 0.1, 0.1]
    for lr in expected:
        losses += [1.0, 1.0]
        assert plateau_schedule(losses, state, schedule) == pytest.approx(lr)
    assert state.reductions == 4


def test_plateau_schedule_resets_on_improvement():
    schedule = PlateauSchedule(patience=2, factor=0.5, threshold=1e-3)
    state = PlateauState(lr=1e-3)
    assert plateau_schedule([1.0, 1.0, 0.5, 0.5, 0.25], state, schedule) == 1e-3
    assert state.best == 0.25
    with pytest.raises(UsageError):
        plateau_schedule([], state, schedule)
    with pytest.raises(ConfigurationError):
        PlateauSchedule(factor=1.5)


# --- sampling -----------------------------------------------------------------


def test_uniform_grid_includes_corners():
    domain = get_problem("wave1d").domain
    grid = uniform_grid(domain, (3, 2))
    assert grid.shape == (6, 2)
    np.testing.assert_array_equal(grid[0], [0.0, 0.0])
    np.testing.assert_array_equal(grid[-1], [2.0, 1.0])
    with pytest.raises(ConfigurationError):
        uniform_grid(domain, (3,))


def test_latin_hypercube_strata():
    domain = get_problem("helmholtz2d").domain
    n = 20
    points = latin_hypercube(domain, n, make_rng(0))
    assert points.shape == (n, 2)
    for axis in range(2):
        strata = np.floor((points[:, axis] + 1.0) / 2.0 * n).astype(int)
        assert sorted(strata) == list(range(n))


def test_sample_collocation_errors():
    domain = get_problem("convdiff").domain
    assert sample_collocation(domain, 11, "uniform_grid").shape == (11, 1)
    with pytest.raises(ConfigurationError):
        sample_collocation(domain, 10, "sobol", make_rng(0))
    with pytest.raises(ConfigurationError):
        sample_collocation(domain, 10)


def test_batch_sampler_composition():
    problem = get_problem("wave1d")
    batch = BatchSampler(problem, problem.batch, make_rng(0)).next()
    assert batch.interior.shape == (450, 2)
    initial = batch.conditions[Location(LocationKind.INITIAL)]
    boundary = batch.conditions[Location(LocationKind.BOUNDARY)]
    assert len(initial) == 40
    assert len(boundary) == 10
    assert batch.data_points is None


def test_pool_draws_without_replacement_within_an_epoch():
    problem = get_problem("convdiff")
    sampler = BatchSampler(problem, BatchComposition(pde=499, bc=1), make_rng(5))
    drawn = np.concatenate([sampler.next().interior[:, 0] for _ in range(10)])
    assert len(np.unique(drawn)) == len(drawn)


# --- metrics ------------------------------------------------------------------


def test_field_error_metrics():
    truth = {"u": np.array([1.0, -2.0]), "v": np.array([0.0, 1.0])}
    flipped = {"u": -truth["u"], "v": truth["v"]}
    assert field_error("velocity_magnitude", flipped, truth) == 0.0
    assert field_error("velocity_average", flipped, truth) == pytest.approx(0.5 * (4.0 + 16.0) / 2)
    assert field_error("mse", truth, truth) == 0.0
    with pytest.raises(ConfigurationError):
        field_error("mae", truth, truth)


def test_reference_grids():
    grid = reference_grid(get_problem("convdiff"))
    assert len(grid) == 5000
    assert grid.source == "exact"
    assert grid.truth["u"][-1] == pytest.approx(1.0)
    with pytest.raises(UnsupportedError):
        reference_grid(get_problem("cavity"))


def test_evaluate_mse_against_exact_solution():
    problem, config, params = _convdiff_setup()
    grid = reference_grid(problem)
    predicted = forward(config, params, grid.points)["u"]
    expected = float(np.mean((predicted - grid.truth["u"]) ** 2))
    assert evaluate_mse(config, params, problem, grid) == pytest.approx(expected, rel=1e-12)
    with pytest.raises(UnsupportedError):
        evaluate_mse(config, params, get_problem("cavity"), None)


def test_sparse_observations_favour_later_times():
    problem = get_problem("wave1d")
    observed = sample_observations(problem, "sparse", make_rng(1))
    assert len(observed) == 200
    assert set(observed.values) == {"u"}
    assert np.all(problem.domain.contains(observed.points))
    assert observed.points[:, 1].mean() > 0.6
    with pytest.raises(ConfigurationError):
        sample_observations(problem, "noisy", make_rng(1))
    with pytest.raises(UnsupportedError):
        sample_observations(get_problem("helmholtz2d"), "dense", make_rng(1))


def test_residual_rms_for_cavity():
    problem = get_problem("cavity")
    config = build_network_config("sf", "(x,y)-8-[(u),(v),(p)]", sigma=1.0)
    params = init_parameters(config, make_rng(0))
    rms = evaluate_residual_rms(config, params, problem, uniform_grid(problem.domain, (5, 5)))
    assert set(rms) == {"continuity", "momentum_x", "momentum_y"}
    assert all(math.isfinite(v) and v >= 0 for v in rms.values())


# --- training loop ------------------------------------------------------------


def _small_grid(problem):
    points = uniform_grid(problem.domain, (51,))
    return ReferenceGrid(points, exact_solution(problem, points), "exact")


def test_train_config_validation():
    with pytest.raises(ConfigurationError):
        TrainConfig(iterations=-1)
    with pytest.raises(ConfigurationError):
        TrainConfig(iterations=1, accumulation=0)
    with pytest.raises(ConfigurationError):
        TrainConfig(iterations=1, lr=-1.0)


def test_zero_iterations_returns_initial_network():
    problem, config, _ = _convdiff_setup("(x)-8-(u)", "sf")
    result = train(config, problem, LossSpec.for_problem(problem, 500.0), TrainConfig(iterations=0))
    assert result.history == []
    assert result.updates == 0
    assert result.weight_displacement == 0.0


def test_short_training_run():
    problem, config, _ = _convdiff_setup("(x)-8-(u)", "sf")
    spec = LossSpec.for_problem(problem, 500.0)
    settings = TrainConfig(iterations=30, lr=5e-3, seed=3, history_every=10, test_every=10)
    result = train(config, problem, spec, settings, grid=_small_grid(problem))
    assert [row.iteration for row in result.history] == [10, 20, 30]
    assert result.updates == 30
    assert math.isfinite(result.test_mse)
    assert result.test_mse == result.history[-1].test_mse
    assert result.weight_displacement > 0.0

    again = train(config, problem, spec, settings, grid=_small_grid(problem))
    np.testing.assert_array_equal(again.params.values, result.params.values)


def test_random_frozen_features_survive_training():
    problem, config, _ = _convdiff_setup("(x)-8-6-(u)", "rf")
    spec = LossSpec.for_problem(problem, 500.0)
    result = train(config, problem, spec, TrainConfig(iterations=100, lr=5e-3, seed=4))
    assert result.updates == 100
    for name in ("feature.W", "feature.b"):
        np.testing.assert_array_equal(result.params.view(name), result.initial_params.view(name))
    assert not np.array_equal(result.params.view("trunk.0.W"), result.initial_params.view("trunk.0.W"))


def test_gradient_accumulation_reduces_updates():
    problem, config, _ = _convdiff_setup("(x)-8-(u)", "sf")
    spec = LossSpec.for_problem(problem, 500.0)
    result = train(config, problem, spec, TrainConfig(iterations=12, accumulation=3))
    assert result.updates == 4


def test_inverse_training_tracks_physics_estimate():
    problem = get_problem("wave1d")
    inverse = make_inverse_variant(problem, sample_observations(problem, "sparse", make_rng(0)))
    config = build_network_config("sf", "(x,t)-8-(u)", sigma=2.5)
    settings = TrainConfig(iterations=5, lr=1e-2, history_every=5, interior="lhs")
    result = train(config, inverse, LossSpec.for_problem(inverse, 1.0), settings)
    row = result.history[-1]
    assert set(row.physics) == {"c"}
    assert row.physics["c"] != 1.0
    assert row.physics_scalar_estimates.startswith("c=")


def test_non_finite_losses_raise_divergence():
    problem, config, params = _convdiff_setup("(x)-8-(u)", "sf")
    params.values[0] = np.nan
    with pytest.raises(DivergenceError) as info:
        train(
            config,
            problem,
            LossSpec.for_problem(problem, 500.0),
            TrainConfig(iterations=10),
            params=params,
        )
    assert info.value.iteration == 3
    assert info.value.history == []
