#!/usr/bin/env python3
"""
Tests for the initialisation analysis: closed-form bounds, Monte-Carlo checks and the check suite
"""
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np
import pytest

# Add the project root to Python path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from pinn_initlab.bounds import (
    bound_prop1,
    bound_prop3,
    expected_sine_integrand,
    expected_tanh_integrand,
    freq_coverage_probability,
    sin_backward_closed_form,
    tanh_integrand_bound,
)
from pinn_initlab.montecarlo import (
    backward_proportion,
    backward_variance_sim,
    draw_parameters,
    mc_input_gradient_variance,
    mc_integrand,
)
from pinn_initlab.suite import PropositionMatrix, run_proposition_suite
from pinn_network.variants import build_network_config
from shared.csv_io import read_rows
from shared.errors import ConfigurationError, UsageError
from shared.rng import make_rng

logging.basicConfig(level=logging.WARNING)


def test_tanh_xavier_variance_within_bound_and_decreasing():
    x = (0.0, 0.5, 1.0)
    variances = []
    rng = make_rng(0)
    for n in (16, 64, 256):
        config = build_network_config("standard", f"(x)-{n}-{n}-{n}-(u)")
        report = mc_input_gradient_variance(config, None, x, 10_000, rng)
        np.testing.assert_array_equal(report.bound, bound_prop1(n))
        assert np.all(report.within_bound(3.0))
        variances.append(report.variance)
    assert np.all(variances[0] > variances[1])
    assert np.all(variances[1] > variances[2])


@pytest.mark.parametrize("sigma", [0.5, 1.0, 2.0])
def test_single_layer_sinusoidal_variance_matches_closed_form(sigma):
    """One hidden sinusoidal layer attains the bound exactly"""
    n = 64
    x = np.array([0.0, 0.3, 1.0])
    config = build_network_config("sf", f"(x)-{n}-(u)", sigma=sigma)
    report = mc_input_gradient_variance(config, sigma, x, 100_000, make_rng(1))
    expected = bound_prop3(n, sigma, x)
    np.testing.assert_allclose(report.bound, expected)
    np.testing.assert_allclose(report.variance, expected, rtol=0.05)


def test_sine_integrand_closed_form():
    sigma = 0.7
    # at x = 0 the integrand reduces to E[(2 pi w)^2]
    assert expected_sine_integrand(sigma, 0.0) == pytest.approx(4.0 * math.pi**2 * sigma**2)
    # far from the origin the oscillating part averages out
    assert expected_sine_integrand(sigma, 10.0) == pytest.approx(2.0 * math.pi**2 * sigma**2)
    mc, se = mc_integrand("sine", sigma, 0.3, 200_000, make_rng(2))
    assert abs(mc - expected_sine_integrand(sigma, 0.3)) <= 5.0 * se


def test_tanh_integrand_decays_with_sigma():
    small = expected_tanh_integrand(1.0, 1.0)
    large = expected_tanh_integrand(100.0, 1.0)
    assert small / large >= 10.0
    for sigma in (0.1, 1.0, 10.0, 100.0):
        for x in (0.5, 1.0, 2.0):
            assert expected_tanh_integrand(sigma, x) <= tanh_integrand_bound(sigma, x)


def test_tanh_integrand_quadrature_agrees_with_monte_carlo():
    quad = expected_tanh_integrand(2.0, 0.5)
    mc, se = mc_integrand("tanh", 2.0, 0.5, 200_000, make_rng(3))
    assert abs(mc - quad) <= 5.0 * se
    assert expected_tanh_integrand(3.0, 0.0) == pytest.approx(9.0)
    assert tanh_integrand_bound(1.0, 0.0) == math.inf


def test_backward_proportion_small_and_large_variance():
    rng = make_rng(4)
    for f in ("tanh", "sin", "sigmoid"):
        value, _ = backward_proportion(f, 1e-2, 100_000, rng, normalize=True)
        assert value >= 0.95
    sin_value, _ = backward_proportion("sin", 10.0, 100_000, rng, normalize=True)
    tanh_value, _ = backward_proportion("tanh", 10.0, 100_000, rng, normalize=True)
    sigmoid_value, _ = backward_proportion("sigmoid", 10.0, 100_000, rng, normalize=True)
    assert sin_value == pytest.approx(0.5, abs=0.05)
    assert sin_value > tanh_value
    assert sin_value > sigmoid_value


def test_sin_backward_closed_form():
    assert sin_backward_closed_form(10.0) == pytest.approx(0.5, abs=1e-8)
    value, se = backward_proportion("sin", 0.5, 200_000, make_rng(5))
    assert abs(value - sin_backward_closed_form(0.5)) <= 5.0 * se
    with pytest.raises(ConfigurationError):
        sin_backward_closed_form(0.0)
    sim = backward_variance_sim("sin", 0.5, 1000, make_rng(6))
    assert sim == backward_proportion("sin", 0.5, 1000, make_rng(6))[0]


def test_frequency_coverage():
    single, at_least_one = freq_coverage_probability(64, 3.0, 3.0, 0.1)
    assert single == pytest.approx(0.0968, abs=5e-4)
    assert at_least_one > 0.9
    _, narrow = freq_coverage_probability(64, 0.3, 3.0, 0.1)
    assert narrow < 0.5
    with pytest.raises(ConfigurationError):
        freq_coverage_probability(64, 3.0, 3.0, 1.5)
    with pytest.raises(ConfigurationError):
        freq_coverage_probability(0, 3.0, 3.0)


def test_bound_argument_checks():
    with pytest.raises(ConfigurationError):
        bound_prop1(0)
    with pytest.raises(ConfigurationError):
        expected_sine_integrand(0.0, 1.0)
    with pytest.raises(ConfigurationError):
        mc_integrand("relu", 1.0, 1.0, 100, make_rng(0))


def test_zero_input_weights_give_zero_gradient():
    config = build_network_config("sf", "(x)-8-(u)", sigma=1.0)
    report = mc_input_gradient_variance(config, 0.0, [0.2, 0.9], 1000, make_rng(0))
    np.testing.assert_array_equal(report.variance, 0.0)
    np.testing.assert_array_equal(report.bound, 0.0)


def test_draws_use_network_initialiser():
    config = build_network_config("sf", "(x)-500-20-(u)", sigma=1.0)
    draws = draw_parameters(config, 3.0, 4, make_rng(6))
    feature_w = np.concatenate([params.view("feature.W").ravel() for params in draws])
    assert feature_w.std() == pytest.approx(3.0, rel=0.05)
    for params in draws:
        assert not params.view("feature.b").any()
        assert not params.view("trunk.0.b").any()
        assert params.view("trunk.0.W").std() == pytest.approx(np.sqrt(2.0 / 520), rel=0.1)
    # sigma=None keeps the configured input std
    kept = draw_parameters(config, None, 2, make_rng(6))
    assert np.concatenate([p.view("feature.W").ravel() for p in kept]).std() == pytest.approx(
        1.0, rel=0.1
    )


def test_monte_carlo_argument_checks():
    config = build_network_config("sf", "(x)-8-(u)", sigma=1.0)
    with pytest.raises(ConfigurationError):
        mc_input_gradient_variance(config, 1.0, [0.0], 999, make_rng(0))
    with pytest.raises(ConfigurationError):
        mc_input_gradient_variance(config, -1.0, [0.0], 1000, make_rng(0))
    multi = build_network_config("sf", "(x)-8-[(u),(v)]", sigma=1.0)
    with pytest.raises(UsageError):
        mc_input_gradient_variance(multi, 1.0, [0.0], 1000, make_rng(0))


def _small_matrix(**overrides):
    values = dict(
        prop1_widths=(4,),
        prop1_x=(0.5,),
        prop1_draws=1000,
        prop3_width=8,
        prop3_sigmas=(1.0,),
        prop3_x=(0.3,),
        prop3_draws=1000,
        integrand_sigmas=(1.0, 10.0),
        integrand_x=(1.0,),
        integrand_draws=1000,
        backward_variances=(0.1,),
        activations=("tanh", "sin"),
        backward_draws=1000,
        coverage_sigmas=(0.3, 3.0),
    )
    values.update(overrides)
    return PropositionMatrix(**values)


def test_suite_writes_every_section(tmp_path):
    outputs = run_proposition_suite(_small_matrix(), tmp_path)
    for name in ("prop1", "prop3", "tanh_integrand", "sine_integrand", "backward", "coverage"):
        assert outputs[name].exists()
        assert outputs[f"{name}_chart"].suffix == ".svg"
    columns, rows = read_rows(outputs["coverage"])
    assert columns[-1] == "at_least_one"
    assert [row["sigma"] for row in rows] == [0.3, 3.0]
    _, backward = read_rows(outputs["backward"])
    assert backward[0]["closed_form"] is None
    assert backward[1]["closed_form"] == pytest.approx(sin_backward_closed_form(0.1))
    protocol = json.loads(outputs["protocol"].read_text())
    assert protocol["prop1_draws"] == 1000


def test_suite_sections_and_empty_matrix(tmp_path):
    outputs = run_proposition_suite(_small_matrix(sections=("coverage",)), tmp_path, plots=False)
    assert set(outputs) == {"coverage", "protocol"}
    with pytest.raises(ConfigurationError, match="nothing to run"):
        run_proposition_suite(_small_matrix(sections=()), tmp_path)
    with pytest.raises(ConfigurationError):
        _small_matrix(sections=("prop2",))
    with pytest.raises(ConfigurationError):
        _small_matrix(prop1_draws=0)
