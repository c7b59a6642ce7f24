#!/usr/bin/env python3
"""
Tests for architecture strings, network variants, initialisation and jet forward passes
"""
import logging
import sys
from pathlib import Path

import numpy as np
import pytest

# Add the project root to Python path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from pinn_jets.tape import param_gradient
from pinn_jets.taylor import add, mean, partial, square
from pinn_network.architecture import format_architecture, parse_architecture
from pinn_network.model import (
    FeatureMapKind,
    InitKind,
    InitScheme,
    feature_map_apply,
    forward,
    forward_draws,
    forward_with_jets,
    init_layer,
    init_parameters,
    physics_jets,
)
from pinn_network.variants import build_network_config
from shared.errors import ConfigurationError, UsageError
from shared.rng import make_rng

logging.basicConfig(level=logging.WARNING)


def test_parse_single_branch():
    arch = parse_architecture("(x,t)-64-50-50-50-(u)")
    assert arch.inputs == ("x", "t")
    assert arch.feature_width == 64
    assert arch.trunk == (50, 50, 50)
    assert arch.outputs == ("u",)


def test_parse_branches():
    text = "(x,y)-64-20-20-20-[20-20-20-(u),20-20-20-(v),20-20-20-(p)]"
    arch = parse_architecture(text)
    assert arch.outputs == ("u", "v", "p")
    assert [b.widths for b in arch.branches] == [(20, 20, 20)] * 3
    assert format_architecture(arch) == text


@pytest.mark.parametrize(
    "text",
    ["x-64-(u)", "(x)-(u)", "(x)-0-(u)", "(x)-64", "(x)-64-[20-(u)", "(x)-64-[(u),(u)]", "(1x)-4-(u)"],
)
def test_malformed_architectures(text):
    with pytest.raises(ConfigurationError):
        parse_architecture(text)


def test_variant_table():
    sf = build_network_config("sf", "(x)-32-10-(u)", sigma=0.5)
    assert sf.feature == FeatureMapKind.SINUSOIDAL
    assert sf.activation == "tanh"
    assert sf.input_init == InitScheme.normal(0.5)
    siren = build_network_config("siren", "(x)-32-10-(u)")
    assert siren.activation == "sin"
    assert siren.hidden_init.kind == InitKind.HE
    assert siren.input_init.kind == InitKind.HE
    standard = build_network_config("standard", "(x)-32-10-(u)")
    assert standard.feature == FeatureMapKind.STANDARD_DENSE
    assert standard.input_init.kind == InitKind.XAVIER
    assert build_network_config("ff", "(x)-32-(u)").input_init == InitScheme.normal(1.0)


def test_variant_overrides():
    config = build_network_config("standard", "(x)-16-(u)", activation="sigmoid", init="he")
    assert config.activation == "sigmoid"
    assert config.hidden_init.kind == InitKind.HE
    with pytest.raises(ConfigurationError):
        build_network_config("standard", "(x)-16-(u)", init="normal")
    with pytest.raises(ConfigurationError):
        build_network_config("relu-net", "(x)-16-(u)")
    with pytest.raises(ConfigurationError):
        build_network_config("standard", "(x)-16-(u)", activation="relu")


def test_fourier_variants_need_even_width():
    with pytest.raises(ConfigurationError):
        build_network_config("ff", "(x)-31-(u)")


def test_init_std():
    assert InitScheme.xavier().std(10, 30) == pytest.approx(np.sqrt(2.0 / 40))
    assert InitScheme.he().std(8, 100) == pytest.approx(0.5)
    assert InitScheme.normal(2.5).std(1, 64) == 2.5
    with pytest.raises(ConfigurationError):
        InitScheme.normal(0.0)


def test_init_statistics_and_zero_bias():
    config = build_network_config("sf", "(x,t)-2000-(u)", sigma=2.0)
    params = init_parameters(config, make_rng(0))
    w1 = params.view("feature.W")
    assert w1.shape == (2, 2000)
    assert w1.std() == pytest.approx(2.0, rel=0.05)
    assert not params.view("feature.b").any()
    assert not params.view("branch.u.out.b").any()


def test_init_layer_variance_and_zero_bias():
    weight, bias = init_layer(1000, 100, InitScheme.normal(0.5), make_rng(2))
    assert weight.shape == (1000, 100)
    # standard error of a sample variance is sigma^2 sqrt(2 / n)
    assert weight.var() == pytest.approx(0.25, abs=5 * 0.25 * np.sqrt(2.0 / weight.size))
    assert not bias.any()
    with pytest.raises(ConfigurationError):
        init_layer(0, 4, InitScheme.xavier(), make_rng(0))


def test_feature_map_apply():
    x = np.array([[1.0]])
    zero_w, zero_b = np.zeros((1, 1)), np.zeros(1)
    np.testing.assert_allclose(
        feature_map_apply(FeatureMapKind.FOURIER_PAIRS, zero_w, zero_b, x), [[0.0, 1.0]]
    )
    np.testing.assert_allclose(
        feature_map_apply(FeatureMapKind.SINUSOIDAL, np.array([[0.25]]), zero_b, x), [[1.0]]
    )
    np.testing.assert_allclose(
        feature_map_apply(FeatureMapKind.STANDARD_DENSE, zero_w, zero_b, x), [[0.0]]
    )
    np.testing.assert_array_equal(feature_map_apply(FeatureMapKind.NONE_DIRECT, None, None, x), x)


def test_random_frozen_feature_layer_not_trainable():
    config = build_network_config("rf", "(x)-8-4-(u)")
    params = init_parameters(config, make_rng(1))
    block = params.layout.block("feature.W")
    assert not params.trainable[block.offset : block.offset + block.size].any()
    assert params.layout.block("feature.W").shape == (1, 4)


def test_same_seed_same_parameters():
    config = build_network_config("sf", "(x)-16-8-(u)")
    a = init_parameters(config, make_rng(11))
    b = init_parameters(config, make_rng(11))
    np.testing.assert_array_equal(a.values, b.values)


def test_forward_shapes_and_jet_agreement():
    config = build_network_config("ff", "(x,y)-16-8-[8-(u),(v,p)]", sigma=1.0)
    params = init_parameters(config, make_rng(2))
    x = make_rng(3).uniform(0, 1, (5, 2))
    plain = forward(config, params, x)
    assert set(plain) == {"u", "v", "p"}
    assert plain["u"].shape == (5,)
    single = forward(config, params, x[0])
    assert float(single["v"]) == pytest.approx(plain["v"][0])
    jets, _ = forward_with_jets(config, params, x, seeded_dim=1, order=2)
    for name in plain:
        np.testing.assert_allclose(jets[name].value, plain[name], rtol=1e-13)


def test_input_dimension_checked():
    config = build_network_config("sf", "(x,t)-8-(u)")
    params = init_parameters(config, make_rng(0))
    with pytest.raises(UsageError):
        forward(config, params, np.zeros((3, 3)))
    with pytest.raises(UsageError):
        forward_with_jets(config, params, np.zeros((3, 2)), seeded_dim=2, order=1)
    with pytest.raises(ConfigurationError):
        forward_with_jets(config, params, np.zeros((3, 2)), seeded_dim=0, order=4)


def test_parameter_set_must_match_config():
    params = init_parameters(build_network_config("sf", "(x)-8-(u)"), make_rng(0))
    with pytest.raises(UsageError):
        forward(build_network_config("sf", "(x)-9-(u)"), params, np.zeros((1, 1)))


@pytest.mark.parametrize("variant", ["standard", "sf", "ff", "siren"])
def test_input_derivatives_match_finite_differences(variant):
    """Orders 1-3 along each input against central differences of the next-lower order"""
    rng = make_rng(5)
    config = build_network_config(variant, "(x,t)-12-10-(u)", sigma=0.7)
    params = init_parameters(config, rng)
    x = rng.uniform(-1, 1, (4, 2))
    h = 1e-5
    for dim in range(2):
        jets, _ = forward_with_jets(config, params, x, dim, 3)
        u = jets["u"]
        for j in range(1, 4):
            up, down = x.copy(), x.copy()
            up[:, dim] += h
            down[:, dim] -= h
            lower_up = forward_with_jets(config, params, up, dim, j - 1)[0]["u"].deriv(j - 1)
            lower_down = forward_with_jets(config, params, down, dim, j - 1)[0]["u"].deriv(j - 1)
            fd = (lower_up - lower_down) / (2 * h)
            scale = max(1.0, float(np.abs(u.deriv(j)).max()))
            np.testing.assert_allclose(u.deriv(j), fd, rtol=1e-6, atol=1e-6 * scale)


def test_parameter_gradient_through_network():
    """Residual-style loss gradient w.r.t. all parameters, including a physics scalar"""
    rng = make_rng(9)
    config = build_network_config("sf", "(x,t)-8-6-(u)", sigma=1.0)
    params = init_parameters(config, rng, physics={"c": (1.5, True)})
    x = rng.uniform(0, 1, (5, 2))

    jets_t, record = forward_with_jets(config, params, x, 1, 2)
    jets_x, _ = forward_with_jets(config, params, x, 0, 2, record=record)
    c = physics_jets(params, record)["c"]
    residual = partial(jets_t["u"], 2) - square(c) * partial(jets_x["u"], 2)
    loss = add(mean(square(residual)), mean(square(partial(jets_x["u"], 0))))
    record.set_output(loss)
    gradient = param_gradient(record)

    step = 1e-6
    picks = list(range(0, params.size, max(1, params.size // 15))) + [params.size - 1]
    for i in picks:
        up, down = params.values.copy(), params.values.copy()
        up[i] += step
        down[i] -= step
        fd = (record.replay(up)[0] - record.replay(down)[0]) / (2 * step)
        assert gradient[i] == pytest.approx(fd, rel=1e-5, abs=1e-8)


def test_weight_norm_ignores_physics():
    config = build_network_config("sf", "(x)-4-(u)")
    a = init_parameters(config, make_rng(0), physics={"c": (1.0, True)})
    b = a.copy()
    b.view("phys.c")[...] = 5.0
    assert a.weight_norm(b) == 0.0
    b.values[0] += 3.0
    b.values[1] += 4.0
    assert a.weight_norm(b) == pytest.approx(5.0)
    assert b.physics_values() == {"c": 5.0}


@pytest.mark.parametrize(
    "variant,arch",
    [
        ("standard", "(x,t)-12-10-(u)"),
        ("sf", "(x,t)-12-10-(u)"),
        ("ff", "(x,t)-12-10-(u)"),
        ("rf", "(x,t)-12-10-(u)"),
        ("siren", "(x,t)-12-10-(u)"),
        ("sf", "(x,y)-8-6-[5-(u),(v,p)]"),
    ],
)
def test_forward_draws_matches_per_draw_forward(variant, arch):
    rng = make_rng(21)
    config = build_network_config(variant, arch, sigma=0.8)
    draws = [init_parameters(config, rng) for _ in range(4)]
    for params in draws:
        # nonzero biases so the batched bias broadcast is exercised
        params.values[...] += rng.normal(0.0, 0.1, params.size)
    x = rng.uniform(-1, 1, (5, 2))
    batched = forward_draws(config, draws, x, 1, 2)
    for d, params in enumerate(draws):
        single, _ = forward_with_jets(config, params, x, 1, 2)
        for name, jet in single.items():
            np.testing.assert_allclose(batched[name].coeffs[:, d], jet.coeffs, rtol=1e-12, atol=1e-14)


def test_forward_draws_rejects_mixed_layouts():
    a = init_parameters(build_network_config("sf", "(x)-8-(u)"), make_rng(0))
    b = init_parameters(build_network_config("sf", "(x)-8-4-(u)"), make_rng(0))
    with pytest.raises(UsageError):
        forward_draws(build_network_config("sf", "(x)-8-(u)"), [a, b], np.zeros((2, 1)), 0, 1)
    with pytest.raises(UsageError):
        forward_draws(build_network_config("sf", "(x)-8-(u)"), [], np.zeros((2, 1)), 0, 1)
