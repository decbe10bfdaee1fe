import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate
from scipy.stats import norm

from qprecoding.quantizer import (
    build_quantizer,
    default_step_size,
    gaussian_mse,
    optimal_step_size,
    quantize,
    quantize_indices,
)


# -- build_quantizer ---------------------------------------------------------
def test_two_level_labels_and_threshold():
    q = build_quantizer(2, 1.0)
    np.testing.assert_allclose(q.labels, [-0.5, 0.5])
    np.testing.assert_allclose(q.thresholds, [0.0])


def test_four_level_labels_and_thresholds():
    q = build_quantizer(4, 1.0)
    np.testing.assert_allclose(q.labels, [-1.5, -0.5, 0.5, 1.5])
    np.testing.assert_allclose(q.thresholds, [-1.0, 0.0, 1.0])


def test_eight_level_labels_spaced_by_step():
    q = build_quantizer(8, 0.5)
    np.testing.assert_allclose(q.labels[[0, -1]], [-1.75, 1.75])
    np.testing.assert_allclose(np.diff(q.labels), 0.5)
    assert q.bits == 3


@pytest.mark.parametrize("levels, step", [(1, 1.0), (0, 1.0), (4, 0.0), (4, -1.0), (4, np.inf), (2.5, 1.0)])
def test_build_rejects_invalid(levels, step):
    with pytest.raises(ValueError):
        build_quantizer(levels, step)


@given(st.integers(2, 64), st.floats(1e-3, 1e3))
def test_label_and_threshold_invariants(levels, step):
    q = build_quantizer(levels, step)
    assert q.labels.shape == (levels,) and q.thresholds.shape == (levels - 1,)
    np.testing.assert_allclose(q.labels, -q.labels[::-1], atol=1e-12 * step * levels)
    np.testing.assert_allclose(np.diff(q.labels), step, rtol=1e-9)
    assert np.all(np.diff(q.thresholds) > 0)
    # thresholds sit halfway between neighbouring labels
    np.testing.assert_allclose(q.thresholds, 0.5 * (q.labels[1:] + q.labels[:-1]), atol=1e-9 * step * levels)


# -- quantize ----------------------------------------------------------------
def test_quantize_nearest_label():
    assert quantize(0.3 + 0.7j, build_quantizer(4, 1.0)) == 0.5 + 0.5j


def test_quantize_zero_uses_half_open_cells():
    assert quantize(0j, build_quantizer(4, 1.0)) == 0.5 + 0.5j


def test_quantize_saturates():
    assert quantize(100 - 100j, build_quantizer(4, 1.0)) == 1.5 - 1.5j


def test_quantize_on_interior_thresholds_goes_up():
    q = build_quantizer(4, 1.0)
    np.testing.assert_allclose(quantize(np.array([-1.0, 1.0]), q).real, [-0.5, 1.5])


def test_quantize_rejects_non_finite():
    q = build_quantizer(4, 1.0)
    with pytest.raises(ValueError):
        quantize(np.nan + 0j, q)
    with pytest.raises(ValueError):
        quantize(np.array([1.0, np.inf]), q)


def test_quantize_keeps_shape():
    q = build_quantizer(8, 0.3)
    x = np.arange(12).reshape(3, 4) * (0.1 - 0.2j)
    assert quantize(x, q).shape == (3, 4)
    assert np.all(q.contains(quantize(x, q)))


finite = st.floats(-50, 50, allow_nan=False)


@given(st.integers(2, 16), st.floats(0.01, 5.0), finite, finite)
def test_quantize_idempotent(levels, step, re, im):
    q = build_quantizer(levels, step)
    once = quantize(complex(re, im), q)
    assert quantize(once, q) == once


@given(st.integers(2, 16), st.floats(0.01, 5.0), st.data())
def test_label_points_are_fixed(levels, step, data):
    q = build_quantizer(levels, step)
    i = data.draw(st.integers(0, levels - 1))
    j = data.draw(st.integers(0, levels - 1))
    z = complex(q.labels[i], q.labels[j])
    assert quantize(z, q) == z


@given(st.integers(2, 16), st.floats(0.01, 5.0), finite)
def test_round_to_nearest_off_threshold(levels, step, x):
    q = build_quantizer(levels, step)
    if np.min(np.abs(q.thresholds - x)) < 1e-9:
        return
    chosen = q.labels[quantize_indices(x, q)]
    assert abs(chosen - x) <= np.min(np.abs(q.labels - x)) + 1e-12


# -- Gaussian MSE and optimal step -------------------------------------------
def _mse_by_quad(step, levels, variance):
    """Independent oracle: adaptive quadrature per cell."""
    q = build_quantizer(levels, step)
    sigma = np.sqrt(variance)
    edges = np.concatenate(([-np.inf], q.thresholds, [np.inf]))
    total = 0.0
    for lab, a, b in zip(q.labels, edges[:-1], edges[1:]):
        val, _ = integrate.quad(lambda x: (x - lab) ** 2 * norm.pdf(x, scale=sigma), a, b, epsabs=1e-13)
        total += val
    return total


@pytest.mark.parametrize("levels, step, variance", [(2, 1.0, 1.0), (4, 0.9, 2.0), (8, 0.3, 0.5), (16, 0.2, 1.0)])
def test_gaussian_mse_matches_quadrature(levels, step, variance):
    assert gaussian_mse(step, levels, variance) == pytest.approx(_mse_by_quad(step, levels, variance), rel=1e-9)


def test_one_bit_optimum_closed_form():
    assert optimal_step_size(2, 1.0) == pytest.approx(2 * np.sqrt(2 / np.pi), abs=1e-6)


def test_two_bit_optimum_against_dense_grid():
    grid = np.linspace(0.98, 1.01, 301)
    oracle = grid[np.argmin([_mse_by_quad(s, 4, 1.0) for s in grid])]
    assert optimal_step_size(4, 1.0) == pytest.approx(oracle, abs=2e-4)
    assert optimal_step_size(4, 1.0) == pytest.approx(0.9957, abs=1e-4)


def test_step_scales_with_sigma():
    assert optimal_step_size(2, 4.0) == pytest.approx(2 * optimal_step_size(2, 1.0), rel=1e-12)


@pytest.mark.parametrize("levels", [2, 4, 8, 16])
def test_local_minimum_certificate(levels):
    step = optimal_step_size(levels, 1.0)
    f0 = gaussian_mse(step, levels, 1.0)
    assert f0 <= gaussian_mse(1.01 * step, levels, 1.0)
    assert f0 <= gaussian_mse(0.99 * step, levels, 1.0)


def test_default_step_uses_per_dimension_variance():
    # complex variance q / (K M) -> per real dimension q / (2 K M)
    assert default_step_size(8, 1.0, 4, 16) == pytest.approx(optimal_step_size(8, 1.0 / 128))


@pytest.mark.parametrize("levels, variance", [(1, 1.0), (4, 0.0), (4, -1.0)])
def test_optimal_step_rejects_invalid(levels, variance):
    with pytest.raises(ValueError):
        optimal_step_size(levels, variance)
