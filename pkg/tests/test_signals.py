"""Random ground-truth generators: support, closure, and noise calibration."""
import numpy as np
import pytest

from splineinv.operators import DERIVATIVE, SECOND_DERIVATIVE
from splineinv.signals import (
    GaussianWhite,
    ImpulsivePoisson,
    ProcessConfig,
    add_noise,
    generate_gaussian_process,
    generate_sparse_process,
    project_weights,
)


def test_innovation_validation():
    with pytest.raises(ValueError):
        ImpulsivePoisson()
    with pytest.raises(ValueError):
        ImpulsivePoisson(count=3, rate=1.0)
    with pytest.raises(ValueError):
        ImpulsivePoisson(count=0)
    with pytest.raises(ValueError):
        GaussianWhite(grid_step=0.0)
    with pytest.raises(ValueError):
        ProcessConfig(DERIVATIVE, ImpulsivePoisson(count=3), 0.0, 0)


def test_project_weights_moments():
    rng = np.random.default_rng(0)
    knots = np.sort(rng.uniform(0.0, 5.0, size=7))
    raw = rng.normal(size=7)
    w1 = project_weights(DERIVATIVE, knots, raw)
    assert np.sum(w1) == pytest.approx(0.0, abs=1e-12)
    w2 = project_weights(SECOND_DERIVATIVE, knots, raw)
    assert np.sum(w2) == pytest.approx(0.0, abs=1e-12)
    assert np.sum(w2 * knots) == pytest.approx(0.0, abs=1e-12)
    # least-norm: the correction is orthogonal to the feasible set, so
    # projecting twice changes nothing
    np.testing.assert_allclose(
        project_weights(SECOND_DERIVATIVE, knots, w2), w2, atol=1e-12
    )


def test_project_weights_needs_enough_impulses():
    with pytest.raises(ValueError):
        project_weights(SECOND_DERIVATIVE, [0.0, 1.0], [1.0, 2.0])


@pytest.mark.parametrize("op", [DERIVATIVE, SECOND_DERIVATIVE])
def test_sparse_process_is_compactly_supported(op):
    cfg = ProcessConfig(op, ImpulsivePoisson(count=8), 5.0, seed=3)
    s = generate_sparse_process(cfg)
    assert s.n_knots == 8
    assert np.all((s.knots >= 0.0) & (s.knots <= 5.0))
    np.testing.assert_array_equal(s.b, 0.0)
    # beyond the last knot every causal atom is a polynomial; the closure
    # moments force the sum to vanish identically
    x = np.linspace(s.knots.max() + 1e-6, 5.0, 7)
    np.testing.assert_allclose(s(x), 0.0, atol=1e-10)
    # and causality gives zero before the first knot
    assert s(0.999 * s.knots.min()) == 0.0


def test_sparse_process_poisson_count():
    cfg = ProcessConfig(DERIVATIVE, ImpulsivePoisson(rate=2.0), 10.0, seed=4)
    s = generate_sparse_process(cfg)
    assert s.n_knots >= 2  # at least nullspace_dim + 1
    assert np.min(np.diff(np.sort(s.knots))) > 1e-12


def test_sparse_process_seed_reproducible():
    cfg = ProcessConfig(SECOND_DERIVATIVE, ImpulsivePoisson(count=5), 3.0, seed=7)
    s1 = generate_sparse_process(cfg)
    s2 = generate_sparse_process(cfg)
    np.testing.assert_array_equal(s1.knots, s2.knots)
    np.testing.assert_array_equal(s1.weights, s2.weights)


def test_sparse_process_type_mismatch():
    cfg = ProcessConfig(DERIVATIVE, GaussianWhite(), 1.0, seed=0)
    with pytest.raises(TypeError):
        generate_sparse_process(cfg)
    cfg2 = ProcessConfig(DERIVATIVE, ImpulsivePoisson(count=3), 1.0, seed=0)
    with pytest.raises(TypeError):
        generate_gaussian_process(cfg2)


def test_gaussian_process_closure_first_order():
    cfg = ProcessConfig(DERIVATIVE, GaussianWhite(std=1.0, grid_step=0.01), 2.0, 11)
    d = generate_gaussian_process(cfg)
    assert d.grid[0] == 0.0 and d.grid[-1] == 2.0
    assert d.values[0] == 0.0 and d.values[-1] == 0.0
    assert d.grid.size == 201


def test_gaussian_process_closure_second_order():
    cfg = ProcessConfig(
        SECOND_DERIVATIVE, GaussianWhite(std=1.0, grid_step=0.01), 2.0, 12
    )
    d = generate_gaussian_process(cfg)
    assert d.values[0] == 0.0 and d.values[-1] == 0.0
    # endpoint slopes vanish too, so the path extends by zero smoothly
    h = d.grid[1] - d.grid[0]
    assert abs(d.values[1] - d.values[0]) / h < 0.2  # starts flat-ish
    slope_end = (d.values[-1] - d.values[-2]) / h
    assert abs(slope_end) < 0.2


def test_gaussian_process_grid_tiles_domain():
    cfg = ProcessConfig(DERIVATIVE, GaussianWhite(grid_step=0.3), 1.0, 0)
    d = generate_gaussian_process(cfg)
    steps = np.diff(d.grid)
    assert np.allclose(steps, steps[0])
    assert steps[0] <= 0.3 + 1e-12


def test_gaussian_process_scale():
    # random-walk increments have std ~ sqrt(h) * std; sanity-check the
    # realized increment variance over many steps
    cfg = ProcessConfig(DERIVATIVE, GaussianWhite(std=2.0, grid_step=0.001), 10.0, 5)
    d = generate_gaussian_process(cfg)
    inc = np.diff(d.values)
    h = d.grid[1] - d.grid[0]
    realized = np.std(inc) / np.sqrt(h)
    assert 1.5 < realized < 2.5


def test_add_noise_exact_snr():
    rng = np.random.default_rng(8)
    z = rng.normal(size=40)
    for snr in (10.0, 40.0):
        zn = add_noise(z, snr, seed=1)
        realized = 20.0 * np.log10(
            np.linalg.norm(z) / np.linalg.norm(zn - z)
        )
        assert realized == pytest.approx(snr, abs=1e-9)


def test_add_noise_infinite_snr_copies():
    z = np.array([1.0, 2.0])
    zn = add_noise(z, np.inf, seed=0)
    np.testing.assert_array_equal(zn, z)
    assert zn is not z


def test_add_noise_rejects_zero_signal():
    with pytest.raises(ValueError):
        add_noise(np.zeros(3), 20.0, seed=0)
    with pytest.raises(ValueError):
        add_noise(np.ones(3), -np.inf, seed=0)


def test_add_noise_seed_reproducible():
    z = np.arange(1.0, 6.0)
    np.testing.assert_array_equal(
        add_noise(z, 20.0, seed=9), add_noise(z, 20.0, seed=9)
    )
    assert not np.array_equal(add_noise(z, 20.0, seed=9), add_noise(z, 20.0, seed=10))
