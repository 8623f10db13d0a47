import numpy as np
import pytest

from dualdepth.errors import InputError
from dualdepth.noise import NoiseConfig, axial_sigma, simulate_noise


def test_axial_sigma_frozen_value_at_two_meters():
    assert axial_sigma(2.0, NoiseConfig()) == pytest.approx(13.0)


def test_axial_sigma_quadratic_shape():
    cfg = NoiseConfig(axial_coeffs=(0.5, 1.0, 2.0))
    assert axial_sigma(1.0, cfg) == pytest.approx(3.5)
    assert axial_sigma(3.0, cfg) == pytest.approx(21.5)


def test_axial_sigma_domain():
    cfg = NoiseConfig()
    with pytest.raises(InputError):
        axial_sigma(0.0, cfg)
    with pytest.raises(InputError):
        axial_sigma(11.0, cfg)


def test_config_rejects_nonpositive_sigma_curve():
    with pytest.raises(InputError):
        NoiseConfig(axial_coeffs=(-5.0, 0.0, 0.0))
    with pytest.raises(InputError):
        NoiseConfig(kernel_sigma_px=0.0)


def test_config_round_trip():
    cfg = NoiseConfig(kernel_sigma_px=2.0, kernel_density=8.0, axial_coeffs=(1.0, 0.5, 2.0), seed=9)
    assert NoiseConfig.from_dict(cfg.to_dict()) == cfg


def test_noise_is_deterministic_per_seed():
    depth = np.full((32, 32), 2000.0)
    a = simulate_noise(depth, NoiseConfig(seed=7))
    b = simulate_noise(depth, NoiseConfig(seed=7))
    c = simulate_noise(depth, NoiseConfig(seed=8))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_noise_preserves_validity_mask():
    rng = np.random.default_rng(0)
    depth = np.where(rng.random((32, 32)) < 0.7, 1800.0, 0.0)
    out = simulate_noise(depth, NoiseConfig(seed=1))
    assert np.array_equal(out > 0, depth > 0)
    assert (out[depth > 0] >= 1.0).all()


def test_noise_leaves_input_untouched():
    depth = np.full((16, 16), 1500.0)
    snapshot = depth.copy()
    simulate_noise(depth, NoiseConfig(seed=3))
    assert np.array_equal(depth, snapshot)


def test_valid_floor_clamps_instead_of_invalidating():
    # tiny depths would go negative under 13 mm bumps; they must clamp to
    # the validity floor, never to 0
    depth = np.full((32, 32), 2.0)
    cfg = NoiseConfig(axial_coeffs=(2000.0, 0.0, 0.0), seed=0)
    out = simulate_noise(depth, cfg)
    assert (out >= 1.0).all()
    assert (out == 1.0).any()


def test_zero_density_is_identity():
    depth = np.full((16, 16), 2000.0)
    out = simulate_noise(depth, NoiseConfig(kernel_density=0.0, seed=5))
    assert np.array_equal(out, depth)


def test_bump_count_scales_with_valid_area():
    # density 4/1000 on a 100x100 frame gives 40 bumps; the perturbed area
    # is bounded by bumps * full window footprint
    depth = np.full((100, 100), 2000.0)
    out = simulate_noise(depth, NoiseConfig(seed=2))
    changed = (out != depth).sum()
    r = int(np.ceil(4 * 3.0))
    assert 0 < changed <= 40 * (2 * r + 1) ** 2


def test_correlated_bumps_not_pixel_speckle():
    # neighboring deviations must correlate strongly under a 3 px kernel
    depth = np.full((64, 64), 2000.0)
    out = simulate_noise(depth, NoiseConfig(seed=4))
    delta = out - depth
    a = delta[:, :-1].ravel()
    b = delta[:, 1:].ravel()
    keep = (a != 0) | (b != 0)
    corr = np.corrcoef(a[keep], b[keep])[0, 1]
    assert corr > 0.9


def test_depth_dependence_of_amplitude():
    near = np.full((64, 64), 500.0)
    far = np.full((64, 64), 4000.0)
    cfg = NoiseConfig(seed=6)
    d_near = np.abs(simulate_noise(near, cfg) - near)
    d_far = np.abs(simulate_noise(far, cfg) - far)
    # sigma(0.5 m) = 1.75 mm vs sigma(4 m) = 49 mm
    assert d_far.max() > 4 * d_near.max()


def test_rejects_bad_shapes():
    with pytest.raises(InputError):
        simulate_noise(np.zeros((4, 4, 1)), NoiseConfig())
