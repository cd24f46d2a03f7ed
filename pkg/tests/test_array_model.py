import numpy as np
import pytest

from ncbf.array_model import (
    ArrayConfig,
    PolarPosition,
    element_positions,
    element_ranges,
    rayleigh_distance,
    reference_array,
    steering_matrix,
    steering_vector,
)
from oracles import brute_steering


def test_reference_array_geometry():
    cfg = reference_array()
    assert cfg.num_elements == 24
    assert cfg.element_spacing == 0.04
    assert cfg.carrier_frequency == 3.5e9
    # spacing just under half a wavelength
    assert 0.4 < cfg.element_spacing / cfg.wavelength < 0.5
    assert cfg.aperture == pytest.approx(0.92)


def test_far_field_boundary_reference_value():
    d = rayleigh_distance(reference_array())
    assert abs(d - 19.8) / 19.8 < 0.005


def test_rayleigh_distance_formula():
    cfg = ArrayConfig(num_elements=16, element_spacing=0.1, carrier_frequency=1e9)
    d = (cfg.num_elements - 1) * cfg.element_spacing
    assert rayleigh_distance(cfg) == pytest.approx(2 * d * d / cfg.wavelength)


def test_element_positions_centered_and_uniform():
    cfg = reference_array()
    pos = element_positions(cfg)
    assert pos.shape == (24, 2)
    assert np.all(pos[:, 1] == 0.0)
    x = pos[:, 0]
    assert np.allclose(np.diff(x), cfg.element_spacing)
    # symmetric about the array center
    assert np.allclose(x, -x[::-1])
    assert abs(x.sum()) < 1e-12


def test_config_validation():
    with pytest.raises(ValueError):
        ArrayConfig(0, 0.04, 3.5e9)
    with pytest.raises(ValueError):
        ArrayConfig(24, -0.04, 3.5e9)
    with pytest.raises(ValueError):
        ArrayConfig(24, 0.04, 0.0)


def test_polar_position_validation():
    with pytest.raises(ValueError):
        PolarPosition(2.0, 1.0)
    with pytest.raises(ValueError):
        PolarPosition(0.1, 0.0)
    p = PolarPosition.from_degrees(30.0, 2.0)
    x, y = p.cartesian()
    assert x == pytest.approx(2.0 * np.sin(np.deg2rad(30.0)))
    assert y == pytest.approx(2.0 * np.cos(np.deg2rad(30.0)))


def test_element_ranges_against_brute_force():
    cfg = reference_array()
    rng = np.random.default_rng(1)
    for _ in range(20):
        p = PolarPosition(rng.uniform(-np.pi / 2, np.pi / 2), rng.uniform(0.5, 6.0))
        rc, ranges = element_ranges(cfg, p)
        assert rc == p.range_m
        ux, uy = p.cartesian()
        for n in range(cfg.num_elements):
            xn = (n + 1 - (cfg.num_elements + 1) / 2) * cfg.element_spacing
            assert ranges[n] == pytest.approx(np.hypot(ux - xn, uy), abs=1e-15)


def test_steering_vector_against_scalar_oracle():
    cfg = reference_array()
    rng = np.random.default_rng(2)
    for _ in range(20):
        theta = rng.uniform(-np.pi / 2, np.pi / 2)
        r = rng.uniform(0.5, 6.0)
        h = steering_vector(cfg, PolarPosition(theta, r))
        ref = brute_steering(24, 0.04, 3.5e9, theta, r)
        assert np.abs(h.entries - ref).max() < 1e-9
        assert h.reference_range == r


def test_steering_magnitude_is_path_loss_ratio():
    cfg = reference_array()
    p = PolarPosition.from_degrees(25.0, 1.2)
    rc, ranges = element_ranges(cfg, p)
    h = steering_vector(cfg, p)
    assert np.allclose(np.abs(h.entries), rc / ranges)


def test_steering_mirror_symmetry():
    cfg = reference_array()
    p = PolarPosition.from_degrees(17.0, 2.5)
    q = PolarPosition.from_degrees(-17.0, 2.5)
    hp = steering_vector(cfg, p).entries
    hq = steering_vector(cfg, q).entries
    assert np.abs(hp - hq[::-1]).max() < 1e-12


def test_far_field_limit_flattens_to_plane_wave():
    cfg = reference_array()
    theta = np.deg2rad(20.0)
    r = 100.0 * rayleigh_distance(cfg)
    h = steering_vector(cfg, PolarPosition(theta, r)).entries
    # far out, magnitudes flatten and phase steps become uniform
    assert np.abs(np.abs(h) - 1.0).max() < 1e-3
    steps = np.angle(h[1:] / h[:-1])
    expected = -cfg.propagation_constant * cfg.element_spacing * np.sin(theta)
    wrapped = np.angle(np.exp(1j * (steps - expected)))
    assert np.abs(wrapped).max() < 1e-3


def test_steering_matrix_matches_single_vectors():
    cfg = reference_array()
    angles = np.deg2rad([8.0, -8.0, -16.0])
    ranges = np.array([1.6, 0.8, 4.9])
    m = steering_matrix(cfg, angles, ranges)
    assert m.shape == (24, 3)
    for k in range(3):
        hk = steering_vector(cfg, PolarPosition(angles[k], ranges[k])).entries
        assert np.abs(m[:, k] - hk).max() < 1e-15


def test_steering_matrix_broadcasts_scalar_range():
    cfg = reference_array()
    angles = np.deg2rad(np.linspace(-30, 30, 7))
    m = steering_matrix(cfg, angles, 2.0)
    assert m.shape == (24, 7)
    with pytest.raises(ValueError):
        steering_matrix(cfg, [0.1], [-1.0])


def test_steering_entries_read_only():
    cfg = reference_array()
    h = steering_vector(cfg, PolarPosition(0.1, 2.0))
    with pytest.raises(ValueError):
        h.entries[0] = 0.0
