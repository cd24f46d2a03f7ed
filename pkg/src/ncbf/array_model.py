"""Uniform linear array geometry and the spherical-wavefront channel model.

Positions are polar coordinates (angle from broadside, range from the array
center). Steering vectors follow the radiative near-field model: per-element
free-space path loss normalized to the array center, and phase accumulated
over the exact element-to-user distance.
"""

from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class ArrayConfig:
    """Geometry and carrier setup of a uniform linear array on the x axis.

    Parameters
    ----------
    num_elements : int
        Number of antenna elements, at least 1.
    element_spacing : float
        Inter-element spacing in meters.
    carrier_frequency : float
        Carrier frequency in Hz.
    """

    num_elements: int
    element_spacing: float
    carrier_frequency: float

    def __post_init__(self):
        if self.num_elements < 1:
            raise ValueError(f"num_elements must be >= 1, got {self.num_elements}")
        if not self.element_spacing > 0:
            raise ValueError(f"element_spacing must be positive, got {self.element_spacing}")
        if not self.carrier_frequency > 0:
            raise ValueError(f"carrier_frequency must be positive, got {self.carrier_frequency}")

    @property
    def wavelength(self) -> float:
        """Carrier wavelength in meters."""
        return SPEED_OF_LIGHT / self.carrier_frequency

    @property
    def propagation_constant(self) -> float:
        """Free-space propagation constant 2*pi/wavelength in rad/m."""
        return 2.0 * np.pi / self.wavelength

    @property
    def aperture(self) -> float:
        """Physical aperture (num_elements - 1) * element_spacing in meters."""
        return (self.num_elements - 1) * self.element_spacing


def reference_array() -> ArrayConfig:
    """The 24-element, 4 cm spacing, 3.5 GHz setup used by the demos and benchmarks."""
    return ArrayConfig(num_elements=24, element_spacing=0.04, carrier_frequency=3.5e9)


@dataclass(frozen=True)
class PolarPosition:
    """A position in the array plane: angle from broadside (rad) and range (m)."""

    angle: float
    range_m: float

    def __post_init__(self):
        half_pi = np.pi / 2.0
        if not -half_pi <= self.angle <= half_pi:
            raise ValueError(f"angle must lie in [-pi/2, pi/2], got {self.angle}")
        if not self.range_m > 0:
            raise ValueError(f"range_m must be positive, got {self.range_m}")

    @classmethod
    def from_degrees(cls, angle_deg: float, range_m: float) -> "PolarPosition":
        return cls(angle=np.deg2rad(angle_deg), range_m=range_m)

    def cartesian(self) -> tuple[float, float]:
        """Cartesian (x, y) with the array along x and broadside along +y."""
        return (self.range_m * np.sin(self.angle), self.range_m * np.cos(self.angle))


@dataclass(frozen=True)
class SteeringVector:
    """Channel response of one position across the array, with its center range."""

    entries: np.ndarray
    reference_range: float

    def __post_init__(self):
        entries = np.ascontiguousarray(self.entries, dtype=np.complex128)
        if entries.ndim != 1:
            raise ValueError("steering entries must be a 1-D vector")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)


def element_positions(cfg: ArrayConfig) -> np.ndarray:
    """Cartesian element coordinates, shape (num_elements, 2).

    Elements sit on the x axis symmetrically around the origin:
    x_n = (n - (N + 1) / 2) * spacing for n = 1..N, y_n = 0.
    """
    n = np.arange(1, cfg.num_elements + 1, dtype=np.float64)
    x = (n - 0.5 * (cfg.num_elements + 1)) * cfg.element_spacing
    return np.column_stack((x, np.zeros_like(x)))


def rayleigh_distance(cfg: ArrayConfig) -> float:
    """Far-field boundary 2 * aperture**2 / wavelength in meters."""
    d = cfg.aperture
    return 2.0 * d * d / cfg.wavelength


def element_ranges(cfg: ArrayConfig, position: PolarPosition) -> tuple[float, np.ndarray]:
    """Distance from the array center and from every element to `position`.

    Returns
    -------
    center_range : float
        Distance from the array center (the origin) to the position.
    ranges : ndarray
        Per-element distances, shape (num_elements,).
    """
    x, y = position.cartesian()
    elem_x = element_positions(cfg)[:, 0]
    return position.range_m, np.hypot(x - elem_x, y)


def steering_vector(cfg: ArrayConfig, position: PolarPosition) -> SteeringVector:
    """Near-field steering vector of `position`.

    Entry n is (r_c / r_n) * exp(1j * beta * r_n) where r_c is the range from
    the array center, r_n the range from element n, and beta the propagation
    constant. Magnitudes encode the per-element path loss ratio; phases the
    spherical wavefront.
    """
    center_range, ranges = element_ranges(cfg, position)
    entries = (center_range / ranges) * np.exp(1j * cfg.propagation_constant * ranges)
    return SteeringVector(entries=entries, reference_range=center_range)


def steering_matrix(cfg: ArrayConfig, angles, ranges) -> np.ndarray:
    """Steering vectors of many positions at once, shape (num_elements, P).

    `angles` (rad) and `ranges` (m) are broadcast against each other; column p
    equals steering_vector(cfg, PolarPosition(angles[p], ranges[p])).entries.
    """
    angles = np.atleast_1d(np.asarray(angles, dtype=np.float64))
    ranges = np.atleast_1d(np.asarray(ranges, dtype=np.float64))
    angles, ranges = np.broadcast_arrays(angles, ranges)
    if np.any(ranges <= 0):
        raise ValueError("all ranges must be positive")
    x = ranges * np.sin(angles)
    y = ranges * np.cos(angles)
    elem_x = element_positions(cfg)[:, 0]
    # (N, P) element-to-position distances
    dist = np.hypot(x[None, :] - elem_x[:, None], y[None, :])
    return (ranges[None, :] / dist) * np.exp(1j * cfg.propagation_constant * dist)
