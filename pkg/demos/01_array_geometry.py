"""Near-field geometry of the reference array.

Walks through the 24-element ULA the rest of the demos use: element layout,
the near/far-field boundary, and how a spherical wavefront bends the
steering phases compared with the plane-wave approximation.
"""

import numpy as np

from ncbf.array_model import (
    PolarPosition,
    element_positions,
    element_ranges,
    rayleigh_distance,
    reference_array,
    steering_vector,
)

cfg = reference_array()
print(f"array: {cfg.num_elements} elements, {cfg.element_spacing * 100:.0f} cm apart, "
      f"{cfg.carrier_frequency / 1e9:.1f} GHz carrier")
print(f"aperture {cfg.aperture:.2f} m, wavelength {cfg.wavelength * 100:.2f} cm")

# everything closer than the Rayleigh distance needs the spherical model
d_r = rayleigh_distance(cfg)
print(f"rayleigh distance {d_r:.2f} m")

# per-element path lengths to a user well inside the near field
user = PolarPosition(np.deg2rad(20.0), 2.0)
r_c, ranges = element_ranges(cfg, user)
print(f"\nuser at 20 deg, 2 m: center range {r_c:.3f} m, "
      f"element ranges {ranges.min():.3f}..{ranges.max():.3f} m")

# the spherical steering phase is curved across the aperture; a plane wave
# through the same direction is a straight line. compare both, unwrapped and
# referenced to the first element.
h = steering_vector(cfg, user).entries
sph = np.unwrap(np.angle(h))
sph -= sph[0]
beta = 2 * np.pi / cfg.wavelength
x = element_positions(cfg)[:, 0]
plane = -beta * (x - x[0]) * np.sin(user.angle)
print("\nelement  spherical_phase  plane_phase  curvature")
for n in (0, 6, 12, 18, 23):
    print(f"{n:7d}  {sph[n]:15.3f}  {plane[n]:11.3f}  {sph[n] - plane[n]:9.3f}")

# far away the two models agree: the curvature term dies out
far = PolarPosition(np.deg2rad(20.0), 100.0 * d_r)
hf = steering_vector(cfg, far).entries
sphf = np.unwrap(np.angle(hf))
sphf -= sphf[0]
print(f"\nat 100x rayleigh the worst curvature is "
      f"{np.abs(sphf - plane).max():.2e} rad")
