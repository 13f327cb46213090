"""Why three probes per cycle.

With two probes the channel is not identifiable from one cycle (the four
real observation equations are rank-deficient); with three it is, and a
noiseless cycle can be inverted exactly.
"""

import numpy as np

from beamtrack import (ArrayConfig, ChannelParams, STATIC_OFFSETS, build_ebm,
                       noiseless_mean, recover_from_noiseless)
from beamtrack.signal import real_observation_jacobian

cfg = ArrayConfig(8, 8)
rng = np.random.default_rng(0)

psi = ChannelParams.from_parts(0.7 + 0.2j, (0.1, -0.2))
ebm = build_ebm(cfg, (0.0, 0.0), STATIC_OFFSETS)

print("singular values of the real observation Jacobian:")
for probes in (2, 3):
    sv = np.linalg.svd(real_observation_jacobian(cfg, psi, ebm, probes),
                       compute_uv=False)
    print(f"  {probes} probes: " + "  ".join(f"{v:9.3e}" for v in sv)
          + ("   <- rank 3: not identifiable" if probes == 2 else
             "   <- rank 4: identifiable"))

# generate one noiseless cycle and invert it
y = noiseless_mean(cfg, psi, ebm)
rec = recover_from_noiseless(cfg, ebm, y, ((-0.9, 0.9), (-0.9, 0.9)))
print(f"\ntrue channel:      beta = {psi.beta:.6f}, x = "
      f"({psi.x1:+.6f}, {psi.x2:+.6f})")
print(f"recovered channel: beta = {rec.beta:.6f}, x = "
      f"({rec.x1:+.6f}, {rec.x2:+.6f})")
print(f"error: {np.linalg.norm(rec.as_vector() - psi.as_vector()):.2e}")

# the relative phases between probes carry no channel information: they are
# set by the probe geometry alone (as long as every probe stays inside the
# channel's main lobe, the premise of the probing design)
print("\nrelative probe phases across random in-lobe channels (constant):")
for _ in range(3):
    p = ChannelParams.from_parts(
        rng.uniform(0.3, 1.5) * np.exp(1j * rng.uniform(0, 2 * np.pi)),
        rng.uniform(-0.3, 0.3, 2))
    yy = noiseless_mean(cfg, p, ebm)
    rel = np.angle(yy[1:] / yy[0])
    print(f"  {rel[0]:+.6f}  {rel[1]:+.6f}")
