"""The per-cycle cost of tracking.

Everything offset-dependent is precomputed once, so the online update is a
handful of scalar operations.  The audit counts every multiplication and
division in the update-direction computation; the cached fast path is also
checked against the explicit Fisher build.
"""

import numpy as np

from beamtrack import ArrayConfig, ChannelParams, STATIC_OFFSETS, build_ebm, count_ops
from beamtrack.trackers import (OpCounter, _jbct_direction_fast,
                                build_fast_cache, jbct_direction)

cfg = ArrayConfig(8, 8)

print("audited online multiplications/divisions per tracking cycle:")
print(f"  joint gain+direction tracker: {count_ops('jbct_static', cfg)}")
print(f"  constant-step variant:        {count_ops('jbct_dii', cfg)}")
print(f"  direction-only tracker:       {count_ops('rbt', cfg)}")
print("\n(a nominal hand count of 45 for the joint tracker treats the gain block")
print(" of the inverse Fisher as precomputable; that block rotates with the")
print(" gain-estimate phase, and the correct cached block solve is cheaper)")

rng = np.random.default_rng(0)
cache = build_fast_cache(cfg, STATIC_OFFSETS)
worst = 0.0
for _ in range(200):
    psi_hat = ChannelParams.from_parts(
        (0.2 + rng.uniform(0, 1.5)) * np.exp(1j * rng.uniform(0, 2 * np.pi)),
        rng.uniform(-2, 2, 2))
    ebm = build_ebm(cfg, psi_hat.x, STATIC_OFFSETS)
    y = 2 * (rng.standard_normal(3) + 1j * rng.standard_normal(3))
    fast = _jbct_direction_fast(cache, psi_hat.beta, y, OpCounter())
    naive = jbct_direction(cfg, psi_hat, ebm, y)
    worst = max(worst, float(np.abs(fast - naive).max()))
print(f"\nfast path vs explicit Fisher build over 200 random cycles: "
      f"max |difference| = {worst:.2e}")
