# Six ways to handle an infeasible trial vector
# =============================================
#
# DE mutation happily steps outside [0, 1]^n. What happens next is decided
# by the strategy of dealing with infeasible solutions (SDIS), and that
# choice turns out to drive most of the structural bias.
import numpy as np

from debias import SdisKind, repair

rng = np.random.default_rng(1)
candidate = np.array([0.4, 1.3, -0.25, 2.6, -0.4])
print("candidate:", candidate)
for kind in SdisKind:
    out = repair(kind, candidate, rng)
    flag = "  (trial dismissed)" if out.dismissed else ""
    print(f"{kind.value:5s}", np.round(out.vector, 3), flag)

# COTN redraws a violated coordinate from a half-normal (sigma = 1/3) that
# starts at the violated bound. Repairs therefore pile up near the bounds:
many = repair(SdisKind.COTN, np.full(100_000, -0.5), rng).vector
hist, edges = np.histogram(many, bins=5, range=(0, 1))
print("COTN repairs of -0.5, share per fifth of [0, 1]:", np.round(hist / hist.sum(), 3))

# Saturation puts every violated coordinate exactly on the bound. Because
# the final best point of a run is often such a coordinate, sat shows up as
# mass at 0 and 1 in the final-point distribution.
sat = repair(SdisKind.SAT, rng.normal(0.5, 1.0, 100_000), rng).vector
print(f"sat: {np.mean((sat == 0) | (sat == 1)):.1%} of repaired N(0.5, 1) samples land exactly on a bound")
