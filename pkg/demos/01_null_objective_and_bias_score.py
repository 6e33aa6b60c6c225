# The f0 null objective and the structural-bias score
# ===================================================
#
# f0 hands out a fresh U(0, 1) value for every query, whatever the point.
# An optimiser running on it feels no selection pressure, so the best points
# of many independent runs should be uniform in [0, 1]^n. Any departure
# from uniformity is the algorithm's own doing.
import numpy as np

from debias import ad_pvalue, ad_statistic, by_adjust, evaluate_f0, sb_score

rng = np.random.default_rng(0)

# Same point, two evaluations, two unrelated values.
x = np.full(30, 0.5)
print("f0(x) twice:", evaluate_f0(x, rng), evaluate_f0(x, rng))

# Anderson-Darling against U(0, 1), one dimension at a time.
uniform = rng.random(600)
clustered = np.clip(rng.normal(0.5, 0.1, 600), 0, 1)
for name, sample in [("uniform", uniform), ("clustered", clustered)]:
    a2 = ad_statistic(sample)
    print(f"{name:9s}  A2 = {a2:8.3f}   p = {ad_pvalue(a2, sample.size):.3g}")

# Benjamini-Yekutieli turns n raw p-values into adjusted ones that stay valid
# under arbitrary dependence between dimensions.
print("BY adjust of [0.01, 0.02, 0.5]:", np.round(by_adjust([0.01, 0.02, 0.5]), 4))

# The score averages A2 over the dimensions whose adjusted p-value is below
# alpha (0.01 by default), dividing by all n dimensions.
points = rng.random((600, 30))
print("i.i.d. uniform final points:", sb_score(points).sb_score, sb_score(points).classification.value)

points[:, :3] = np.clip(rng.normal(0.5, 0.15, (600, 3)), 0, 1)
report = sb_score(points)
print(f"3 of 30 dimensions centred: SB = {report.sb_score:.2f} ({report.classification.value})")
for rec in report.per_dim[:4]:
    print(f"  dim {rec.dim}: A2 = {rec.A2:7.2f}  p_adj = {rec.p_adj:.2e}")
