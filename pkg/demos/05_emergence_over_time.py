# When does bias appear?
# ======================
#
# Instead of scoring final points, pool the live populations of 100 runs at
# regular evaluation counts. Initial populations are uniform, so the score
# starts at 0; for a biased configuration it climbs early and stays up.
from debias import Crossover, DEConfig, Mutation, SdisKind, run_emergence

for p in (5, 20):
    cfg = DEConfig(Mutation.BEST_1, Crossover.BIN, 0.916, 0.99, p, SdisKind.SAT, budget=5000)
    trace = run_emergence(cfg, runs_pooled=100, checkpoint_stride=250)
    print(f"{cfg.config_id}  (pooled sample {trace.sample_size} per dimension)")
    for e, s in list(zip(trace.evaluations, trace.sb))[::4]:
        print(f"  evals {e:5d}  SB {s:9.1f}  " + "#" * int(min(s, 6000) / 150))
    print(f"  noise sigma over the second half: {trace.noise_sigma():.2f}\n")
