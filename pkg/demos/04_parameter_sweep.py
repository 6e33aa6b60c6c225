# Sweeping F and Cr, then ranking
# ===============================
#
# A small slice of the configuration grid: DE/best/1/bin with saturation,
# three F values and three Cr values. Results go to a results directory with
# a resumable ledger; rerunning the script skips what is already there.
import tempfile
from pathlib import Path

from debias import Crossover, GridSpec, Mutation, SdisKind, rank_configs, run_grid
from debias.export import heatmap_table, write_heatmap_csv

out = Path(tempfile.mkdtemp(prefix="debias-sweep-"))
spec = GridSpec(
    mutations=(Mutation.BEST_1,),
    crossovers=(Crossover.BIN,),
    sdis_list=(SdisKind.SAT,),
    p_values=(5,),
    F_values=(0.266, 0.7, 1.35),
    Cr_values=(0.05, 0.52, 0.99),
    budget=3000,
    runs=300,
)
print(f"{spec.expected_count()} configurations -> {out}")
result = run_grid(spec, out=out)

F, Cr, table = heatmap_table(result, "DE/best/1/bin", 5, "sat")
print("SB score, rows F, columns Cr", Cr)
for f, row in zip(F, table):
    print(f"F={f:5.3f}", " ".join(f"{v:9.1f}" for v in row))
write_heatmap_csv(result, "DE/best/1/bin", 5, "sat", out / "heatmap.csv")

print("\nstrongest three:")
for row in rank_configs(result)[:3]:
    print(f"  {row.config_id:40s} {row.sb_score:9.2f}")
