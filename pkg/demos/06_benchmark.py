"""Timing the closed form against network inference.

The LCMV solve goes through a Cholesky factorization, so its per-sample cost
grows superlinearly with the element count; batched network inference is a
few dense matrix products whose per-sample cost is nearly flat in the array
size. The crossover is the argument for learned weight synthesis at scale.
"""

from ncbf.benchtime import bench_dnn, bench_lcmv, loglog_slope, write_bench_csv
from ncbf.neural import init_model

sizes = [24, 64, 128, 256]
lcmv = bench_lcmv(sizes, num_users=3, samples=500, repeats=3, seed=0)
print("lcmv per-sample time:")
for rec in lcmv:
    print(f"  N={rec.num_elements:4d}  {rec.time_per_sample * 1e6:8.1f} us")
print(f"log-log slope {loglog_slope(lcmv):.2f} "
      "(fixed call overhead flattens the small-N end; "
      "the cubic term dominates the last octave)")

arch = (6, 1024, 1024, 1024, 1024, 1024, 1024, 24)
dnn = bench_dnn(
    init_model(arch, seed=0), init_model(arch, seed=1),
    batch_sizes=[1, 64, 1024], samples=2048, repeats=3, seed=0,
)
print("\ndual-network inference per sample (24-element heads):")
for rec in dnn:
    print(f"  batch={rec.batch_size:4d}  {rec.time_per_sample * 1e6:8.1f} us")

faster = dnn[-1].time_per_sample < lcmv[-1].time_per_sample
print(f"\nbatched inference beats the N=256 solve: {faster}")
write_bench_csv(lcmv + dnn, "demo_bench.csv")
print("wrote demo_bench.csv")
