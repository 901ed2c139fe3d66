#!/usr/bin/env python3
"""Attention cost comparison: decoupled fusion vs one flat lattice."""

import sys

from nflat.bench import flat_cells, nflat_cells, run_bench, write_csv

# analytic cell counts first: the ratio tends to ~0.714 at 40% match density
print("closed-form score-cell ratio (density 0.4):")
for n in (128, 512, 2048):
    m = round(0.4 * n)
    ratio = nflat_cells(n, m, 8) / flat_cells(n, m, 8)
    print(f"  n={n:5}  m={m:4}  ratio {ratio:.4f}")

# measured sweep: counts and peak attention bytes are deterministic,
# timings depend on the machine
lengths = [64, 128, 256, 512]
print(f"\nmeasured sweep at d_model=64, lengths {lengths} (takes ~15 s)...")
records = run_bench(lengths, match_density=0.4, reps=2, d_model=64, heads=8, seed=1)
print(f"{'model':6} {'n':>5} {'m':>4} {'cells':>10} {'peak MiB':>9} {'s/1k':>8}")
for r in records:
    print(
        f"{r.model:6} {r.length:5} {r.m:4} {r.cells:10} "
        f"{r.peak_bytes / 2**20:9.1f} {r.sec_per_1k:8.1f}"
    )

by = {(r.model, r.length): r for r in records}
n = lengths[-1]
print(
    f"\nat n={n}: peak-memory ratio "
    f"{by[('nflat', n)].peak_bytes / by[('flat', n)].peak_bytes:.3f}, "
    f"time ratio {by[('nflat', n)].sec_per_1k / by[('flat', n)].sec_per_1k:.3f}"
)

if len(sys.argv) > 1:
    write_csv(records, sys.argv[1], metadata={"lengths": lengths, "reps": 2})
    print(f"wrote {sys.argv[1]}")
