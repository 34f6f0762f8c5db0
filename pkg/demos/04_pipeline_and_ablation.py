"""The end-to-end pipeline, its efficiency report, and the sweeps.

Runs the full bin -> merge -> encode -> prune pipeline on the stock
synthetic workload with each sparsification stage toggled on and off,
then shows the interval and alpha sweeps and a small capacity probe.
"""

from dataclasses import replace

from evsparse import (PipelineConfig, calibrate_tau, capacity_probe,
                      default_workload, run_ablation, run_pipeline)

stream = default_workload(duration_us=500_000)
print(f"workload: {len(stream)} events over 500 ms, "
      f"{stream.width}x{stream.height}")

base = PipelineConfig()
tau = calibrate_tau(stream, base, percentile=25.0)["tau"]
base = replace(base, merge=replace(base.merge, tau=tau))
print(f"calibrated tau at the 25th percentile of adjacent distances: "
      f"{tau:g}")

# --- one full run ----------------------------------------------------------

result = run_pipeline(stream, base)
rep = result.report
print(f"\nfull pipeline: {rep.bins_in} bins -> {rep.windows_out} windows "
      f"-> {rep.tokens_out} tokens")
print(f"  temporal reduction x{rep.temporal_reduction:.1f}, "
      f"spatial reduction x{rep.spatial_reduction:.1f}")
for stage, ms in rep.timings_ms.items():
    print(f"  {stage:>12}: {ms:8.1f} ms")
print(f"  emission rate: {rep.tokens_per_second:,.0f} tokens/s")

# --- component ablation ----------------------------------------------------

print("\ncomponent sweep (temporal/spatial on or off):")
rows = run_ablation(stream, base, "components")
print(f"  {'configuration':>28} {'windows':>8} {'tokens':>8} "
      f"{'wall ms':>9}")
for row in rows:
    r = row["report"]
    print(f"  {row['label']:>28} {r['windows_out']:>8} "
          f"{r['tokens_out']:>8} {r['timings_ms']['total']:>9.1f}")

# --- interval and alpha sweeps ---------------------------------------------

print("\nbin-duration sweep (tau recalibrated per row):")
for row in run_ablation(stream, base, "interval"):
    r = row["report"]
    print(f"  {row['label']:>14}: {r['bins_in']:>4} bins -> "
          f"{r['windows_out']} windows "
          f"(x{r['temporal_reduction']:.0f} temporal)")

print("\ndensity-decay sweep:")
for row in run_ablation(stream, base, "alpha"):
    r = row["report"]
    print(f"  {row['label']:>11}: {r['windows_out']} windows, "
          f"{r['tokens_out']} tokens")

# --- capacity ----------------------------------------------------------------

print("\ncapacity probe at 200 bins of 10 ms:")
probe = capacity_probe(200, base)
print(f"  ok={probe['ok']} wall={probe['wall_time_ms']:.0f} ms "
      f"peak={probe['peak_memory_bytes'] / 1e6:.1f} MB "
      f"windows_out={probe['windows_out']}")
