"""
Head-to-head on a fragmented workload
=====================================

Four GPUs, mixed 5-40 GB peaks, bursty arrivals. Whole-job baselines must
find a single slice big enough for each job's declared peak; the
offer-driven scheduler tiles jobs into whatever windows exist. Means and
spreads over ten seeds; the same ground-truth draws feed every scheduler.
"""
from sjasim.scenarios import make_fragmented_scenario
from sjasim.simcore import compare

scenario, cfg = make_fragmented_scenario()
schedulers = ("sja", "first_fit", "best_fit", "moldable")
result = compare(scenario, schedulers=schedulers, config=cfg,
                 seeds=tuple(range(10)))
table = result.table()

rows = (
    ("used utilization", "used_utilization", "{:.4f}"),
    ("queueing delay mean (s)", "queueing_delay_mean_s", "{:.1f}"),
    ("rejection rate", "rejection_rate", "{:.4f}"),
    ("completed jobs", "completed_jobs", "{:.1f}"),
)
width = max(len(label) for label, _, _ in rows) + 2
print(f"{'':<{width}}" + "".join(f"{s:>18}" for s in schedulers))
for label, metric, fmt in rows:
    cells = ""
    for s in schedulers:
        mean, sd = table[s][metric]
        cells += f"{fmt.format(mean):>12} ±{sd:<5.3g}"
    print(f"{label:<{width}}{cells}")
