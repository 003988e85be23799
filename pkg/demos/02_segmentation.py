"""
Splitting an execution window into right-sized fragments
========================================================

The planner tiles a window with fragments, each reserved at the smallest
capacity class covering its own demand. Splitting is accepted only when
it cuts reserved-but-unused memory-time by at least the hysteresis
threshold, so flat demand stays whole and steps get their own fragments.
"""
import numpy as np

from sjasim.cluster import SliceCatalog
from sjasim.segmentation import SegmentationConfig, plan_waste, segment_window

catalog = SliceCatalog()  # 5, 10, 20, 40 GB classes
H = 60.0

# Demand steps from 4 GB to 18 GB halfway through a 20-minute window.
env = np.array([4096.0] * 10 + [18432.0] * 10)


def plan(delta):
    cfg = SegmentationConfig(tau_min_s=300.0, tau_max_s=3600.0,
                             smoothing_window_s=0.0, hysteresis_delta=delta)
    return segment_window(env, H, catalog, offered_capacity_mb=20480, seg=cfg)


# One 20 GB fragment wastes 20 GB x 10 min over the low half; cutting at
# the step reserves 5 GB + 20 GB instead. Gain: (180 - 30) / 400 = 0.375.
whole = plan(delta=0.5)
split = plan(delta=0.2)
for name, frags in (("delta=0.5", whole), ("delta=0.2", split)):
    reserved, waste = plan_waste(frags, env)
    print(f"{name}: {len(frags)} fragment(s), "
          f"reserved {reserved / 1024 :.0f} GB*min, waste {waste / 1024:.0f} GB*min")
    for f in frags:
        print(f"    [{f.start_idx * H:>6.0f} s, {f.end_idx * H:>6.0f} s) "
              f"at {f.capacity_mb / 1024:.0f} GB")

# tau_max forces long flat stretches into near-equal tiles.
flat = np.full(50, 8000.0)
cfg = SegmentationConfig(tau_min_s=300.0, tau_max_s=900.0,
                         smoothing_window_s=0.0, hysteresis_delta=0.2)
tiles = segment_window(flat, H, catalog, 10240, cfg)
print(f"50 min of flat demand under tau_max=15 min: "
      f"{[f.n_steps for f in tiles]} minute tiles")
