"""Time the grid pipeline at growing output sizes and summarize the scaling.

    python demos/resolution_scaling.py [out.csv]

The grid-side step stays flat while slicing and applying grow with the
pixel count; the summary prints the log-log slope and the 720p to 4K drop.
"""
import sys

from libra import bench

SIZES = [(256, 256), (512, 512), (720, 1280), (1024, 1024), (2048, 2048), (2160, 3840)]


def run(out_csv=None):
    recs = bench.run_bench(SIZES, repeats=5)
    bench.write_csv(out_csv or sys.stdout, recs)
    by = {r.resolution: r for r in recs}
    square = [s for s in SIZES if s[0] == s[1]]
    slope = bench.loglog_slope([h * w for h, w in square], [by[s].slice_time_ms for s in square])
    lo, hi = by[(720, 1280)], by[(2160, 3840)]
    print(f"slice slope vs pixels: {slope:.3f}")
    print(f"720p -> 4K drop: total {lo.total_fps / hi.total_fps:.2f}x, "
          f"slice+apply {lo.path_fps / hi.path_fps:.2f}x")


if __name__ == "__main__":
    run(sys.argv[1] if len(sys.argv) > 1 else None)
