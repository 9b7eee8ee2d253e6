"""
Monte Carlo calibration of the threshold constant C
===================================================

Draws pure power-law samples on an (alpha, n_tail) grid, records
S = d * sqrt(n_tail) and picks C. Pass a smaller run count for a quick look.
"""

import sys
from pathlib import Path

from ht_sentinel.calibration import CalibrationConfig, run_calibration
from ht_sentinel.report import render_plot

runs = int(sys.argv[1]) if len(sys.argv) > 1 else 10_000
out = Path("demo_output")
out.mkdir(exist_ok=True)

result = run_calibration(CalibrationConfig(runs=runs))
for cell in result.cells:
    q = cell.quantiles
    print(f"alpha={cell.alpha:3.1f} n_tail={cell.n_tail:3d}  median={q['q50']:.3f}  q99.9={q['q99.9']:.3f}  max={q['max']:.3f}")
print("pooled:", {k: round(v, 4) for k, v in result.pooled_quantiles.items()})
print("C =", result.recommended_c)

(out / "calibration.json").write_text(result.to_json())
render_plot({"pooled S": result.pooled}, "histogram", out / "calibration_histogram.svg", xlabel="S", ylabel="count")
