"""
Indicator trajectory of a synthetic three-phase run
===================================================

Generates the default 205-epoch run in memory, evaluates every epoch,
segments the phases and picks offline and online stop epochs.
"""

from pathlib import Path

import ht_sentinel as hts
from ht_sentinel.report import grouped_stats, render_plot, write_trajectory
from ht_sentinel.synth import TrajectorySpec, trajectory_spectra

out = Path("demo_output")
out.mkdir(exist_ok=True)

spec = TrajectorySpec()
records = [hts.evaluate_epoch(s, epoch=e) for e, s in trajectory_spectra(spec)]
traj = hts.Trajectory(tuple(records), "synthetic")
seg = hts.classify_phases(traj)
offline = hts.stop_epoch(traj)
online = hts.stop_epoch(traj, "online", patience=20)

print("planted boundaries:", spec.phase_boundaries)
print("detected boundaries:", (seg.phase1_end, seg.phase2_end))
print(f"offline stop: epoch {offline.stop_epoch} (indicator {offline.peak_indicator:.4f})")
print(f"online stop:  epoch {online.stop_epoch} (triggered {online.triggered})")
for g in grouped_stats(traj, 41):
    print(f"epochs {g.first_epoch:3d}-{g.last_epoch:3d}: alpha {g.alpha_mean:6.3f} +- {g.alpha_std:.3f}, "
          f"x_min {g.x_min_mean:.4f} +- {g.x_min_std:.4f}")

write_trajectory(traj, seg, offline, out / "three_phase")
markers = [("phase I end", seg.phase1_end), ("phase II end", seg.phase2_end), ("stop", offline.stop_epoch)]
epochs = traj.epochs
render_plot({"d": (epochs, traj.column("d_tilde")), "d*": (epochs, traj.column("d_star"))},
            "trajectory", out / "three_phase_ks.svg", xlabel="epoch", markers=markers)
render_plot({"alpha": (epochs, traj.column("alpha"))}, "trajectory", out / "three_phase_alpha.svg",
            xlabel="epoch", markers=markers)
