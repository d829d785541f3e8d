"""Run a preset sweep end to end and read back the summary.

Equivalent to ``python3 -m xpmeit run fig5 --out demo_out --shots 200``.
"""
from dataclasses import replace

from xpmeit import harness

cfg = harness.get_preset("fig5").with_(out_dir="demo_out")
cfg = cfg.with_(detection=replace(cfg.detection, n_shots=200))
out = harness.run_scenario(cfg, workers=4)
print(f"config hash {cfg.config_hash()[:12]}, all points ok: {out.ok}")
for row in out.table.rows:
    print(f"tau_s {row['tau_s_in'] * 1e9:5.0f} ns -> rise {row['rise'] * 1e9:6.1f} ns, fall {row['fall'] * 1e9:6.0f} ns")
print("files:", *sorted(str(p) for p in out.files), sep="\n  ")
