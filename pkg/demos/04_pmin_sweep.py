#!/usr/bin/env python3
"""Sweep the minimum availability probability via the CLI machinery.

Writes one run directory per (p_min, strategy, seed) cell plus a
sweep_summary.csv, then prints the aggregated table.  Point the plots
tool at the output directory afterwards:

    plots sweep demo_out/pmin_sweep pmin_sweep.png
"""

import tempfile
from pathlib import Path

from fedsim.cli import parse_sweep, sweep_command
from fedsim.csvio import read_rows

spec = {
    "base": {
        "num_clients": 12,
        "rounds": 30,
        "local_steps": 5,
        "batch_size": 64,
        "model": {"kind": "logistic-regression", "input_dim": 8, "num_classes": 4,
                  "weight_decay": 0.001},
        "dataset": {"kind": "synth", "num_classes": 4, "per_class": 360,
                    "input_dim": 8, "separation": 2.0},
        "eval_every": 5,
    },
    "axis": "p_min",
    "values": [0.1, 0.3, 0.5],
    "strategies": ["fedar", "fedavg", "fedavg_is"],
    "seeds": [0, 1, 2],
}

out = Path(tempfile.mkdtemp(prefix="pmin_sweep_"))
spec_path = out / "sweep.json"
import json

spec_path.write_text(json.dumps(spec))
sweep_command(parse_sweep(spec_path), out / "runs", quiet=True)

header, rows = read_rows(out / "runs" / "sweep_summary.csv")
idx = {name: i for i, name in enumerate(header)}
print(f"{'p_min':<7} {'strategy':<10} {'mean loss':>10} {'mean acc':>9}")
print("-" * 40)
for row in rows:
    print(f"{row[idx['value']]:<7} {row[idx['strategy']]:<10} "
          f"{float(row[idx['mean_final_train_loss']]):>10.4f} "
          f"{float(row[idx['mean_final_test_accuracy']]):>9.4f}")
print(f"\nrun directories under {out / 'runs'}")
