#!/usr/bin/env python3
"""Seeded Monte Carlo comparison of the two decision rules across sample sizes.

A reduced-replication version of the benchmark grid: for each sample size
both methods see exactly the same simulated records, and the distribution of
log normalized errors is summarized per cell. The full-size study (100
replications) is available through ``riskid benchmark`` or the acceptance
suite.

Writes ``boxplot_demo.csv`` next to this script; if matplotlib is installed,
also renders ``boxplot_demo.png``.
"""

from pathlib import Path

from riskid import ExperimentConfig, benchmark_suite
from riskid.experiment import boxplot_rows, write_boxplot_csv

REPLICATIONS = 20

config = ExperimentConfig(replications=REPLICATIONS, seed=0)
print(f"Running the vary-N grid with {REPLICATIONS} replications per cell...")
cells = benchmark_suite("vary_N", config)

print(f"\n{'method':>6} {'N':>4} {'median':>8} {'IQR':>7} {'failed':>6}")
for cell in cells:
    s = cell.dist.summary
    print(f"{cell.method:>6} {cell.N:>4} {s.median:>+8.3f} {s.iqr:>7.3f} {cell.dist.n_failed:>6}")

out_csv = Path(__file__).parent / "boxplot_demo.csv"
write_boxplot_csv(boxplot_rows(cells), out_csv)
print(f"\nBox-plot statistics written to {out_csv}")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    print("matplotlib not installed; skipping the rendered figure")
else:
    fig, ax = plt.subplots(figsize=(7, 4))
    data = [cell.dist.errors for cell in cells]
    labels = [f"{cell.method}\nN={cell.N}" for cell in cells]
    ax.boxplot(data, tick_labels=labels)
    ax.axhline(0.0, color="gray", lw=0.8, ls="--")
    ax.set_ylabel("log10 normalized squared error")
    ax.set_title("Identification error by method and sample size")
    out_png = Path(__file__).parent / "boxplot_demo.png"
    fig.tight_layout()
    fig.savefig(out_png, dpi=120)
    print(f"Figure written to {out_png}")
