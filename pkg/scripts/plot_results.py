#!/usr/bin/env python3
"""Figures from the CSV artifacts written by ``run_experiments.py``.

The CLI itself never plots; this script is the only place matplotlib is
touched.  Missing run directories are skipped with a note, so a partial
``runs/`` tree still yields the figures it can support.
"""

import argparse
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def load(path):
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def header(path):
    with open(path) as fh:
        return fh.readline().strip().split(",")


def plot_atoms(root, figs):
    run = root / "atoms"
    data = load(run / "trace.csv")
    cols = header(run / "trace.csv")
    fig, (ax_t, ax_w) = plt.subplots(1, 2, figsize=(9, 3.6))
    ax_t.semilogy(data[:, 0], data[:, 1])
    ax_t.set_xlabel("t")
    ax_t.set_ylabel("loss")
    ax_t.set_title("single-atom loss")
    c = data[:, cols.index("c_0")]
    h = data[:, cols.index("h_0")]
    ax_w.plot(h, c, marker=".", ms=2)
    ax_w.plot(h[0], c[0], "ko", label="start")
    ax_w.plot(h[-1], c[-1], "r*", ms=12, label="end")
    ax_w.set_xlabel("h")
    ax_w.set_ylabel("c")
    ax_w.set_title("weight trajectory")
    ax_w.legend()
    fig.tight_layout()
    fig.savefig(figs / "atoms.png", dpi=150)
    plt.close(fig)


def plot_stability(root, figs):
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.6))
    for ax, case in zip(axes, ("unstable", "stable")):
        run = root / f"stability-{case}"
        var = load(run / "variance.csv")
        theory = load(run / "theory.csv")
        ax.semilogy(var[:, 0], var[:, 1], label="particles")
        ax.semilogy(theory[:, 0], theory[:, 1], "--", label="exponential rate")
        ax.set_xlabel("t")
        ax.set_ylabel("var(h)")
        ax.set_title(f"{case} atom")
        ax.legend()
    fig.tight_layout()
    fig.savefig(figs / "stability.png", dpi=150)
    plt.close(fig)


def overlay_loss(run, title, ax):
    trace = load(run / "trace.csv")
    theory = load(run / "theory.csv")
    ax.semilogy(trace[:, 0], trace[:, 1], label="particles")
    ax.semilogy(theory[:, 0], theory[:, 1], "--", label="truncated theory")
    ax.set_xlabel("t")
    ax.set_ylabel("loss")
    ax.set_title(title)
    ax.legend()


def plot_small_c(root, figs):
    fig, ax = plt.subplots(figsize=(5, 3.6))
    overlay_loss(root / "small-c", "small-c relaxation", ax)
    fig.tight_layout()
    fig.savefig(figs / "small_c.png", dpi=150)
    plt.close(fig)


def plot_linearized(root, figs):
    fig, ax = plt.subplots(figsize=(5, 3.6))
    overlay_loss(root / "linearized", "flow toward the global minimizer", ax)
    fig.tight_layout()
    fig.savefig(figs / "linearized.png", dpi=150)
    plt.close(fig)


def plot_gaussian(root, figs):
    run = root / "gaussian"
    data = load(run / "trace.csv")
    cols = header(run / "trace.csv")
    fig, ax = plt.subplots(figsize=(5, 3.6))
    for name in ("A_cc", "A_hh"):
        ax.semilogy(data[:, 0], data[:, cols.index(name)], label=name)
    ax.set_xlabel("t")
    ax.set_ylabel("covariance entry")
    ax.set_title("local Gaussian moments at the unstable atom")
    ax.legend()
    fig.tight_layout()
    fig.savefig(figs / "gaussian.png", dpi=150)
    plt.close(fig)


def plot_spectral(root, figs):
    data = load(root / "spectral-table" / "spectral_table.csv")
    fig, ax = plt.subplots(figsize=(5, 3.6))
    ax.semilogy(data[:, 0], data[:, 2], "o-")
    ax.set_xlabel("k")
    ax.set_ylabel("zeta_k")
    ax.set_title("relaxation spectrum")
    fig.tight_layout()
    fig.savefig(figs / "spectral.png", dpi=150)
    plt.close(fig)


PLOTTERS = [
    ("atoms", plot_atoms),
    ("stability", plot_stability),
    ("small-c", plot_small_c),
    ("linearized", plot_linearized),
    ("gaussian", plot_gaussian),
    ("spectral", plot_spectral),
]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-root", default="runs", help="artifact root")
    parser.add_argument("--figs", default=None,
                        help="figure directory (default <out-root>/figs)")
    args = parser.parse_args(argv)
    root = Path(args.out_root)
    figs = Path(args.figs) if args.figs else root / "figs"
    figs.mkdir(parents=True, exist_ok=True)

    made = 0
    for name, plotter in PLOTTERS:
        try:
            plotter(root, figs)
        except OSError as exc:
            print(f"skipping {name}: {exc}", file=sys.stderr)
            continue
        print(f"wrote {name} figure(s) to {figs}")
        made += 1
    return 0 if made else 1


if __name__ == "__main__":
    sys.exit(main())
