"""Figure and table rendering for training, evaluation and ablation runs.

Figures are rendered headlessly to PNG files next to the JSON/text
outputs; nothing here opens a display.
"""

import json

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be fixed first)

LOSS_KEYS = ("total", "lc", "g", "lu", "s1", "s2")


def read_log(path):
    """Parse a JSON-lines training log into a list of dicts."""
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def render_loss_curves(records, out_path, title="training loss"):
    steps = [r["step"] for r in records]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for key in LOSS_KEYS:
        ax.plot(steps, [r[key] for r in records],
                label=key, linewidth=1.8 if key == "total" else 1.0)
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    ax.set_title(title)
    ax.legend(ncol=3, fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def render_convergence(curves, out_path, title="ablation convergence"):
    """One total-loss curve per variant; ``curves`` maps name -> records."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for name, records in curves.items():
        ax.plot([r["step"] for r in records],
                [r["total"] for r in records], label=name)
    ax.set_xlabel("step")
    ax.set_ylabel("total loss")
    ax.set_yscale("log")
    ax.set_title(title)
    ax.legend(fontsize=9)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def render_metric_bars(report, out_path, title="evaluation"):
    names = report.names
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    pos = range(len(names))
    ax1.bar(pos, report.psnr_values, color="#4878a8")
    ax1.axhline(report.mean_psnr, color="k", linestyle="--", linewidth=1,
                label=f"mean {report.mean_psnr:.2f} dB")
    ax1.set_ylabel("PSNR (dB)")
    ax2.bar(pos, report.ssim_values, color="#6aa66a")
    ax2.axhline(report.mean_ssim, color="k", linestyle="--", linewidth=1,
                label=f"mean {report.mean_ssim:.4f}")
    ax2.set_ylabel("SSIM")
    for ax in (ax1, ax2):
        ax.set_xticks(list(pos))
        ax.set_xticklabels(names, rotation=45, ha="right", fontsize=7)
        ax.legend(fontsize=8)
        ax.grid(True, axis="y", alpha=0.3)
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def aligned_table(headers, rows):
    """Monospace table: every column padded to its widest cell."""
    cells = [[str(h) for h in headers]] + [[str(c) for c in row] for row in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(headers))]
    lines = []
    for r, row in enumerate(cells):
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
        if r == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"
