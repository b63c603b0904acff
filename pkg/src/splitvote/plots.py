"""Figure rendering for evaluation reports.

Renders certified-accuracy curves to image files next to the CSV output.
The CSV stays the canonical artifact; figures are a convenience view.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def save_certified_accuracy_plot(curves: dict, path, title: str | None = None) -> None:
    """Render one or more (psi, certified accuracy) curves to ``path``.

    ``curves`` maps a legend label to a sequence of (psi, accuracy) pairs.
    """
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    for name, curve in curves.items():
        psis = [p for p, _ in curve]
        accs = [a for _, a in curve]
        ax.step(psis, accs, where="post", label=str(name), linewidth=1.6)
    ax.set_xlabel("certified radius threshold")
    ax.set_ylabel("certified accuracy")
    ax.set_ylim(-0.02, 1.02)
    ax.grid(True, alpha=0.3)
    if title:
        ax.set_title(title)
    if len(curves) > 1:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
