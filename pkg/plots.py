"""
Optional PNG rendering of profiles and of the h/r scaling.
"""
import logging
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

logger = logging.getLogger(__name__)


def plot_profiles(states, labels=None, title=None):
    """
    Two stacked panels, u above v, one curve per state.
    """
    fig, (ax_u, ax_v) = plt.subplots(2, 1, figsize=(10, 7), sharex=True)
    labels = labels or [f"t={state.t:.4g}" for state in states]

    for state, label in zip(states, labels):
        x = state.grid.centers()
        ax_u.plot(x, state.u, label=label, linewidth=1)
        ax_v.plot(x, state.v, label=label, linewidth=1)

    ax_u.set_ylabel('u')
    ax_v.set_ylabel('v')
    ax_v.set_xlabel('x')
    ax_u.legend(loc='best')
    if title:
        ax_u.set_title(title)
    plt.tight_layout()

    return fig


def plot_h_over_r(reports, title=None):
    """
    h/r against h on log-log axes with a sqrt(h) reference through the first point.
    """
    h = np.array([report.h for report in reports])
    h_over_r = np.array([report.h_over_r for report in reports])

    fig, ax = plt.subplots(figsize=(7, 5))
    ax.loglog(h, h_over_r, 'o-', label='h/r')
    if len(h):
        reference = h_over_r[0] * np.sqrt(h / h[0])
        ax.loglog(h, reference, '--', color='gray', label='~ sqrt(h)')

    ax.set_xlabel('h')
    ax.set_ylabel('h/r')
    ax.set_title(title or 'h/r scaling')
    ax.legend(loc='best')
    plt.tight_layout()

    return fig


def save_figure(fig, path):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    logger.info("Wrote %s", path)
    return path
