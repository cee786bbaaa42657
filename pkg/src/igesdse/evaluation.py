"""Filter coefficient and total variance per channel."""
import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDenominator

GROUP_ORDER = ("pressure", "mass_flow", "e", "f", "branch_current", "injection_current")


@dataclass(frozen=True)
class ChannelMetrics:
    channel: str
    group: str
    eps1: float
    eps2: float
    flag: str = ""


def filter_coefficient(est, meas, truth):
    """Estimation-error energy over measurement-error energy."""
    est, meas, truth = (np.asarray(a, dtype=float) for a in (est, meas, truth))
    if est.size == 0 or not (est.shape == meas.shape == truth.shape):
        raise ValueError("series must be non-empty and of equal length")
    den = np.sum((meas - truth) ** 2)
    if den == 0:
        raise DegenerateDenominator("measurement equals truth on every step")
    return float(np.sum((est - truth) ** 2) / den)


def total_variance(est, truth):
    """Mean squared estimation error."""
    est, truth = np.asarray(est, dtype=float), np.asarray(truth, dtype=float)
    if est.size == 0 or est.shape != truth.shape:
        raise ValueError("series must be non-empty and of equal length")
    return float(np.mean((est - truth) ** 2))


def channel_metrics(art, warmup=2, normalized=True):
    """Metrics for every channel of a :class:`~igesdse.scenario.RunArtifacts`.

    The first ``warmup`` steps are skipped. With ``normalized`` the total
    variance is divided by the squared channel scale. Channels whose truth is
    constant over the window are flagged ``constant_truth``; channels whose
    measurements equal truth get ``eps1 = nan`` and flag ``degenerate``.
    """
    sl = slice(warmup, None)
    out = []
    for k, (name, group) in enumerate(zip(art.channel_names, art.channel_groups)):
        est, meas, truth = art.estimates[sl, k], art.measurements[sl, k], art.truth[sl, k]
        flag = ""
        try:
            eps1 = filter_coefficient(est, meas, truth)
        except DegenerateDenominator:
            eps1, flag = math.nan, "degenerate"
        eps2 = total_variance(est, truth)
        if normalized:
            eps2 /= art.scales[k] ** 2
        if not flag and np.ptp(truth) <= 1e-12 * max(1.0, np.max(np.abs(truth))):
            flag = "constant_truth"
        out.append(ChannelMetrics(name, group, float(eps1), float(eps2), flag))
    return out


def group_summary(metrics):
    """Per-group min/max/mean of ``eps1`` and ``eps2`` over unflagged channels."""
    summary = {}
    for group in GROUP_ORDER:
        rows = [m for m in metrics if m.group == group and not m.flag]
        if not rows:
            continue
        e1 = np.array([m.eps1 for m in rows])
        e2 = np.array([m.eps2 for m in rows])
        summary[group] = dict(
            count=len(rows),
            eps1_min=float(e1.min()), eps1_max=float(e1.max()), eps1_mean=float(e1.mean()),
            eps2_min=float(e2.min()), eps2_max=float(e2.max()), eps2_mean=float(e2.mean()),
        )
    return summary


def report(art, warmup=2, groups=None, normalized=True):
    """Channel metrics restricted to ``groups`` (all groups when ``None``)."""
    metrics = channel_metrics(art, warmup, normalized)
    if groups is not None:
        metrics = [m for m in metrics if m.group in groups]
    return metrics


def write_metrics(path, metrics):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["channel", "group", "eps1", "eps2", "flag"])
        for m in metrics:
            writer.writerow([m.channel, m.group, repr(float(m.eps1)), repr(float(m.eps2)), m.flag])


def read_metrics(path):
    with open(path, newline="") as fh:
        return [ChannelMetrics(r["channel"], r["group"], float(r["eps1"]), float(r["eps2"]), r["flag"])
                for r in csv.DictReader(fh)]
