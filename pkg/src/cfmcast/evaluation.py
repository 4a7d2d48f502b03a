"""Effective SINR and spectral efficiency via the channel hardening bound.

For each MS the useful power is the squared mean (over channel realizations)
of its received inner product with its own group's precoder; everything else
(beamforming gain uncertainty, inter-group interference, noise) is treated as
interference.  A group's multicast SE is the minimum over its members.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import StatsError


@dataclass
class SeReport:
    """Per-snapshot SINR/SE results plus diagnostics."""

    sinr: np.ndarray  # (K,)
    se_user: np.ndarray  # (K,)
    se_group: np.ndarray  # (G,)
    sum_se_per_user: float
    sum_se_per_group: float
    prelog: float
    clamped: int  # non-positive SINR denominators replaced by the noise floor

    def sum_se(self, convention: str) -> float:
        if convention == "per_user":
            return self.sum_se_per_user
        if convention == "per_group":
            return self.sum_se_per_group
        raise ValueError(f"unknown sum convention {convention!r}")


class SinrAccumulator:
    """Streams realization chunks into the hardening-bound moment estimates.

    Accumulates, per (MS, group), the mean received inner product and mean
    squared magnitude with the *unscaled* precoder blocks; the per-group power
    scaling enters once at finalize time since it multiplies both moments
    linearly.
    """

    def __init__(self, n_ms: int, n_groups: int):
        self.sum_a = np.zeros((n_ms, n_groups), dtype=complex)
        self.sum_a2 = np.zeros((n_ms, n_groups))
        self.count = 0

    def update(self, channels: np.ndarray, precoders) -> None:
        """Add one chunk of matched channel/precoder realizations."""
        for g in range(precoders.n_groups):
            aps = precoders.aps[g]
            w = precoders.blocks[g]
            a = np.einsum("tjkn,tjn->tk", np.conj(channels[:, aps]), w)
            self.sum_a[:, g] += a.sum(axis=0)
            self.sum_a2[:, g] += np.sum(np.abs(a) ** 2, axis=0)
        self.count += channels.shape[0]

    def finalize(self, power_scale: np.ndarray, group_of: np.ndarray, noise_w: float):
        """Return (desired power, total received power, sinr, clamp count)."""
        if self.count == 0:
            raise StatsError("no realizations accumulated")
        mean_a = self.sum_a / self.count
        mean_a2 = self.sum_a2 / self.count
        n_ms = mean_a.shape[0]
        own = group_of
        desired = power_scale[own] * np.abs(mean_a[np.arange(n_ms), own]) ** 2
        total = mean_a2 @ power_scale
        denom = total - desired + noise_w
        clamped = int(np.sum(denom <= 0))
        denom = np.where(denom <= 0, noise_w, denom)
        sinr = desired / denom
        return desired, total, sinr, clamped


def sinr_terms(channels: np.ndarray, precoders, group_of: np.ndarray, noise_w: float):
    """One-shot hardening-bound SINR from matched realizations."""
    acc = SinrAccumulator(channels.shape[2], precoders.n_groups)
    acc.update(channels, precoders)
    return acc.finalize(precoders.power_scale, group_of, noise_w)


def se_user(sinr: np.ndarray, tau_p: int, tau_c: int) -> np.ndarray:
    """Downlink SE per MS in bit/s/Hz; the pilot overhead uses the configured
    pilot length regardless of how many pilots a snapshot actually uses."""
    prelog = 1.0 - tau_p / tau_c
    return prelog * np.log2(1.0 + sinr)


def se_group(se_users: np.ndarray, members: list) -> np.ndarray:
    """Multicast SE per group: the weakest member sets the rate."""
    return np.array([se_users[m].min() for m in members])


def sum_se(se_groups: np.ndarray, sizes: np.ndarray, convention: str) -> float:
    """Network sum SE: per served user (weighted by group size) or per stream."""
    if convention == "per_user":
        return float(np.sum(sizes * se_groups))
    if convention == "per_group":
        return float(np.sum(se_groups))
    raise ValueError(f"unknown sum convention {convention!r}")


def build_report(
    sinr: np.ndarray,
    clamped: int,
    grouping,
    tau_p: int,
    tau_c: int,
) -> SeReport:
    users = se_user(sinr, tau_p, tau_c)
    groups = se_group(users, grouping.members)
    sizes = grouping.sizes
    return SeReport(
        sinr=sinr,
        se_user=users,
        se_group=groups,
        sum_se_per_user=sum_se(groups, sizes, "per_user"),
        sum_se_per_group=sum_se(groups, sizes, "per_group"),
        prelog=1.0 - tau_p / tau_c,
        clamped=clamped,
    )
