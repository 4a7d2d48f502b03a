"""Composite channel statistics and MMSE estimation from shared pilots.

All members of a subgroup send the same pilot, so each AP observes (and each
serving AP estimates) the scaled sum of the member channels: the composite
channel.  Groups on the same pilot contaminate each other; the estimator folds
the whole cohort into the Gram matrix of the observation.  Linear algebra uses
Hermitian solves throughout, never explicit inverses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import NumericalError


@dataclass
class CompositeStats:
    """Deterministic second-order statistics per (AP, group), all (L, G, N, N).

    ``r_comp``   covariance of the composite channel,
    ``gamma``    covariance of the pilot observation (cohort sum plus noise),
    ``est_cov``  covariance of the MMSE estimate,
    ``err_cov``  covariance of the estimation error; est_cov + err_cov = r_comp.
    ``estimator`` is the (L, G, N, N) linear map taking the pilot observation
    to the estimate.
    """

    r_comp: np.ndarray
    gamma: np.ndarray
    est_cov: np.ndarray
    err_cov: np.ndarray
    estimator: np.ndarray

    @property
    def trace_r_comp(self) -> np.ndarray:
        """tr(r_comp) per (AP, group), real (L, G)."""
        return np.einsum("lgii->lg", self.r_comp).real


def composite_covariance(
    r_cov: np.ndarray, members: np.ndarray, tau_p: int, pilot_power_w: float
) -> np.ndarray:
    """Covariance of one group's composite channel at every AP, (L, N, N)."""
    scale = tau_p * pilot_power_w / members.size**2
    return scale * r_cov[:, members].sum(axis=1)


def gamma_matrix(
    r_cov: np.ndarray, cohort_members: np.ndarray, tau_p: int, pilot_power_w: float, noise_w: float
) -> np.ndarray:
    """Covariance of the projected pilot observation at every AP, (L, N, N).

    ``cohort_members`` collects the MSs of every group sharing the pilot.
    """
    n_antennas = r_cov.shape[-1]
    acc = tau_p * pilot_power_w * r_cov[:, cohort_members].sum(axis=1)
    return acc + noise_w * np.eye(n_antennas)


def composite_stats(r_cov: np.ndarray, grouping, plan, tau_p: int, pilot_power_w: float, noise_w: float) -> CompositeStats:
    """Assemble all estimation statistics for a snapshot.

    Statistics are deterministic functions of the covariances and are computed
    for every (AP, group) pair; pilot observations and estimate realizations
    are later restricted to serving APs.
    """
    n_aps, _, n_antennas, _ = r_cov.shape
    n_groups = grouping.n_groups
    sizes = grouping.sizes
    r_comp = np.empty((n_aps, n_groups, n_antennas, n_antennas), dtype=complex)
    gamma = np.empty_like(r_comp)
    for g in range(n_groups):
        r_comp[:, g] = composite_covariance(r_cov, grouping.members[g], tau_p, pilot_power_w)
    for g in range(n_groups):
        cohort_members = np.concatenate([grouping.members[c] for c in plan.cohort[g]])
        gamma[:, g] = gamma_matrix(r_cov, cohort_members, tau_p, pilot_power_w, noise_w)
    # estimator = K_g * r_comp @ gamma^{-1}, via Hermitian solve on the transposed system
    try:
        solved = np.linalg.solve(np.swapaxes(gamma, -1, -2), np.swapaxes(r_comp, -1, -2))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"observation covariance solve failed: {exc}") from exc
    estimator = sizes[None, :, None, None] * np.swapaxes(solved, -1, -2)
    est_cov = sizes[None, :, None, None] * (estimator @ r_comp)
    est_cov = 0.5 * (est_cov + np.conj(np.swapaxes(est_cov, -1, -2)))
    err_cov = r_comp - est_cov
    return CompositeStats(r_comp=r_comp, gamma=gamma, est_cov=est_cov, err_cov=err_cov, estimator=estimator)


def composite_channels(channels: np.ndarray, grouping, tau_p: int, pilot_power_w: float) -> np.ndarray:
    """Realized composite channels per group, (T, L, G, N)."""
    scale = np.sqrt(tau_p * pilot_power_w)
    out = np.stack(
        [channels[:, :, m, :].sum(axis=2) / m.size for m in grouping.members], axis=2
    )
    return scale * out


def project_pilots(
    channels: np.ndarray,
    grouping,
    plan,
    tau_p: int,
    pilot_power_w: float,
    noise_w: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Pilot observations after despreading, (T, L, tau_p, N).

    Entry [..., t, :] for a pilot in use is the scaled sum of the channels of
    every MS whose group holds that pilot, plus white noise; unused pilot
    slots stay zero and draw no noise.
    """
    n_real, n_aps, _, n_antennas = channels.shape
    y = np.zeros((n_real, n_aps, tau_p, n_antennas), dtype=complex)
    scale = np.sqrt(tau_p * pilot_power_w)
    noise_std = np.sqrt(noise_w / 2.0)
    for t in sorted(set(int(p) for p in plan.pilot_of)):
        on_pilot = np.concatenate(
            [grouping.members[c] for c in np.flatnonzero(plan.pilot_of == t)]
        )
        signal = scale * channels[:, :, on_pilot, :].sum(axis=2)
        noise = noise_std * (
            rng.standard_normal((n_real, n_aps, n_antennas))
            + 1j * rng.standard_normal((n_real, n_aps, n_antennas))
        )
        y[:, :, t, :] = signal + noise
    return y


def mmse_composite_estimate(
    y: np.ndarray, r_comp: np.ndarray, gamma: np.ndarray, group_size: int
) -> np.ndarray:
    """MMSE estimate of one composite channel from one observation.

    ``y`` is the (N,) pilot observation at one AP; solves the observation
    covariance system instead of inverting it.
    """
    try:
        factor = cho_factor(gamma, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"observation covariance is not positive definite: {exc}") from exc
    return group_size * (r_comp @ cho_solve(factor, y))


def estimate_composites(y: np.ndarray, stats: CompositeStats, plan) -> dict:
    """Estimate every served composite channel for every realization.

    Returns a dict mapping (ap, group) -> (T, N) estimate array, covering
    exactly the pairs with ap in the group's serving set.
    """
    out = {}
    for g in range(plan.n_groups):
        t = int(plan.pilot_of[g])
        for l in plan.serving[g]:
            out[(int(l), g)] = y[:, l, t, :] @ stats.estimator[l, g].T
    return out
