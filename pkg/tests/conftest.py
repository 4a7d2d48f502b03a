"""Shared helpers for the test suite: small scenarios and fuzz instances."""

from types import SimpleNamespace

import numpy as np
import pytest

from cfmcast import covariance, estimation, geometry, grouping, harness, pilots
from cfmcast.config import DeploymentSpec, SystemConfig


def small_config(**overrides) -> SystemConfig:
    """A fast, fully wired configuration for unit tests."""
    base = dict(
        n_aps=6,
        n_antennas=2,
        n_ms=12,
        tau_c=200,
        tau_p=3,
        mode="subgroup",
        n_groups=4,
        side_m=500.0,
        snapshots=2,
        realizations=40,
        deployment=DeploymentSpec(kind="uniform"),
    )
    base.update(overrides)
    return SystemConfig(**base)


def build_pipeline(cfg: SystemConfig, index: int = 0, n_real: int | None = None) -> SimpleNamespace:
    """Run the snapshot pipeline up to channel estimates and keep every stage."""
    dep = geometry.build_deployment(
        cfg,
        harness.stage_rng(cfg.master_seed, index, "aps"),
        harness.stage_rng(cfg.master_seed, index, "ms"),
        harness.stage_rng(cfg.master_seed, index, "shadowing"),
    )
    angles = geometry.nominal_angles(dep.ap_positions, dep.ms_positions, cfg.side_m)
    r_cov = covariance.covariance_field(dep.beta, angles, np.deg2rad(cfg.asd_deg), cfg.n_antennas)
    factors = covariance.covariance_factors(r_cov)
    parts = grouping.make_plan(
        cfg.mode, dep.beta, harness.stage_rng(cfg.master_seed, index, "grouping"), cfg.resolved_groups()
    )
    plan = pilots.assign_pilots_and_cluster(dep.beta, parts, cfg.tau_p)
    stats = estimation.composite_stats(r_cov, parts, plan, cfg.tau_p, cfg.pilot_power_w, cfg.noise_w)
    t = cfg.realizations if n_real is None else n_real
    channels = covariance.sample_channels(
        factors, t, harness.stage_rng(cfg.master_seed, index, "channels")
    )
    y = estimation.project_pilots(
        channels,
        parts,
        plan,
        cfg.tau_p,
        cfg.pilot_power_w,
        cfg.noise_w,
        harness.stage_rng(cfg.master_seed, index, "pilot_noise"),
    )
    estimates = estimation.estimate_composites(y, stats, plan)
    return SimpleNamespace(
        cfg=cfg,
        dep=dep,
        angles=angles,
        r_cov=r_cov,
        factors=factors,
        parts=parts,
        plan=plan,
        stats=stats,
        channels=channels,
        y=y,
        estimates=estimates,
    )


def random_partition(rng: np.random.Generator, n_ms: int, n_groups: int) -> grouping.GroupAssignment:
    """Random labels guaranteed to leave no group empty."""
    labels = rng.integers(0, n_groups, size=n_ms)
    labels[rng.permutation(n_ms)[:n_groups]] = np.arange(n_groups)
    return grouping.GroupAssignment(group_of=labels, n_groups=n_groups)


def random_service_instance(rng: np.random.Generator) -> SimpleNamespace:
    """One fuzz instance: gains, a partition and a pilot budget.

    Group counts are capped so that no pilot can be shared by more groups than
    there are APs; beyond that cap a per-pilot uniqueness violation is forced
    by counting alone.
    """
    n_aps = int(rng.integers(3, 11))
    n_ms = int(rng.integers(4, 25))
    tau_p = int(rng.integers(2, 7))
    g_max = min(n_ms, tau_p + n_aps - 1, 3 * tau_p)
    n_groups = int(rng.integers(1, g_max + 1))
    beta = 10.0 ** rng.normal(-8.0, 1.5, size=(n_aps, n_ms))
    parts = random_partition(rng, n_ms, n_groups)
    return SimpleNamespace(beta=beta, parts=parts, tau_p=tau_p, n_aps=n_aps, n_ms=n_ms)


def oracle_direction(pipe, g):
    """Independent reassembly of the regularized precoder solve.

    Uses explicit matrix inverses and plain loops so it shares no code path
    with the batched implementation.
    """
    cfg, plan, stats, parts = pipe.cfg, pipe.plan, pipe.stats, pipe.parts
    aps = plan.serving[g]
    n_ant = cfg.n_antennas
    n = aps.size * n_ant
    t_total = next(iter(pipe.estimates.values())).shape[0]
    coef = cfg.group_power_w * parts.sizes.astype(float) ** 2 / (cfg.tau_p * cfg.pilot_power_w)

    def stack(c):
        v = np.zeros((t_total, n), dtype=complex)
        for j, l in enumerate(aps):
            est = pipe.estimates.get((int(l), int(c)))
            if est is not None:
                v[:, j * n_ant : (j + 1) * n_ant] = est
        return v

    s = set(plan.s_set[g].tolist())
    z = np.zeros((n, n), dtype=complex)
    for j, l in enumerate(aps):
        block = np.zeros((n_ant, n_ant), dtype=complex)
        for c in range(plan.n_groups):
            block += coef[c] * (stats.err_cov[l, c] if c in s else stats.r_comp[l, c])
        z[j * n_ant : (j + 1) * n_ant, j * n_ant : (j + 1) * n_ant] = block

    v_own = stack(g)
    v_all = {c: stack(c) for c in plan.s_set[g]}
    lead = np.sqrt(cfg.group_power_w / (cfg.tau_p * cfg.pilot_power_w)) * parts.sizes[g]
    out = np.empty_like(v_own)
    for t in range(t_total):
        m = z + cfg.noise_w * np.eye(n)
        for c, vc in v_all.items():
            m = m + coef[c] * np.outer(vc[t], vc[t].conj())
        out[t] = lead * (np.linalg.inv(m) @ v_own[t])
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
