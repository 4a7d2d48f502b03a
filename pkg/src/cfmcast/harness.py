"""Campaign orchestration: seeding, snapshot pipeline, parallel runs, outputs.

Every random draw derives from (master_seed, snapshot index, stage tag), so
each pipeline stage has an isolated stream: changing how many draws one stage
consumes never perturbs another stage, and results are bit-identical for any
worker count.  A campaign maps the snapshot pipeline over indices, pools one
sum-SE sample per snapshot and reports the empirical CDF.
"""

from __future__ import annotations

import json
import multiprocessing
import os
import time
from dataclasses import dataclass

import numpy as np

from . import covariance, estimation, evaluation, geometry, grouping, pilots, precoding
from .config import SystemConfig
from .errors import CampaignError

# realizations are processed in fixed-size chunks to bound memory
CHUNK = 64

STAGES = {
    "aps": 0,
    "ms": 1,
    "shadowing": 2,
    "grouping": 3,
    "channels": 4,
    "pilot_noise": 5,
}

WORKERS_ENV = "CFMCAST_WORKERS"


def stage_rng(master_seed: int, snapshot: int, stage: str, chunk: int = 0) -> np.random.Generator:
    """Independent generator for one stage of one snapshot (and chunk)."""
    return np.random.default_rng(
        np.random.SeedSequence((int(master_seed), int(snapshot), STAGES[stage], int(chunk)))
    )


def _chunk_bounds(total: int, chunk: int = CHUNK):
    for start in range(0, total, chunk):
        yield start, min(start + chunk, total)


@dataclass
class SnapshotResult:
    index: int
    report: evaluation.SeReport
    group_sizes: np.ndarray
    per_ap_power: np.ndarray | None

    def summary(self) -> dict:
        rep = self.report
        return {
            "snapshot": self.index,
            "sum_se_per_user": rep.sum_se_per_user,
            "sum_se_per_group": rep.sum_se_per_group,
            "min_user_se": float(rep.se_user.min()),
            "median_user_se": float(np.median(rep.se_user)),
            "clamped": rep.clamped,
            "n_groups": int(self.group_sizes.size),
        }


@dataclass
class CampaignResult:
    config: SystemConfig
    samples: np.ndarray  # (snapshots,) sum-SE under the configured convention
    cdf_values: np.ndarray
    cdf_probs: np.ndarray
    summaries: list
    wall_time_s: float
    workers: int

    @property
    def config_hash(self) -> str:
        return self.config.config_hash()


def empirical_cdf(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sorted samples and their empirical probabilities i/n, i = 1..n."""
    values = np.sort(np.asarray(samples, dtype=float))
    probs = np.arange(1, values.size + 1) / values.size
    return values, probs


def run_snapshot(cfg: SystemConfig, index: int) -> SnapshotResult:
    """Execute the full pipeline for one geometry draw."""
    dep = geometry.build_deployment(
        cfg,
        stage_rng(cfg.master_seed, index, "aps"),
        stage_rng(cfg.master_seed, index, "ms"),
        stage_rng(cfg.master_seed, index, "shadowing"),
    )
    angles = geometry.nominal_angles(dep.ap_positions, dep.ms_positions, cfg.side_m)
    r_cov = covariance.covariance_field(
        dep.beta, angles, np.deg2rad(cfg.asd_deg), cfg.n_antennas
    )
    factors = covariance.covariance_factors(r_cov)
    parts = grouping.make_plan(
        cfg.mode, dep.beta, stage_rng(cfg.master_seed, index, "grouping"), cfg.resolved_groups()
    )
    plan = pilots.assign_pilots_and_cluster(dep.beta, parts, cfg.tau_p)
    stats = estimation.composite_stats(
        r_cov, parts, plan, cfg.tau_p, cfg.pilot_power_w, cfg.noise_w
    )

    n_groups = plan.n_groups
    total_real = cfg.realizations
    norm_cut = (total_real + 1) // 2 if cfg.split_sample_eval else total_real
    acc = evaluation.SinrAccumulator(cfg.n_ms, n_groups)
    centralized = cfg.precoder == "ipmmse"
    sq_norm_sums = [np.zeros(plan.serving[g].size) for g in range(n_groups)] if centralized else None
    norm_count = 0

    for ci, (start, stop) in enumerate(_chunk_bounds(total_real)):
        n_chunk = stop - start
        channels = covariance.sample_channels(
            factors, n_chunk, stage_rng(cfg.master_seed, index, "channels", ci)
        )
        y = estimation.project_pilots(
            channels,
            parts,
            plan,
            cfg.tau_p,
            cfg.pilot_power_w,
            cfg.noise_w,
            stage_rng(cfg.master_seed, index, "pilot_noise", ci),
        )
        estimates = estimation.estimate_composites(y, stats, plan)
        if centralized:
            blocks = []
            for g in range(n_groups):
                dirs = precoding.ipmmse_direction(
                    estimates,
                    stats,
                    plan,
                    parts,
                    g,
                    cfg.group_power_w,
                    cfg.tau_p,
                    cfg.pilot_power_w,
                    cfg.noise_w,
                )
                per_ap = dirs.reshape(n_chunk, -1, cfg.n_antennas)
                norm_part = slice(None, max(0, min(norm_cut, stop) - start))
                sq_norm_sums[g] += np.sum(
                    np.abs(per_ap[norm_part]) ** 2, axis=(0, 2)
                )
                blocks.append(per_ap)
            group_pre = precoding.GroupPrecoders(
                aps=[plan.serving[g] for g in range(n_groups)],
                blocks=blocks,
                power_scale=np.ones(n_groups),
            )
            norm_count += max(0, min(norm_cut, stop) - start)
        else:
            group_pre = precoding.cb_precoders(
                estimates, stats, plan, cfg.dl_power_w, cfg.resolved_nu()
            )
        if cfg.split_sample_eval:
            lo = max(0, norm_cut - start)
            eval_part = slice(lo, n_chunk) if lo < n_chunk else None
        else:
            eval_part = slice(0, n_chunk)
        if eval_part is not None:
            sliced = precoding.GroupPrecoders(
                aps=group_pre.aps,
                blocks=[b[eval_part] for b in group_pre.blocks],
                power_scale=group_pre.power_scale,
            )
            acc.update(channels[eval_part], sliced)

    per_ap_power = None
    if centralized:
        ap_norm_list = [s / norm_count for s in sq_norm_sums]
        norms = np.array([a.sum() for a in ap_norm_list])
        omegas = np.array(
            [precoding.omega_factor(a, cfg.omega_convention) for a in ap_norm_list]
        )
        trace_sums = np.array(
            [stats.trace_r_comp[plan.serving[g], g].sum() for g in range(n_groups)]
        )
        rho = precoding.fractional_power_centralized(
            trace_sums, omegas, plan, cfg.dl_power_w, cfg.resolved_nu(), cfg.kappa
        )
        power_scale = rho / norms
        per_ap_power = precoding.per_ap_power_centralized(plan, rho, ap_norm_list)
    else:
        power_scale = np.ones(n_groups)

    _, _, sinr, clamped = acc.finalize(power_scale, parts.group_of, cfg.noise_w)
    report = evaluation.build_report(sinr, clamped, parts, cfg.tau_p, cfg.tau_c)
    return SnapshotResult(
        index=index, report=report, group_sizes=parts.sizes, per_ap_power=per_ap_power
    )


def _snapshot_summary_and_samples(cfg: SystemConfig, index: int) -> tuple[dict, float, float]:
    res = run_snapshot(cfg, index)
    return res.summary(), res.report.sum_se_per_user, res.report.sum_se_per_group


def _worker(args):
    cfg, index = args
    return _snapshot_summary_and_samples(cfg, index)


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            return 1
    return 1


def run_campaign(cfg: SystemConfig, workers: int | None = None) -> CampaignResult:
    """Run all snapshots and pool their sum-SE samples into the CDF.

    Results are independent of the worker count; a snapshot failure aborts the
    campaign and raises CampaignError carrying the completed prefix.
    """
    if workers is None:
        workers = default_workers()
    workers = max(1, int(workers))
    t0 = time.monotonic()
    indices = list(range(cfg.snapshots))
    summaries = []
    per_user = []
    per_group = []
    failed = None
    if workers == 1:
        for i in indices:
            try:
                summary, su, sg = _snapshot_summary_and_samples(cfg, i)
            except Exception as exc:
                failed = (i, exc)
                break
            summaries.append(summary)
            per_user.append(su)
            per_group.append(sg)
    else:
        with multiprocessing.Pool(processes=workers) as pool:
            results = pool.imap(_worker, [(cfg, i) for i in indices])
            for i in indices:
                try:
                    summary, su, sg = next(results)
                except StopIteration:
                    break
                except Exception as exc:
                    failed = (i, exc)
                    break
                summaries.append(summary)
                per_user.append(su)
                per_group.append(sg)
    if failed is not None:
        index, exc = failed
        raise CampaignError(
            f"snapshot {index} failed: {exc}", partial=summaries, failed_snapshot=index
        ) from exc
    samples = np.array(per_user if cfg.sum_convention == "per_user" else per_group)
    values, probs = empirical_cdf(samples)
    return CampaignResult(
        config=cfg,
        samples=samples,
        cdf_values=values,
        cdf_probs=probs,
        summaries=summaries,
        wall_time_s=time.monotonic() - t0,
        workers=workers,
    )


def write_outputs(result: CampaignResult, out_dir: str) -> None:
    """Emit cdf.csv and report.json into ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    cdf_path = os.path.join(out_dir, "cdf.csv")
    with open(cdf_path, "w", encoding="utf-8") as fh:
        fh.write("sum_se_bps_hz,cdf\n")
        for v, p in zip(result.cdf_values, result.cdf_probs):
            # repr of a Python float is the shortest exact round-trip form
            fh.write(f"{float(v)!r},{float(p)!r}\n")
    report = {
        "config": result.config.semantic_dict(),
        "config_hash": result.config_hash,
        "workers": result.workers,
        "wall_time_s": result.wall_time_s,
        "snapshots": result.summaries,
        "diagnostics": {
            "clamped_total": int(sum(s["clamped"] for s in result.summaries)),
            "median_sum_se": float(np.median(result.samples)),
        },
    }
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)


def write_partial(partial: list, failed_snapshot: int, message: str, out_dir: str) -> None:
    """Emit the completed snapshot summaries after an aborted campaign."""
    os.makedirs(out_dir, exist_ok=True)
    payload = {
        "failed_snapshot": failed_snapshot,
        "error": message,
        "completed": partial,
    }
    with open(os.path.join(out_dir, "report_partial.json"), "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
