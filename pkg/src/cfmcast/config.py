"""Run configuration, presets and serialization.

A :class:`SystemConfig` captures every semantic knob of a campaign: network
dimensions, frame structure, power budgets, propagation constants, deployment
layout, service mode, precoder and Monte Carlo sizes.  JSON configs mirror the
dataclass field-for-field and unknown keys are rejected.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, asdict, replace

from .errors import ConfigError

MODES = ("unicast", "single", "subgroup")
PRECODERS = ("ipmmse", "cb")
SUM_CONVENTIONS = ("per_user", "per_group")
OMEGA_CONVENTIONS = ("share", "literal")


@dataclass(frozen=True)
class DeploymentSpec:
    """Layout of mobile stations: uniform over the area or clustered squares."""

    kind: str = "uniform"
    clusters: int | None = None
    per_cluster: int | None = None
    cluster_side_m: float | None = None

    def validate(self, n_ms: int, side_m: float) -> None:
        if self.kind == "uniform":
            if any(v is not None for v in (self.clusters, self.per_cluster, self.cluster_side_m)):
                raise ConfigError("uniform deployment takes no cluster parameters")
            return
        if self.kind != "clustered":
            raise ConfigError(f"unknown deployment kind {self.kind!r}")
        if not self.clusters or not self.per_cluster or not self.cluster_side_m:
            raise ConfigError("clustered deployment needs clusters, per_cluster and cluster_side_m")
        if self.clusters * self.per_cluster != n_ms:
            raise ConfigError(
                f"clusters*per_cluster = {self.clusters * self.per_cluster} must equal n_ms = {n_ms}"
            )
        if self.cluster_side_m <= 0 or self.cluster_side_m > side_m:
            raise ConfigError("cluster_side_m must lie in (0, side_m]")


@dataclass(frozen=True)
class SystemConfig:
    # network dimensions
    n_aps: int = 100
    n_antennas: int = 4
    n_ms: int = 100
    # frame structure (samples per coherence block)
    tau_c: int = 200
    tau_p: int = 20
    # power budgets, watts
    pilot_power_w: float = 0.1
    dl_power_w: float = 0.2
    group_power_w: float = 0.1
    # fractional power-control exponents; nu=None resolves per precoder
    nu: float | None = None
    kappa: float = 0.5
    # propagation
    shadowing_std_db: float = 4.0
    shadowing_decorrelation_m: float = 9.0
    asd_deg: float = 15.0
    side_m: float = 1000.0
    ap_height_m: float = 10.0
    ms_height_m: float = 1.5
    noise_psd_dbm_hz: float = -174.0
    noise_figure_db: float = 7.0
    bandwidth_hz: float = 20e6
    # campaign sizes
    snapshots: int = 250
    realizations: int = 500
    # service shape
    mode: str = "subgroup"
    precoder: str = "ipmmse"
    n_groups: int | None = None
    deployment: DeploymentSpec = field(default_factory=DeploymentSpec)
    # reproducibility and reporting
    master_seed: int = 0
    sum_convention: str = "per_user"
    omega_convention: str = "share"
    split_sample_eval: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        positive = {
            "n_aps": self.n_aps,
            "n_antennas": self.n_antennas,
            "n_ms": self.n_ms,
            "tau_c": self.tau_c,
            "tau_p": self.tau_p,
            "pilot_power_w": self.pilot_power_w,
            "dl_power_w": self.dl_power_w,
            "group_power_w": self.group_power_w,
            "side_m": self.side_m,
            "bandwidth_hz": self.bandwidth_hz,
            "snapshots": self.snapshots,
            "realizations": self.realizations,
            "shadowing_decorrelation_m": self.shadowing_decorrelation_m,
        }
        for name, value in positive.items():
            if value <= 0:
                raise ConfigError(f"{name} must be positive, got {value}")
        if self.tau_p > self.tau_c:
            raise ConfigError(f"tau_p = {self.tau_p} cannot exceed tau_c = {self.tau_c}")
        if self.shadowing_std_db < 0 or self.asd_deg < 0:
            raise ConfigError("shadowing_std_db and asd_deg must be non-negative")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.precoder not in PRECODERS:
            raise ConfigError(f"precoder must be one of {PRECODERS}, got {self.precoder!r}")
        if self.sum_convention not in SUM_CONVENTIONS:
            raise ConfigError(f"sum_convention must be one of {SUM_CONVENTIONS}")
        if self.omega_convention not in OMEGA_CONVENTIONS:
            raise ConfigError(f"omega_convention must be one of {OMEGA_CONVENTIONS}")
        if self.mode == "subgroup":
            if self.n_groups is None:
                raise ConfigError("mode 'subgroup' requires n_groups")
            if not 1 <= self.n_groups <= self.n_ms:
                raise ConfigError(f"n_groups must lie in [1, n_ms], got {self.n_groups}")
        elif self.n_groups is not None:
            expected = self.n_ms if self.mode == "unicast" else 1
            if self.n_groups != expected:
                raise ConfigError(
                    f"n_groups = {self.n_groups} conflicts with mode {self.mode!r}"
                )
        if self.split_sample_eval and self.realizations < 2:
            raise ConfigError("split_sample_eval needs at least 2 realizations")
        self.deployment.validate(self.n_ms, self.side_m)

    # --- derived quantities -------------------------------------------------

    @property
    def noise_dbm(self) -> float:
        """Thermal noise over the signal bandwidth, including the noise figure."""
        return self.noise_psd_dbm_hz + 10.0 * math.log10(self.bandwidth_hz) + self.noise_figure_db

    @property
    def noise_w(self) -> float:
        return 10.0 ** ((self.noise_dbm - 30.0) / 10.0)

    @property
    def prelog(self) -> float:
        return 1.0 - self.tau_p / self.tau_c

    def resolved_groups(self) -> int:
        if self.mode == "unicast":
            return self.n_ms
        if self.mode == "single":
            return 1
        return int(self.n_groups)

    def resolved_nu(self) -> float:
        if self.nu is not None:
            return self.nu
        return -0.5 if self.precoder == "ipmmse" else 0.5

    # --- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        d = asdict(self)
        d["deployment"] = {k: v for k, v in asdict(self.deployment).items() if v is not None}
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "SystemConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        data = dict(data)
        dep = data.get("deployment")
        if dep is not None:
            if not isinstance(dep, dict):
                raise ConfigError("deployment must be an object")
            dep_known = set(DeploymentSpec.__dataclass_fields__)
            dep_unknown = set(dep) - dep_known
            if dep_unknown:
                raise ConfigError(f"unknown deployment keys: {sorted(dep_unknown)}")
            data["deployment"] = DeploymentSpec(**dep)
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "SystemConfig":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        return cls.from_dict(data)

    def semantic_dict(self) -> dict:
        """Canonical field dict with per-precoder defaults resolved."""
        d = self.to_dict()
        d["nu"] = self.resolved_nu()
        d["n_groups"] = self.resolved_groups()
        d["noise_dbm"] = self.noise_dbm
        return d

    def config_hash(self) -> str:
        payload = json.dumps(self.semantic_dict(), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def with_overrides(self, **kwargs) -> "SystemConfig":
        return replace(self, **kwargs)


def preset(name: str) -> SystemConfig:
    """Named campaign configurations.

    ``fig2_*`` and ``fig3`` reproduce the full-scale campaigns; ``desk_*`` are
    reduced-size variants (fewer APs/antennas/users and a 50x100 Monte Carlo
    budget) that preserve the deployment ratios and finish on a workstation.
    """
    presets = {
        "fig2_100": SystemConfig(n_ms=100, mode="unicast", precoder="ipmmse"),
        "fig2_500": SystemConfig(n_ms=500, mode="unicast", precoder="ipmmse"),
        "fig3": SystemConfig(
            n_ms=500,
            mode="subgroup",
            n_groups=30,
            precoder="cb",
            deployment=DeploymentSpec(kind="clustered", clusters=10, per_cluster=50, cluster_side_m=10.0),
        ),
        "desk_uniform": SystemConfig(
            n_aps=25,
            n_antennas=2,
            n_ms=40,
            tau_p=10,
            side_m=500.0,
            snapshots=50,
            realizations=100,
            mode="unicast",
            precoder="ipmmse",
        ),
        "desk_clustered": SystemConfig(
            n_aps=25,
            n_antennas=2,
            n_ms=40,
            tau_p=5,
            side_m=500.0,
            snapshots=50,
            realizations=100,
            mode="subgroup",
            n_groups=4,
            precoder="cb",
            deployment=DeploymentSpec(kind="clustered", clusters=4, per_cluster=10, cluster_side_m=10.0),
        ),
    }
    if name not in presets:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(presets)}")
    return presets[name]
