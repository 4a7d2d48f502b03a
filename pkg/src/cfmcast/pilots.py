"""Pilot assignment and dynamic cooperation clustering for subgroups.

Groups are assigned pilots greedily: the first tau_p groups get orthogonal
pilots, later groups take the pilot with the least accumulated member gain
(pilot interference) at their strongest AP.  Each AP then serves, per pilot in
use, the strongest group on that pilot, with two refinements that keep the
plan well-formed:

* an AP that is some group's strongest AP prefers that group on its pilot, and
* a group left unserved takes its best AP from an incumbent that keeps at
  least one other AP (no group is starved, no AP exceeds one group per pilot).

The fallback of simply stapling an unserved group onto its strongest AP would
overload that AP's pilot, so the reassignment above is used instead; only a
pilot shared by more than L groups can force an overload.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class PilotPlan:
    """Pilot labels, serving sets and the derived cooperation structure."""

    n_pilots: int
    pilot_of: np.ndarray  # (G,) pilot label per group
    serving: list  # per group: sorted AP indices (L_g)
    served: list  # per AP: sorted group indices (D_l)
    master_ap: np.ndarray  # (G,) strongest serving AP per group
    cohort: list  # per group: groups sharing its pilot, itself included
    s_set: list  # per group: groups sharing at least one serving AP, itself included

    @property
    def n_groups(self) -> int:
        return self.pilot_of.shape[0]

    @property
    def n_aps(self) -> int:
        return len(self.served)


def group_gains(beta: np.ndarray, grouping) -> np.ndarray:
    """Mean member gain per (AP, group), shape (L, G)."""
    return np.stack([beta[:, m].mean(axis=1) for m in grouping.members], axis=1)


def pilot_interference(
    beta: np.ndarray, members: list, pilot_of: np.ndarray, ap: int, pilot: int
) -> float:
    """Summed member gains at ``ap`` of the groups already holding ``pilot``.

    ``pilot_of`` uses -1 for groups without a pilot yet.
    """
    total = 0.0
    for c in np.flatnonzero(np.asarray(pilot_of) == pilot):
        total += float(beta[ap, members[c]].sum())
    return total


def _assign_pilots(beta, grouping, tau_p, masters):
    n_groups = grouping.n_groups
    pilot_of = np.full(n_groups, -1, dtype=int)
    for g in range(n_groups):
        if g < tau_p:
            pilot_of[g] = g
            continue
        ap = masters[g]
        interference = np.array(
            [pilot_interference(beta, grouping.members, pilot_of, ap, t) for t in range(tau_p)]
        )
        pilot_of[g] = int(np.argmin(interference))
    return pilot_of


def _serve_strongest(gains, pilot_of, masters, tau_p):
    """Step 2: per AP and per pilot in use, pick one group to serve."""
    n_aps, n_groups = gains.shape
    incumbent = np.full((n_aps, tau_p), -1, dtype=int)
    counts = np.zeros(n_groups, dtype=int)
    for t in range(tau_p):
        cands = np.flatnonzero(pilot_of == t)
        if cands.size == 0:
            continue
        for l in range(n_aps):
            claimants = cands[masters[cands] == l]
            pool = claimants if claimants.size else cands
            winner = pool[int(np.argmax(gains[l, pool]))]
            incumbent[l, t] = winner
            counts[winner] += 1
    return incumbent, counts


def _serve_starved(gains, pilot_of, masters, incumbent, counts):
    """Step 3: give every unserved group one AP by displacing a redundant incumbent."""
    locked: set[int] = set()
    queue = list(np.flatnonzero(counts == 0))
    while queue:
        g = queue.pop(0)
        if counts[g] > 0:
            continue
        t = pilot_of[g]
        order = np.argsort(-gains[:, g], kind="stable")
        target = next(
            (l for l in order if counts[incumbent[l, t]] >= 2 and incumbent[l, t] not in locked),
            None,
        )
        if target is None:
            target = next((l for l in order if incumbent[l, t] not in locked), None)
        if target is None:
            # more than n_aps groups share this pilot: double up on the strongest AP
            counts[g] += 1
            locked.add(g)
            continue
        evicted = incumbent[target, t]
        incumbent[target, t] = g
        counts[evicted] -= 1
        counts[g] += 1
        locked.add(g)
        if counts[evicted] == 0:
            queue.append(int(evicted))
    return incumbent, counts


def assign_pilots_and_cluster(beta: np.ndarray, grouping, tau_p: int) -> PilotPlan:
    """Run the joint pilot assignment and AP clustering for a partition.

    Returns serving sets L_g, served sets D_l, the pilot label and strongest
    serving AP per group, and the derived cohort (same pilot) and interference
    neighborhood (shared AP) sets.
    """
    if tau_p < 1:
        raise ValueError(f"tau_p must be at least 1, got {tau_p}")
    n_aps = beta.shape[0]
    gains = group_gains(beta, grouping)
    masters = np.argmax(gains, axis=0)
    pilot_of = _assign_pilots(beta, grouping, tau_p, masters)
    incumbent, counts = _serve_strongest(gains, pilot_of, masters, tau_p)
    incumbent, counts = _serve_starved(gains, pilot_of, masters, incumbent, counts)

    serving = [list() for _ in range(grouping.n_groups)]
    for l in range(n_aps):
        for t in range(tau_p):
            g = incumbent[l, t]
            if g >= 0:
                serving[g].append(l)
    # a fallback double-up is the only way a group is served off the incumbent table
    for g in np.flatnonzero(counts > 0):
        if not serving[g]:
            serving[g].append(int(masters[g]))
    serving = [np.array(sorted(s), dtype=int) for s in serving]
    served = [
        np.array(sorted(g for g in range(grouping.n_groups) if l in serving[g]), dtype=int)
        for l in range(n_aps)
    ]
    master_ap = np.array(
        [s[int(np.argmax(gains[s, g]))] for g, s in enumerate(serving)], dtype=int
    )
    cohort = [np.flatnonzero(pilot_of == pilot_of[g]) for g in range(grouping.n_groups)]
    s_set = [
        np.unique(np.concatenate([served[l] for l in serving[g]]))
        for g in range(grouping.n_groups)
    ]
    return PilotPlan(
        n_pilots=tau_p,
        pilot_of=pilot_of,
        serving=serving,
        served=served,
        master_ap=master_ap,
        cohort=cohort,
        s_set=s_set,
    )
