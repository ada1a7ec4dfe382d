"""Epsilon-orthogonal grouping of user terminals (MADOC-style greedy first-fit)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["UserTerminal", "UserGroup", "channel_cos", "madoc_schedule", "group_records"]


@dataclass(frozen=True)
class UserTerminal:
    id: int
    lat_deg: float
    lon_deg: float
    g_over_t_db: float = 16.9
    channel_row: np.ndarray | None = field(default=None, repr=False, compare=False)


@dataclass(frozen=True)
class UserGroup:
    member_ids: tuple
    epsilon_used: float
    pairwise_max_cos: float
    flagged: bool = False

    @property
    def size(self) -> int:
        return len(self.member_ids)


def channel_cos(h_i, h_j) -> float:
    """``|h_i^H h_j| / (|h_i| |h_j|)``, the cosine of the angle between two channel rows."""
    h_i = np.asarray(h_i, dtype=complex).ravel()
    h_j = np.asarray(h_j, dtype=complex).ravel()
    ni, nj = np.linalg.norm(h_i), np.linalg.norm(h_j)
    if ni == 0 or nj == 0:
        raise ValueError("channel_cos is undefined for a zero vector")
    return float(min(abs(np.vdot(h_i, h_j)) / (ni * nj), 1.0))


def madoc_schedule(rows, epsilon: float, max_group_size: int | None = None, ordering_seed: int = 0, ids=None) -> list:
    """Greedy first-fit grouping with a pairwise cosine threshold.

    Users are visited in a seeded random order. Each joins the first open
    group where its cosine to every member is at most ``epsilon`` and the
    group has room, otherwise it opens a new group.

    Parameters
    ----------
    rows : array_like, shape (U, Z)
        Channel rows, one per user.
    epsilon : float
        Threshold in (0, 1).
    max_group_size : int, optional
        Defaults to ``Z``.
    ordering_seed : int
        Seed of the visiting order.
    ids : sequence, optional
        User identifiers; defaults to row indices.

    Returns
    -------
    list of UserGroup
        Disjoint groups covering every user, in order of creation.
    """
    if isinstance(rows, (list, tuple)) and rows and isinstance(rows[0], UserTerminal):
        ids = [u.id for u in rows] if ids is None else ids
        rows = np.array([u.channel_row for u in rows])
    h = np.atleast_2d(np.asarray(rows, dtype=complex))
    n_users, z = h.shape
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    cap = z if max_group_size is None else int(max_group_size)
    if cap < 1:
        raise ValueError("max_group_size must be >= 1")
    ids = list(range(n_users)) if ids is None else list(ids)
    if len(ids) != n_users:
        raise ValueError("ids length must match the number of rows")

    norms = np.linalg.norm(h, axis=1)
    unit = np.zeros_like(h)
    ok = norms > 0
    unit[ok] = h[ok] / norms[ok, None]
    order = np.random.default_rng(ordering_seed).permutation(n_users)

    members: list[list[int]] = []
    max_cos: list[float] = []
    placed_idx = np.empty(n_users, dtype=int)
    placed_grp = np.empty(n_users, dtype=int)
    n_placed = 0
    flagged_groups = set()

    for u in order:
        if not ok[u]:
            flagged_groups.add(len(members))
            members.append([u])
            max_cos.append(0.0)
            continue
        if n_placed:
            cos = np.abs(unit[placed_idx[:n_placed]].conj() @ unit[u])
            grp = placed_grp[:n_placed]
            bad = np.zeros(len(members), dtype=bool)
            bad[grp[cos > epsilon]] = True
            worst = np.zeros(len(members))
            np.maximum.at(worst, grp, cos)
        else:
            bad = np.zeros(len(members), dtype=bool)
            worst = np.zeros(len(members))
        chosen = -1
        for g in range(len(members)):
            if not bad[g] and g not in flagged_groups and len(members[g]) < cap:
                chosen = g
                break
        if chosen < 0:
            members.append([u])
            max_cos.append(0.0)
            chosen = len(members) - 1
        else:
            members[chosen].append(u)
            max_cos[chosen] = max(max_cos[chosen], float(worst[chosen]))
        placed_idx[n_placed] = u
        placed_grp[n_placed] = chosen
        n_placed += 1

    return [
        UserGroup(tuple(ids[i] for i in m), float(epsilon), c, g in flagged_groups)
        for g, (m, c) in enumerate(zip(members, max_cos))
    ]


def group_records(groups) -> list:
    """Plain records for JSON dumps."""
    return [
        {"group": g, "members": [int(i) if isinstance(i, (int, np.integer)) else i for i in grp.member_ids],
         "max_cos": grp.pairwise_max_cos, "flagged": grp.flagged}
        for g, grp in enumerate(groups)
    ]
