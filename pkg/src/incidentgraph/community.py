"""Ego-splitting overlapping community detection over the alert graph.

Each node's ego-net is clustered with label propagation, one persona node is
created per local cluster, the persona graph is clustered with label
propagation again, and persona communities map back to (possibly
overlapping) node communities.
"""

from __future__ import annotations

import random
from collections import Counter

import numpy as np

from .graph import AlertGraph
from .partition import ColumnDiagnostics, IncidentPartition

Adjacency = dict[int, dict[int, float]]


def _undirected_adjacency(g: AlertGraph) -> Adjacency:
    adj: Adjacency = {i: {} for i in range(len(g))}
    w = g.weight_matrix()
    n = len(g)
    for i in range(n):
        for j in range(i + 1, n):
            if w[i, j] > 0.0:
                adj[i][j] = float(w[i, j])
                adj[j][i] = float(w[i, j])
    return adj


def _greedy_coloring(adj: Adjacency) -> list[list[int]]:
    """Color classes (independent sets) in ascending node order."""
    color: dict[int, int] = {}
    for u in sorted(adj):
        taken = {color[v] for v in adj[u] if v in color}
        c = 0
        while c in taken:
            c += 1
        color[u] = c
    classes: dict[int, list[int]] = {}
    for u, c in color.items():
        classes.setdefault(c, []).append(u)
    return [sorted(classes[c]) for c in sorted(classes)]


def label_propagation(
    adj: Adjacency, seed: int = 0, max_iter: int = 100
) -> dict[int, int]:
    """Weighted label propagation, updated synchronously per color class.

    Neighbors never update in the same sub-round, which rules out the
    two-cycle oscillation of the fully synchronous schedule. A node keeps its
    current label when it ties for the best; remaining ties go to the
    smallest label, with a seeded shuffle applied first so distinct seeds can
    explore different (still deterministic) tie orders.
    """
    rng = random.Random(seed)
    labels = {u: u for u in adj}
    classes = _greedy_coloring(adj)
    shuffled = sorted(adj)
    rng.shuffle(shuffled)
    tie_order = {lab: i for i, lab in enumerate(shuffled)}
    for _ in range(max_iter):
        changed = False
        for cls in classes:
            updates: dict[int, int] = {}
            for u in cls:
                if not adj[u]:
                    continue
                weight_per_label: Counter = Counter()
                for v, w in adj[u].items():
                    weight_per_label[labels[v]] += w
                best = max(weight_per_label.values())
                candidates = [
                    lab for lab, wt in weight_per_label.items()
                    if wt >= best - 1e-12
                ]
                if labels[u] in candidates:
                    continue
                updates[u] = min(candidates, key=lambda lab: (tie_order.get(lab, lab), lab))
            for u, lab in updates.items():
                if labels[u] != lab:
                    labels[u] = lab
                    changed = True
        if not changed:
            break
    return labels


def _clusters(labels: dict[int, int]) -> list[list[int]]:
    groups: dict[int, list[int]] = {}
    for u in sorted(labels):
        groups.setdefault(labels[u], []).append(u)
    return [groups[k] for k in sorted(groups)]


def ego_split_communities(g: AlertGraph, seed: int = 0) -> list[list[int]]:
    """Overlapping communities as lists of node indices (sorted, deduped)."""
    adj = _undirected_adjacency(g)
    n = len(g)

    # Personas: one per local cluster of each node's ego-net.
    persona_of: dict[tuple[int, int], int] = {}  # (node, local cluster id) -> persona
    node_cluster: dict[int, dict[int, int]] = {}  # node -> neighbor -> local cluster
    next_persona = 0
    owner: list[int] = []
    for u in range(n):
        neigh = sorted(adj[u])
        ego_adj: Adjacency = {
            v: {w: wt for w, wt in adj[v].items() if w in adj[u]} for v in neigh
        }
        labels = label_propagation(ego_adj, seed=seed + u + 1)
        local_ids: dict[int, int] = {}
        node_cluster[u] = {}
        for v in neigh:
            lab = labels[v]
            if lab not in local_ids:
                local_ids[lab] = len(local_ids)
            node_cluster[u][v] = local_ids[lab]
        n_local = len(local_ids) if neigh else 1
        for c in range(n_local):
            persona_of[(u, c)] = next_persona
            owner.append(u)
            next_persona += 1

    persona_adj: Adjacency = {pid: {} for pid in range(next_persona)}
    for u in range(n):
        for v, w in adj[u].items():
            if v <= u:
                continue
            pu = persona_of[(u, node_cluster[u][v])]
            pv = persona_of[(v, node_cluster[v][u])]
            persona_adj[pu][pv] = w
            persona_adj[pv][pu] = w

    labels = label_propagation(persona_adj, seed=seed)
    communities: dict[int, list[int]] = {}
    for pid in sorted(labels):
        communities.setdefault(labels[pid], []).append(owner[pid])
    seen: set[tuple[int, ...]] = set()
    out: list[list[int]] = []
    for _, members in sorted(communities.items()):
        node_set = tuple(sorted(set(members)))
        if node_set not in seen:
            seen.add(node_set)
            out.append(list(node_set))
    out.sort(key=lambda c: (c[0], len(c)))
    return out


def partition_communities(
    g: AlertGraph, max_memb: int, seed: int = 0
) -> IncidentPartition:
    """Communities as partition columns; membership capped at max_memb by
    keeping the communities where the node is most strongly attached."""
    comms = ego_split_communities(g, seed=seed)
    w = g.weight_matrix()

    memberships: dict[int, list[int]] = {}
    for c_idx, members in enumerate(comms):
        for u in members:
            memberships.setdefault(u, []).append(c_idx)
    for u, cols in memberships.items():
        if len(cols) <= max_memb:
            continue

        def attachment(c_idx: int) -> float:
            return sum(w[u, v] for v in comms[c_idx] if v != u)

        cols.sort(key=lambda c_idx: (-attachment(c_idx), c_idx))
        for c_idx in cols[max_memb:]:
            comms[c_idx] = [v for v in comms[c_idx] if v != u]

    comms = [members for members in comms if members]
    columns = [[g.nodes[u].id for u in members] for members in comms]
    lap = g.laplacian()
    diags = []
    obj = 0.0
    for members in comms:
        xk = np.zeros(len(g))
        xk[members] = 1.0
        tactics = {t for u in members for t in g.nodes[u].tactics}
        assets = {a for u in members for a in g.nodes[u].assets}
        diags.append(
            ColumnDiagnostics(
                cut_weight=float(xk @ lap @ xk),
                missing_tactics=12 - len(tactics),
                asset_count=len(assets),
            )
        )
        obj += float(xk @ lap @ xk)
    part = IncidentPartition(
        columns=columns,
        objective=obj,
        status="heuristic",
        max_memb=max_memb,
        max_card=max(len(g), 1),
        diagnostics=diags,
    )
    part.validate()
    return part
