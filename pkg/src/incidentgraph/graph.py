"""Directed weighted alert graph built from pairwise tactic/asset correlation.

Edges only point forward in time (earliest member timestamp); pairs with
equal start times are evaluated in both directions. The partitioning view
symmetrizes edge weights by elementwise max and uses L = D - W.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import timedelta
from typing import Callable, Sequence, TextIO

import numpy as np

from .model import GeneralizedAlert, TransitionMatrix, canonical_ip

DEFAULT_THRESHOLD = 0.4

IpCorrelation = Callable[[str, str], float]


def ip_correlation(ip: str, ip2: str) -> int:
    """Kronecker delta on canonicalized addresses."""
    return 1 if canonical_ip(ip) == canonical_ip(ip2) else 0


def correlation(
    v: GeneralizedAlert,
    v2: GeneralizedAlert,
    t: TransitionMatrix,
    ip_corr: IpCorrelation = ip_correlation,
) -> float:
    """Max tactic-transition weight times max pairwise asset correlation."""
    if not v.tactics or not v2.tactics or not v.assets or not v2.assets:
        return 0.0
    tac = max(t(a, b) for a in v.tactics for b in v2.tactics)
    if ip_corr is ip_correlation:
        ip = 1.0 if v.assets & v2.assets else 0.0
    else:
        ip = max(ip_corr(a, b) for a in v.assets for b in v2.assets)
    return tac * ip


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    weight: float


class AlertGraph:
    """Nodes are generalized alerts; edges carry correlation weights."""

    def __init__(self, nodes: Sequence[GeneralizedAlert], edges: Sequence[Edge],
                 threshold: float):
        self.nodes: tuple[GeneralizedAlert, ...] = tuple(nodes)
        self.edges: tuple[Edge, ...] = tuple(edges)
        self.threshold = threshold
        self._index = {g.id: i for i, g in enumerate(self.nodes)}
        if len(self._index) != len(self.nodes):
            raise ValueError("duplicate node ids in alert graph")
        for e in self.edges:
            if e.src == e.dst:
                raise ValueError(f"self-edge on {e.src}")
            if not e.weight > threshold:
                raise ValueError(f"edge {e.src}->{e.dst} at/below threshold")

    def __len__(self) -> int:
        return len(self.nodes)

    def index_of(self, node_id: str) -> int:
        return self._index[node_id]

    def node(self, node_id: str) -> GeneralizedAlert:
        return self.nodes[self._index[node_id]]

    def weight_matrix(self) -> np.ndarray:
        """Symmetric W, w[i,j] = max of the two directed weights."""
        n = len(self.nodes)
        w = np.zeros((n, n))
        for e in self.edges:
            i, j = self._index[e.src], self._index[e.dst]
            w[i, j] = max(w[i, j], e.weight)
        return np.maximum(w, w.T)

    def laplacian(self) -> np.ndarray:
        w = self.weight_matrix()
        return np.diag(w.sum(axis=1)) - w

    def induced_edges(self, node_ids: set[str]) -> list[Edge]:
        return [e for e in self.edges if e.src in node_ids and e.dst in node_ids]

    def dump_tables(self, fh: TextIO) -> None:
        """Node table + edge table, tab separated."""
        fh.write("# nodes\nid\tsource\tscore\ttactics\tassets\tstart\n")
        for g in self.nodes:
            fh.write(
                f"{g.id}\t{g.source}\t{g.score}\t"
                f"{','.join(sorted(t.value for t in g.tactics))}\t"
                f"{','.join(sorted(g.assets))}\t{g.time_start.isoformat()}\n"
            )
        fh.write("# edges\nsrc\tdst\tweight\n")
        for e in self.edges:
            fh.write(f"{e.src}\t{e.dst}\t{e.weight}\n")

    def dump_gml(self, fh: TextIO) -> None:
        """Minimal GML for graph-viewer interchange."""
        fh.write("graph [\n  directed 1\n")
        for i, g in enumerate(self.nodes):
            label = g.source_name or g.source
            fh.write(f'  node [\n    id {i}\n    label "{_gml_escape(label)}"\n'
                     f'    name "{g.id}"\n  ]\n')
        for e in self.edges:
            fh.write(
                f"  edge [\n    source {self._index[e.src]}\n"
                f"    target {self._index[e.dst]}\n    weight {e.weight}\n  ]\n"
            )
        fh.write("]\n")


def _gml_escape(s: str) -> str:
    return s.replace('"', "'")


def build_graph(
    alerts: Sequence[GeneralizedAlert],
    t: TransitionMatrix,
    threshold: float = DEFAULT_THRESHOLD,
    time_window: timedelta | None = None,
    ip_corr: IpCorrelation = ip_correlation,
) -> AlertGraph:
    """Evaluate every time-ordered pair; keep edges strictly above threshold."""
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold {threshold} outside (0,1)")
    nodes = sorted(alerts, key=lambda g: (g.time_start, g.id))
    edges: list[Edge] = []
    for i, v in enumerate(nodes):
        for v2 in nodes[i + 1:]:
            gap = v2.time_start - v.time_start
            if time_window is not None and gap > time_window:
                break  # nodes sorted by start time
            w = correlation(v, v2, t, ip_corr)
            if w > threshold:
                edges.append(Edge(v.id, v2.id, w))
            if v.time_start == v2.time_start:
                w_back = correlation(v2, v, t, ip_corr)
                if w_back > threshold:
                    edges.append(Edge(v2.id, v.id, w_back))
    edges.sort(key=lambda e: (e.src, e.dst))
    return AlertGraph(nodes, edges, threshold)
