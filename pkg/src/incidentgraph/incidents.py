"""Incident extraction from partitions plus the incident document codec."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .factorgraph import TacticScores
from .graph import AlertGraph, Edge
from .model import GeneralizedAlert, Tactic
from .partition import IncidentPartition


@dataclass
class Incident:
    id: str
    nodes: list[GeneralizedAlert]
    edges: list[Edge]
    tactics: frozenset[Tactic]
    assets: frozenset[str]
    scores: TacticScores | None = None
    evidence: dict[Tactic, bool] = field(default_factory=dict)

    def node_ids(self) -> set[str]:
        return {n.id for n in self.nodes}

    def top_score(self) -> float:
        return self.scores.top() if self.scores else 0.0


def extract_incidents(g: AlertGraph, partition: IncidentPartition) -> list[Incident]:
    """Each non-empty column becomes an incident with its induced subgraph;
    singleton columns carry no internal edges and are dropped."""
    incidents: list[Incident] = []
    seq = 0
    for col in partition.columns:
        if len(col) < 2:
            continue
        node_ids = set(col)
        nodes = sorted((g.node(nid) for nid in node_ids),
                       key=lambda n: (n.time_start, n.id))
        edges = g.induced_edges(node_ids)
        seq += 1
        incidents.append(
            Incident(
                id=f"p{seq:03d}",
                nodes=nodes,
                edges=edges,
                tactics=frozenset(t for n in nodes for t in n.tactics),
                assets=frozenset(a for n in nodes for a in n.assets),
            )
        )
    return incidents


def order_incidents(incidents: list[Incident]) -> list[Incident]:
    """Descending max tactic score, then node count descending, then id."""
    return sorted(
        incidents,
        key=lambda inc: (-inc.top_score(), -len(inc.nodes), inc.id),
    )


def assign_ids(incidents: list[Incident]) -> list[Incident]:
    return [replace(inc, id=f"inc-{i:03d}") for i, inc in enumerate(incidents, 1)]


def incident_summary(incident: Incident) -> dict:
    """Serializable incident document (nodes carry the figure layout fields:
    source IPs, destination IPs, signature)."""
    doc = {
        "id": incident.id,
        "tactics": sorted(t.value for t in incident.tactics),
        "assets": sorted(incident.assets),
        "nodes": [
            {
                **n.to_dict(),
                "src_ips": _ips(n, "src"),
                "dst_ips": _ips(n, "dst"),
                "signature": n.source_name or n.source,
            }
            for n in incident.nodes
        ],
        "edges": [
            {"from": e.src, "to": e.dst, "weight": e.weight}
            for e in sorted(incident.edges, key=lambda e: (e.src, e.dst))
        ],
        "tactic_scores": (
            {t.value: incident.scores.scores[t]
             for t in sorted(incident.scores.scores)}
            if incident.scores
            else {}
        ),
        "converged": incident.scores.converged if incident.scores else None,
        "iterations": incident.scores.iterations if incident.scores else None,
        "evidence": {
            t.value: ("Active" if flag else "Inactive")
            for t, flag in sorted(incident.evidence.items())
        },
    }
    return doc


def _ips(n: GeneralizedAlert, prefix: str) -> list[str]:
    return sorted(
        v.value
        for name, v in n.attributes
        if name.lower().startswith(prefix) and v.kind.value == "ip"
    )


def parse_incident(doc: dict) -> Incident:
    """Inverse of incident_summary (layout fields are derived, not stored)."""
    nodes = [
        GeneralizedAlert.from_dict(
            {k: v for k, v in nd.items() if k not in ("src_ips", "dst_ips", "signature")}
        )
        for nd in doc["nodes"]
    ]
    scores = None
    if doc.get("tactic_scores"):
        scores = TacticScores(
            scores={Tactic(t): v for t, v in doc["tactic_scores"].items()},
            converged=bool(doc.get("converged", True)),
            iterations=int(doc.get("iterations") or 0),
        )
    return Incident(
        id=doc["id"],
        nodes=nodes,
        edges=[Edge(e["from"], e["to"], e["weight"]) for e in doc["edges"]],
        tactics=frozenset(Tactic(t) for t in doc["tactics"]),
        assets=frozenset(doc["assets"]),
        scores=scores,
        evidence={
            Tactic(t): state == "Active"
            for t, state in doc.get("evidence", {}).items()
        },
    )
