export interface IncidentSummary {
  id: string;
  tactic_count: number;
  top_score: number;
  node_count: number;
}

export interface AttrValue {
  kind: string;
  value: string;
  level: number;
}

export interface NodeDoc {
  id: string;
  source: string;
  signature: string;
  attributes: Record<string, AttrValue>;
  score: number;
  members: string[];
  tactics: string[];
  assets: string[];
  src_ips: string[];
  dst_ips: string[];
  time_start: string;
  time_end: string;
}

export interface EdgeDoc {
  from: string;
  to: string;
  weight: number;
}

export interface IncidentDoc {
  id: string;
  tactics: string[];
  assets: string[];
  nodes: NodeDoc[];
  edges: EdgeDoc[];
  tactic_scores: Record<string, number>;
  converged: boolean | null;
  iterations: number | null;
  evidence: Record<string, string>;
  inactive_alerts?: string[];
}

export type EvidenceState = "Active" | "Inactive" | "Clear";

export interface ScoreResponse {
  id: string;
  tactic_scores: Record<string, number>;
  evidence: Record<string, string>;
  inactive_alerts: string[];
}
