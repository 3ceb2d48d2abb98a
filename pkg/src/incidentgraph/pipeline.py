"""End-to-end orchestration: ingest -> template -> graph -> partition -> score.

Each stage persists its artifact under a numbered directory so stages can be
rerun independently. Outputs are byte-deterministic for a fixed input,
config and seed; wall-clock timings are logged but never persisted.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from datetime import timedelta
from pathlib import Path

from . import community as community_mod
from . import partition as partition_mod
from .factorgraph import (
    DEFAULT_FALSE_INDICATION,
    build_fg,
    infer_exact,
    infer_sum_product,
)
from .graph import DEFAULT_THRESHOLD, AlertGraph, build_graph
from .incidents import (
    Incident,
    assign_ids,
    extract_incidents,
    incident_summary,
    order_incidents,
)
from .ingest import (
    IngestContext,
    NetworkConfig,
    ScoreMappingConfig,
    TacticMappingConfig,
    load_network_conf,
    load_scores_map,
    load_tactics_map,
    parse_stream,
)
from .model import Alert, AlertSource, GeneralizedAlert, SourceKind, Tactic, default_transition_matrix
from .templating import TemplateModel, default_trees, run_templating

log = logging.getLogger(__name__)

STAGE_DIRS = {
    "alerts": "01_alerts",
    "generalized": "02_generalized",
    "graph": "03_graph",
    "partitions": "04_partitions",
    "incidents": "05_incidents",
}


class PipelineError(RuntimeError):
    def __init__(self, stage: str, msg: str):
        self.stage = stage
        super().__init__(f"[{stage}] {msg}")


@dataclass
class PipelineConfig:
    input_dir: Path
    out_dir: Path
    threshold: float = DEFAULT_THRESHOLD
    time_window_minutes: float | None = None
    k: int | None = None
    max_memb: int = partition_mod.DEFAULT_MAX_MEMB
    max_card: int = partition_mod.DEFAULT_MAX_CARD
    gamma0: float = partition_mod.DEFAULT_GAMMA[0]
    gamma1: float = partition_mod.DEFAULT_GAMMA[1]
    gamma2: float = partition_mod.DEFAULT_GAMMA[2]
    tactic_penalty: str = "inf"
    partition_mode: str = "community"  # community | exact | relaxed
    inference: str = "exact"           # exact | bp
    false_indication: float = DEFAULT_FALSE_INDICATION
    gl_overrides: dict[str, int] = field(default_factory=dict)
    seed: int = 0
    jobs: int = 1

    def snapshot(self) -> dict:
        d = {
            "threshold": self.threshold,
            "time_window_minutes": self.time_window_minutes,
            "k": self.k,
            "max_memb": self.max_memb,
            "max_card": self.max_card,
            "gamma": [self.gamma0, self.gamma1, self.gamma2],
            "tactic_penalty": self.tactic_penalty,
            "partition_mode": self.partition_mode,
            "inference": self.inference,
            "false_indication": self.false_indication,
            "gl_overrides": dict(sorted(self.gl_overrides.items())),
            "seed": self.seed,
        }
        return d


@dataclass
class RunReport:
    raw_alerts: int = 0
    rejected: int = 0
    generalized: int = 0
    incidents: int = 0
    stage_seconds: dict[str, float] = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def text(self) -> str:
        lines = [
            "run report",
            f"raw alerts       {self.raw_alerts}",
            f"rejected         {self.rejected}",
            f"generalized      {self.generalized}",
            f"incidents        {self.incidents}",
            "config " + json.dumps(self.config, sort_keys=True),
        ]
        return "\n".join(lines) + "\n"


def _write_json(path: Path, obj) -> None:
    path.write_text(
        json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


def _write_jsonl(path: Path, rows) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")


def _read_jsonl(path: Path):
    with path.open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)


def load_configs(input_dir: Path, gl_overrides: dict[str, int] | None = None) -> IngestContext:
    tactics_path = input_dir / "tactics.map"
    scores_path = input_dir / "scores.map"
    network_path = input_dir / "network.conf"
    if not tactics_path.exists():
        raise PipelineError("ingest", f"missing {tactics_path}")
    with tactics_path.open() as fh:
        tactics = load_tactics_map(fh)
    if scores_path.exists():
        with scores_path.open() as fh:
            scores = load_scores_map(fh)
    else:
        scores = ScoreMappingConfig()
    if network_path.exists():
        with network_path.open() as fh:
            network = load_network_conf(fh)
    else:
        network = NetworkConfig.from_cidrs()
    return IngestContext(
        tactics=tactics, scores=scores, network=network,
        gl_overrides=dict(gl_overrides or {}),
    )


def stage_ingest(cfg: PipelineConfig) -> tuple[list[Alert], IngestContext, int]:
    ctx = load_configs(cfg.input_dir, cfg.gl_overrides)
    alerts: list[Alert] = []
    rejects: list[dict] = []
    eve = cfg.input_dir / "eve.jsonl"
    generic = cfg.input_dir / "generic.jsonl"
    if not eve.exists() and not generic.exists():
        raise PipelineError("ingest", f"no eve.jsonl or generic.jsonl in {cfg.input_dir}")
    if eve.exists():
        with eve.open() as fh:
            alerts.extend(parse_stream(fh, ctx, "eve", rejects))
    if generic.exists():
        with generic.open() as fh:
            alerts.extend(parse_stream(fh, ctx, "generic", rejects))

    out = cfg.out_dir / STAGE_DIRS["alerts"]
    out.mkdir(parents=True, exist_ok=True)
    _write_jsonl(out / "alerts.jsonl", (a.to_dict() for a in alerts))
    _write_jsonl(out / "rejects.jsonl", rejects)
    _write_json(
        out / "sources.json",
        {
            s.id: {
                "schema": list(s.schema),
                "gl": s.gl,
                "tactics": sorted(t.value for t in s.tactics),
                "kind": s.kind.value,
                "name": s.name,
            }
            for s in ctx.sources.values()
        },
    )
    return alerts, ctx, len(rejects)


def load_sources(out_dir: Path) -> dict[str, AlertSource]:
    doc = json.loads((out_dir / STAGE_DIRS["alerts"] / "sources.json").read_text())
    return {
        sid: AlertSource(
            id=sid,
            schema=tuple(d["schema"]),
            gl=d["gl"],
            tactics=frozenset(Tactic(t) for t in d["tactics"]),
            kind=SourceKind(d["kind"]),
            name=d.get("name", ""),
        )
        for sid, d in doc.items()
    }


def load_alerts(out_dir: Path) -> list[Alert]:
    path = out_dir / STAGE_DIRS["alerts"] / "alerts.jsonl"
    return [Alert.from_dict(d) for d in _read_jsonl(path)]


def stage_templates(
    cfg: PipelineConfig, alerts: list[Alert], ctx: IngestContext
) -> tuple[list[GeneralizedAlert], TemplateModel]:
    trees = default_trees(ctx.network)
    generalized, model = run_templating(alerts, ctx.sources, trees, jobs=cfg.jobs)
    out = cfg.out_dir / STAGE_DIRS["generalized"]
    out.mkdir(parents=True, exist_ok=True)
    _write_jsonl(out / "generalized.jsonl", (g.to_dict() for g in generalized))
    with (out / "templates.model").open("w") as fh:
        model.dump(fh)
    return generalized, model


def load_generalized(out_dir: Path) -> list[GeneralizedAlert]:
    path = out_dir / STAGE_DIRS["generalized"] / "generalized.jsonl"
    return [GeneralizedAlert.from_dict(d) for d in _read_jsonl(path)]


def stage_graph(cfg: PipelineConfig, generalized: list[GeneralizedAlert]) -> AlertGraph:
    window = (
        timedelta(minutes=cfg.time_window_minutes)
        if cfg.time_window_minutes is not None
        else None
    )
    g = build_graph(
        generalized,
        default_transition_matrix(),
        threshold=cfg.threshold,
        time_window=window,
    )
    out = cfg.out_dir / STAGE_DIRS["graph"]
    out.mkdir(parents=True, exist_ok=True)
    with (out / "graph.tsv").open("w") as fh:
        g.dump_tables(fh)
    with (out / "graph.gml").open("w") as fh:
        g.dump_gml(fh)
    return g


def load_graph(out_dir: Path, threshold: float) -> AlertGraph:
    generalized = load_generalized(out_dir)
    window = None
    return build_graph(generalized, default_transition_matrix(), threshold, window)


def stage_partition(cfg: PipelineConfig, g: AlertGraph) -> partition_mod.IncidentPartition:
    if len(g) == 0:
        part = partition_mod.IncidentPartition(
            columns=[], objective=0.0, status="heuristic",
            max_memb=cfg.max_memb, max_card=max(cfg.max_card, 1),
        )
    elif cfg.partition_mode == "community":
        part = community_mod.partition_communities(g, cfg.max_memb, seed=cfg.seed)
    else:
        problem = partition_mod.build_problem(
            g,
            k=cfg.k,
            max_memb=cfg.max_memb,
            max_card=cfg.max_card,
            gamma0=cfg.gamma0,
            gamma1=cfg.gamma1,
            gamma2=cfg.gamma2,
            tactic_penalty=cfg.tactic_penalty,
        )
        out = cfg.out_dir / STAGE_DIRS["partitions"]
        out.mkdir(parents=True, exist_ok=True)
        with (out / "problem.lp").open("w") as fh:
            partition_mod.dump_lp(problem, fh)
        if cfg.partition_mode == "exact":
            part = partition_mod.solve_exact(problem)
        elif cfg.partition_mode == "relaxed":
            part = partition_mod.solve_relaxed(problem)
        else:
            raise PipelineError("partition", f"unknown mode {cfg.partition_mode!r}")

    out = cfg.out_dir / STAGE_DIRS["partitions"]
    out.mkdir(parents=True, exist_ok=True)
    _write_json(
        out / "partition.json",
        {
            "status": part.status,
            "objective": part.objective,
            "max_memb": part.max_memb,
            "max_card": part.max_card,
            "lp_bound": part.lp_bound,
            "columns": part.columns,
            "diagnostics": [
                {
                    "cut_weight": d.cut_weight,
                    "missing_tactics": d.missing_tactics,
                    "asset_count": d.asset_count,
                }
                for d in part.diagnostics
            ],
        },
    )
    return part


def score_incident(inc: Incident, cfg: PipelineConfig) -> Incident:
    fg = build_fg(inc.nodes, default_transition_matrix(), cfg.false_indication)
    if cfg.inference == "bp":
        inc.scores = infer_sum_product(fg)
    else:
        inc.scores = infer_exact(fg)
    return inc


def stage_score(
    cfg: PipelineConfig, g: AlertGraph, part: partition_mod.IncidentPartition
) -> list[Incident]:
    incidents = extract_incidents(g, part)
    if cfg.jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            incidents = list(pool.map(lambda i: score_incident(i, cfg), incidents))
    else:
        incidents = [score_incident(i, cfg) for i in incidents]
    incidents = assign_ids(order_incidents(incidents))

    out = cfg.out_dir / STAGE_DIRS["incidents"]
    out.mkdir(parents=True, exist_ok=True)
    docs = [incident_summary(inc) for inc in incidents]
    _write_json(out / "incidents.json", docs)
    for doc in docs:
        _write_json(out / f"incident_{doc['id']}.json", doc)
    return incidents


def run_pipeline(cfg: PipelineConfig) -> tuple[list[Incident], RunReport]:
    report = RunReport(config=cfg.snapshot())
    cfg.out_dir.mkdir(parents=True, exist_ok=True)

    def timed(stage, fn, *args):
        t0 = time.perf_counter()
        try:
            result = fn(*args)
        except PipelineError:
            raise
        except Exception as e:
            raise PipelineError(stage, str(e)) from e
        dt = time.perf_counter() - t0
        report.stage_seconds[stage] = dt
        log.info("stage %s finished in %.2fs", stage, dt)
        return result

    alerts, ctx, n_rejects = timed("ingest", stage_ingest, cfg)
    report.raw_alerts = len(alerts)
    report.rejected = n_rejects
    generalized, _model = timed("templates", stage_templates, cfg, alerts, ctx)
    report.generalized = len(generalized)
    g = timed("graph", stage_graph, cfg, generalized)
    part = timed("partition", stage_partition, cfg, g)
    incidents = timed("score", stage_score, cfg, g, part)
    report.incidents = len(incidents)

    (cfg.out_dir / "report.txt").write_text(report.text(), encoding="utf-8")
    return incidents, report
