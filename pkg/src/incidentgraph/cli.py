"""Command line entry point.

Subcommands mirror the pipeline stages plus end-to-end `run`, the scenario
generator and the review service. Flag defaults equal the shipped
configuration: threshold 0.4, gamma 1.0/0.5/0.5, MaxMemb 2, MaxCard 20,
falseIndication 0.2, gl 2 for signature sources and 1 otherwise.

Exit codes: 0 ok, 1 usage, 2 data error, 3 solver limit, 4 internal.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from datetime import timedelta
from pathlib import Path

from . import pipeline as pl
from . import partition as pt
from .community import partition_communities
from .factorgraph import build_fg, infer_exact, infer_sum_product
from .graph import DEFAULT_THRESHOLD
from .ingest import IngestError
from .lp import IterationLimit
from .model import default_transition_matrix
from .scenario import generate_scenario
from .templating import TemplatingError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_SOLVER = 3
EXIT_INTERNAL = 4

log = logging.getLogger("incidentgraph")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="seed for randomized paths (default 0)")
    p.add_argument("--jobs", type=int, default=1, help="worker cap for parallel stages (default 1)")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")


def _add_partition_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, default=None,
                   help="partition count (default ceil(|V|/max-card))")
    p.add_argument("--max-memb", type=int, default=pt.DEFAULT_MAX_MEMB,
                   help="per-alert incident membership cap (default 2)")
    p.add_argument("--max-card", type=int, default=pt.DEFAULT_MAX_CARD,
                   help="per-incident size cap (default 20)")
    p.add_argument("--gamma0", type=float, default=pt.DEFAULT_GAMMA[0],
                   help="cut/cardinality weight (default 1.0)")
    p.add_argument("--gamma1", type=float, default=pt.DEFAULT_GAMMA[1],
                   help="tactic coverage weight (default 0.5)")
    p.add_argument("--gamma2", type=float, default=pt.DEFAULT_GAMMA[2],
                   help="asset count weight (default 0.5)")
    p.add_argument("--mode", choices=("exact", "relaxed", "community"),
                   default="community", help="partitioning mode (default community)")
    p.add_argument("--tactic-penalty", choices=("inf", "one"), default="inf",
                   help="tactic-miss penalty norm (default inf)")


def build_parser() -> _Parser:
    parser = _Parser(prog="incidentgraph",
                     description="Distill alert floods into scored, tactic-aware incidents")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse alert files into the alert artifact")
    p.add_argument("--input", type=Path, required=True,
                   help="directory with eve.jsonl/generic.jsonl and config maps")
    p.add_argument("--out", type=Path, required=True)
    _add_common(p)

    p = sub.add_parser("templates-learn",
                       help="learn templates and merge alerts (needs ingest output)")
    p.add_argument("--input", type=Path, required=True, help="scenario input dir (for configs)")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--gl", action="append", default=[], metavar="SOURCE=N",
                   help="override attributes-to-generalize for a source")
    _add_common(p)

    p = sub.add_parser("merge", help="apply an existing template model to alerts")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--model", type=Path, required=True, help="templates.model file")
    _add_common(p)

    p = sub.add_parser("graph", help="build the alert graph from merged alerts")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD,
                   help="correlation threshold (default 0.4)")
    p.add_argument("--time-window-minutes", type=float, default=None,
                   help="optional cap on the start-time gap of connected alerts")
    _add_common(p)

    p = sub.add_parser("partition", help="partition the alert graph into incidents")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD,
                   help="correlation threshold (default 0.4)")
    _add_partition_flags(p)
    _add_common(p)

    p = sub.add_parser("score", help="score partition incidents with factor graphs")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD,
                   help="correlation threshold (default 0.4)")
    p.add_argument("--inference", choices=("exact", "bp"), default="exact",
                   help="incident scoring engine (default exact)")
    p.add_argument("--false-indication", type=float, default=0.2,
                   help="both-inactive transition factor value (default 0.2)")
    p.add_argument("--compare-exact", action="store_true",
                   help="with --inference bp, print max deviation from enumeration")
    _add_partition_flags(p)
    _add_common(p)

    p = sub.add_parser("run", help="run the whole pipeline")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD,
                   help="correlation threshold (default 0.4)")
    p.add_argument("--time-window-minutes", type=float, default=None,
                   help="optional cap on the start-time gap of connected alerts")
    p.add_argument("--inference", choices=("exact", "bp"), default="exact",
                   help="incident scoring engine (default exact)")
    p.add_argument("--false-indication", type=float, default=0.2,
                   help="both-inactive transition factor value (default 0.2)")
    p.add_argument("--gl", action="append", default=[], metavar="SOURCE=N")
    _add_partition_flags(p)
    _add_common(p)

    p = sub.add_parser("generate-scenario", help="write a seeded synthetic scenario")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--profile", choices=("darpa", "enterprise", "evidence-demo"),
                   default="darpa")
    p.add_argument("--count", type=int, default=None,
                   help="approximate raw alert count (enterprise profile)")
    _add_common(p)

    p = sub.add_parser("serve", help="serve pipeline output over HTTP/JSON")
    p.add_argument("--data", type=Path, required=True, help="pipeline output dir")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8787)
    p.add_argument("--ui", type=Path, default=None, help="built UI bundle dir")
    _add_common(p)

    return parser


def _parse_gl(pairs: list[str]) -> dict[str, int]:
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise IngestError(f"bad --gl value {pair!r}, expected SOURCE=N")
        src, _, n = pair.partition("=")
        out[src] = int(n)
    return out


def _pipeline_config(args, need_input=True) -> pl.PipelineConfig:
    return pl.PipelineConfig(
        input_dir=getattr(args, "input", Path(".")) if need_input else Path("."),
        out_dir=args.out,
        threshold=getattr(args, "threshold", DEFAULT_THRESHOLD),
        time_window_minutes=getattr(args, "time_window_minutes", None),
        k=getattr(args, "k", None),
        max_memb=getattr(args, "max_memb", pt.DEFAULT_MAX_MEMB),
        max_card=getattr(args, "max_card", pt.DEFAULT_MAX_CARD),
        gamma0=getattr(args, "gamma0", pt.DEFAULT_GAMMA[0]),
        gamma1=getattr(args, "gamma1", pt.DEFAULT_GAMMA[1]),
        gamma2=getattr(args, "gamma2", pt.DEFAULT_GAMMA[2]),
        tactic_penalty=getattr(args, "tactic_penalty", "inf"),
        partition_mode=getattr(args, "mode", "community"),
        inference=getattr(args, "inference", "exact"),
        false_indication=getattr(args, "false_indication", 0.2),
        gl_overrides=_parse_gl(getattr(args, "gl", [])),
        seed=args.seed,
        jobs=args.jobs,
    )


def _cmd_ingest(args) -> int:
    cfg = _pipeline_config(args)
    alerts, _ctx, rejects = pl.stage_ingest(cfg)
    print(f"ingested {len(alerts)} alerts ({rejects} rejected) -> {cfg.out_dir}")
    return EXIT_OK


def _cmd_templates(args) -> int:
    cfg = _pipeline_config(args)
    ctx = pl.load_configs(cfg.input_dir, cfg.gl_overrides)
    alerts = pl.load_alerts(cfg.out_dir)
    ctx.sources = pl.load_sources(cfg.out_dir)
    generalized, _model = pl.stage_templates(cfg, alerts, ctx)
    print(f"{len(alerts)} alerts -> {len(generalized)} generalized")
    return EXIT_OK


def _cmd_merge(args) -> int:
    from .templating import TemplateModel, apply_template_model, default_trees

    cfg = _pipeline_config(args)
    ctx = pl.load_configs(cfg.input_dir, cfg.gl_overrides)
    alerts = pl.load_alerts(cfg.out_dir)
    sources = pl.load_sources(cfg.out_dir)
    with args.model.open() as fh:
        model = TemplateModel.load(fh)
    generalized = apply_template_model(alerts, model, sources, default_trees(ctx.network))
    out = cfg.out_dir / pl.STAGE_DIRS["generalized"]
    out.mkdir(parents=True, exist_ok=True)
    pl._write_jsonl(out / "generalized.jsonl", (g.to_dict() for g in generalized))
    print(f"{len(alerts)} alerts -> {len(generalized)} generalized (replayed model)")
    return EXIT_OK


def _cmd_graph(args) -> int:
    cfg = _pipeline_config(args, need_input=False)
    generalized = pl.load_generalized(cfg.out_dir)
    g = pl.stage_graph(cfg, generalized)
    print(f"graph: {len(g)} nodes, {len(g.edges)} edges")
    return EXIT_OK


def _cmd_partition(args) -> int:
    cfg = _pipeline_config(args, need_input=False)
    generalized = pl.load_generalized(cfg.out_dir)
    g = pl.stage_graph(cfg, generalized)
    part = pl.stage_partition(cfg, g)
    nonempty = sum(1 for c in part.columns if c)
    print(f"partition ({part.status}): {nonempty} non-empty columns, "
          f"objective {part.objective:.6g}")
    return EXIT_OK


def _cmd_score(args) -> int:
    cfg = _pipeline_config(args, need_input=False)
    generalized = pl.load_generalized(cfg.out_dir)
    g = pl.stage_graph(cfg, generalized)
    part = pl.stage_partition(cfg, g)
    incidents = pl.stage_score(cfg, g, part)
    if args.compare_exact and cfg.inference == "bp":
        worst = 0.0
        for inc in incidents:
            fg = build_fg(inc.nodes, default_transition_matrix(), cfg.false_indication)
            exact = infer_exact(fg)
            bp = infer_sum_product(fg)
            for t in exact.scores:
                worst = max(worst, abs(exact.scores[t] - bp.scores[t]))
        print(f"max marginal deviation bp vs exact: {worst:.6g}")
    print(f"scored {len(incidents)} incidents")
    return EXIT_OK


def _cmd_run(args) -> int:
    cfg = _pipeline_config(args)
    incidents, report = pl.run_pipeline(cfg)
    print(report.text(), end="")
    print(f"wrote {cfg.out_dir}")
    return EXIT_OK


def _cmd_generate(args) -> int:
    truth = generate_scenario(args.out, seed=args.seed, profile=args.profile,
                              count=args.count)
    print(json.dumps(truth, indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_serve(args) -> int:
    from .service import serve

    httpd = serve(args.data, host=args.host, port=args.port, ui_dir=args.ui)
    addr = httpd.server_address
    print(f"serving on http://{addr[0]}:{addr[1]}/ (data: {args.data})")
    try:
        httpd.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        httpd.server_close()
    return EXIT_OK


_COMMANDS = {
    "ingest": _cmd_ingest,
    "templates-learn": _cmd_templates,
    "merge": _cmd_merge,
    "graph": _cmd_graph,
    "partition": _cmd_partition,
    "score": _cmd_score,
    "run": _cmd_run,
    "generate-scenario": _cmd_generate,
    "serve": _cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _COMMANDS[args.command](args)
    except pt.SizeGuardError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_SOLVER
    except (pt.SolverLimit, IterationLimit) as e:
        print(f"solver limit: {e}", file=sys.stderr)
        return EXIT_SOLVER
    except (IngestError, TemplatingError, pt.PartitionError, pl.PipelineError,
            FileNotFoundError, ValueError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except Exception as e:  # pragma: no cover - last resort
        log.exception("internal error")
        print(f"internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
