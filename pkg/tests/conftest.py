import random
from datetime import datetime, timedelta, timezone

import pytest

from incidentgraph.graph import build_graph
from incidentgraph.ingest import NetworkConfig
from incidentgraph.model import (
    TACTICS,
    AttrKind,
    AttrValue,
    GeneralizedAlert,
    Tactic,
    default_transition_matrix,
)

BASE_TS = datetime(2021, 3, 1, 12, 0, 0, tzinfo=timezone.utc)


def make_node(
    node_id: str,
    tactics,
    assets,
    minute: int = 0,
    score: float = 0.7,
    source: str = "src",
):
    """GeneralizedAlert with the minimum plumbing tests need."""
    ip = sorted(assets)[0] if assets else "192.0.2.10"
    ts = BASE_TS + timedelta(minutes=minute)
    return GeneralizedAlert(
        id=node_id,
        source=source,
        attributes=(
            ("dstIP", AttrValue(AttrKind.IP, ip)),
            ("srcIP", AttrValue(AttrKind.IP, "192.0.2.9")),
        ),
        score=score,
        members=(node_id,),
        time_start=ts,
        time_end=ts,
        tactics=frozenset(tactics),
        assets=frozenset(assets),
    )


def random_alert_graph(seed: int, max_nodes: int = 8):
    """Seeded small alert graph with domain-shaped weights."""
    rng = random.Random(seed)
    n = rng.randint(4, max_nodes)
    pool = ["10.0.0.1", "10.0.0.2", "10.0.0.3", "10.0.0.4"]
    nodes = [
        make_node(
            f"n{i:02d}",
            rng.sample(TACTICS, rng.randint(1, 2)),
            rng.sample(pool, rng.randint(1, 2)),
            minute=rng.randint(0, 500),
            score=round(rng.uniform(0.2, 1.0), 2),
        )
        for i in range(n)
    ]
    return build_graph(nodes, default_transition_matrix(), 0.4)


@pytest.fixture
def darpa_net():
    return NetworkConfig.from_cidrs(["172.16.0.0/16"])


@pytest.fixture
def tmatrix():
    return default_transition_matrix()


@pytest.fixture(scope="session")
def darpa_scenario(tmp_path_factory):
    """Generated once per session; several suites read it."""
    from incidentgraph.scenario import generate_scenario

    input_dir = tmp_path_factory.mktemp("scenario") / "input"
    truth = generate_scenario(input_dir, seed=7)
    return input_dir, truth


@pytest.fixture(scope="session")
def darpa_run(darpa_scenario, tmp_path_factory):
    from incidentgraph.pipeline import PipelineConfig, run_pipeline

    input_dir, truth = darpa_scenario
    out_dir = tmp_path_factory.mktemp("run") / "out"
    cfg = PipelineConfig(input_dir=input_dir, out_dir=out_dir)
    incidents, report = run_pipeline(cfg)
    return incidents, report, out_dir
