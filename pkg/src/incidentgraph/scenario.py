"""Seeded synthetic scenario generator.

The default profile mirrors a classic intrusion exercise: an external
adversary probes for a vulnerable RPC service, exploits it with root
credentials, logs in over telnet and installs a trojan, which later fires a
flood whose spoofed sources keep it disconnected from the chain. Background
families are shaped so templating collapses each to a handful of nodes.

Count profiles for the three template-corpus sources reproduce the published
template examples exactly (most-common-value counts per attribute).
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path

from .factorgraph import CALIBRATED_DEMO_SCORES, demo_tactic_times, infer_exact, build_fg
from .graph import build_graph
from .incidents import Incident, incident_summary
from .model import (
    AttrKind,
    AttrValue,
    GeneralizedAlert,
    Tactic,
    default_transition_matrix,
)

BASE_TIME = datetime(2000, 4, 7, 8, 0, 0, tzinfo=timezone.utc)

SADMIND_EXPLOIT_SID = "2101891"
TELNET_SID = "2100719"
PORTMAP_SID = "2101957"
ELF_SID = "2018959"
DDOS_SID = "2019876"

SIG_NAMES = {
    SADMIND_EXPLOIT_SID: "GPL RPC sadmind query with root credentials attempt UDP",
    TELNET_SID: "GPL TELNET Bad Login",
    PORTMAP_SID: "GPL RPC portmap sadmind request UDP",
    ELF_SID: "ET POLICY Executable and linking format (ELF) file download",
    DDOS_SID: "ET DOS Outbound flood participation",
    "2009582": "ET SCAN Nmap -sS window 1024",
    "2210045": "SURICATA STREAM Packet with invalid ack",
    "2023753": "ET POLICY RDP connection to internal server",
    "2101998": "GPL SNMP public access udp",
    "2230010": "ET INFO TLS certificate seen",
}

ATTACKER = "202.77.162.213"
TELNET_PEER = "195.115.218.108"
FILE_SERVER = "199.174.194.16"
TELNET_SERVER = "172.16.113.50"
VICTIMS = ("172.16.115.20", "172.16.112.10", "172.16.112.50")


@dataclass
class EveRecord:
    ts: datetime
    sid: str
    severity: int
    src_ip: str
    src_port: int
    dst_ip: str
    dst_port: int
    proto: str = "TCP"

    def to_json(self, flow_id: int) -> str:
        return json.dumps(
            {
                "timestamp": self.ts.isoformat(),
                "flow_id": flow_id,
                "event_type": "alert",
                "src_ip": self.src_ip,
                "src_port": self.src_port,
                "dest_ip": self.dst_ip,
                "dest_port": self.dst_port,
                "proto": self.proto,
                "alert": {
                    "signature_id": int(self.sid),
                    "rev": 1,
                    "signature": SIG_NAMES[self.sid],
                    "category": "Attempted Administrator Privilege Gain",
                    "severity": self.severity,
                },
            },
            sort_keys=True,
        )


def sadmind_exploit_records() -> list[EveRecord]:
    """70 alerts; most-common-value counts: srcPort 5, dstIP 30, dstPort 50,
    srcIP 70. Tuples are pairwise distinct."""
    pair_kinds = [
        (VICTIMS[0], 32773, 20),
        (VICTIMS[0], 32774, 10),
        (VICTIMS[1], 32773, 15),
        (VICTIMS[1], 32774, 10),
        (VICTIMS[2], 32773, 15),
    ]
    port_ranges = {  # which of the 20 source ports each pair kind uses
        0: range(0, 20),
        1: range(0, 10),
        2: range(0, 15),
        3: range(5, 15),
        4: range(5, 20),
    }
    records = []
    i = 0
    for kind_idx, (dst_ip, dst_port, count) in enumerate(pair_kinds):
        ports = list(port_ranges[kind_idx])
        assert len(ports) == count
        for p in ports:
            records.append(
                EveRecord(
                    ts=BASE_TIME + timedelta(minutes=40, seconds=8 * i),
                    sid=SADMIND_EXPLOIT_SID,
                    severity=1,
                    src_ip=ATTACKER,
                    src_port=60251 + p,
                    dst_ip=dst_ip,
                    dst_port=dst_port,
                    proto="UDP",
                )
            )
            i += 1
    return records


def telnet_records() -> list[EveRecord]:
    """30 alerts; counts: dstPort 5, srcIP 10, dstIP 20, srcPort 30. The alert
    fires on the server's response packet, so srcIP is the internal host."""
    pair_kinds = [
        (ATTACKER, TELNET_SERVER, 10),
        (ATTACKER, VICTIMS[0], 5),
        (ATTACKER, VICTIMS[1], 5),
        (TELNET_PEER, VICTIMS[0], 5),
        (TELNET_PEER, VICTIMS[1], 5),
    ]
    port_ranges = {0: range(0, 10), 1: range(0, 5), 2: range(0, 5),
                   3: range(0, 5), 4: range(0, 5)}
    records = []
    i = 0
    for kind_idx, (dst_ip, src_ip, count) in enumerate(pair_kinds):
        for p in port_ranges[kind_idx]:
            records.append(
                EveRecord(
                    ts=BASE_TIME + timedelta(minutes=60, seconds=20 * i),
                    sid=TELNET_SID,
                    severity=2,
                    src_ip=src_ip,
                    src_port=23,
                    dst_ip=dst_ip,
                    dst_port=43880 + p,
                )
            )
            i += 1
    return records


def portmap_records() -> list[EveRecord]:
    """450 alerts; counts: dstIP 60, srcPort 60, srcIP 450, dstPort 450."""
    hosts = [VICTIMS[0]] + [f"172.16.112.{i}" for i in range(1, 66)]
    records = []
    i = 0

    def emit(dst_ip: str, src_port: int):
        nonlocal i
        records.append(
            EveRecord(
                ts=BASE_TIME + timedelta(seconds=4 * i),
                sid=PORTMAP_SID,
                severity=2,
                src_ip=ATTACKER,
                src_port=src_port,
                dst_ip=dst_ip,
                dst_port=111,
                proto="UDP",
            )
        )
        i += 1

    for p in range(60):  # the sweep origin touches 60 distinct ports once
        emit(hosts[0], 54700 + p)
    # hosts 1..59 reuse port 54700 once each (so its total count is 60)
    # plus five filler ports; hosts 60..65 use six fillers.
    filler = 0
    for h in range(1, 66):
        ports = []
        if h <= 59:
            ports.append(54700)
            extra = 5
        else:
            extra = 6
        for _ in range(extra):
            ports.append(54701 + filler % 59)
            filler += 1
        seen = set()
        for p in ports:
            while p in seen:  # keep (dstIP, srcPort) unique
                p += 59
            seen.add(p)
            emit(hosts[h], p)
    assert i == 450, i
    return records


def elf_download_records() -> list[EveRecord]:
    records = []
    for i in range(12):
        records.append(
            EveRecord(
                ts=BASE_TIME + timedelta(minutes=75, seconds=10 * i),
                sid=ELF_SID,
                severity=1,
                src_ip=FILE_SERVER,
                src_port=80,
                dst_ip=VICTIMS[i % 3],
                dst_port=39000 + i,
            )
        )
    return records


def ddos_records(rng: random.Random, count: int = 800) -> list[EveRecord]:
    """Spoofed sources: every source IP is external, so the flood has no
    internal assets and stays disconnected from the chain."""
    records = []
    seen = set()
    for i in range(count):
        while True:
            spoofed = f"{rng.randint(11, 190)}.{rng.randint(0, 255)}." \
                      f"{rng.randint(0, 255)}.{rng.randint(1, 254)}"
            if spoofed not in seen and not spoofed.startswith("172.16."):
                seen.add(spoofed)
                break
        records.append(
            EveRecord(
                ts=BASE_TIME + timedelta(minutes=120, seconds=i),
                sid=DDOS_SID,
                severity=2,
                src_ip=spoofed,
                src_port=rng.randint(1024, 65535),
                dst_ip="131.84.1.31",
                dst_port=80,
            )
        )
    return records


def sweep_family(
    sid: str,
    severity: int,
    src_ip: str,
    hosts: list[str],
    dst_port: int,
    start_minute: float,
    step_seconds: float,
    count: int,
    src_port_base: int,
) -> list[EveRecord]:
    """External origin sweeping a host pool on one port; collapses to 1 node."""
    records = []
    for i in range(count):
        records.append(
            EveRecord(
                ts=BASE_TIME + timedelta(minutes=start_minute, seconds=step_seconds * i),
                sid=sid,
                severity=severity,
                src_ip=src_ip,
                src_port=src_port_base + i // len(hosts),
                dst_ip=hosts[i % len(hosts)],
                dst_port=dst_port,
            )
        )
    return records


def outbound_family(
    sid: str,
    severity: int,
    hosts: list[str],
    dst_ip: str,
    dst_port: int,
    start_minute: float,
    step_seconds: float,
    count: int,
    src_port_base: int,
) -> list[EveRecord]:
    """Internal pool talking to one destination; collapses to 1 node."""
    records = []
    for i in range(count):
        records.append(
            EveRecord(
                ts=BASE_TIME + timedelta(minutes=start_minute, seconds=step_seconds * i),
                sid=sid,
                severity=severity,
                src_ip=hosts[i % len(hosts)],
                src_port=src_port_base + i // len(hosts),
                dst_ip=dst_ip,
                dst_port=dst_port,
            )
        )
    return records


def tls_family(hosts: list[str], cdn: list[str], count: int) -> list[EveRecord]:
    records = []
    for i in range(count):
        records.append(
            EveRecord(
                ts=BASE_TIME + timedelta(minutes=20, seconds=2 * i),
                sid="2230010",
                severity=3,
                src_ip=hosts[i % len(hosts)],
                src_port=44000 + i % 20000,
                dst_ip=cdn[(i // len(hosts)) % len(cdn)],
                dst_port=443,
            )
        )
    return records


def ueba_records(rng: random.Random, hosts: list[str], users: int, count: int) -> list[str]:
    lines = []
    for i in range(count):
        rec = {
            "timestamp": (BASE_TIME + timedelta(minutes=15, seconds=3 * i)).isoformat(),
            "source": "ueba:logon-anomaly",
            "kind": "anomaly",
            "p_value": round(rng.uniform(0.01, 0.2), 4),
            "attributes": {
                "host": hosts[(i // users) % len(hosts)],
                "user": f"u{i % users}",
            },
        }
        lines.append(json.dumps(rec, sort_keys=True))
    return lines


TACTICS_MAP = f"""# source-id -> tactic list
version 1
source {PORTMAP_SID} Discovery
source {SADMIND_EXPLOIT_SID} PrivilegeEscalation
source {TELNET_SID} CredentialAccess
source {ELF_SID} Execution
source {DDOS_SID} Impact
source 2009582 Discovery
source 2210045 DefenseEvasion
source 2023753 LateralMovement
source 2101998 Discovery
source 2230010 CommandAndControl
source ueba:logon-anomaly CredentialAccess
kind signature Discovery
kind anomaly CredentialAccess
"""

SCORES_MAP = """version 1
severity 1 0.9
severity 2 0.6
severity 3 0.4
pvalue-mode on
"""

NETWORK_CONF = """version 1
internal 172.16.0.0/16
"""


def generate_scenario(
    out_dir: Path, seed: int = 7, profile: str = "darpa", count: int | None = None
) -> dict:
    """Write input files (eve.jsonl, generic.jsonl, config maps) and a ground
    truth document; returns the ground truth."""
    out_dir.mkdir(parents=True, exist_ok=True)
    if profile == "evidence-demo":
        return write_demo_output(out_dir)
    if profile not in ("darpa", "enterprise"):
        raise ValueError(f"unknown scenario profile {profile!r}")
    rng = random.Random(seed)
    scale = 1 if profile == "darpa" else max(1, (count or 77000) // 7000)

    pool_b = [f"172.16.20.{i}" for i in range(1, 41)]
    pool_c = [f"172.16.30.{i}" for i in range(1, 31)]
    pool_d = [f"172.16.40.{i}" for i in range(1, 26)]
    pool_e = [f"172.16.50.{i}" for i in range(1, 21)]

    eve: list[EveRecord] = []
    eve += portmap_records()
    eve += sadmind_exploit_records()
    eve += telnet_records()
    eve += elf_download_records()
    eve += ddos_records(rng, 800 * scale)
    eve += sweep_family("2009582", 3, "203.0.113.5", pool_b, 445, 5, 1.0,
                        1800 * scale, 40000)
    eve += outbound_family("2210045", 3, pool_c, "172.16.30.250", 445, 10, 1.5,
                           1500 * scale, 41000)
    eve += outbound_family("2023753", 2, pool_c, "172.16.30.251", 3389, 55, 4.0,
                           150 * scale, 42000)
    eve += sweep_family("2101998", 2, "198.51.100.7", pool_d, 161, 90, 2.0,
                        100 * scale, 43000)
    ueba_count = 800 * scale
    tls_count = 7000 * scale - len(eve) - ueba_count
    eve += tls_family(pool_e, ["93.184.216.34", "151.101.1.69", "104.16.85.20",
                               "13.107.42.14", "23.185.0.2"], tls_count)

    eve.sort(key=lambda r: (r.ts, r.sid, r.src_ip, r.src_port, r.dst_ip, r.dst_port))
    with (out_dir / "eve.jsonl").open("w", encoding="utf-8") as fh:
        for flow_id, rec in enumerate(eve, start=1):
            fh.write(rec.to_json(flow_id) + "\n")
    with (out_dir / "generic.jsonl").open("w", encoding="utf-8") as fh:
        for line in ueba_records(rng, pool_d, 4, ueba_count):
            fh.write(line + "\n")

    (out_dir / "tactics.map").write_text(TACTICS_MAP, encoding="utf-8")
    (out_dir / "scores.map").write_text(SCORES_MAP, encoding="utf-8")
    (out_dir / "network.conf").write_text(NETWORK_CONF, encoding="utf-8")

    truth = {
        "profile": profile,
        "seed": seed,
        "raw_alerts": len(eve) + ueba_count,
        "chain_sources": [PORTMAP_SID, SADMIND_EXPLOIT_SID, TELNET_SID, ELF_SID],
        "disconnected_source": DDOS_SID,
        "template_profiles": {
            SADMIND_EXPLOIT_SID: {"srcPort": 5, "dstIP": 30, "dstPort": 50, "srcIP": 70},
            TELNET_SID: {"dstPort": 5, "srcIP": 10, "dstIP": 20, "srcPort": 30},
            PORTMAP_SID: {"dstIP": 60, "srcPort": 60, "srcIP": 450, "dstPort": 450},
        },
    }
    (out_dir / "ground_truth.json").write_text(
        json.dumps(truth, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return truth


def demo_incident() -> Incident:
    """The three-alert reference incident used for evidence-query demos."""
    times = demo_tactic_times()
    p_ia, p_ex, p_lm = CALIBRATED_DEMO_SCORES
    specs = [
        ("demo-ia", Tactic.INITIAL_ACCESS, p_ia, "198.18.0.9", "10.0.0.5",
         "EXPLOIT remote service initial access"),
        ("demo-lm", Tactic.LATERAL_MOVEMENT, p_lm, "10.0.0.5", "10.0.0.7",
         "LATERAL smb admin share mount"),
        ("demo-ex", Tactic.EXECUTION, p_ex, "10.0.0.5", "10.0.0.6",
         "MALWARE payload execution observed"),
    ]
    nodes = []
    for node_id, tactic, score, src, dst, name in specs:
        ts = times[tactic]
        attrs = (
            ("dstIP", AttrValue(AttrKind.IP, dst)),
            ("srcIP", AttrValue(AttrKind.IP, src)),
        )
        nodes.append(
            GeneralizedAlert(
                id=node_id,
                source=f"demo:{tactic.value}",
                attributes=attrs,
                score=score,
                members=(node_id,),
                time_start=ts,
                time_end=ts,
                tactics=frozenset({tactic}),
                assets=frozenset({"10.0.0.5"}),
                source_name=name,
            )
        )
    g = build_graph(nodes, default_transition_matrix())
    inc = Incident(
        id="inc-001",
        nodes=sorted(nodes, key=lambda n: (n.time_start, n.id)),
        edges=list(g.edges),
        tactics=frozenset(t for n in nodes for t in n.tactics),
        assets=frozenset(a for n in nodes for a in n.assets),
    )
    inc.scores = infer_exact(build_fg(inc.nodes, default_transition_matrix()))
    return inc


def write_demo_output(out_dir: Path) -> dict:
    """A ready-to-serve pipeline output directory holding the demo incident."""
    inc = demo_incident()
    incidents_dir = out_dir / "05_incidents"
    incidents_dir.mkdir(parents=True, exist_ok=True)
    doc = incident_summary(inc)
    payload = json.dumps([doc], indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    (incidents_dir / "incidents.json").write_text(payload, encoding="utf-8")
    (incidents_dir / f"incident_{inc.id}.json").write_text(
        json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    (out_dir / "report.txt").write_text(
        "run report\ndemo incident only\n", encoding="utf-8"
    )
    return {"profile": "evidence-demo", "incidents": 1}
