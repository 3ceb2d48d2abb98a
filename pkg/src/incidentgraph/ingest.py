"""Parse alert streams into Alert records.

Two line-delimited JSON dialects are supported: the EVE style emitted by
IDS engines (event_type "alert") and a generic style for UEBA/custom-rule
detections. Config file formats are documented in docs/formats.md.
"""

from __future__ import annotations

import ipaddress
import json
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable, Iterator, TextIO

from .model import (
    Alert,
    AlertSource,
    AttrKind,
    AttrValue,
    DEFAULT_GL,
    SourceKind,
    Tactic,
    canonical_ip,
    ip_value,
    port_value,
    tactic_from_name,
    text_value,
)


class IngestError(ValueError):
    """Base class for parse failures; carries the offending line number."""

    def __init__(self, msg: str, line_no: int | None = None):
        self.line_no = line_no
        super().__init__(msg if line_no is None else f"line {line_no}: {msg}")


class ParseError(IngestError):
    pass


class FieldError(IngestError):
    pass


class RangeError(IngestError):
    pass


class QuarantinedRecord(IngestError):
    """Record is well-formed but cannot be mapped (e.g. no tactic assignment)."""


@dataclass(frozen=True)
class TacticMappingConfig:
    """Source-id -> tactics, with per-source-kind fallbacks."""

    source_map: dict[str, frozenset[Tactic]] = field(default_factory=dict)
    kind_defaults: dict[SourceKind, frozenset[Tactic]] = field(default_factory=dict)

    def tactics_for(self, source_id: str, kind: SourceKind) -> frozenset[Tactic]:
        got = self.source_map.get(source_id)
        if got:
            return got
        fallback = self.kind_defaults.get(kind)
        if fallback:
            return fallback
        raise QuarantinedRecord(f"no tactic mapping for source {source_id!r}")


DEFAULT_SEVERITY_SCORES = {1: 0.9, 2: 0.6, 3: 0.4}


@dataclass(frozen=True)
class ScoreMappingConfig:
    severity_to_score: dict[int, float] = field(
        default_factory=lambda: dict(DEFAULT_SEVERITY_SCORES)
    )
    p_value_mode: bool = True

    def __post_init__(self):
        for sev, s in self.severity_to_score.items():
            if not 0.0 <= s <= 1.0:
                raise RangeError(f"severity {sev} maps to {s}, outside [0,1]")

    def score_for_severity(self, severity: int, line_no: int | None = None) -> float:
        try:
            return self.severity_to_score[severity]
        except KeyError:
            raise FieldError(f"no score mapping for severity {severity}", line_no)


RFC1918 = ("10.0.0.0/8", "172.16.0.0/12", "192.168.0.0/16")


@dataclass(frozen=True)
class NetworkConfig:
    """Internal address space; everything else is treated as external."""

    internal: tuple[ipaddress.IPv4Network | ipaddress.IPv6Network, ...] = ()

    @classmethod
    def from_cidrs(cls, cidrs: Iterable[str] = RFC1918) -> "NetworkConfig":
        nets = [ipaddress.ip_network(c, strict=True) for c in cidrs]
        v4 = [n for n in nets if n.version == 4]
        v6 = [n for n in nets if n.version == 6]
        collapsed = tuple(ipaddress.collapse_addresses(v4)) + tuple(
            ipaddress.collapse_addresses(v6)
        )
        return cls(internal=collapsed)

    def is_internal(self, ip: str) -> bool:
        addr = ipaddress.ip_address(canonical_ip(ip))
        return any(addr in net for net in self.internal if net.version == addr.version)


def derive_assets(alert_attrs: dict[str, AttrValue], net: NetworkConfig) -> frozenset[str]:
    """IP attribute values that fall inside the internal ranges."""
    return frozenset(
        v.value
        for v in alert_attrs.values()
        if v.kind is AttrKind.IP and v.level == 0 and net.is_internal(v.value)
    )


EVE_SCHEMA = ("dstIP", "dstPort", "srcIP", "srcPort")


@dataclass
class IngestContext:
    """Carries the config plus the evolving source catalog and id counter."""

    tactics: TacticMappingConfig
    scores: ScoreMappingConfig
    network: NetworkConfig
    sources: dict[str, AlertSource] = field(default_factory=dict)
    gl_overrides: dict[str, int] = field(default_factory=dict)
    _counter: int = 0

    def next_id(self) -> str:
        self._counter += 1
        return f"a{self._counter:06d}"

    def register(self, source_id: str, schema: tuple[str, ...], kind: SourceKind,
                 tactics: frozenset[Tactic], name: str = "") -> AlertSource:
        src = self.sources.get(source_id)
        if src is None:
            gl = self.gl_overrides.get(source_id, DEFAULT_GL[kind])
            gl = min(gl, len(schema))
            src = AlertSource(
                id=source_id, schema=schema, gl=gl, tactics=tactics, kind=kind,
                name=name,
            )
            self.sources[source_id] = src
        elif src.schema != schema:
            raise FieldError(
                f"source {source_id!r} attribute set changed: "
                f"{src.schema} vs {schema}"
            )
        return src


def _parse_timestamp(raw: str, line_no: int) -> datetime:
    try:
        return datetime.fromisoformat(raw.replace("Z", "+00:00"))
    except ValueError:
        raise FieldError(f"bad timestamp {raw!r}", line_no)


def parse_eve_record(line: str, ctx: IngestContext, line_no: int = 0) -> Alert | None:
    """One EVE line -> Alert, or None for non-alert event types."""
    line = line.strip()
    if not line:
        return None
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as e:
        raise ParseError(f"malformed record: {e.msg}", line_no)
    if rec.get("event_type") != "alert":
        return None
    try:
        sig = rec["alert"]
        source_id = str(sig["signature_id"])
        severity = int(sig["severity"])
        ts = _parse_timestamp(str(rec["timestamp"]), line_no)
        attrs = {
            "dstIP": ip_value(rec["dest_ip"]),
            "dstPort": port_value(rec["dest_port"]),
            "srcIP": ip_value(rec["src_ip"]),
            "srcPort": port_value(rec["src_port"]),
        }
    except KeyError as e:
        raise FieldError(f"missing mandatory field {e.args[0]!r}", line_no)
    except (ValueError, TypeError) as e:
        raise FieldError(str(e), line_no)

    tactics = ctx.tactics.tactics_for(source_id, SourceKind.SIGNATURE)
    ctx.register(source_id, EVE_SCHEMA, SourceKind.SIGNATURE, tactics,
                 name=str(sig.get("signature", "")))
    return Alert.make(
        id=ctx.next_id(),
        timestamp=ts,
        source=source_id,
        attributes=attrs,
        score=ctx.scores.score_for_severity(severity, line_no),
        tactics=tactics,
        assets=derive_assets(attrs, ctx.network),
    )


def _coerce_attr(name: str, value) -> AttrValue:
    if isinstance(value, str):
        try:
            return ip_value(value)
        except ValueError:
            pass
    if "port" in name.lower():
        try:
            return port_value(value)
        except (ValueError, TypeError):
            pass
    return text_value(value)


def parse_generic_record(line: str, ctx: IngestContext, line_no: int = 0) -> Alert:
    """One generic line -> Alert. Requires either ``score`` or ``p_value``."""
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as e:
        raise ParseError(f"malformed record: {e.msg}", line_no)
    for required in ("timestamp", "source", "attributes"):
        if required not in rec:
            raise FieldError(f"missing mandatory field {required!r}", line_no)
    if "score" in rec:
        score = float(rec["score"])
        if not 0.0 <= score <= 1.0:
            raise RangeError(f"score {score} outside [0,1]", line_no)
    elif "p_value" in rec:
        p = float(rec["p_value"])
        if not 0.0 <= p <= 1.0:
            raise RangeError(f"p_value {p} outside [0,1]", line_no)
        score = 1.0 - p if ctx.scores.p_value_mode else p
    else:
        raise FieldError("record carries neither score nor p_value", line_no)

    raw_attrs = rec["attributes"]
    if not isinstance(raw_attrs, dict) or len(raw_attrs) < 2:
        raise FieldError("alerts need at least two attributes", line_no)
    attrs = {k: _coerce_attr(k, v) for k, v in raw_attrs.items()}
    schema = tuple(attrs)
    kind = SourceKind(rec.get("kind", "anomaly"))
    source_id = str(rec["source"])
    tactics = ctx.tactics.tactics_for(source_id, kind)
    ctx.register(source_id, schema, kind, tactics, name=rec.get("name", ""))
    return Alert.make(
        id=str(rec["id"]) if "id" in rec else ctx.next_id(),
        timestamp=_parse_timestamp(str(rec["timestamp"]), line_no),
        source=source_id,
        attributes=attrs,
        score=score,
        tactics=tactics,
        assets=derive_assets(attrs, ctx.network),
    )


def parse_stream(
    fh: TextIO,
    ctx: IngestContext,
    dialect: str,
    rejects: list[dict] | None = None,
) -> Iterator[Alert]:
    """Parse a whole stream, routing quarantined records to ``rejects``."""
    parse = parse_eve_record if dialect == "eve" else parse_generic_record
    for line_no, line in enumerate(fh, start=1):
        if not line.strip():
            continue
        try:
            alert = parse(line, ctx, line_no)
        except QuarantinedRecord as e:
            if rejects is None:
                raise
            rejects.append({"line": line_no, "reason": str(e), "record": line.strip()})
            continue
        if alert is not None:
            yield alert


# --- config file parsing (versioned line formats, see docs/formats.md) ---


def _config_lines(fh: TextIO, expect: str) -> Iterator[tuple[int, list[str]]]:
    version_seen = False
    for line_no, raw in enumerate(fh, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if not version_seen:
            if parts[0] != "version" or len(parts) != 2:
                raise ParseError(f"{expect}: first directive must be 'version N'", line_no)
            if parts[1] != "1":
                raise ParseError(f"{expect}: unsupported version {parts[1]}", line_no)
            version_seen = True
            continue
        yield line_no, parts


def load_tactics_map(fh: TextIO) -> TacticMappingConfig:
    source_map: dict[str, frozenset[Tactic]] = {}
    kind_defaults: dict[SourceKind, frozenset[Tactic]] = {}
    for line_no, parts in _config_lines(fh, "tactics.map"):
        if parts[0] == "source" and len(parts) == 3:
            source_map[parts[1]] = frozenset(
                tactic_from_name(t) for t in parts[2].split(",")
            )
        elif parts[0] == "kind" and len(parts) == 3:
            kind_defaults[SourceKind(parts[1])] = frozenset(
                tactic_from_name(t) for t in parts[2].split(",")
            )
        else:
            raise ParseError(f"tactics.map: bad directive {' '.join(parts)!r}", line_no)
    return TacticMappingConfig(source_map, kind_defaults)


def load_scores_map(fh: TextIO) -> ScoreMappingConfig:
    severity_to_score: dict[int, float] = {}
    p_value_mode = True
    for line_no, parts in _config_lines(fh, "scores.map"):
        if parts[0] == "severity" and len(parts) == 3:
            severity_to_score[int(parts[1])] = float(parts[2])
        elif parts[0] == "pvalue-mode" and len(parts) == 2:
            p_value_mode = parts[1] == "on"
        else:
            raise ParseError(f"scores.map: bad directive {' '.join(parts)!r}", line_no)
    if not severity_to_score:
        severity_to_score = dict(DEFAULT_SEVERITY_SCORES)
    return ScoreMappingConfig(severity_to_score, p_value_mode)


def load_network_conf(fh: TextIO) -> NetworkConfig:
    cidrs: list[str] = []
    for line_no, parts in _config_lines(fh, "network.conf"):
        if parts[0] == "internal" and len(parts) == 2:
            cidrs.append(parts[1])
        else:
            raise ParseError(f"network.conf: bad directive {' '.join(parts)!r}", line_no)
    return NetworkConfig.from_cidrs(cidrs or RFC1918)
