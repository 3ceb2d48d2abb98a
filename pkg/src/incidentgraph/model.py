"""Core domain types shared by every pipeline stage.

All types here are immutable after construction and safe to share between
concurrent workers. Timestamps are normalized to UTC; ordering ties are
broken by alert id.
"""

from __future__ import annotations

import csv
import ipaddress
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from importlib import resources
from typing import Iterable, Mapping

import numpy as np


class ModelError(ValueError):
    """Raised when a core-type invariant is violated at construction."""


class Tactic(str, Enum):
    """The 12 attack phases, in canonical kill-chain order (index 0..11)."""

    INITIAL_ACCESS = "InitialAccess"
    EXECUTION = "Execution"
    PERSISTENCE = "Persistence"
    PRIVILEGE_ESCALATION = "PrivilegeEscalation"
    DEFENSE_EVASION = "DefenseEvasion"
    CREDENTIAL_ACCESS = "CredentialAccess"
    DISCOVERY = "Discovery"
    LATERAL_MOVEMENT = "LateralMovement"
    COLLECTION = "Collection"
    COMMAND_AND_CONTROL = "CommandAndControl"
    EXFILTRATION = "Exfiltration"
    IMPACT = "Impact"

    @property
    def index(self) -> int:
        return _TACTIC_INDEX[self]

    def __lt__(self, other):  # stable total order by canonical sequence
        if isinstance(other, Tactic):
            return self.index < other.index
        return NotImplemented


TACTICS: tuple[Tactic, ...] = tuple(Tactic)
_TACTIC_INDEX: dict[Tactic, int] = {t: i for i, t in enumerate(TACTICS)}


def tactic_from_name(name: str) -> Tactic:
    try:
        return Tactic(name)
    except ValueError:
        raise ModelError(f"unknown tactic {name!r}") from None


class AttrKind(str, Enum):
    IP = "ip"
    PORT = "port"
    TEXT = "text"


@dataclass(frozen=True, order=True)
class AttrValue:
    """Tagged attribute value; ``level`` > 0 marks a hierarchy-node value."""

    kind: AttrKind
    value: str
    level: int = 0

    def __str__(self) -> str:
        return self.value


def ip_value(ip: str) -> AttrValue:
    return AttrValue(AttrKind.IP, canonical_ip(ip))


def port_value(port: int | str) -> AttrValue:
    p = int(port)
    if not 0 <= p <= 65535:
        raise ModelError(f"port {port!r} out of range")
    return AttrValue(AttrKind.PORT, str(p))


def text_value(text: str) -> AttrValue:
    return AttrValue(AttrKind.TEXT, str(text))


def canonical_ip(ip: str) -> str:
    """Canonical text form; IPv4-mapped IPv6 collapses to plain IPv4."""
    addr = ipaddress.ip_address(ip.strip())
    if isinstance(addr, ipaddress.IPv6Address) and addr.ipv4_mapped is not None:
        addr = addr.ipv4_mapped
    return str(addr)


def as_utc(ts: datetime) -> datetime:
    if ts.tzinfo is None:
        return ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


@dataclass(frozen=True)
class Alert:
    """One raw detection record."""

    id: str
    timestamp: datetime
    source: str
    attributes: tuple[tuple[str, AttrValue], ...]
    score: float
    tactics: frozenset[Tactic]
    assets: frozenset[str]

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ModelError(f"alert {self.id}: score {self.score} outside [0,1]")
        if len(self.attributes) < 2:
            raise ModelError(f"alert {self.id}: needs at least two attributes")
        if not self.tactics:
            raise ModelError(f"alert {self.id}: tactic set is empty")
        ips = {v.value for _, v in self.attributes if v.kind is AttrKind.IP}
        stray = self.assets - ips
        if stray:
            raise ModelError(
                f"alert {self.id}: assets {sorted(stray)} not among IP attributes"
            )
        object.__setattr__(self, "timestamp", as_utc(self.timestamp))

    @classmethod
    def make(
        cls,
        id: str,
        timestamp: datetime,
        source: str,
        attributes: Mapping[str, AttrValue],
        score: float,
        tactics: Iterable[Tactic],
        assets: Iterable[str] = (),
    ) -> "Alert":
        return cls(
            id=id,
            timestamp=timestamp,
            source=source,
            attributes=tuple(attributes.items()),
            score=score,
            tactics=frozenset(tactics),
            assets=frozenset(assets),
        )

    @property
    def attr_map(self) -> dict[str, AttrValue]:
        return dict(self.attributes)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "timestamp": self.timestamp.isoformat(),
            "source": self.source,
            "attributes": {
                k: {"kind": v.kind.value, "value": v.value, "level": v.level}
                for k, v in self.attributes
            },
            "score": self.score,
            "tactics": sorted(t.value for t in self.tactics),
            "assets": sorted(self.assets),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Alert":
        return cls(
            id=d["id"],
            timestamp=datetime.fromisoformat(d["timestamp"]),
            source=d["source"],
            attributes=tuple(
                (k, AttrValue(AttrKind(v["kind"]), v["value"], v.get("level", 0)))
                for k, v in d["attributes"].items()
            ),
            score=d["score"],
            tactics=frozenset(Tactic(t) for t in d["tactics"]),
            assets=frozenset(d["assets"]),
        )


class SourceKind(str, Enum):
    SIGNATURE = "signature"
    ANOMALY = "anomaly"
    CUSTOM = "custom"


#: attributes to generalize per source kind (IDS signatures 2, the rest 1)
DEFAULT_GL = {SourceKind.SIGNATURE: 2, SourceKind.ANOMALY: 1, SourceKind.CUSTOM: 1}


@dataclass(frozen=True)
class AlertSource:
    """Catalog entry for one alert-producing rule or analytic."""

    id: str
    schema: tuple[str, ...]
    gl: int
    tactics: frozenset[Tactic]
    kind: SourceKind
    name: str = ""

    def __post_init__(self):
        if self.gl < 0 or self.gl > len(self.schema):
            raise ModelError(
                f"source {self.id}: gl={self.gl} exceeds schema size {len(self.schema)}"
            )


@dataclass(frozen=True)
class GeneralizedAlert:
    """A merged alert whose attributes may be hierarchy-generalized."""

    id: str
    source: str
    attributes: tuple[tuple[str, AttrValue], ...]
    score: float
    members: tuple[str, ...]
    time_start: datetime
    time_end: datetime
    tactics: frozenset[Tactic]
    assets: frozenset[str]
    source_name: str = ""

    def __post_init__(self):
        if not self.members:
            raise ModelError(f"generalized alert {self.id}: no members")
        if self.time_end < self.time_start:
            raise ModelError(f"generalized alert {self.id}: inverted time span")
        object.__setattr__(self, "time_start", as_utc(self.time_start))
        object.__setattr__(self, "time_end", as_utc(self.time_end))

    @classmethod
    def from_alert(cls, a: Alert, name: str = "") -> "GeneralizedAlert":
        return cls(
            id=a.id,
            source=a.source,
            attributes=a.attributes,
            score=a.score,
            members=(a.id,),
            time_start=a.timestamp,
            time_end=a.timestamp,
            tactics=a.tactics,
            assets=a.assets,
            source_name=name,
        )

    def key(self) -> tuple:
        """Merging key: the full attribute tuple (one source at a time)."""
        return self.attributes

    @property
    def attr_map(self) -> dict[str, AttrValue]:
        return dict(self.attributes)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "source": self.source,
            "source_name": self.source_name,
            "attributes": {
                k: {"kind": v.kind.value, "value": v.value, "level": v.level}
                for k, v in self.attributes
            },
            "score": self.score,
            "members": list(self.members),
            "time_start": self.time_start.isoformat(),
            "time_end": self.time_end.isoformat(),
            "tactics": sorted(t.value for t in self.tactics),
            "assets": sorted(self.assets),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GeneralizedAlert":
        return cls(
            id=d["id"],
            source=d["source"],
            source_name=d.get("source_name", ""),
            attributes=tuple(
                (k, AttrValue(AttrKind(v["kind"]), v["value"], v.get("level", 0)))
                for k, v in d["attributes"].items()
            ),
            score=d["score"],
            members=tuple(d["members"]),
            time_start=datetime.fromisoformat(d["time_start"]),
            time_end=datetime.fromisoformat(d["time_end"]),
            tactics=frozenset(Tactic(t) for t in d["tactics"]),
            assets=frozenset(d["assets"]),
        )


class TransitionMatrix:
    """12x12 tactic transition weights, row = from-tactic, column = to-tactic."""

    def __init__(self, values: np.ndarray):
        values = np.asarray(values, dtype=float)
        if values.shape != (12, 12):
            raise ModelError(f"transition matrix must be 12x12, got {values.shape}")
        if np.any(values < 0.0) or np.any(values > 1.0):
            raise ModelError("transition matrix entries must lie in [0,1]")
        self._values = values
        self._values.setflags(write=False)

    def __call__(self, frm: Tactic, to: Tactic) -> float:
        return float(self._values[frm.index, to.index])

    @property
    def values(self) -> np.ndarray:
        return self._values

    def __eq__(self, other):
        return isinstance(other, TransitionMatrix) and np.array_equal(
            self._values, other._values
        )


_DEFAULT_MATRIX: TransitionMatrix | None = None


def default_transition_matrix() -> TransitionMatrix:
    """The bundled tactic transition weights, loaded from the golden CSV."""
    global _DEFAULT_MATRIX
    if _DEFAULT_MATRIX is None:
        ref = resources.files("incidentgraph.data").joinpath("transition_matrix.csv")
        with ref.open("r", encoding="utf-8") as fh:
            _DEFAULT_MATRIX = load_transition_matrix(fh)
    return _DEFAULT_MATRIX


def load_transition_matrix(fh) -> TransitionMatrix:
    rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "TACTIC":
        raise ModelError("transition matrix CSV must start with a TACTIC header row")
    header = rows[0][1:]
    if header != [t.value for t in TACTICS]:
        raise ModelError("transition matrix CSV header does not list the 12 tactics")
    values = np.zeros((12, 12))
    if len(rows) != 13:
        raise ModelError(f"expected 12 data rows, got {len(rows) - 1}")
    for i, row in enumerate(rows[1:]):
        if row[0] != TACTICS[i].value:
            raise ModelError(f"row {i + 1}: expected {TACTICS[i].value}, got {row[0]}")
        values[i, :] = [float(x) for x in row[1:]]
    return TransitionMatrix(values)
