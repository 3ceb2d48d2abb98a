"""Attribute selection, hierarchy generalization and merging of identical alerts.

Per source the loop is: pick the attribute whose most common value occurs
least, lift every alert's value one hierarchy level, merge alerts whose
attribute tuples became identical; repeat gl_s times. Counts are recomputed
on the current (partially generalized) set each iteration.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence, TextIO

from .ingest import NetworkConfig
from .model import (
    Alert,
    AlertSource,
    AttrKind,
    AttrValue,
    GeneralizedAlert,
    ModelError,
)

# Hierarchy-node labels, chosen to match the printed template forms.
PRIVATE_IP = "private-IP"
EXTERNAL_IP = "external-IP"
ANY_IP = "ANY-IP"
PRIVATE_PORT = "private-Port"
NONPRIVATE_PORT = "Non-private-Port"
ANY_PORT = "ANY-Port"
ANY_TEXT = "ANY"

PLACEHOLDERS = {AttrKind.IP: "<IP address>", AttrKind.PORT: "<port number>",
                AttrKind.TEXT: "<value>"}


class TemplatingError(ValueError):
    pass


class HierarchyTree:
    """Maps an attribute value to its parent; repeated application hits root."""

    kind: AttrKind
    root: str

    def parent(self, v: AttrValue) -> AttrValue:
        raise NotImplementedError


class IpHierarchy(HierarchyTree):
    """exact IP -> private-IP | external-IP (by internal CIDRs) -> ANY-IP."""

    kind = AttrKind.IP
    root = ANY_IP

    def __init__(self, net: NetworkConfig):
        self._net = net

    def parent(self, v: AttrValue) -> AttrValue:
        if v.level == 0:
            label = PRIVATE_IP if self._net.is_internal(v.value) else EXTERNAL_IP
            return AttrValue(AttrKind.IP, label, 1)
        if v.level == 1:
            return AttrValue(AttrKind.IP, ANY_IP, 2)
        return AttrValue(AttrKind.IP, ANY_IP, 2)


class PortHierarchy(HierarchyTree):
    """exact port -> private-Port [0-1023] | Non-private-Port -> ANY-Port."""

    kind = AttrKind.PORT
    root = ANY_PORT

    def parent(self, v: AttrValue) -> AttrValue:
        if v.level == 0:
            label = PRIVATE_PORT if int(v.value) <= 1023 else NONPRIVATE_PORT
            return AttrValue(AttrKind.PORT, label, 1)
        if v.level == 1:
            return AttrValue(AttrKind.PORT, ANY_PORT, 2)
        return AttrValue(AttrKind.PORT, ANY_PORT, 2)


class OpaqueHierarchy(HierarchyTree):
    """Two levels only: exact value -> ANY."""

    kind = AttrKind.TEXT
    root = ANY_TEXT

    def parent(self, v: AttrValue) -> AttrValue:
        return AttrValue(AttrKind.TEXT, ANY_TEXT, 1)


def default_trees(net: NetworkConfig) -> dict[AttrKind, HierarchyTree]:
    return {
        AttrKind.IP: IpHierarchy(net),
        AttrKind.PORT: PortHierarchy(),
        AttrKind.TEXT: OpaqueHierarchy(),
    }


@dataclass
class TemplateModel:
    """Learned generalization steps per source (selection order preserved)."""

    steps: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def levels(self, source_id: str) -> dict[str, int]:
        counts: dict[str, int] = {}
        for attr in self.steps.get(source_id, ()):
            counts[attr] = counts.get(attr, 0) + 1
        return counts

    def dump(self, fh: TextIO) -> None:
        fh.write("version 1\n")
        for source_id in sorted(self.steps):
            attrs = ",".join(self.steps[source_id]) or "-"
            fh.write(f"source {source_id} {attrs}\n")

    @classmethod
    def load(cls, fh: TextIO) -> "TemplateModel":
        steps: dict[str, tuple[str, ...]] = {}
        first = True
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if first:
                if parts != ["version", "1"]:
                    raise TemplatingError("templates.model: expected 'version 1' header")
                first = False
                continue
            if parts[0] != "source" or len(parts) != 3:
                raise TemplatingError(f"templates.model: bad line {line!r}")
            steps[parts[1]] = () if parts[2] == "-" else tuple(parts[2].split(","))
        return cls(steps)


def select_attribute(
    alerts: Sequence[GeneralizedAlert], schema: Sequence[str]
) -> str:
    """Attribute whose most common value occurs least; schema order breaks ties."""
    if not alerts:
        raise TemplatingError("select_attribute called with no alerts")
    best_attr = None
    best_count = None
    for attr in schema:
        counts = Counter(a.attr_map[attr] for a in alerts)
        max_count = max(counts.values())
        if best_count is None or max_count < best_count:
            best_attr, best_count = attr, max_count
    assert best_attr is not None
    return best_attr


def generalize_attribute(
    alert: GeneralizedAlert, attr: str, tree: HierarchyTree
) -> GeneralizedAlert:
    """Replace one attribute value with its hierarchy parent."""
    attrs = dict(alert.attributes)
    if attr not in attrs:
        raise TemplatingError(f"alert {alert.id} has no attribute {attr!r}")
    old = attrs[attr]
    if old.kind is not tree.kind:
        raise TemplatingError(
            f"no {old.kind.value} hierarchy configured for attribute {attr!r}"
        )
    attrs[attr] = tree.parent(old)
    return GeneralizedAlert(
        id=alert.id,
        source=alert.source,
        attributes=tuple(attrs.items()),
        score=alert.score,
        members=alert.members,
        time_start=alert.time_start,
        time_end=alert.time_end,
        tactics=alert.tactics,
        assets=alert.assets,
        source_name=alert.source_name,
    )


def merge_identical(alerts: Iterable[GeneralizedAlert]) -> list[GeneralizedAlert]:
    """Merge alerts with identical attribute tuples: max score, union the rest."""
    groups: dict[tuple, GeneralizedAlert] = {}
    for a in alerts:
        k = a.key()
        cur = groups.get(k)
        if cur is None:
            groups[k] = a
            continue
        groups[k] = GeneralizedAlert(
            id=min(cur.id, a.id),
            source=cur.source,
            attributes=cur.attributes,
            score=max(cur.score, a.score),
            members=tuple(sorted(set(cur.members) | set(a.members))),
            time_start=min(cur.time_start, a.time_start),
            time_end=max(cur.time_end, a.time_end),
            tactics=cur.tactics | a.tactics,
            assets=cur.assets | a.assets,
            source_name=cur.source_name or a.source_name,
        )
    return list(groups.values())


def _templating_for_source(
    alerts: list[GeneralizedAlert],
    source: AlertSource,
    trees: dict[AttrKind, HierarchyTree],
) -> tuple[list[GeneralizedAlert], tuple[str, ...]]:
    current = merge_identical(alerts)
    steps: list[str] = []
    for _ in range(source.gl):
        attr = select_attribute(current, source.schema)
        kind = current[0].attr_map[attr].kind
        tree = trees.get(kind)
        if tree is None:
            raise TemplatingError(f"no hierarchy tree for kind {kind.value!r}")
        current = [generalize_attribute(a, attr, tree) for a in current]
        current = merge_identical(current)
        steps.append(attr)
    return current, tuple(steps)


def run_templating(
    alerts: Iterable[Alert],
    sources: dict[str, AlertSource],
    trees: dict[AttrKind, HierarchyTree],
    jobs: int = 1,
) -> tuple[list[GeneralizedAlert], TemplateModel]:
    """Learn templates and merge; sources are processed independently."""
    by_source: dict[str, list[GeneralizedAlert]] = {}
    for a in alerts:
        src = sources.get(a.source)
        if src is None:
            raise TemplatingError(f"alert {a.id}: source {a.source!r} not in catalog")
        by_source.setdefault(a.source, []).append(
            GeneralizedAlert.from_alert(a, name=src.name)
        )

    def work(source_id: str) -> tuple[str, list[GeneralizedAlert], tuple[str, ...]]:
        merged, steps = _templating_for_source(
            by_source[source_id], sources[source_id], trees
        )
        return source_id, merged, steps

    ordered = sorted(by_source)
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(work, ordered))
    else:
        results = [work(s) for s in ordered]

    model = TemplateModel()
    out: list[GeneralizedAlert] = []
    for source_id, merged, steps in results:
        model.steps[source_id] = steps
        out.extend(merged)
    out.sort(key=lambda g: (g.time_start, g.source, g.id))
    out = [_with_id(g, f"g{idx:04d}") for idx, g in enumerate(out, start=1)]
    return out, model


def apply_template_model(
    alerts: Iterable[Alert],
    model: TemplateModel,
    sources: dict[str, AlertSource],
    trees: dict[AttrKind, HierarchyTree],
) -> list[GeneralizedAlert]:
    """Replay recorded generalization steps (no re-learning), then merge."""
    by_source: dict[str, list[GeneralizedAlert]] = {}
    for a in alerts:
        name = sources[a.source].name if a.source in sources else ""
        by_source.setdefault(a.source, []).append(
            GeneralizedAlert.from_alert(a, name=name)
        )
    out: list[GeneralizedAlert] = []
    for source_id in sorted(by_source):
        current = merge_identical(by_source[source_id])
        for attr in model.steps.get(source_id, ()):
            kind = current[0].attr_map[attr].kind
            current = [generalize_attribute(a, attr, trees[kind]) for a in current]
            current = merge_identical(current)
        out.extend(current)
    out.sort(key=lambda g: (g.time_start, g.source, g.id))
    return [_with_id(g, f"g{idx:04d}") for idx, g in enumerate(out, start=1)]


def _with_id(g: GeneralizedAlert, new_id: str) -> GeneralizedAlert:
    return GeneralizedAlert(
        id=new_id,
        source=g.source,
        attributes=g.attributes,
        score=g.score,
        members=g.members,
        time_start=g.time_start,
        time_end=g.time_end,
        tactics=g.tactics,
        assets=g.assets,
        source_name=g.source_name,
    )


def generalized_form(
    merged: Sequence[GeneralizedAlert], source: AlertSource, model: TemplateModel
) -> dict[str, str]:
    """Printable template: hierarchy labels for generalized attributes,
    kind placeholders for the rest."""
    levels = model.levels(source.id)
    form: dict[str, str] = {}
    mine = [g for g in merged if g.source == source.id]
    for attr in source.schema:
        if levels.get(attr, 0) > 0 and mine:
            labels = sorted({g.attr_map[attr].value for g in mine})
            form[attr] = "|".join(labels)
        else:
            kind = mine[0].attr_map[attr].kind if mine else AttrKind.TEXT
            form[attr] = PLACEHOLDERS[kind]
    return form
