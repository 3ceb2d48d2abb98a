from datetime import datetime, timezone

import numpy as np
import pytest

from incidentgraph.model import (
    TACTICS,
    Alert,
    AlertSource,
    AttrKind,
    AttrValue,
    GeneralizedAlert,
    ModelError,
    SourceKind,
    Tactic,
    TransitionMatrix,
    canonical_ip,
    default_transition_matrix,
    ip_value,
    port_value,
)

TS = datetime(2021, 1, 1, tzinfo=timezone.utc)


def make_alert(**kw):
    base = dict(
        id="a1",
        timestamp=TS,
        source="s1",
        attributes=(
            ("dstIP", ip_value("172.16.115.20")),
            ("srcIP", ip_value("202.77.162.213")),
        ),
        score=0.9,
        tactics=frozenset({Tactic.INITIAL_ACCESS}),
        assets=frozenset({"172.16.115.20"}),
    )
    base.update(kw)
    return Alert(**base)


class TestTactic:
    def test_exactly_twelve(self):
        assert len(TACTICS) == 12

    def test_canonical_order(self):
        assert [t.value for t in TACTICS] == [
            "InitialAccess", "Execution", "Persistence", "PrivilegeEscalation",
            "DefenseEvasion", "CredentialAccess", "Discovery", "LateralMovement",
            "Collection", "CommandAndControl", "Exfiltration", "Impact",
        ]
        assert [t.index for t in TACTICS] == list(range(12))

    def test_strict_total_order(self):
        assert Tactic.INITIAL_ACCESS < Tactic.EXECUTION < Tactic.IMPACT
        assert sorted(reversed(TACTICS)) == list(TACTICS)


class TestTransitionMatrix:
    def test_paper_entries(self, tmatrix):
        assert tmatrix(Tactic.INITIAL_ACCESS, Tactic.EXECUTION) == 0.8
        assert tmatrix(Tactic.INITIAL_ACCESS, Tactic.INITIAL_ACCESS) == 0.1
        assert tmatrix(Tactic.LATERAL_MOVEMENT, Tactic.EXECUTION) == 0.5

    def test_impact_row_verbatim(self, tmatrix):
        # the published table carries 0.1 for Impact->Exfiltration
        assert tmatrix(Tactic.IMPACT, Tactic.EXFILTRATION) == 0.1
        assert tmatrix(Tactic.IMPACT, Tactic.IMPACT) == 0.1

    def test_range_validation(self):
        bad = np.full((12, 12), 1.5)
        with pytest.raises(ModelError):
            TransitionMatrix(bad)

    def test_values_are_read_only(self, tmatrix):
        with pytest.raises(ValueError):
            tmatrix.values[0, 0] = 0.9

    def test_cached_singleton(self):
        assert default_transition_matrix() is default_transition_matrix()


class TestAlert:
    def test_valid(self):
        a = make_alert()
        assert a.score == 0.9
        assert a.attr_map["dstIP"].value == "172.16.115.20"

    def test_score_range(self):
        with pytest.raises(ModelError):
            make_alert(score=1.2)
        with pytest.raises(ModelError):
            make_alert(score=-0.1)

    def test_needs_two_attributes(self):
        with pytest.raises(ModelError):
            make_alert(attributes=(("dstIP", ip_value("172.16.1.1")),),
                       assets=frozenset())

    def test_assets_subset_of_ip_attributes(self):
        with pytest.raises(ModelError):
            make_alert(assets=frozenset({"10.9.9.9"}))

    def test_tactics_non_empty(self):
        with pytest.raises(ModelError):
            make_alert(tactics=frozenset())

    def test_naive_timestamp_normalized_to_utc(self):
        a = make_alert(timestamp=datetime(2021, 1, 1, 5, 0, 0))
        assert a.timestamp.tzinfo is timezone.utc

    def test_round_trip(self):
        a = make_alert()
        assert Alert.from_dict(a.to_dict()) == a


class TestGeneralizedAlert:
    def test_from_alert(self):
        g = GeneralizedAlert.from_alert(make_alert())
        assert g.members == ("a1",)
        assert g.time_start == g.time_end == TS

    def test_needs_members(self):
        g = GeneralizedAlert.from_alert(make_alert())
        with pytest.raises(ModelError):
            GeneralizedAlert(
                id="g", source="s", attributes=g.attributes, score=0.5,
                members=(), time_start=TS, time_end=TS,
                tactics=g.tactics, assets=g.assets,
            )

    def test_round_trip(self):
        g = GeneralizedAlert.from_alert(make_alert(), name="some rule")
        assert GeneralizedAlert.from_dict(g.to_dict()) == g


class TestAttrValues:
    def test_port_range(self):
        with pytest.raises(ModelError):
            port_value(70000)
        assert port_value("443").value == "443"

    def test_canonical_ip_collapses_mapped_ipv6(self):
        assert canonical_ip("::ffff:10.0.0.1") == "10.0.0.1"
        assert canonical_ip(" 10.0.0.1 ") == "10.0.0.1"

    def test_attr_value_ordering(self):
        a = AttrValue(AttrKind.PORT, "443")
        b = AttrValue(AttrKind.PORT, "443", 1)
        assert a != b


class TestAlertSource:
    def test_gl_bounded_by_schema(self):
        with pytest.raises(ModelError):
            AlertSource(id="x", schema=("a", "b"), gl=3,
                        tactics=frozenset({Tactic.DISCOVERY}),
                        kind=SourceKind.SIGNATURE)
