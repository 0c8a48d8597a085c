"""Tests for technology profiles, drain-site tables, and clock sizing."""

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seusim.errors import ProfileError
from seusim.netlist import parse_bench
from seusim.techmodel import (
    bundled_profile_names,
    clock_period,
    critical_path,
    enumerate_drains,
    load_bundled_profile,
    load_profile,
    settle_bound,
)

from conftest import chain_profile_doc, dff_sites, gate_sites, profile_from


def _doc(**overrides):
    base = {
        "node_label": "test-node",
        "gate_delay": {"NOT1": 100.0, "NAND2": 55.0, "AND2": 50.0},
        "ff_setup": 30.0,
        "ff_hold": 20.0,
        "ff_clk_to_q": 50.0,
        "clock_margin": 20.0,
        "glitch_width": 120.0,
        "filter_threshold": 1.0,
        "drain_spec": {
            "NOT": gate_sites(),
            "NAND": gate_sites(),
            "AND": gate_sites(),
            "DFF": dff_sites(),
        },
    }
    base.update(overrides)
    return base


# ---------------------------------------------------------------------------
# profile loading


def test_bundled_profile_names():
    assert bundled_profile_names() == ["180nm-like", "65nm-like", "toy-equal"]


def test_bundled_profiles_load():
    p65 = load_bundled_profile("65nm-like")
    assert p65.node_label == "65nm-like"
    assert p65.glitch_width == 130.0
    assert p65.ff_setup == 35.0
    p180 = load_bundled_profile("180nm-like")
    assert p180.glitch_width == 190.0
    toy = load_bundled_profile("toy-equal")
    assert toy.glitch_width == 120.0


def test_bundled_profile_missing():
    with pytest.raises(ProfileError, match="no bundled profile '7nm'"):
        load_bundled_profile("7nm")


def test_delay_lookup():
    p = load_bundled_profile("65nm-like")
    assert p.delay("NAND", 2) == 55.0
    assert p.delay("NAND", 3) == 75.0
    assert p.delay("XOR", 2) == 90.0
    assert p.delay("NOT", 1) == 40.0


def test_delay_unknown_fanin_or_kind():
    p = load_bundled_profile("65nm-like")
    with pytest.raises(ProfileError, match="no delay for NAND with fan-in 5"):
        p.delay("NAND", 5)
    with pytest.raises(ProfileError, match="MUX"):
        p.delay("MUX", 2)


@pytest.mark.parametrize(
    "mutate, message",
    [
        (lambda d: d.pop("ff_setup"), "missing field 'ff_setup'"),
        (
            lambda d: d["gate_delay"].__setitem__("NOT1", 0.0),
            "non-positive delay for 'NOT1'",
        ),
        (
            lambda d: d["gate_delay"].__setitem__("FOO2", 10.0),
            "unknown gate kind key 'FOO2'",
        ),
        (
            lambda d: d["gate_delay"].__setitem__("NOTx", 10.0),
            "malformed gate_delay key 'NOTx'",
        ),
        (
            lambda d: d.__setitem__("glitch_width", -1.0),
            "non-positive value for 'glitch_width'",
        ),
        (
            lambda d: d.__setitem__("filter_threshold", -0.5),
            "filter_threshold must be >= 0",
        ),
        (
            lambda d: d["drain_spec"].__setitem__(
                "DFF", [{"area": 1.0, "polarity": "pulls-low"}]
            ),
            "DFF drain sites must name a state-node or capture-node",
        ),
        (
            lambda d: d["drain_spec"].__setitem__(
                "NOT",
                [{"area": 1.0, "polarity": "pulls-low", "ff_node_class": "state-node"}],
            ),
            "cannot carry ff_node_class",
        ),
        (
            lambda d: d["drain_spec"].__setitem__(
                "NOT", [{"area": 1.0, "polarity": "sideways"}]
            ),
            "bad polarity 'sideways'",
        ),
        (
            lambda d: d["drain_spec"].__setitem__("NOT", []),
            "empty drain site list for 'NOT'",
        ),
        (
            lambda d: d["drain_spec"].__setitem__(
                "NOT", [{"area": -2.0, "polarity": "pulls-low"}]
            ),
            "non-positive area",
        ),
        (
            lambda d: d["drain_spec"].__setitem__(
                "FOO", [{"area": 1.0, "polarity": "pulls-low"}]
            ),
            "unknown cell kind 'FOO'",
        ),
    ],
)
def test_load_profile_rejects_bad_documents(mutate, message):
    doc = _doc()
    mutate(doc)
    with pytest.raises(ProfileError, match=message):
        load_profile(json.dumps(doc), source="<t>")


def test_load_profile_rejects_bad_json():
    with pytest.raises(ProfileError, match="not valid JSON"):
        load_profile("{not json", source="<t>")


def test_filter_threshold_zero_is_allowed():
    prof = profile_from(_doc(filter_threshold=0.0))
    assert prof.filter_threshold == 0.0


# ---------------------------------------------------------------------------
# drain tables


@pytest.fixture
def nand_dff_circuit():
    return parse_bench(
        "INPUT(a)\nINPUT(b)\nOUTPUT(q)\nn = NAND(a, b)\nq = DFF(n)\n", name="nq"
    )


@pytest.fixture
def nand_dff_table(nand_dff_circuit):
    doc = _doc(drain_spec={"NAND": gate_sites(0.5), "DFF": dff_sites(1.0, 0.5)})
    return enumerate_drains(nand_dff_circuit, profile_from(doc))


def test_enumerate_drains_layout(nand_dff_table):
    tab = nand_dff_table
    assert [s.id for s in tab.sites] == ["n[0]", "n[1]", "q[0]", "q[1]", "q[2]", "q[3]"]
    assert [s.strike_class for s in tab.sites] == ["gate"] * 2 + ["register"] * 4
    assert [s.polarity for s in tab.sites[:2]] == ["pulls-low", "pulls-high"]
    assert [s.ff_node_class for s in tab.sites[2:]] == [
        "state-node",
        "state-node",
        "capture-node",
        "capture-node",
    ]
    # the struck signal: the gate's output net, or the flop's output net
    assert tab.sites[0].net == "n"
    assert tab.sites[2].net == "q"


def test_drain_table_register_fraction(nand_dff_table):
    tab = nand_dff_table
    assert tab.gate_area == pytest.approx(1.0)
    assert tab.flop_area == pytest.approx(3.0)
    assert tab.cumulative == pytest.approx((0.125, 0.25, 0.5, 0.75, 0.875, 1.0))


def test_drain_table_pick_boundaries(nand_dff_table):
    tab = nand_dff_table
    assert tab.pick(0.0).id == "n[0]"
    assert tab.pick(0.124).id == "n[0]"
    # a draw landing exactly on a boundary belongs to the next site
    assert tab.pick(0.125).id == "n[1]"
    assert tab.pick(0.5).id == "q[1]"
    assert tab.pick(0.9999).id == "q[3]"


def test_drain_table_by_id(nand_dff_table):
    site = nand_dff_table.by_id("q[2]")
    assert site.ff_node_class == "capture-node"
    assert site.polarity == "pulls-low"
    with pytest.raises(KeyError):
        nand_dff_table.by_id("zz[9]")


def test_enumerate_drains_missing_kind():
    c = parse_bench("INPUT(a)\nOUTPUT(z)\nz = NOT(a)\n")
    doc = _doc(drain_spec={"NAND": gate_sites(), "DFF": dff_sites()})
    with pytest.raises(ProfileError, match="no drain sites for gate kind 'NOT'"):
        enumerate_drains(c, profile_from(doc))


def test_scaling_all_areas_preserves_cumulative(nand_dff_circuit, nand_dff_table):
    doubled = _doc(drain_spec={"NAND": gate_sites(1.0), "DFF": dff_sites(2.0, 1.0)})
    tab2 = enumerate_drains(nand_dff_circuit, profile_from(doubled))
    assert tab2.cumulative == nand_dff_table.cumulative


def test_pick_matches_area_fractions(nand_dff_table):
    import random

    rng = random.Random(42)
    n = 100_000
    hits = sum(1 for _ in range(n) if nand_dff_table.pick(rng.random()).strike_class == "register")
    p = 0.75
    sigma = (p * (1 - p) / n) ** 0.5
    assert abs(hits / n - p) < 3 * sigma


@given(st.floats(min_value=0.0, max_value=1.0, exclude_max=True))
@settings(max_examples=60, deadline=None)
def test_pick_is_total_on_unit_interval(u):
    c = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(q)\nn = NAND(a, b)\nq = DFF(n)\n")
    doc = _doc(drain_spec={"NAND": gate_sites(0.3), "DFF": dff_sites(0.7, 0.2)})
    tab = enumerate_drains(c, profile_from(doc))
    site = tab.pick(u)
    assert site in tab.sites


def test_enumerate_drains_declaration_order():
    c = parse_bench(
        "INPUT(x)\nOUTPUT(q2)\nq1 = DFF(g1)\ng1 = NOT(x)\ng2 = NOT(q1)\nq2 = DFF(g2)\n",
        name="mixed",
    )
    tab = enumerate_drains(c, profile_from(_doc()))
    cells = [s.cell for s in tab.sites]
    # all gates in declaration order first, then all flops in declaration order
    assert cells == ["g1"] * 2 + ["g2"] * 2 + ["q1"] * 4 + ["q2"] * 4


# ---------------------------------------------------------------------------
# clock sizing


def test_clock_period_three_gate_chain():
    c = parse_bench(
        "INPUT(x)\nOUTPUT(B)\nA = DFF(x)\nB = DFF(g3)\n"
        "g1 = NOT(A)\ng2 = NOT(g1)\ng3 = NOT(g2)\n",
        name="p400",
    )
    prof = profile_from(_doc())
    assert critical_path(c, prof) == 300.0
    # clk-to-q + longest path + setup + margin
    assert clock_period(c, prof) == 50.0 + 300.0 + 30.0 + 20.0


def test_clock_period_flop_to_flop():
    c = parse_bench("INPUT(x)\nOUTPUT(B)\nA = DFF(x)\nB = DFF(A)\n", name="ff")
    prof = profile_from(_doc())
    assert critical_path(c, prof) == 0.0
    assert clock_period(c, prof) == 100.0


def test_clock_period_takes_longest_reconvergent_arm():
    c = parse_bench(
        "INPUT(x)\nOUTPUT(B)\nA = DFF(x)\nB = DFF(m)\n"
        "s = NOT(A)\nl1 = NOT(A)\nl2 = NOT(l1)\nm = AND(s, l2)\n",
        name="diamond",
    )
    prof = profile_from(_doc())
    assert critical_path(c, prof) == 250.0  # two NOTs plus the AND
    assert clock_period(c, prof) == 350.0


def test_clock_period_monotone_in_depth():
    prof = profile_from(_doc())
    last = 0.0
    for depth in range(1, 5):
        gates = "".join(
            f"g{i} = NOT({'A' if i == 1 else f'g{i - 1}'})\n" for i in range(1, depth + 1)
        )
        c = parse_bench(
            f"INPUT(x)\nOUTPUT(B)\nA = DFF(x)\nB = DFF(g{depth})\n{gates}",
            name=f"d{depth}",
        )
        period = clock_period(c, prof)
        assert period > last
        last = period


def test_clock_period_rejects_hold_heavy_profile():
    c = parse_bench("INPUT(x)\nOUTPUT(B)\nA = DFF(x)\nB = DFF(A)\n", name="ff")
    prof = profile_from(_doc(ff_hold=80.0))
    with pytest.raises(ProfileError, match=r"setup \+ hold \(110.0\)"):
        clock_period(c, prof)


def test_settle_bound_single_gate_chain(chain1, chain_profile):
    # clk-to-q 60 plus one 100 ns inverter
    assert settle_bound(chain1, chain_profile) == 160.0
    assert clock_period(chain1, chain_profile) == 300.0


def test_settle_bound_counts_output_only_logic():
    # three inverters hang off the flop toward the primary output; they do not
    # set the critical path (no flop consumes them) but they do settle late.
    c = parse_bench(
        "INPUT(x)\nOUTPUT(g3)\nA = DFF(x)\ng1 = NOT(A)\ng2 = NOT(g1)\ng3 = NOT(g2)\n",
        name="hang",
    )
    prof = profile_from(_doc())
    assert critical_path(c, prof) == 0.0
    assert clock_period(c, prof) == 100.0
    assert settle_bound(c, prof) == 350.0
