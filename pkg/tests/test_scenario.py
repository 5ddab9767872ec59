import dataclasses
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cdnoma.scenario import (
    ScenarioError,
    config_hash,
    default_scenario,
    draw_user_angles,
    dump_scenario,
    group_energies,
    load_scenario,
    scenario_from_dict,
    scenario_to_dict,
)

# printed angle-delay profile: (delay, sector) per MPC, per group
TABLE = [
    [(0, (-1.25, 1.5)), (5, (8.25, 9.75)), (11, (20.25, 22.0))],
    [(3, (25.0, 27.5)), (9, (13.5, 15.75))],
    [(8, (-8.0, -6.0)), (17, (-14.75, -12.5))],
    [(20, (-21.5, -19.5)), (29, (-28.0, -26.0))],
]


def minimal():
    return {"antennas": 8, "groups": [{"users": 2, "rf_chains": 1, "mpcs": [{"delay": 0, "sector": [-5, 5]}]}]}


def test_bundled_layout():
    cfg = default_scenario()
    assert cfg.antennas == 100
    assert len(cfg.groups) == 4
    assert cfg.total_delays == 32
    for g, rows in zip(cfg.groups, TABLE):
        assert [(p.delay, p.sector) for p in g.mpcs] == rows
        assert all(p.angular_spread == 3.0 for p in g.mpcs)
        assert g.users == 6
        assert g.rf_chains == 2
        # unit gain per MPC
        assert g.channel_gain == len(g.mpcs)
        assert math.isclose(sum(p.gain_fraction for p in g.mpcs), 1.0)


def test_minimal_defaults():
    cfg = scenario_from_dict(minimal())
    p = cfg.groups[0].mpcs[0]
    assert p.angular_spread == 3.0
    assert p.angular_profile == "uniform"
    assert p.gain_fraction == 1.0
    assert cfg.total_delays == 1
    assert cfg.code_length == 4
    assert cfg.subcarriers % cfg.code_length == 0


def test_too_many_rf_chains():
    d = minimal()
    d["groups"][0]["rf_chains"] = 9
    with pytest.raises(ScenarioError, match="rf_chains"):
        scenario_from_dict(d)


def test_error_names_field(tmp_path):
    d = minimal()
    d["groups"][0]["mpcs"][0]["angular_spread"] = -1
    with pytest.raises(ScenarioError, match=r"groups\[0\]\.mpcs\[0\]\.angular_spread"):
        scenario_from_dict(d)
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ScenarioError):
        load_scenario(bad)


def test_round_trip_file(tmp_path):
    cfg = default_scenario()
    path = tmp_path / "s.json"
    dump_scenario(cfg, path)
    again = load_scenario(path)
    assert again == cfg
    assert config_hash(again) == config_hash(cfg)


def test_draws_in_sector_and_deterministic():
    cfg = default_scenario()
    a = draw_user_angles(cfg, np.random.default_rng(3))
    b = draw_user_angles(cfg, np.random.default_rng(3))
    for g, x, y in zip(cfg.groups, a, b):
        assert np.array_equal(x, y)
        for i, p in enumerate(g.mpcs):
            assert np.all((x[:, i] >= p.sector[0]) & (x[:, i] <= p.sector[1]))


def test_degenerate_sector():
    d = minimal()
    d["groups"][0]["mpcs"][0]["sector"] = [5, 5]
    cfg = scenario_from_dict(d)
    assert np.all(draw_user_angles(cfg, np.random.default_rng(0))[0] == 5.0)


def test_group_energies():
    cfg = scenario_from_dict(minimal())
    # K=2 users, QPSK, N_c=4: E_s/K = E_b * 2 / 4
    assert np.allclose(group_energies(cfg, 10.0), [2 * 10 * 0.5])
    assert np.allclose(group_energies(cfg, 0.0, code_length=1), [2 * 2.0])


def test_group_layout_split():
    cfg = default_scenario().with_group_layout(users=12, rf_chains=16)
    assert cfg.users == [12] * 4
    assert [g.rf_chains for g in cfg.groups] == [4] * 4
    with pytest.raises(ScenarioError):
        default_scenario().with_group_layout(rf_chains=6)


# mutations, each breaking one documented invariant
MUTATIONS = {
    "delay_beyond_L": lambda d: d.update(total_delays=1) or d["groups"][0]["mpcs"][0].update(delay=1),
    "spread_zero": lambda d: d["groups"][0]["mpcs"][0].update(angular_spread=0.0),
    "sector_outside": lambda d: d["groups"][0]["mpcs"][0].update(sector=[80.0, 89.5]),
    "sector_reversed": lambda d: d["groups"][0]["mpcs"][0].update(sector=[3.0, 1.0]),
    "fractions": lambda d: d["groups"][0]["mpcs"][0].update(gain_fraction=0.5),
    "no_users": lambda d: d["groups"][0].update(users=0),
    "no_rf": lambda d: d["groups"][0].update(rf_chains=0),
    "no_mpcs": lambda d: d["groups"][0].update(mpcs=[]),
    "rf_exceeds_M": lambda d: d["groups"][0].update(rf_chains=d["antennas"] + 1),
    "N_not_pow2": lambda d: d.update(subcarriers=48),
    "N_not_multiple": lambda d: d.update(subcarriers=64, code_length=3),
    "mode": lambda d: d.update(noma_mode="OFDMA"),
    "dup_delay": lambda d: d["groups"][0]["mpcs"].append(dict(d["groups"][0]["mpcs"][0])),
    "no_groups": lambda d: d.update(groups=[]),
    "bool_antennas": lambda d: d.update(antennas=True),
    "profile": lambda d: d["groups"][0]["mpcs"][0].update(angular_profile="laplacian"),
}


@settings(max_examples=60, deadline=None)
@given(
    name=st.sampled_from(sorted(MUTATIONS)),
    M=st.integers(4, 128),
    K=st.integers(1, 12),
    lo=st.floats(-60, 60),
    width=st.floats(0, 10),
)
def test_prop_mutations_rejected(name, M, K, lo, width):
    d = {"antennas": M, "groups": [{"users": K, "rf_chains": 1, "mpcs": [{"delay": 0, "sector": [lo, lo + width]}]}]}
    scenario_from_dict(json.loads(json.dumps(d)))  # valid before mutation
    MUTATIONS[name](d)
    with pytest.raises(ScenarioError):
        scenario_from_dict(d)


@settings(max_examples=40, deadline=None)
@given(
    M=st.integers(8, 128),
    users=st.lists(st.integers(1, 16), min_size=1, max_size=4),
    seed=st.integers(0, 2**31 - 1),
    nc=st.sampled_from([1, 2, 4, 8]),
    data=st.data(),
)
def test_prop_round_trip(M, users, seed, nc, data):
    groups = []
    for k in users:
        n_mpc = data.draw(st.integers(1, 3))
        delays = data.draw(st.lists(st.integers(0, 31), min_size=n_mpc, max_size=n_mpc, unique=True))
        mpcs = []
        for l in delays:
            lo = data.draw(st.floats(-80, 70, allow_nan=False))
            mpcs.append({"delay": l, "sector": [lo, lo + data.draw(st.floats(0, 5))]})
        groups.append({"users": k, "rf_chains": 1, "mpcs": mpcs})
    cfg = scenario_from_dict({"antennas": M, "groups": groups, "seed": seed, "code_length": nc})
    again = scenario_from_dict(json.loads(json.dumps(scenario_to_dict(cfg))))
    assert again == cfg
    assert dataclasses.asdict(again) == dataclasses.asdict(cfg)
