import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from settleopt.circuit import OutcomeDistribution
from settleopt.collateral import compute_collateral
from settleopt.generator import GeneratorSpec, generate_instance
from settleopt.model import check_feasibility, parse_instance, payoff
from settleopt.penalty import (
    AFTER_LINK_PARAMS,
    CASH_PARAMS,
    SECURITY_PARAMS,
    ActivationParams,
    CostCache,
    PenaltyConfig,
    activation,
    canonical_violations,
    cost_batch,
    cost_with_collateral,
    expected_cost,
    unconstrained_cost,
)

from conftest import two_party_document

# frozen from a 40-digit evaluation of the saturating logistic penalty
AFTER_LINK_UNIT_PENALTY = 4.999771481214322


def test_defaults_match_documented_values():
    assert (CASH_PARAMS.beta, CASH_PARAMS.slope, CASH_PARAMS.threshold) == (100.0, 0.025, 0.0)
    assert (SECURITY_PARAMS.beta, SECURITY_PARAMS.slope, SECURITY_PARAMS.threshold) == (10.0, 0.025, 0.0)
    assert (AFTER_LINK_PARAMS.beta, AFTER_LINK_PARAMS.slope, AFTER_LINK_PARAMS.threshold) == (5.0, 10.0, -0.5)


def test_activation_zero_branch():
    assert activation(AFTER_LINK_PARAMS, -3.0) == 0.0
    assert activation(CASH_PARAMS, 0.0) == 0.0


def test_activation_asymptote():
    assert activation(CASH_PARAMS, 1e9) == pytest.approx(100.0, abs=1e-9)
    assert activation(AFTER_LINK_PARAMS, 1e9) == pytest.approx(5.0, abs=1e-12)


def test_activation_unit_after_link_value():
    assert activation(AFTER_LINK_PARAMS, 1.0) == pytest.approx(AFTER_LINK_UNIT_PENALTY, abs=1e-12)


def test_activation_overflow_safe():
    assert activation(ActivationParams(beta=1.0, slope=50.0, threshold=0.0), 1e6) == pytest.approx(1.0)
    assert activation(ActivationParams(beta=1.0, slope=50.0, threshold=0.0), -1e6) == 0.0


@settings(max_examples=100, deadline=None)
@given(
    v1=st.floats(-50, 200),
    v2=st.floats(-50, 200),
    beta=st.floats(0.1, 100),
    slope=st.floats(0.001, 20),
    threshold=st.floats(-5, 5),
)
def test_activation_monotone_and_bounded(v1, v2, beta, slope, threshold):
    params = ActivationParams(beta=beta, slope=slope, threshold=threshold)
    lo, hi = sorted((v1, v2))
    a_lo, a_hi = activation(params, lo), activation(params, hi)
    assert a_lo <= a_hi + 1e-12
    # the bound is strict in exact arithmetic; floats saturate at beta
    assert 0.0 <= a_lo <= beta
    assert 0.0 <= a_hi <= beta
    if slope * hi < 30:
        assert a_hi < beta


def test_canonical_violations_feasible_pair(worked_example):
    x = np.array([1, 1, 0, 1])
    y = compute_collateral(worked_example, x).lots
    entries = canonical_violations(worked_example, x, y)
    assert all(v <= 0 for _, _, v in entries)
    # one entry per non-exempt balance (2) + non-exempt position (4) + link (1)
    assert len(entries) == 2 + 4 + 1


def test_canonical_violations_cash_deficit():
    doc = two_party_document(amount_a=1000, amount_b=3000, initial_debtor=500)
    instance = parse_instance(json.dumps(doc))
    entries = dict(((c, s), v) for c, s, v in canonical_violations(instance, [1, 0], []))
    assert entries[("cash", "bx")] == pytest.approx(5.0)


def test_canonical_violations_after_link(worked_example):
    entries = canonical_violations(worked_example, [1, 0, 1, 0], [0])
    link = [v for c, _, v in entries if c == "after_link"]
    assert link == [1.0]


def test_cost_equals_payoff_when_feasible():
    doc = two_party_document(amount_a=1000, amount_b=3000)
    instance = parse_instance(json.dumps(doc))
    assert unconstrained_cost(instance, [1, 0], []) == pytest.approx(0.375)


def test_cost_zero_settlement_is_zero(worked_example):
    assert unconstrained_cost(worked_example, np.zeros(4), np.zeros(1)) == 0.0


def test_cost_single_after_link_violation():
    # an isolated link violation costs its activation against the payoff
    doc = two_party_document(amount_a=1000, amount_b=1000, initial_debtor=10_000)
    doc["after_links"] = [{"first": "p1", "second": "p2"}]
    instance = parse_instance(json.dumps(doc))
    expected = payoff(instance, [0, 1], 0.5) - AFTER_LINK_UNIT_PENALTY
    assert unconstrained_cost(instance, [0, 1], []) == pytest.approx(expected, abs=1e-12)


def test_positive_cost_certifies_feasibility_on_generated_instances():
    # both directions, on nonzero settlements
    checked = 0
    for seed in range(6):
        inst = generate_instance(
            GeneratorSpec(n_transactions=10, parties=4, collateral_fraction=0.8, seed=seed)
        )
        rng = np.random.default_rng(seed)
        for _ in range(200):
            x = rng.integers(0, 2, size=10)
            if not x.any():
                continue
            y = compute_collateral(inst, x).lots
            cost = unconstrained_cost(inst, x, y)
            feasible = check_feasibility(inst, x, y).feasible
            assert (cost > 0) == feasible, (seed, x.tolist(), cost, feasible)
            checked += 1
    assert checked > 1000


def test_cost_batch_matches_scalar():
    for seed in range(4):
        inst = generate_instance(
            GeneratorSpec(n_transactions=8, parties=4, collateral_fraction=1.0, seed=seed)
        )
        rng = np.random.default_rng(seed)
        xs = rng.integers(0, 2, size=(50, 8))
        batch = cost_batch(inst, xs)
        for r in range(50):
            assert batch[r] == pytest.approx(cost_with_collateral(inst, xs[r]), abs=1e-12)


# -- expected cost ----------------------------------------------------------


def test_expected_cost_point_mass(worked_example):
    dist = OutcomeDistribution(counts={"1101": 100}, shots=100)
    expected = cost_with_collateral(worked_example, [1, 1, 0, 1])
    assert expected_cost(dist, worked_example) == pytest.approx(expected, abs=1e-12)


def test_expected_cost_two_point_average(worked_example):
    dist = OutcomeDistribution(counts={"0000": 50, "1101": 50}, shots=100)
    a = cost_with_collateral(worked_example, [0, 0, 0, 0])
    b = cost_with_collateral(worked_example, [1, 1, 0, 1])
    assert expected_cost(dist, worked_example) == pytest.approx((a + b) / 2, abs=1e-12)


def test_expected_cost_full_support_matches_enumeration(worked_example):
    # brute-force oracle: scalar costs weighted by hand-rolled probabilities
    counts = {}
    rng = np.random.default_rng(3)
    for i, bits in enumerate(itertools.product("01", repeat=4)):
        counts["".join(bits)] = int(rng.integers(1, 50))
    shots = sum(counts.values())
    dist = OutcomeDistribution(counts=counts, shots=shots)
    oracle = math.fsum(
        (c / shots) * cost_with_collateral(worked_example, [int(b) for b in key])
        for key, c in counts.items()
    )
    assert expected_cost(dist, worked_example) == pytest.approx(oracle, abs=1e-12)


def test_expected_cost_rejects_unnormalized(worked_example):
    with pytest.raises(ValueError):
        expected_cost({"0000": 0.5, "1101": 0.4}, worked_example)


def test_expected_cost_rejects_length_mismatch(worked_example):
    with pytest.raises(ValueError):
        expected_cost({"00011": 1.0}, worked_example)


def test_cache_transparency_and_exploration_count(worked_example):
    cache = CostCache(worked_example)
    dist = OutcomeDistribution(counts={"0000": 1, "1101": 2, "0100": 1}, shots=4)
    first = expected_cost(dist, worked_example, cache=cache)
    second = expected_cost(dist, worked_example, cache=cache)
    assert first == second
    assert cache.explored == 3
    expected_cost({"0000": 1.0}, worked_example, cache=cache)
    assert cache.explored == 3  # nothing new scored
