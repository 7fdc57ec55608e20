import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from settleopt.generator import GeneratorSpec, generate_instance
from settleopt.model import (
    DanglingReferenceError,
    LinkCycleError,
    SchemaError,
    check_feasibility,
    net_flows,
    parse_instance,
    payoff,
)

from conftest import two_party_document, worked_example_document


# -- parsing ---------------------------------------------------------------


def test_parse_worked_example(worked_example):
    assert worked_example.n_transactions == 4
    assert worked_example.n_spls == 1
    assert worked_example.cmbs[0].credit_limit_cents == 900000
    assert worked_example.spls[0].qmin_units == 200
    assert worked_example.securities[0].valuation_cents == 90
    # eligibility: only t1 pays from the client balance into the pledge position
    assert list(worked_example.spl_eligible[0]) == [0]


def test_parse_empty_batch():
    doc = {
        "securities": [],
        "balances": [{"id": "b", "owner": "p", "initial": 100}],
        "positions": [],
        "transactions": [],
    }
    instance = parse_instance(json.dumps(doc))
    assert instance.n_transactions == 0


def test_parse_dangling_balance():
    doc = two_party_document()
    doc["transactions"][0]["cash_leg"]["debtor_balance"] = "nope"
    with pytest.raises(DanglingReferenceError):
        parse_instance(json.dumps(doc))


def test_parse_rejects_unknown_fields():
    doc = two_party_document()
    doc["frobnicate"] = 1
    with pytest.raises(SchemaError):
        parse_instance(json.dumps(doc))
    doc = two_party_document()
    doc["balances"][0]["color"] = "red"
    with pytest.raises(SchemaError):
        parse_instance(json.dumps(doc))


def test_parse_rejects_negative_weight():
    doc = two_party_document()
    doc["transactions"][0]["weight"] = -1
    with pytest.raises(SchemaError):
        parse_instance(json.dumps(doc))


def test_parse_rejects_duplicate_spl_on_position():
    doc = worked_example_document()
    doc["spls"].append({"id": "spl2", "cmb": "cmb1", "position": "s2a", "qmin": 0})
    with pytest.raises(SchemaError):
        parse_instance(json.dumps(doc))


def test_parse_rejects_after_link_cycle():
    doc = worked_example_document()
    doc["after_links"] = [
        {"first": "t1", "second": "t2"},
        {"first": "t2", "second": "t3"},
        {"first": "t3", "second": "t1"},
    ]
    with pytest.raises(LinkCycleError):
        parse_instance(json.dumps(doc))


def test_parse_rejects_non_central_bank_provider():
    doc = worked_example_document()
    doc["cmbs"][0]["provider_balance"] = "b4"
    with pytest.raises(SchemaError):
        parse_instance(json.dumps(doc))


def test_parse_rejects_leg_mismatch():
    doc = worked_example_document()
    doc["transactions"][3]["kind"] = "DvP"  # cash-only marked as DvP
    with pytest.raises(SchemaError):
        parse_instance(json.dumps(doc))


# -- payoff ----------------------------------------------------------------


def test_payoff_all_ones_is_one(worked_example):
    assert payoff(worked_example, np.ones(4)) == pytest.approx(1.0)


def test_payoff_all_zeros_is_zero(worked_example):
    assert payoff(worked_example, np.zeros(4)) == 0.0


def test_payoff_two_transactions_hand_value():
    # weights (1,1), amounts (10,30) euros, lambda .5, settle the first:
    # cash term 10/40, volume term 1/2 -> 0.5*0.25 + 0.5*0.5 = 0.375
    doc = two_party_document(amount_a=1000, amount_b=3000)
    instance = parse_instance(json.dumps(doc))
    assert payoff(instance, [1, 0], 0.5) == pytest.approx(0.375)


def test_payoff_volume_only_batch_scores_on_volume():
    doc = worked_example_document()
    doc["transactions"] = [
        {
            "id": "f1",
            "kind": "FoP",
            "weight": 2,
            "security_leg": {
                "quantity": 10, "security": "B",
                "debtor_position": "s2b", "creditor_position": "s4b",
            },
        }
    ]
    doc["after_links"] = []
    instance = parse_instance(json.dumps(doc))
    # no cash in the batch: the cash term is defined as 0
    assert payoff(instance, [1], lam=1.0) == 0.0
    assert payoff(instance, [1], lam=0.5) == pytest.approx(0.5)


@settings(max_examples=60, deadline=None)
@given(
    bits=st.lists(st.integers(0, 1), min_size=4, max_size=4),
    flip=st.integers(0, 3),
    lam=st.floats(0, 1),
)
def test_payoff_monotone_and_bounded(bits, flip, lam):
    instance = parse_instance(json.dumps(worked_example_document()))
    base = payoff(instance, bits, lam)
    assert 0.0 <= base <= 1.0 + 1e-12
    raised = list(bits)
    raised[flip] = 1
    assert payoff(instance, raised, lam) >= base - 1e-12


def test_payoff_length_mismatch(worked_example):
    with pytest.raises(ValueError):
        payoff(worked_example, [1, 0])


# -- net flows -------------------------------------------------------------


def test_net_flows_null_settlement(worked_example):
    cash, units = net_flows(worked_example, np.zeros(4), np.zeros(1))
    assert list(cash) == [0, 6000, 200000]
    assert list(units) == [0, 0, 500, 100, 0]


def test_net_flows_pledge_creates_credit(worked_example):
    # 600 units at 0.90 euro each -> 540 euros of credit on b2
    cash, units = net_flows(worked_example, np.zeros(4), np.array([600]))
    b2 = worked_example.balance_index["b2"]
    s2a = worked_example.position_index["s2a"]
    assert cash[b2] == 6000 + 54000
    assert units[s2a] == -600


def test_net_flows_cash_transfer_bookkeeping():
    doc = two_party_document(amount_a=1000, amount_b=3000, initial_debtor=5000, initial_creditor=700)
    instance = parse_instance(json.dumps(doc))
    cash, _units = net_flows(instance, [1, 0], [])
    assert list(cash) == [5000 - 1000, 700 + 1000]


def test_net_flows_cash_conservation(worked_example):
    rng = np.random.default_rng(5)
    for _ in range(20):
        x = rng.integers(0, 2, size=4)
        cash, _ = net_flows(worked_example, x, np.zeros(1))
        assert cash.sum() == 6000 + 200000


def test_net_flows_security_conservation(worked_example):
    rng = np.random.default_rng(6)
    for _ in range(20):
        x = rng.integers(0, 2, size=4)
        y = rng.integers(0, 3, size=1) * 100
        _, units = net_flows(worked_example, x, y)
        pledged = int(y[0])
        a_idx = [i for i, p in enumerate(worked_example.positions) if p.security == "A"]
        total_a = sum(int(units[i]) for i in a_idx) + pledged
        assert total_a == 100  # initial units of A across all positions


# -- feasibility -----------------------------------------------------------


def test_null_settlement_feasible(worked_example):
    report = check_feasibility(worked_example, np.zeros(4), np.zeros(1))
    assert report.feasible
    assert report.violations == ()


def test_cash_shortfall_violation():
    doc = two_party_document(amount_a=1000, amount_b=3000, initial_debtor=500)
    instance = parse_instance(json.dumps(doc))
    report = check_feasibility(instance, [1, 0], [])
    assert not report.feasible
    (violation,) = report.violations
    assert violation.constraint == "cash"
    assert violation.subject == "bx"
    assert violation.magnitude == pytest.approx(5.0)  # 5 euros short


def test_after_link_violation(worked_example):
    # settle t3 without t2
    report = check_feasibility(worked_example, [1, 0, 1, 0], [0])
    kinds = {v.constraint for v in report.violations}
    assert "after_link" in kinds


def test_central_bank_exemption():
    doc = two_party_document(amount_a=1000, amount_b=3000, initial_debtor=0)
    instance = parse_instance(json.dumps(doc))
    assert not check_feasibility(instance, [1, 1], []).feasible
    doc["balances"][0]["is_central_bank"] = True
    exempt = parse_instance(json.dumps(doc))
    report = check_feasibility(exempt, [1, 1], [])
    assert report.feasible  # only that balance was violated


def test_strict_collateral_flags_undersized_pledge(worked_example):
    # pledging only 100 units violates the 200-unit minimum
    report = check_feasibility(worked_example, [1, 1, 0, 1], [100], strict_collateral=True)
    kinds = [v.constraint for v in report.violations]
    assert "collateral_quantity" in kinds
    # without the flag the same pair is judged on balances alone
    relaxed = check_feasibility(worked_example, [1, 1, 0, 1], [100])
    assert all(v.constraint != "collateral_quantity" for v in relaxed.violations)


def test_generated_instances_null_feasible():
    for seed in range(5):
        inst = generate_instance(GeneratorSpec(n_transactions=8, parties=4, seed=seed))
        x = np.zeros(inst.n_transactions)
        y = np.zeros(inst.n_spls)
        assert check_feasibility(inst, x, y).feasible
