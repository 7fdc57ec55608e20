import json

import pytest

from settleopt.model import Instance, parse_instance


def worked_example_document() -> dict:
    """Four transactions among three parties with one credit line.

    The central bank (P1) sells 600 units of A to P2, who is short of cash
    and covered by pledging the incoming units (valued 0.90 euro each,
    minimum pledge 200, credit limit 9000 euros).  P4 cannot deliver 400
    units of A out of a 100-unit position, so transaction t3 can never
    settle; t3 is also chained after t2.
    """
    return {
        "securities": [
            {"id": "A", "lot_size": 1, "valuation": 90},
            {"id": "B", "lot_size": 1, "valuation": 100},
        ],
        "balances": [
            {"id": "b1", "owner": "P1", "initial": 0, "is_central_bank": True},
            {"id": "b2", "owner": "P2", "initial": 6000},
            {"id": "b4", "owner": "P4", "initial": 200000},
        ],
        "positions": [
            {"id": "s1a", "owner": "P1", "security": "A", "initial": 0, "is_issuer": True},
            {"id": "s2a", "owner": "P2", "security": "A", "initial": 0},
            {"id": "s2b", "owner": "P2", "security": "B", "initial": 500},
            {"id": "s4a", "owner": "P4", "security": "A", "initial": 100},
            {"id": "s4b", "owner": "P4", "security": "B", "initial": 0},
        ],
        "transactions": [
            {
                "id": "t1",
                "kind": "DvP",
                "weight": 1,
                "cash_leg": {"amount": 60000, "debtor_balance": "b2", "creditor_balance": "b1"},
                "security_leg": {
                    "quantity": 600, "security": "A",
                    "debtor_position": "s1a", "creditor_position": "s2a",
                },
            },
            {
                "id": "t2",
                "kind": "DvP",
                "weight": 1,
                "cash_leg": {"amount": 45000, "debtor_balance": "b4", "creditor_balance": "b2"},
                "security_leg": {
                    "quantity": 500, "security": "B",
                    "debtor_position": "s2b", "creditor_position": "s4b",
                },
            },
            {
                "id": "t3",
                "kind": "DvP",
                "weight": 1,
                "cash_leg": {"amount": 36000, "debtor_balance": "b1", "creditor_balance": "b4"},
                "security_leg": {
                    "quantity": 400, "security": "A",
                    "debtor_position": "s4a", "creditor_position": "s1a",
                },
            },
            {
                "id": "t4",
                "kind": "PfoD",
                "weight": 1,
                "cash_leg": {"amount": 5000, "debtor_balance": "b4", "creditor_balance": "b2"},
            },
        ],
        "after_links": [{"first": "t2", "second": "t3"}],
        "cmbs": [
            {
                "id": "cmb1",
                "client_balance": "b2",
                "provider_balance": "b1",
                "credit_limit": 900000,
            }
        ],
        "spls": [{"id": "spl1", "cmb": "cmb1", "position": "s2a", "qmin": 200}],
    }


@pytest.fixture
def worked_example() -> Instance:
    return parse_instance(json.dumps(worked_example_document()))


def two_party_document(
    amount_a: int = 1000,
    amount_b: int = 3000,
    initial_debtor: int = 10_000,
    initial_creditor: int = 0,
) -> dict:
    """Two cash-only transfers from bx to by with unit weights."""
    return {
        "securities": [],
        "balances": [
            {"id": "bx", "owner": "X", "initial": initial_debtor},
            {"id": "by", "owner": "Y", "initial": initial_creditor},
        ],
        "positions": [],
        "transactions": [
            {
                "id": "p1",
                "kind": "PfoD",
                "weight": 1,
                "cash_leg": {"amount": amount_a, "debtor_balance": "bx", "creditor_balance": "by"},
            },
            {
                "id": "p2",
                "kind": "PfoD",
                "weight": 1,
                "cash_leg": {"amount": amount_b, "debtor_balance": "bx", "creditor_balance": "by"},
            },
        ],
        "after_links": [],
        "cmbs": [],
        "spls": [],
    }


@pytest.fixture
def two_transfer() -> Instance:
    return parse_instance(json.dumps(two_party_document()))
