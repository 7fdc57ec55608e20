"""Seeded synthetic settlement batches.

Instances follow the shape of desk-scale production batches: a handful of
parties trading a few securities via mostly cash-versus-security exchanges,
sprinkled with precedence links and central-bank credit lines on the buyers'
balances.  A tightness factor scales every account's initial holdings against
its worst-case net outflow: at 2.0 settling everything is feasible, below 1.0
at least one account constraint binds (one payer balance is built with a
guaranteed shortfall and no credit line).

All monetary amounts are whole euros and all security quantities, lot sizes,
and minimum pledges are multiples of ten units.  This quantization keeps the
penalty of any single constraint violation above the payoff ceiling, so a
positive penalized score certifies feasibility on generated instances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (
    AfterLink,
    CashBalance,
    CashLeg,
    Cmb,
    Instance,
    SecurityLeg,
    SecurityPosition,
    SecurityType,
    SplLink,
    Transaction,
    parse_instance,
)

_LOT_SIZES = (10, 20, 50, 100)
_QUANTITY_CHOICES = tuple(range(50, 510, 10))
_VALUATION_CHOICES = tuple(range(50, 310, 10))   # cents per unit, multiples of 10


@dataclass(frozen=True)
class GeneratorSpec:
    n_transactions: int
    securities: int = 3
    parties: int = 6
    after_links: int = 0
    collateral_fraction: float = 0.5
    tightness: float = 0.7
    seed: int = 0

    def __post_init__(self):
        if self.n_transactions < 1 or self.securities < 1:
            raise ValueError("counts must be positive")
        if self.parties < 2:
            raise ValueError("need at least two trading parties")
        if not 0.0 < self.tightness <= 2.0:
            raise ValueError("tightness must lie in (0, 2]")
        if not 0.0 <= self.collateral_fraction <= 1.0:
            raise ValueError("collateral fraction must lie in [0, 1]")
        max_links = self.n_transactions * (self.n_transactions - 1) // 2
        if self.after_links < 0 or self.after_links > max_links:
            raise ValueError("after-link count out of range")


def generate_instance(spec: GeneratorSpec) -> Instance:
    """Deterministically build a batch from the spec (same spec, same bytes)."""
    rng = np.random.default_rng(spec.seed)

    securities = [
        SecurityType(
            id=f"S{k}",
            lot_size=int(rng.choice(_LOT_SIZES)),
            valuation_cents=int(rng.choice(_VALUATION_CHOICES)),
        )
        for k in range(spec.securities)
    ]

    party_ids = [f"P{k}" for k in range(spec.parties)]
    balance_of = {p: f"B_{p}" for p in party_ids}
    position_of = {(p, s.id): f"POS_{p}_{s.id}" for p in party_ids for s in securities}
    cb_balance = "B_CB"

    stressed_party = party_ids[int(rng.integers(spec.parties))] if spec.tightness < 1.0 else None

    transactions: list[Transaction] = []
    for ti in range(spec.n_transactions):
        weight = int(rng.integers(1, 11))
        roll = rng.random()
        if ti == 0 and stressed_party is not None:
            kind, debtor_party = "DvP", stressed_party
        elif roll < 0.7:
            kind, debtor_party = "DvP", None
        elif roll < 0.85:
            kind, debtor_party = "FoP", None
        else:
            kind, debtor_party = "PfoD", None

        # The stressed payer never receives cash, so its shortfall is certain.
        def pick_pair(exclude_creditor: str | None) -> tuple[str, str]:
            while True:
                a, b = rng.choice(spec.parties, size=2, replace=False)
                pa, pb = party_ids[int(a)], party_ids[int(b)]
                if exclude_creditor is not None and pb == exclude_creditor:
                    continue
                return pa, pb

        if kind == "DvP":
            buyer, seller = pick_pair(stressed_party)
            if debtor_party is not None:
                buyer = debtor_party
                while seller == buyer:
                    seller = party_ids[int(rng.integers(spec.parties))]
            sec = securities[int(rng.integers(spec.securities))]
            quantity = int(rng.choice(_QUANTITY_CHOICES))
            base = quantity * sec.valuation_cents
            spread = int(rng.integers(-10, 11)) / 100.0
            amount = max(100, int(round(base * (1 + spread) / 100.0)) * 100)
            transactions.append(
                Transaction(
                    id=f"T{ti}",
                    kind="DvP",
                    weight=weight,
                    cash_leg=CashLeg(amount, balance_of[buyer], balance_of[seller]),
                    security_leg=SecurityLeg(
                        quantity, sec.id, position_of[(seller, sec.id)], position_of[(buyer, sec.id)]
                    ),
                )
            )
        elif kind == "FoP":
            giver, taker = pick_pair(None)
            sec = securities[int(rng.integers(spec.securities))]
            quantity = int(rng.choice(_QUANTITY_CHOICES))
            transactions.append(
                Transaction(
                    id=f"T{ti}",
                    kind="FoP",
                    weight=weight,
                    security_leg=SecurityLeg(
                        quantity, sec.id, position_of[(giver, sec.id)], position_of[(taker, sec.id)]
                    ),
                )
            )
        else:
            payer, payee = pick_pair(stressed_party)
            amount = int(rng.integers(1, 51)) * 100 * 100  # 100..5000 euros
            transactions.append(
                Transaction(
                    id=f"T{ti}",
                    kind="PfoD",
                    weight=weight,
                    cash_leg=CashLeg(amount, balance_of[payer], balance_of[payee]),
                )
            )

    # Acyclic precedence: links only point forward along a random permutation.
    links: list[AfterLink] = []
    if spec.after_links:
        perm = rng.permutation(spec.n_transactions)
        chosen: set[tuple[int, int]] = set()
        while len(chosen) < spec.after_links:
            i, j = sorted(rng.choice(spec.n_transactions, size=2, replace=False))
            chosen.add((int(perm[i]), int(perm[j])))
        for f, s in sorted(chosen):
            links.append(AfterLink(first=f"T{f}", second=f"T{s}"))

    # Gross outflows with everything settled.  Initial holdings scale against
    # the gross (not net) requirement: netting then rewards settling more,
    # which is what makes subsets below the full batch interesting.
    cash_gross = {b: 0 for b in balance_of.values()}
    sec_gross = {p: 0 for p in position_of.values()}
    for t in transactions:
        if t.cash_leg is not None:
            cash_gross[t.cash_leg.debtor_balance] += t.cash_leg.amount_cents
        if t.security_leg is not None:
            sec_gross[t.security_leg.debtor_position] += t.security_leg.quantity

    balances = [CashBalance(id=cb_balance, owner="CB", initial_cents=0, is_central_bank=True)]
    for p in party_ids:
        initial = int(spec.tightness * cash_gross[balance_of[p]]) // 100 * 100
        balances.append(CashBalance(id=balance_of[p], owner=p, initial_cents=initial))

    positions = []
    for p in party_ids:
        for sec in securities:
            pid = position_of[(p, sec.id)]
            initial = int(spec.tightness * sec_gross[pid]) // 10 * 10
            positions.append(
                SecurityPosition(id=pid, owner=p, security=sec.id, initial_units=initial)
            )

    # Credit lines for a fraction of the cash-paying parties; the stressed
    # payer is left without one so its shortfall stays binding.
    cmbs: list[Cmb] = []
    spls: list[SplLink] = []
    has_dvp_buy = {
        p: any(
            t.cash_leg is not None
            and t.security_leg is not None
            and t.cash_leg.debtor_balance == balance_of[p]
            for t in transactions
        )
        for p in party_ids
    }
    eligible_parties = [p for p in party_ids if p != stressed_party and has_dvp_buy[p]]
    n_cmb = int(round(spec.collateral_fraction * len(eligible_parties)))
    for p in eligible_parties[:n_cmb]:
        limit = max(10_000, 2 * cash_gross[balance_of[p]]) // 100 * 100
        cmb_id = f"CMB_{p}"
        cmbs.append(
            Cmb(id=cmb_id, client_balance=balance_of[p], provider_balance=cb_balance,
                credit_limit_cents=limit)
        )
        # Pledge links on positions this party buys into while paying from
        # its own balance (the only flows that can trigger credit).
        receiving = sorted(
            {
                t.security_leg.creditor_position
                for t in transactions
                if t.cash_leg is not None
                and t.security_leg is not None
                and t.cash_leg.debtor_balance == balance_of[p]
            }
        )
        for pos_id in receiving:
            spls.append(SplLink(id=f"SPL_{pos_id}", cmb=cmb_id, position=pos_id, qmin_units=10))

    instance = Instance(securities, balances, positions, transactions, links, cmbs, spls)
    # Round-trip through the document form so the emitted bytes are what the
    # parser accepts.
    return parse_instance(instance.to_json())
