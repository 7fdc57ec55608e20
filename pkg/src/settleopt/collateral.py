"""Greedy collateral computation for a settlement proposal.

Given a proposed settlement, a cash balance short of funds may draw
central-bank credit by pledging incoming securities through its pledge links.
The greedy routine fills each link of a deficient balance to the largest lot
count allowed by the remaining credit limit and by the settled eligible
inflow, and commits the pledges only when they cover the whole deficit.
The result respects the pledge bounds (minimum quantity, eligible-inflow cap,
credit limit) by construction.

A batched variant evaluates many settlement vectors at once; it is the
workhorse behind exhaustive search, random sampling, and cost estimation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Instance, as_settlement


@dataclass(frozen=True)
class CollateralOutcome:
    lots: np.ndarray                  # lots pledged per link
    credit_granted: np.ndarray        # cents added to each balance
    credit_needed: np.ndarray         # cents each cmb-client balance was short
    covered: np.ndarray               # per balance: deficit fully covered


def credit_needed(instance: Instance, x, balance_id: str) -> int:
    """Cents of extra credit the balance needs to settle its share of x."""
    arr = as_settlement(instance, x)
    bi = instance.balance_index.get(balance_id)
    if bi is None:
        raise KeyError(f"unknown balance {balance_id!r}")
    if instance.balance_cmb_idx[bi] < 0:
        raise ValueError(f"balance {balance_id!r} has no credit line")
    net = int(instance.cash_delta[bi] @ arr.astype(np.int64))
    return max(0, -net - int(instance.balance_initial[bi]))


def pledge_cap(instance: Instance, x, spl_id: str) -> int:
    """Units pledgeable through the link: settled eligible inflow, or 0
    when the client balance needs no credit."""
    arr = as_settlement(instance, x)
    li = instance.spl_index.get(spl_id)
    if li is None:
        raise KeyError(f"unknown spl link {spl_id!r}")
    client = instance.balances[instance.spl_client_balance_idx[li]]
    if credit_needed(instance, arr, client.id) == 0:
        return 0
    eligible = instance.spl_eligible[li]
    return int(arr.astype(np.int64)[eligible] @ instance.sec_quantity[eligible])


def compute_collateral(instance: Instance, x) -> CollateralOutcome:
    """Greedy lots pledged per link for the settlement proposal x.

    Per client balance, in declaration order: skip when no credit is needed
    or the deficit exceeds the credit limit; otherwise fill each of the
    balance's links with the largest lot count whose value fits the remaining
    limit and whose quantity fits the settled eligible inflow, accept the
    link only when the minimum pledge is met, and commit the pledges only
    when they cover the deficit.
    """
    arr = as_settlement(instance, x).astype(np.int64)
    n_balances = len(instance.balances)
    lots = np.zeros(instance.n_spls, dtype=np.int64)
    granted = np.zeros(n_balances, dtype=np.int64)
    needed = np.zeros(n_balances, dtype=np.int64)
    covered = np.ones(n_balances, dtype=bool)

    cash_net = instance.balance_initial + instance.cash_delta @ arr

    for bi in range(n_balances):
        ci = int(instance.balance_cmb_idx[bi])
        if ci < 0:
            continue
        val = int(cash_net[bi])
        need = max(0, -val)
        needed[bi] = need
        if need == 0:
            continue
        limit = int(instance.cmb_limit[ci])
        if need > limit:
            covered[bi] = False
            continue
        remaining = limit
        credit = 0
        tentative: list[tuple[int, int]] = []
        for li in instance.balance_spls.get(bi, []):
            lot_size = int(instance.spl_lot_size[li])
            unit_value = int(instance.spl_unit_value[li])
            eligible = instance.spl_eligible[li]
            cap_units = int(arr[eligible] @ instance.sec_quantity[eligible])
            max_by_quantity = cap_units // lot_size
            if unit_value > 0:
                max_by_value = remaining // (lot_size * unit_value)
            else:
                max_by_value = max_by_quantity
            lot_max = min(max_by_quantity, max_by_value)
            pledged_units = lot_max * lot_size
            if pledged_units < instance.spl_qmin[li]:
                continue
            lot_value = pledged_units * unit_value
            tentative.append((li, lot_max))
            credit += lot_value
            remaining -= lot_value
        if val + credit >= 0:
            for li, lot_max in tentative:
                lots[li] = lot_max
            granted[bi] = credit
        else:
            covered[bi] = False

    return CollateralOutcome(lots=lots, credit_granted=granted, credit_needed=needed, covered=covered)


def compute_collateral_batch(instance: Instance, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized greedy pledges for a matrix of settlement rows.

    Returns (lots, credit) with shapes (rows, links) and (rows, balances);
    agrees row-for-row with :func:`compute_collateral`.
    """
    xs = np.ascontiguousarray(xs, dtype=np.int64)
    if xs.ndim != 2 or xs.shape[1] != instance.n_transactions:
        raise ValueError("xs must be (rows, transactions)")
    rows = xs.shape[0]
    lots = np.zeros((rows, instance.n_spls), dtype=np.int64)
    granted = np.zeros((rows, len(instance.balances)), dtype=np.int64)

    cash_net = instance.balance_initial[None, :] + xs @ instance.cash_delta.T

    for bi, link_ids in instance.balance_spls.items():
        ci = int(instance.balance_cmb_idx[bi])
        if ci < 0:
            continue
        val = cash_net[:, bi]
        need = np.maximum(0, -val)
        limit = int(instance.cmb_limit[ci])
        active = (need > 0) & (need <= limit)
        if not active.any():
            continue
        remaining = np.where(active, limit, 0).astype(np.int64)
        credit = np.zeros(rows, dtype=np.int64)
        tentative = np.zeros((rows, len(link_ids)), dtype=np.int64)
        for k, li in enumerate(link_ids):
            lot_size = int(instance.spl_lot_size[li])
            unit_value = int(instance.spl_unit_value[li])
            eligible = instance.spl_eligible[li]
            cap_units = xs[:, eligible] @ instance.sec_quantity[eligible]
            max_by_quantity = cap_units // lot_size
            if unit_value > 0:
                max_by_value = remaining // (lot_size * unit_value)
                lot_max = np.minimum(max_by_quantity, max_by_value)
            else:
                lot_max = max_by_quantity
            pledged_units = lot_max * lot_size
            accept = active & (pledged_units >= instance.spl_qmin[li])
            lot_value = np.where(accept, pledged_units * unit_value, 0)
            tentative[:, k] = np.where(accept, lot_max, 0)
            credit += lot_value
            remaining -= lot_value
        commit = active & (val + credit >= 0)
        if commit.any():
            lots[np.ix_(commit, link_ids)] = tentative[commit]
            granted[commit, bi] = credit[commit]

    return lots, granted
