"""Exhaustive search over settlements with sound pruning.

The search maximizes the payoff over all settlement vectors whose greedily
collateralized form satisfies every constraint.  Payoffs are compared through
exact integer keys (a common-denominator scaling of the two payoff terms), so
pruning and tie-breaking never depend on float rounding: among equal-payoff
optima the lexicographically smallest settlement wins.

Depth-first branching follows descending weighted cash amount with an
optimistic bound (payoff is monotone in each settled flag); precedence links
prune partial assignments via transitive ancestor/descendant bitmasks; the
last few undecided levels are evaluated as one vectorized block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .collateral import compute_collateral, compute_collateral_batch
from .model import Instance, as_settlement, check_feasibility, payoff

_INT64_SAFE = 1 << 62


@dataclass(frozen=True)
class ExactSolution:
    x_star: np.ndarray
    y_star: np.ndarray
    payoff_star: float
    explored: int
    optimal: bool      # False when an evaluation budget stopped the search


def payoff_ratio(candidate_payoff: float, optimal_payoff: float) -> float:
    """Candidate payoff relative to the exact optimum, clamped to [0, 1]."""
    if optimal_payoff <= 0:
        raise ValueError("optimal payoff must be positive")
    return min(1.0, max(0.0, candidate_payoff / optimal_payoff))


def integer_payoff_contributions(instance: Instance, lam: float) -> tuple[list[int], int]:
    """Per-transaction payoff contributions as exact integers over a common
    denominator: payoff(x) == sum(c_t * x_t) / scale."""
    lam_f = Fraction(lam)
    weights = [Fraction(t.weight) for t in instance.transactions]
    amounts = [t.cash_amount_cents for t in instance.transactions]
    d1 = sum((w * a for w, a in zip(weights, amounts)), Fraction(0))
    d2 = sum(weights, Fraction(0))
    contribs = []
    for w, a in zip(weights, amounts):
        c = Fraction(0)
        if d1 > 0:
            c += lam_f * w * a / d1
        if d2 > 0:
            c += (1 - lam_f) * w / d2
        contribs.append(c)
    scale = 1
    for c in contribs:
        scale = math.lcm(scale, c.denominator)
    return [int(c * scale) for c in contribs], scale


def feasibility_batch(instance: Instance, xs: np.ndarray) -> np.ndarray:
    """Feasibility mask for a matrix of settlement rows (greedy collateral)."""
    xs = np.ascontiguousarray(xs, dtype=np.int64)
    lots, granted = compute_collateral_batch(instance, xs)
    pledged_units = lots * instance.spl_lot_size[None, :]
    qco = np.zeros((xs.shape[0], len(instance.positions)), dtype=np.int64)
    np.add.at(qco.T, instance.spl_position_idx, pledged_units.T)
    cash = instance.balance_initial[None, :] + granted + xs @ instance.cash_delta.T
    units = instance.position_initial[None, :] - qco + xs @ instance.sec_delta.T
    ok = np.all(cash[:, ~instance.balance_exempt] >= 0, axis=1)
    ok &= np.all(units[:, ~instance.position_exempt] >= 0, axis=1)
    if len(instance.after_first):
        ok &= np.all(xs[:, instance.after_second] <= xs[:, instance.after_first], axis=1)
    return ok


def _link_masks(instance: Instance) -> tuple[list[int], list[int]]:
    n = instance.n_transactions
    direct_anc = [0] * n   # bit set: transactions that must settle if t settles
    direct_desc = [0] * n
    for f, s in zip(instance.after_first, instance.after_second):
        direct_anc[s] |= 1 << int(f)
        direct_desc[f] |= 1 << int(s)

    def closure(direct: list[int]) -> list[int]:
        closed = list(direct)
        changed = True
        while changed:
            changed = False
            for t in range(n):
                mask = closed[t]
                acc = mask
                m = mask
                while m:
                    low = m & -m
                    acc |= closed[low.bit_length() - 1]
                    m ^= low
                if acc != closed[t]:
                    closed[t] = acc
                    changed = True
        return closed

    return closure(direct_anc), closure(direct_desc)


class _BudgetExhausted(Exception):
    pass


def solve_exact(
    instance: Instance,
    lam: float = 0.5,
    budget: int | None = None,
    chunk: int = 11,
) -> ExactSolution:
    """Optimal settlement under greedy collateral, by pruned enumeration.

    Requires a budget for more than 30 transactions; a budget caps the number
    of evaluated settlements and marks the result as a lower bound when hit.
    The all-zeros settlement (always feasible) is the fallback optimum.
    """
    n = instance.n_transactions
    if n > 30 and budget is None:
        raise ValueError("more than 30 transactions requires an evaluation budget")
    contribs, scale = integer_payoff_contributions(instance, lam)
    order = sorted(
        range(n),
        key=lambda t: (instance.weight[t] * instance.cash_amount[t], instance.weight[t]),
        reverse=True,
    )
    suffix = [0] * (n + 1)
    for i in range(n - 1, -1, -1):
        suffix[i] = suffix[i + 1] + contribs[order[i]]
    anc, desc = _link_masks(instance)
    int64_ok = suffix[0] < _INT64_SAFE
    contribs_arr = np.array(contribs, dtype=np.int64) if int64_ok else None

    if budget is not None and budget < 1:
        raise ValueError("budget must be at least 1")
    best_x = np.zeros(n, dtype=np.int8)
    best_key = 0
    state = {"explored": 0, "budget": budget, "optimal": True}

    enum_cache: dict[int, np.ndarray] = {}

    def bits_matrix(k: int) -> np.ndarray:
        if k not in enum_cache:
            codes = np.arange(1 << k, dtype=np.int64)
            enum_cache[k] = (codes[:, None] >> np.arange(k - 1, -1, -1)[None, :]) & 1
        return enum_cache[k]

    def consume(count: int) -> int:
        # Returns how many of `count` evaluations the budget still allows.
        if state["budget"] is None:
            state["explored"] += count
            return count
        allowed = min(count, state["budget"])
        state["budget"] -= allowed
        state["explored"] += allowed
        if allowed < count:
            state["optimal"] = False
        return allowed

    def maybe_update(key: int, x: np.ndarray) -> None:
        nonlocal best_key, best_x
        if key > best_key or (key == best_key and tuple(x) < tuple(best_x)):
            best_key = key
            best_x = x.copy()

    def eval_chunk(i: int, decided_ones: list[int], cur_key: int) -> None:
        undecided = order[i:]
        k = len(undecided)
        rows = consume(1 << k)
        if rows == 0:
            raise _BudgetExhausted
        m = bits_matrix(k)[:rows]
        xs = np.zeros((rows, n), dtype=np.int64)
        if decided_ones:
            xs[:, decided_ones] = 1
        xs[:, undecided] = m
        feasible = feasibility_batch(instance, xs)
        if not feasible.any():
            if rows < (1 << k):
                raise _BudgetExhausted
            return
        keys = cur_key + m @ contribs_arr[undecided]
        candidates = np.nonzero(feasible & (keys >= best_key))[0]
        for r in candidates:
            maybe_update(int(keys[r]), xs[r].astype(np.int8))
        if rows < (1 << k):
            raise _BudgetExhausted

    def eval_leaf(decided_ones: list[int], cur_key: int) -> None:
        if consume(1) == 0:
            raise _BudgetExhausted
        x = np.zeros(n, dtype=np.int8)
        x[decided_ones] = 1
        if feasibility_batch(instance, x[None, :])[0]:
            maybe_update(cur_key, x)

    def rec(i: int, ones_mask: int, zeros_mask: int, decided_ones: list[int], cur_key: int) -> None:
        if cur_key + suffix[i] < best_key:
            return
        if i == n:
            eval_leaf(decided_ones, cur_key)
            return
        if int64_ok and n - i <= chunk:
            eval_chunk(i, decided_ones, cur_key)
            return
        t = order[i]
        if anc[t] & zeros_mask == 0:
            decided_ones.append(t)
            rec(i + 1, ones_mask | (1 << t), zeros_mask, decided_ones, cur_key + contribs[t])
            decided_ones.pop()
        if desc[t] & ones_mask == 0:
            rec(i + 1, ones_mask, zeros_mask | (1 << t), decided_ones, cur_key)

    try:
        rec(0, 0, 0, [], 0)
    except _BudgetExhausted:
        state["optimal"] = False

    y_star = compute_collateral(instance, best_x).lots
    return ExactSolution(
        x_star=best_x,
        y_star=y_star,
        payoff_star=payoff(instance, best_x, lam),
        explored=state["explored"],
        optimal=state["optimal"],
    )


def solve_exact_joint(instance: Instance, lam: float = 0.5, lot_cap: int = 12) -> ExactSolution:
    """Audit-mode optimum with the collateral vector as a free variable.

    Enumerates settlements jointly with all collateral vectors (capped lots
    per link) under the full constraint set including pledge limits; exposes
    how much, if anything, the greedy pledge heuristic gives up.  Intended
    for tiny instances (few transactions, at most 3 links).
    """
    n = instance.n_transactions
    if n > 14:
        raise ValueError("joint enumeration is limited to 14 transactions")
    if instance.n_spls > 3:
        raise ValueError("joint enumeration is limited to 3 pledge links")
    contribs, _scale = integer_payoff_contributions(instance, lam)

    caps = []
    for li in range(instance.n_spls):
        eligible = instance.spl_eligible[li]
        total = int(instance.sec_quantity[eligible].sum())
        caps.append(min(lot_cap, total // int(instance.spl_lot_size[li])))

    best_key = 0
    best_x = np.zeros(n, dtype=np.int8)
    best_y = np.zeros(instance.n_spls, dtype=np.int64)
    explored = 0
    y_space = [np.array(y, dtype=np.int64) for y in _grid(caps)]
    for code in range(1 << n):
        x = np.array([(code >> (n - 1 - j)) & 1 for j in range(n)], dtype=np.int8)
        key = sum(c for c, b in zip(contribs, x) if b)
        for y in y_space:
            explored += 1
            if check_feasibility(instance, x, y, strict_collateral=True).feasible:
                if key > best_key or (key == best_key and tuple(x) < tuple(best_x)):
                    best_key = key
                    best_x = x.copy()
                    best_y = y.copy()
                break  # any feasible collateral makes x settleable; payoff ignores y
    return ExactSolution(
        x_star=best_x,
        y_star=best_y,
        payoff_star=payoff(instance, best_x, lam),
        explored=explored,
        optimal=True,
    )


def _grid(caps: list[int]):
    if not caps:
        yield ()
        return
    for head in range(caps[0] + 1):
        for tail in _grid(caps[1:]):
            yield (head, *tail)
