"""Penalty encoding of the settlement constraints.

Each constraint is brought to canonical form (violation <= 0) and fed through
a saturating logistic activation; the activations are subtracted from the
payoff so that a strictly positive score certifies that the underlying
settlement satisfies every encoded constraint.  Collateral-limit constraints
carry no activation: the greedy pledge routine enforces them by construction.

Costs are estimated from sampled outcome distributions, with the collateral
vector recomputed (or cache-recalled) per distinct bitstring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .collateral import compute_collateral, compute_collateral_batch
from .model import CENTS_PER_EURO, Instance, as_settlement, net_flows, payoff


@dataclass(frozen=True)
class ActivationParams:
    beta: float        # asymptotic penalty height
    slope: float       # logistic steepness
    threshold: float   # logistic anchor; penalty scaled between it and +inf

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.slope <= 0:
            raise ValueError("slope must be positive")


# Defaults: cash violations measured in euros, security violations in units,
# precedence violations in {0, 1}.
CASH_PARAMS = ActivationParams(beta=100.0, slope=0.025, threshold=0.0)
SECURITY_PARAMS = ActivationParams(beta=10.0, slope=0.025, threshold=0.0)
AFTER_LINK_PARAMS = ActivationParams(beta=5.0, slope=10.0, threshold=-0.5)


@dataclass(frozen=True)
class PenaltyConfig:
    lam: float = 0.5
    params_cash: ActivationParams = CASH_PARAMS
    params_security: ActivationParams = SECURITY_PARAMS
    params_afterlink: ActivationParams = AFTER_LINK_PARAMS

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lambda must lie in [0, 1]")

    @classmethod
    def from_document(cls, doc: Mapping) -> "PenaltyConfig":
        def params(key: str, default: ActivationParams) -> ActivationParams:
            if key not in doc:
                return default
            d = doc[key]
            return ActivationParams(
                beta=float(d["beta"]), slope=float(d["slope"]), threshold=float(d["threshold"])
            )

        return cls(
            lam=float(doc.get("lambda", 0.5)),
            params_cash=params("cash", CASH_PARAMS),
            params_security=params("security", SECURITY_PARAMS),
            params_afterlink=params("after_link", AFTER_LINK_PARAMS),
        )

    def to_document(self) -> dict:
        def d(p: ActivationParams) -> dict:
            return {"beta": p.beta, "slope": p.slope, "threshold": p.threshold}

        return {
            "lambda": self.lam,
            "cash": d(self.params_cash),
            "security": d(self.params_security),
            "after_link": d(self.params_afterlink),
        }


def activation(params: ActivationParams, violation) -> float | np.ndarray:
    """Saturating penalty: 0 for violation <= 0, rising toward beta.

    The logistic ramp (b(v) - b(T)) / (1 - b(T)) is evaluated as
    1 - exp(L(v) - L(T)) with L(u) = -log(1 + exp(slope*u)), which never
    exponentiates a large positive argument and never cancels; the result is
    clamped below at 0 so thresholds above the violation onset cannot
    produce negative penalties.
    """
    v = np.asarray(violation, dtype=np.float64)
    log_tail_v = -np.logaddexp(0.0, params.slope * v)
    log_tail_t = -np.logaddexp(0.0, params.slope * params.threshold)
    ramp = -np.expm1(log_tail_v - log_tail_t)
    out = np.where(v > 0, np.maximum(params.beta * ramp, 0.0), 0.0)
    if np.ndim(violation) == 0:
        return float(out)
    return out


def canonical_violations(instance: Instance, x, y) -> list[tuple[str, str, float]]:
    """Constraint slacks in canonical form (positive means violated).

    One entry per non-exempt balance (euros), per non-exempt position
    (units), and per precedence link (x_second - x_first).
    """
    arr = as_settlement(instance, x)
    cash, units = net_flows(instance, arr, y)
    entries: list[tuple[str, str, float]] = []
    for bi, balance in enumerate(instance.balances):
        if instance.balance_exempt[bi]:
            continue
        entries.append(("cash", balance.id, -cash[bi] / CENTS_PER_EURO))
    for pi, position in enumerate(instance.positions):
        if instance.position_exempt[pi]:
            continue
        entries.append(("security", position.id, float(-units[pi])))
    for link in instance.after_links:
        v = int(arr[instance.transaction_index[link.second]]) - int(
            arr[instance.transaction_index[link.first]]
        )
        entries.append(("after_link", f"{link.first}->{link.second}", float(v)))
    return entries


def unconstrained_cost(instance: Instance, x, y, config: PenaltyConfig = PenaltyConfig()) -> float:
    """Payoff minus activation penalties; equals the payoff when feasible."""
    arr = as_settlement(instance, x)
    score = payoff(instance, arr, config.lam)
    by_class = {"cash": config.params_cash, "security": config.params_security, "after_link": config.params_afterlink}
    for kind, _subject, violation in canonical_violations(instance, arr, y):
        if violation > 0:
            score -= activation(by_class[kind], violation)
    return score


def cost_with_collateral(instance: Instance, x, config: PenaltyConfig = PenaltyConfig()) -> float:
    """Cost of a settlement with its greedily pledged collateral."""
    outcome = compute_collateral(instance, x)
    return unconstrained_cost(instance, x, outcome.lots, config)


def cost_batch(instance: Instance, xs: np.ndarray, config: PenaltyConfig = PenaltyConfig()) -> np.ndarray:
    """Vectorized cost for a matrix of settlement rows (greedy collateral)."""
    xs = np.ascontiguousarray(xs, dtype=np.int64)
    lots, granted = compute_collateral_batch(instance, xs)

    wa = instance.weight * instance.cash_amount.astype(np.float64)
    cash_den = float(wa.sum())
    vol_den = float(instance.weight.sum())
    score = np.zeros(xs.shape[0], dtype=np.float64)
    if cash_den > 0:
        score += config.lam * (xs @ wa) / cash_den
    if vol_den > 0:
        score += (1.0 - config.lam) * (xs @ instance.weight) / vol_den

    pledged_units = lots * instance.spl_lot_size[None, :]
    qco = np.zeros((xs.shape[0], len(instance.positions)), dtype=np.int64)
    np.add.at(qco.T, instance.spl_position_idx, pledged_units.T)

    cash = instance.balance_initial[None, :] + granted + xs @ instance.cash_delta.T
    units = instance.position_initial[None, :] - qco + xs @ instance.sec_delta.T

    cash_violation = -cash[:, ~instance.balance_exempt] / CENTS_PER_EURO
    score -= activation(config.params_cash, cash_violation).sum(axis=1)
    sec_violation = -units[:, ~instance.position_exempt].astype(np.float64)
    score -= activation(config.params_security, sec_violation).sum(axis=1)
    if len(instance.after_first):
        link_violation = (xs[:, instance.after_second] - xs[:, instance.after_first]).astype(np.float64)
        score -= activation(config.params_afterlink, link_violation).sum(axis=1)
    return score


@dataclass
class CostCache:
    """Memoized bitstring -> cost map shared across iterations of one run.

    The number of distinct keys is the run's count of explored solutions.
    """

    instance: Instance
    config: PenaltyConfig = field(default_factory=PenaltyConfig)
    values: dict[str, float] = field(default_factory=dict)

    def costs(self, bitstrings: list[str]) -> np.ndarray:
        missing = [s for s in bitstrings if s not in self.values]
        if missing:
            xs = np.array([[int(c) for c in s] for s in missing], dtype=np.int64)
            for s, c in zip(missing, cost_batch(self.instance, xs, self.config)):
                self.values[s] = float(c)
        return np.array([self.values[s] for s in bitstrings], dtype=np.float64)

    @property
    def explored(self) -> int:
        return len(self.values)


def expected_cost(
    distribution,
    instance: Instance,
    config: PenaltyConfig = PenaltyConfig(),
    cache: CostCache | None = None,
) -> float:
    """Probability-weighted cost over a sampled outcome distribution.

    Accepts either a counts-based distribution (object with ``counts`` and
    ``shots``) or a plain bitstring -> probability mapping.  The collateral
    vector for each bitstring depends only on the bitstring, so costs may be
    served from a shared cache.
    """
    probs = _as_probabilities(distribution)
    if not probs:
        raise ValueError("empty distribution")
    total = math.fsum(probs.values())
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"distribution probabilities sum to {total}, not 1")
    n = instance.n_transactions
    for s in probs:
        if len(s) != n:
            raise ValueError(f"bitstring length {len(s)} does not match instance ({n})")
    if cache is None:
        cache = CostCache(instance, config)
    keys = list(probs.keys())
    costs = cache.costs(keys)
    weights = np.array([probs[k] for k in keys], dtype=np.float64)
    return float(weights @ costs)


def _as_probabilities(distribution) -> dict[str, float]:
    counts = getattr(distribution, "counts", None)
    shots = getattr(distribution, "shots", None)
    if counts is not None and shots is not None:
        if shots <= 0:
            raise ValueError("distribution has no shots")
        return {k: v / shots for k, v in counts.items()}
    if isinstance(distribution, Mapping):
        return {k: float(v) for k, v in distribution.items()}
    raise TypeError("distribution must be an outcome distribution or a mapping")
