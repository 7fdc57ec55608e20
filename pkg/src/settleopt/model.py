"""Domain model for night-time settlement batches.

A batch couples cash balances, security positions, transactions of the three
supported kinds (DvP, FoP, PfoD), precedence links, and the collateral
topology (credit lines plus pledgeable-position links).  Monetary values are
held as exact integer cents and security quantities as exact integer units so
that feasibility is never decided by rounding; only the payoff is a float.

The :class:`Instance` is immutable after construction and pre-indexes the
cross-references every solver needs (which transactions debit or credit each
account, which transactions can trigger collateral through each link).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

KIND_DVP = "DvP"
KIND_FOP = "FoP"
KIND_PFOD = "PfoD"
TRANSACTION_KINDS = (KIND_DVP, KIND_FOP, KIND_PFOD)

CENTS_PER_EURO = 100


class InstanceError(ValueError):
    """Base error for malformed instance documents."""


class SchemaError(InstanceError):
    """Document structure violates the instance schema."""


class DanglingReferenceError(InstanceError):
    """An id field references an entity that does not exist."""


class LinkCycleError(InstanceError):
    """The after-link graph contains a directed cycle."""


@dataclass(frozen=True)
class SecurityType:
    id: str
    lot_size: int            # units per pledgeable lot
    valuation_cents: int     # cents per unit (daily valuation)


@dataclass(frozen=True)
class CashBalance:
    id: str
    owner: str
    initial_cents: int
    is_central_bank: bool = False


@dataclass(frozen=True)
class SecurityPosition:
    id: str
    owner: str
    security: str
    initial_units: int
    is_issuer: bool = False


@dataclass(frozen=True)
class CashLeg:
    amount_cents: int
    debtor_balance: str
    creditor_balance: str


@dataclass(frozen=True)
class SecurityLeg:
    quantity: int
    security: str
    debtor_position: str
    creditor_position: str


@dataclass(frozen=True)
class Transaction:
    id: str
    kind: str
    weight: float
    cash_leg: CashLeg | None = None
    security_leg: SecurityLeg | None = None

    @property
    def cash_amount_cents(self) -> int:
        return self.cash_leg.amount_cents if self.cash_leg is not None else 0


@dataclass(frozen=True)
class AfterLink:
    first: str   # must settle for `second` to settle
    second: str


@dataclass(frozen=True)
class Cmb:
    """Credit line from a central-bank balance to one client balance."""

    id: str
    client_balance: str
    provider_balance: str
    credit_limit_cents: int


@dataclass(frozen=True)
class SplLink:
    """Authorizes pledging one security position for credit through a Cmb."""

    id: str
    cmb: str
    position: str
    qmin_units: int


@dataclass(frozen=True)
class Violation:
    constraint: str          # "cash" | "security" | "after_link" | "collateral_cash" | "collateral_quantity"
    subject: str             # account / link / transaction-pair id
    magnitude: float


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    violations: tuple[Violation, ...]


class Instance:
    """A fully indexed, immutable settlement batch.

    Construction validates every cross-reference and structural invariant;
    a successfully built Instance can be evaluated without further checks.
    """

    def __init__(
        self,
        securities: Sequence[SecurityType],
        balances: Sequence[CashBalance],
        positions: Sequence[SecurityPosition],
        transactions: Sequence[Transaction],
        after_links: Sequence[AfterLink] = (),
        cmbs: Sequence[Cmb] = (),
        spls: Sequence[SplLink] = (),
    ):
        self.securities = tuple(securities)
        self.balances = tuple(balances)
        self.positions = tuple(positions)
        self.transactions = tuple(transactions)
        self.after_links = tuple(after_links)
        self.cmbs = tuple(cmbs)
        self.spls = tuple(spls)
        self._validate_and_index()

    # -- sizes ---------------------------------------------------------

    @property
    def n_transactions(self) -> int:
        return len(self.transactions)

    @property
    def n_spls(self) -> int:
        return len(self.spls)

    # -- construction --------------------------------------------------

    def _validate_and_index(self) -> None:
        self.security_index = _unique_index((s.id for s in self.securities), "security")
        self.balance_index = _unique_index((b.id for b in self.balances), "balance")
        self.position_index = _unique_index((p.id for p in self.positions), "position")
        self.transaction_index = _unique_index((t.id for t in self.transactions), "transaction")
        self.cmb_index = _unique_index((c.id for c in self.cmbs), "cmb")
        self.spl_index = _unique_index((l.id for l in self.spls), "spl")

        for s in self.securities:
            if s.lot_size < 1:
                raise SchemaError(f"security {s.id}: lot_size must be >= 1")
            if s.valuation_cents < 0:
                raise SchemaError(f"security {s.id}: valuation must be >= 0")
        for b in self.balances:
            if b.initial_cents < 0:
                raise SchemaError(f"balance {b.id}: initial must be >= 0")
        for p in self.positions:
            if p.initial_units < 0:
                raise SchemaError(f"position {p.id}: initial must be >= 0")
            if p.security not in self.security_index:
                raise DanglingReferenceError(f"position {p.id}: unknown security {p.security!r}")

        for t in self.transactions:
            self._validate_transaction(t)

        seen_pairs = set()
        for link in self.after_links:
            if link.first == link.second:
                raise SchemaError(f"after-link on a single transaction {link.first!r}")
            for tid in (link.first, link.second):
                if tid not in self.transaction_index:
                    raise DanglingReferenceError(f"after-link references unknown transaction {tid!r}")
            pair = (link.first, link.second)
            if pair in seen_pairs:
                raise SchemaError(f"duplicate after-link {pair}")
            seen_pairs.add(pair)
        self._check_after_link_acyclic()

        clients_seen: set[str] = set()
        for c in self.cmbs:
            if c.credit_limit_cents < 0:
                raise SchemaError(f"cmb {c.id}: credit_limit must be >= 0")
            if c.client_balance not in self.balance_index:
                raise DanglingReferenceError(f"cmb {c.id}: unknown client balance {c.client_balance!r}")
            if c.provider_balance not in self.balance_index:
                raise DanglingReferenceError(f"cmb {c.id}: unknown provider balance {c.provider_balance!r}")
            provider = self.balances[self.balance_index[c.provider_balance]]
            if not provider.is_central_bank:
                raise SchemaError(f"cmb {c.id}: provider {c.provider_balance!r} is not a central-bank balance")
            if c.client_balance in clients_seen:
                raise SchemaError(f"balance {c.client_balance!r} is client of more than one cmb")
            clients_seen.add(c.client_balance)

        positions_seen: set[str] = set()
        for l in self.spls:
            if l.qmin_units < 0:
                raise SchemaError(f"spl {l.id}: qmin must be >= 0")
            if l.cmb not in self.cmb_index:
                raise DanglingReferenceError(f"spl {l.id}: unknown cmb {l.cmb!r}")
            if l.position not in self.position_index:
                raise DanglingReferenceError(f"spl {l.id}: unknown position {l.position!r}")
            if l.position in positions_seen:
                raise SchemaError(f"position {l.position!r} is targeted by more than one spl link")
            positions_seen.add(l.position)

        self._build_arrays()

    def _validate_transaction(self, t: Transaction) -> None:
        if t.kind not in TRANSACTION_KINDS:
            raise SchemaError(f"transaction {t.id}: unknown kind {t.kind!r}")
        if t.weight < 0:
            raise SchemaError(f"transaction {t.id}: negative weight")
        if t.kind == KIND_DVP and (t.cash_leg is None or t.security_leg is None):
            raise SchemaError(f"transaction {t.id}: DvP requires both legs")
        if t.kind == KIND_FOP and (t.cash_leg is not None or t.security_leg is None):
            raise SchemaError(f"transaction {t.id}: FoP carries exactly a security leg")
        if t.kind == KIND_PFOD and (t.cash_leg is None or t.security_leg is not None):
            raise SchemaError(f"transaction {t.id}: PfoD carries exactly a cash leg")
        if t.cash_leg is not None:
            leg = t.cash_leg
            if leg.amount_cents < 0:
                raise SchemaError(f"transaction {t.id}: negative cash amount")
            if leg.debtor_balance == leg.creditor_balance:
                raise SchemaError(f"transaction {t.id}: cash debtor equals creditor")
            for bid in (leg.debtor_balance, leg.creditor_balance):
                if bid not in self.balance_index:
                    raise DanglingReferenceError(f"transaction {t.id}: unknown balance {bid!r}")
        if t.security_leg is not None:
            leg = t.security_leg
            if leg.quantity <= 0:
                raise SchemaError(f"transaction {t.id}: security quantity must be positive")
            if leg.debtor_position == leg.creditor_position:
                raise SchemaError(f"transaction {t.id}: security debtor equals creditor")
            if leg.security not in self.security_index:
                raise DanglingReferenceError(f"transaction {t.id}: unknown security {leg.security!r}")
            for pid in (leg.debtor_position, leg.creditor_position):
                if pid not in self.position_index:
                    raise DanglingReferenceError(f"transaction {t.id}: unknown position {pid!r}")
            dp = self.positions[self.position_index[leg.debtor_position]]
            cp = self.positions[self.position_index[leg.creditor_position]]
            if dp.security != leg.security or cp.security != leg.security:
                raise SchemaError(f"transaction {t.id}: leg security does not match position security")

    def _check_after_link_acyclic(self) -> None:
        # Kahn's algorithm over transaction ids; anything left has a cycle.
        succ: dict[str, list[str]] = {}
        indeg: dict[str, int] = {}
        for link in self.after_links:
            succ.setdefault(link.first, []).append(link.second)
            indeg[link.second] = indeg.get(link.second, 0) + 1
            indeg.setdefault(link.first, 0)
        queue = [tid for tid, d in indeg.items() if d == 0]
        removed = 0
        while queue:
            tid = queue.pop()
            removed += 1
            for nxt in succ.get(tid, ()):
                indeg[nxt] -= 1
                if indeg[nxt] == 0:
                    queue.append(nxt)
        if removed != len(indeg):
            raise LinkCycleError("after-links form a directed cycle")

    def _build_arrays(self) -> None:
        n = len(self.transactions)
        nb = len(self.balances)
        npos = len(self.positions)
        nl = len(self.spls)

        self.weight = np.array([t.weight for t in self.transactions], dtype=np.float64)
        self.cash_amount = np.array(
            [t.cash_amount_cents for t in self.transactions], dtype=np.int64
        )
        self.sec_quantity = np.array(
            [t.security_leg.quantity if t.security_leg else 0 for t in self.transactions],
            dtype=np.int64,
        )

        # Signed per-transaction flow matrices: entry [account, t] is the net
        # change of the account if t settles.
        self.cash_delta = np.zeros((nb, n), dtype=np.int64)
        self.sec_delta = np.zeros((npos, n), dtype=np.int64)
        self.tx_debiting_balance: dict[str, list[int]] = {b.id: [] for b in self.balances}
        self.tx_crediting_balance: dict[str, list[int]] = {b.id: [] for b in self.balances}
        self.tx_debiting_position: dict[str, list[int]] = {p.id: [] for p in self.positions}
        self.tx_crediting_position: dict[str, list[int]] = {p.id: [] for p in self.positions}
        for ti, t in enumerate(self.transactions):
            if t.cash_leg is not None:
                di = self.balance_index[t.cash_leg.debtor_balance]
                ci = self.balance_index[t.cash_leg.creditor_balance]
                self.cash_delta[di, ti] -= t.cash_leg.amount_cents
                self.cash_delta[ci, ti] += t.cash_leg.amount_cents
                self.tx_debiting_balance[t.cash_leg.debtor_balance].append(ti)
                self.tx_crediting_balance[t.cash_leg.creditor_balance].append(ti)
            if t.security_leg is not None:
                di = self.position_index[t.security_leg.debtor_position]
                ci = self.position_index[t.security_leg.creditor_position]
                self.sec_delta[di, ti] -= t.security_leg.quantity
                self.sec_delta[ci, ti] += t.security_leg.quantity
                self.tx_debiting_position[t.security_leg.debtor_position].append(ti)
                self.tx_crediting_position[t.security_leg.creditor_position].append(ti)

        self.balance_initial = np.array([b.initial_cents for b in self.balances], dtype=np.int64)
        self.balance_exempt = np.array([b.is_central_bank for b in self.balances], dtype=bool)
        self.position_initial = np.array([p.initial_units for p in self.positions], dtype=np.int64)
        self.position_exempt = np.array([p.is_issuer for p in self.positions], dtype=bool)

        self.after_first = np.array(
            [self.transaction_index[l.first] for l in self.after_links], dtype=np.int64
        )
        self.after_second = np.array(
            [self.transaction_index[l.second] for l in self.after_links], dtype=np.int64
        )

        # Collateral topology, in declaration order.
        self.spl_position_idx = np.zeros(nl, dtype=np.int64)
        self.spl_client_balance_idx = np.zeros(nl, dtype=np.int64)
        self.spl_lot_size = np.zeros(nl, dtype=np.int64)
        self.spl_unit_value = np.zeros(nl, dtype=np.int64)
        self.spl_qmin = np.zeros(nl, dtype=np.int64)
        self.spl_eligible: list[np.ndarray] = []
        self.balance_cmb_idx = np.full(nb, -1, dtype=np.int64)
        self.cmb_limit = np.array([c.credit_limit_cents for c in self.cmbs], dtype=np.int64)
        for ci, c in enumerate(self.cmbs):
            self.balance_cmb_idx[self.balance_index[c.client_balance]] = ci

        for li, l in enumerate(self.spls):
            cmb = self.cmbs[self.cmb_index[l.cmb]]
            pos = self.positions[self.position_index[l.position]]
            sec = self.securities[self.security_index[pos.security]]
            self.spl_position_idx[li] = self.position_index[l.position]
            self.spl_client_balance_idx[li] = self.balance_index[cmb.client_balance]
            self.spl_lot_size[li] = sec.lot_size
            self.spl_unit_value[li] = sec.valuation_cents
            self.spl_qmin[li] = l.qmin_units
            # Transactions able to trigger collateral through this link: the
            # paying balance is the credit line's client and the receiving
            # position is the pledgeable position.
            eligible = [
                ti
                for ti, t in enumerate(self.transactions)
                if t.cash_leg is not None
                and t.security_leg is not None
                and t.cash_leg.debtor_balance == cmb.client_balance
                and t.security_leg.creditor_position == l.position
            ]
            self.spl_eligible.append(np.array(eligible, dtype=np.int64))

        # Per client balance: its links, in declaration order.
        self.balance_spls: dict[int, list[int]] = {}
        for li in range(nl):
            self.balance_spls.setdefault(int(self.spl_client_balance_idx[li]), []).append(li)

    # -- convenience ---------------------------------------------------

    def transaction_ids(self) -> tuple[str, ...]:
        return tuple(t.id for t in self.transactions)

    def to_document(self) -> dict:
        """Plain-dict form matching the instance schema."""
        doc: dict = {
            "securities": [
                {"id": s.id, "lot_size": s.lot_size, "valuation": s.valuation_cents}
                for s in self.securities
            ],
            "balances": [
                {
                    "id": b.id,
                    "owner": b.owner,
                    "initial": b.initial_cents,
                    "is_central_bank": b.is_central_bank,
                }
                for b in self.balances
            ],
            "positions": [
                {
                    "id": p.id,
                    "owner": p.owner,
                    "security": p.security,
                    "initial": p.initial_units,
                    "is_issuer": p.is_issuer,
                }
                for p in self.positions
            ],
            "transactions": [_transaction_to_doc(t) for t in self.transactions],
            "after_links": [{"first": l.first, "second": l.second} for l in self.after_links],
            "cmbs": [
                {
                    "id": c.id,
                    "client_balance": c.client_balance,
                    "provider_balance": c.provider_balance,
                    "credit_limit": c.credit_limit_cents,
                }
                for c in self.cmbs
            ],
            "spls": [
                {"id": l.id, "cmb": l.cmb, "position": l.position, "qmin": l.qmin_units}
                for l in self.spls
            ],
        }
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_document(), indent=2, sort_keys=True) + "\n"


def _transaction_to_doc(t: Transaction) -> dict:
    doc: dict = {"id": t.id, "kind": t.kind, "weight": t.weight}
    if t.cash_leg is not None:
        doc["cash_leg"] = {
            "amount": t.cash_leg.amount_cents,
            "debtor_balance": t.cash_leg.debtor_balance,
            "creditor_balance": t.cash_leg.creditor_balance,
        }
    if t.security_leg is not None:
        doc["security_leg"] = {
            "quantity": t.security_leg.quantity,
            "security": t.security_leg.security,
            "debtor_position": t.security_leg.debtor_position,
            "creditor_position": t.security_leg.creditor_position,
        }
    return doc


def _unique_index(ids: Iterable[str], kind: str) -> dict[str, int]:
    index: dict[str, int] = {}
    for i, id_ in enumerate(ids):
        if not isinstance(id_, str) or not id_:
            raise SchemaError(f"{kind} id must be a non-empty string")
        if id_ in index:
            raise SchemaError(f"duplicate {kind} id {id_!r}")
        index[id_] = i
    return index


# ---------------------------------------------------------------------------
# Parsing


_TOP_LEVEL_KEYS = {
    "securities",
    "balances",
    "positions",
    "transactions",
    "after_links",
    "cmbs",
    "spls",
}


def parse_instance(text: str) -> Instance:
    """Parse and validate an instance document (strict JSON schema).

    Unknown fields anywhere in the document are rejected, as are dangling id
    references, duplicate pledge links on a position, and after-link cycles.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from exc
    return instance_from_document(doc)


def instance_from_document(doc) -> Instance:
    if not isinstance(doc, dict):
        raise SchemaError("instance document must be a JSON object")
    unknown = set(doc) - _TOP_LEVEL_KEYS
    if unknown:
        raise SchemaError(f"unknown top-level fields: {sorted(unknown)}")
    for key in ("securities", "balances", "positions", "transactions"):
        if key not in doc:
            raise SchemaError(f"missing required field {key!r}")

    securities = [
        SecurityType(
            id=_req(e, "id", str, "security"),
            lot_size=_req(e, "lot_size", int, "security"),
            valuation_cents=_req(e, "valuation", int, "security"),
        )
        for e in _array(doc, "securities", {"id", "lot_size", "valuation"})
    ]
    balances = [
        CashBalance(
            id=_req(e, "id", str, "balance"),
            owner=_req(e, "owner", str, "balance"),
            initial_cents=_req(e, "initial", int, "balance"),
            is_central_bank=_opt(e, "is_central_bank", bool, False),
        )
        for e in _array(doc, "balances", {"id", "owner", "initial", "is_central_bank"})
    ]
    positions = [
        SecurityPosition(
            id=_req(e, "id", str, "position"),
            owner=_req(e, "owner", str, "position"),
            security=_req(e, "security", str, "position"),
            initial_units=_req(e, "initial", int, "position"),
            is_issuer=_opt(e, "is_issuer", bool, False),
        )
        for e in _array(doc, "positions", {"id", "owner", "security", "initial", "is_issuer"})
    ]
    transactions = [
        _parse_transaction(e)
        for e in _array(doc, "transactions", {"id", "kind", "weight", "cash_leg", "security_leg"})
    ]
    after_links = [
        AfterLink(first=_req(e, "first", str, "after_link"), second=_req(e, "second", str, "after_link"))
        for e in _array(doc, "after_links", {"first", "second"})
    ]
    cmbs = [
        Cmb(
            id=_req(e, "id", str, "cmb"),
            client_balance=_req(e, "client_balance", str, "cmb"),
            provider_balance=_req(e, "provider_balance", str, "cmb"),
            credit_limit_cents=_req(e, "credit_limit", int, "cmb"),
        )
        for e in _array(doc, "cmbs", {"id", "client_balance", "provider_balance", "credit_limit"})
    ]
    spls = [
        SplLink(
            id=_req(e, "id", str, "spl"),
            cmb=_req(e, "cmb", str, "spl"),
            position=_req(e, "position", str, "spl"),
            qmin_units=_req(e, "qmin", int, "spl"),
        )
        for e in _array(doc, "spls", {"id", "cmb", "position", "qmin"})
    ]
    return Instance(securities, balances, positions, transactions, after_links, cmbs, spls)


def load_instance(path) -> Instance:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_instance(fh.read())


def _parse_transaction(e: dict) -> Transaction:
    tid = _req(e, "id", str, "transaction")
    kind = _req(e, "kind", str, "transaction")
    weight = e.get("weight", 1)
    if not isinstance(weight, (int, float)) or isinstance(weight, bool):
        raise SchemaError(f"transaction {tid}: weight must be a number")
    if weight < 0:
        raise SchemaError(f"transaction {tid}: negative weight")
    cash_leg = None
    if e.get("cash_leg") is not None:
        c = e["cash_leg"]
        _check_fields(c, {"amount", "debtor_balance", "creditor_balance"}, f"transaction {tid} cash_leg")
        cash_leg = CashLeg(
            amount_cents=_req(c, "amount", int, "cash_leg"),
            debtor_balance=_req(c, "debtor_balance", str, "cash_leg"),
            creditor_balance=_req(c, "creditor_balance", str, "cash_leg"),
        )
    security_leg = None
    if e.get("security_leg") is not None:
        s = e["security_leg"]
        _check_fields(
            s, {"quantity", "security", "debtor_position", "creditor_position"}, f"transaction {tid} security_leg"
        )
        security_leg = SecurityLeg(
            quantity=_req(s, "quantity", int, "security_leg"),
            security=_req(s, "security", str, "security_leg"),
            debtor_position=_req(s, "debtor_position", str, "security_leg"),
            creditor_position=_req(s, "creditor_position", str, "security_leg"),
        )
    return Transaction(id=tid, kind=kind, weight=float(weight), cash_leg=cash_leg, security_leg=security_leg)


def _array(doc: dict, key: str, allowed: set[str]) -> list[dict]:
    value = doc.get(key, [])
    if not isinstance(value, list):
        raise SchemaError(f"{key} must be an array")
    for e in value:
        _check_fields(e, allowed, key)
    return value


def _check_fields(e, allowed: set[str], where: str) -> None:
    if not isinstance(e, dict):
        raise SchemaError(f"{where}: entries must be objects")
    unknown = set(e) - allowed
    if unknown:
        raise SchemaError(f"{where}: unknown fields {sorted(unknown)}")


def _req(e: dict, key: str, typ, where: str):
    if key not in e:
        raise SchemaError(f"{where}: missing field {key!r}")
    value = e[key]
    if typ is int and (not isinstance(value, int) or isinstance(value, bool)):
        raise SchemaError(f"{where}: field {key!r} must be an integer")
    if typ is str and not isinstance(value, str):
        raise SchemaError(f"{where}: field {key!r} must be a string")
    if typ is bool and not isinstance(value, bool):
        raise SchemaError(f"{where}: field {key!r} must be a boolean")
    return value


def _opt(e: dict, key: str, typ, default):
    if key not in e:
        return default
    return _req(e, key, typ, "entry")


# ---------------------------------------------------------------------------
# Evaluation


def as_settlement(instance: Instance, x) -> np.ndarray:
    """Normalize a settlement vector to int8 and check its length."""
    arr = np.asarray(x, dtype=np.int8)
    if arr.ndim != 1 or arr.shape[0] != instance.n_transactions:
        raise ValueError(
            f"settlement length {arr.shape} does not match instance ({instance.n_transactions} transactions)"
        )
    if not np.all((arr == 0) | (arr == 1)):
        raise ValueError("settlement entries must be 0 or 1")
    return arr


def as_collateral(instance: Instance, y) -> np.ndarray:
    arr = np.asarray(y, dtype=np.int64)
    if arr.ndim != 1 or arr.shape[0] != instance.n_spls:
        raise ValueError(
            f"collateral length {arr.shape} does not match instance ({instance.n_spls} links)"
        )
    if np.any(arr < 0):
        raise ValueError("collateral lot counts must be non-negative")
    return arr


def payoff(instance: Instance, x, lam: float = 0.5) -> float:
    """Weighted settled-cash / settled-volume score in [0, 1].

    A term with a zero denominator (no cash in the batch, or zero total
    weight) contributes 0, so security-only batches still score on volume.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    arr = as_settlement(instance, x)
    wa = instance.weight * instance.cash_amount.astype(np.float64)
    cash_den = float(wa.sum())
    vol_den = float(instance.weight.sum())
    cash_term = float(wa @ arr) / cash_den if cash_den > 0 else 0.0
    vol_term = float(instance.weight @ arr) / vol_den if vol_den > 0 else 0.0
    return lam * cash_term + (1.0 - lam) * vol_term


def collateral_quantities(instance: Instance, y) -> tuple[np.ndarray, np.ndarray]:
    """Units pledged per position and credit granted per balance (cents)."""
    arr = as_collateral(instance, y)
    pledged_units = arr * instance.spl_lot_size            # per link
    qco_position = np.zeros(len(instance.positions), dtype=np.int64)
    aco_balance = np.zeros(len(instance.balances), dtype=np.int64)
    np.add.at(qco_position, instance.spl_position_idx, pledged_units)
    np.add.at(aco_balance, instance.spl_client_balance_idx, pledged_units * instance.spl_unit_value)
    return qco_position, aco_balance


def net_flows(instance: Instance, x, y) -> tuple[np.ndarray, np.ndarray]:
    """Final cash per balance (cents) and final units per position.

    Cash includes credit granted through collateral; positions are reduced by
    the units they pledge.
    """
    arr = as_settlement(instance, x)
    qco, aco = collateral_quantities(instance, y)
    cash = instance.balance_initial + aco + instance.cash_delta @ arr.astype(np.int64)
    units = instance.position_initial - qco + instance.sec_delta @ arr.astype(np.int64)
    return cash, units


def check_feasibility(instance: Instance, x, y, strict_collateral: bool = False) -> FeasibilityReport:
    """Audit a settlement / collateral pair against every batch constraint.

    Checks account non-negativity (central banks and issuers exempt) and
    precedence links always; collateral limit checks are opt-in because the
    greedy pledge routine satisfies them by construction, while hand-built
    pairs may not.
    """
    arr = as_settlement(instance, x)
    yarr = as_collateral(instance, y)
    cash, units = net_flows(instance, arr, yarr)
    violations: list[Violation] = []

    for bi in np.nonzero((cash < 0) & ~instance.balance_exempt)[0]:
        violations.append(
            Violation("cash", instance.balances[bi].id, -cash[bi] / CENTS_PER_EURO)
        )
    for pi in np.nonzero((units < 0) & ~instance.position_exempt)[0]:
        violations.append(
            Violation("security", instance.positions[pi].id, float(-units[pi]))
        )
    if len(instance.after_first):
        broken = np.nonzero(arr[instance.after_second] > arr[instance.after_first])[0]
        for k in broken:
            link = instance.after_links[k]
            violations.append(Violation("after_link", f"{link.first}->{link.second}", 1.0))

    if strict_collateral:
        violations.extend(_collateral_violations(instance, arr, yarr))

    return FeasibilityReport(feasible=not violations, violations=tuple(violations))


def _collateral_violations(instance: Instance, arr: np.ndarray, yarr: np.ndarray) -> list[Violation]:
    violations: list[Violation] = []
    qco, aco = collateral_quantities(instance, yarr)
    xi = arr.astype(np.int64)
    pledged_units = yarr * instance.spl_lot_size

    for ci, cmb in enumerate(instance.cmbs):
        bi = instance.balance_index[cmb.client_balance]
        balance_links = instance.balance_spls.get(bi, [])
        if not any(pledged_units[li] for li in balance_links):
            continue
        outflow = -int(instance.cash_delta[bi] @ xi)
        need = max(0, outflow - int(instance.balance_initial[bi]))
        granted = int(aco[bi])
        if granted < need:
            violations.append(
                Violation("collateral_cash", cmb.client_balance, (need - granted) / CENTS_PER_EURO)
            )
        if granted > cmb.credit_limit_cents:
            violations.append(
                Violation(
                    "collateral_cash",
                    cmb.client_balance,
                    (granted - cmb.credit_limit_cents) / CENTS_PER_EURO,
                )
            )

    for li, link in enumerate(instance.spls):
        q = int(pledged_units[li])
        if q == 0:
            continue
        bi = int(instance.spl_client_balance_idx[li])
        outflow = -int(instance.cash_delta[bi] @ xi)
        need = max(0, outflow - int(instance.balance_initial[bi]))
        cap = int(xi[instance.spl_eligible[li]] @ instance.sec_quantity[instance.spl_eligible[li]]) if need > 0 else 0
        if q < instance.spl_qmin[li]:
            violations.append(Violation("collateral_quantity", link.id, float(instance.spl_qmin[li] - q)))
        if q > cap:
            violations.append(Violation("collateral_quantity", link.id, float(q - cap)))
    return violations
