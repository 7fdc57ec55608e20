"""Solver drivers, run configuration, and per-run telemetry.

Three solvers share one scoring pipeline (greedy collateral plus penalized
payoff): the sampling-based variational loop with an entangled one-block
ansatz, its entangler-free variant, and a uniform random-search baseline
drawing distinct settlements.  Every run is fully determined by its seeds and
serializes to a stable JSON document for later aggregation.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bayesopt
from .circuit import (
    NOISE_PRESETS,
    AnsatzConfig,
    MappingConfig,
    ReadoutNoise,
    bitstring_to_settlement,
    calibration_sample,
    sample,
    settlement_to_bitstring,
    solve_sigma,
)
from .collateral import compute_collateral
from .exact import payoff_ratio, solve_exact
from .mitigation import calibration_gamma, ihammer
from .model import Instance, payoff
from .penalty import CostCache, PenaltyConfig

SOLVERS = ("qtsa", "qinsp", "sampler", "exact")
RHO_MAX_TRANSACTIONS = 24


@dataclass(frozen=True)
class RunConfig:
    solver: str = "qinsp"
    iterations: int = 300
    shots: int = 10_000
    lam: float = 0.5
    sigma: float | None = None        # derived from delta when absent
    delta: int = 128
    layers: int = 1                   # entangled blocks for qtsa
    acquisition: bayesopt.AcquisitionConfig = bayesopt.AcquisitionConfig()
    noise: ReadoutNoise | None = None
    mitigation: bool = False
    seed: int = 0
    sampler_budget: int = 282_000
    initial_theta: tuple[float, ...] | None = None   # overrides the first proposal
    penalty: PenaltyConfig | None = None

    def __post_init__(self):
        if self.solver not in SOLVERS:
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.iterations < 1 or self.shots < 1:
            raise ValueError("iterations and shots must be >= 1")

    def penalty_config(self) -> PenaltyConfig:
        if self.penalty is not None:
            return self.penalty
        return PenaltyConfig(lam=self.lam)

    @classmethod
    def from_document(cls, doc: dict) -> "RunConfig":
        doc = dict(doc)
        acq = doc.pop("acquisition", {})
        acquisition = bayesopt.AcquisitionConfig(
            kind=acq.get("kind", "ucb"),
            kappa=float(acq.get("kappa", 2.576)),
            xi=float(acq.get("xi", 0.75)),
        )
        noise = resolve_noise(doc.pop("noise", None))
        penalty_doc = doc.pop("penalty", None)
        penalty = PenaltyConfig.from_document(penalty_doc) if penalty_doc else None
        lam = doc.pop("lambda", 0.5)
        initial_theta = doc.pop("initial_theta", None)
        known = {
            "solver", "iterations", "shots", "sigma", "delta", "layers",
            "mitigation", "seed", "sampler_budget",
        }
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown run-config fields: {sorted(unknown)}")
        return cls(
            solver=doc.get("solver", "qinsp"),
            iterations=int(doc.get("iterations", 300)),
            shots=int(doc.get("shots", 10_000)),
            lam=float(lam),
            sigma=None if doc.get("sigma") is None else float(doc["sigma"]),
            delta=int(doc.get("delta", 128)),
            layers=int(doc.get("layers", 1)),
            acquisition=acquisition,
            noise=noise,
            mitigation=bool(doc.get("mitigation", False)),
            seed=int(doc.get("seed", 0)),
            sampler_budget=int(doc.get("sampler_budget", 282_000)),
            initial_theta=None if initial_theta is None else tuple(float(v) for v in initial_theta),
            penalty=penalty,
        )

    def to_document(self) -> dict:
        doc = {
            "solver": self.solver,
            "iterations": self.iterations,
            "shots": self.shots,
            "lambda": self.lam,
            "sigma": self.sigma,
            "delta": self.delta,
            "layers": self.layers,
            "acquisition": {
                "kind": self.acquisition.kind,
                "kappa": self.acquisition.kappa,
                "xi": self.acquisition.xi,
            },
            "noise": None
            if self.noise is None
            else {"flip01": self.noise.flip01, "flip10": self.noise.flip10, "seed": self.noise.seed},
            "mitigation": self.mitigation,
            "seed": self.seed,
            "sampler_budget": self.sampler_budget,
        }
        if self.initial_theta is not None:
            doc["initial_theta"] = list(self.initial_theta)
        if self.penalty is not None:
            doc["penalty"] = self.penalty.to_document()
        return doc


def resolve_noise(spec) -> ReadoutNoise | None:
    """Accept None, a preset name, a ReadoutNoise, or a field dict."""
    if spec is None or isinstance(spec, ReadoutNoise):
        return spec
    if isinstance(spec, str):
        if spec not in NOISE_PRESETS:
            raise ValueError(f"unknown noise preset {spec!r}")
        return ReadoutNoise(**NOISE_PRESETS[spec])
    if isinstance(spec, dict):
        return ReadoutNoise(
            flip01=float(spec["flip01"]),
            flip10=float(spec["flip10"]),
            seed=int(spec.get("seed", 0)),
        )
    raise TypeError(f"cannot interpret noise spec {spec!r}")


@dataclass
class RunRecord:
    solver: str
    seed: int
    instance_label: str
    n_transactions: int
    config: dict
    expected_cost_trace: list[float] = field(default_factory=list)
    best_cost_trace: list[float] = field(default_factory=list)
    valid_mass_trace: list[float] = field(default_factory=list)
    best_bitstring: str = ""
    best_lots: list[int] = field(default_factory=list)
    best_cost: float = float("-inf")
    payoff: float = 0.0
    rho: float | None = None
    valid: bool = False
    explored: int = 0
    iterations_to_first_valid: int | None = None
    budget: int | None = None
    budget_clamped: bool = False
    warnings: list[str] = field(default_factory=list)

    def to_document(self) -> dict:
        return {
            "solver": self.solver,
            "seed": self.seed,
            "instance_label": self.instance_label,
            "n_transactions": self.n_transactions,
            "config": self.config,
            "trace": {
                "expected_cost": self.expected_cost_trace,
                "best_cost": self.best_cost_trace,
                "valid_mass": self.valid_mass_trace,
            },
            "result": {
                "best_bitstring": self.best_bitstring,
                "best_lots": self.best_lots,
                "best_cost": self.best_cost,
                "payoff": self.payoff,
                "rho": self.rho,
                "valid": self.valid,
                "explored": self.explored,
                "iterations_to_first_valid": self.iterations_to_first_valid,
                "budget": self.budget,
                "budget_clamped": self.budget_clamped,
            },
            "warnings": self.warnings,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_document(), sort_keys=True, separators=(",", ":")) + "\n"

    @classmethod
    def from_document(cls, doc: dict) -> "RunRecord":
        result = doc["result"]
        trace = doc["trace"]
        return cls(
            solver=doc["solver"],
            seed=doc["seed"],
            instance_label=doc["instance_label"],
            n_transactions=doc["n_transactions"],
            config=doc["config"],
            expected_cost_trace=list(trace["expected_cost"]),
            best_cost_trace=list(trace["best_cost"]),
            valid_mass_trace=list(trace["valid_mass"]),
            best_bitstring=result["best_bitstring"],
            best_lots=list(result["best_lots"]),
            best_cost=result["best_cost"],
            payoff=result["payoff"],
            rho=result["rho"],
            valid=result["valid"],
            explored=result["explored"],
            iterations_to_first_valid=result["iterations_to_first_valid"],
            budget=result.get("budget"),
            budget_clamped=result.get("budget_clamped", False),
            warnings=list(doc.get("warnings", [])),
        )


def instance_label(instance: Instance) -> str:
    return hashlib.sha256(instance.to_json().encode()).hexdigest()[:12]


def _finalize(
    record: RunRecord,
    instance: Instance,
    lam: float,
    best_bits: str | None,
    best_cost: float,
    cache: CostCache,
    compute_rho: bool,
) -> RunRecord:
    record.explored = cache.explored
    if best_bits is None:
        best_bits = "0" * instance.n_transactions
        best_cost = 0.0
    record.best_bitstring = best_bits
    record.best_cost = best_cost
    x = bitstring_to_settlement(best_bits)
    record.best_lots = [int(v) for v in compute_collateral(instance, x).lots]
    record.valid = best_cost > 0
    record.payoff = payoff(instance, x, lam) if record.valid else 0.0
    if compute_rho and instance.n_transactions <= RHO_MAX_TRANSACTIONS:
        optimum = solve_exact(instance, lam)
        if optimum.payoff_star > 0:
            record.rho = payoff_ratio(record.payoff, optimum.payoff_star)
    for i, c in enumerate(record.best_cost_trace):
        if c > 0:
            record.iterations_to_first_valid = i + 1
            break
    return record


def run_variational(
    instance: Instance,
    config: RunConfig,
    label: str | None = None,
    compute_rho: bool = True,
) -> RunRecord:
    """One optimization run of the sampling-based variational loop.

    Per iteration: map the proposed angles, sample the evaluation circuit
    (and a calibration circuit when mitigating), estimate the penalized cost
    of the sampled distribution, track the best scored settlement, and hand
    the cost back to the Bayesian optimizer.
    """
    if config.solver not in ("qtsa", "qinsp"):
        raise ValueError("run_variational drives the qtsa/qinsp solvers")
    n = instance.n_transactions
    layers = 0 if config.solver == "qinsp" else max(1, config.layers)
    ansatz = AnsatzConfig(n=n, layers=layers)
    sigma = config.sigma if config.sigma is not None else solve_sigma(n, config.shots, config.delta)
    mapping = MappingConfig(sigma=sigma)
    pconf = config.penalty_config()
    cache = CostCache(instance, pconf)
    record = RunRecord(
        solver=config.solver,
        seed=config.seed,
        instance_label=label or instance_label(instance),
        n_transactions=n,
        config=config.to_document(),
    )
    if config.mitigation and config.noise is None:
        record.warnings.append("mitigation enabled without readout noise")

    optimizer = bayesopt.BayesOptimizer(
        bounds=np.array([[0.0, np.pi]] * ansatz.n_params),
        acq=config.acquisition,
        seed=config.seed,
    )
    best_bits: str | None = None
    best_cost = float("-inf")

    for it in range(config.iterations):
        if it == 0 and config.initial_theta is not None:
            theta = np.clip(np.array(config.initial_theta, dtype=np.float64), 0.0, np.pi)
            if theta.shape[0] != ansatz.n_params:
                raise ValueError("initial_theta length does not match the ansatz")
        else:
            theta = optimizer.suggest()

        dist = sample(ansatz, theta, mapping, config.shots, noise=config.noise,
                      seed=(config.seed, 2 * it))
        if config.mitigation:
            cal = calibration_sample(ansatz, config.shots, noise=config.noise,
                                     seed=(config.seed, 2 * it + 1))
            gamma = calibration_gamma(cal)
            probs = ihammer(dist, gamma).corrected
        else:
            probs = dist.probabilities()

        keys = list(probs.keys())
        costs = cache.costs(keys)
        weights = np.array([probs[k] for k in keys])
        expected = float(weights @ costs)
        valid_mass = float(weights[costs > 0].sum())

        top = int(np.argmax(costs))
        if costs[top] > best_cost:
            best_cost = float(costs[top])
            best_bits = keys[top]

        optimizer.observe(theta, expected)
        record.expected_cost_trace.append(expected)
        record.best_cost_trace.append(best_cost)
        record.valid_mass_trace.append(valid_mass)

    return _finalize(record, instance, pconf.lam, best_bits, best_cost, cache, compute_rho)


def run_sampler(
    instance: Instance,
    budget: int,
    seed: int = 0,
    lam: float = 0.5,
    penalty: PenaltyConfig | None = None,
    label: str | None = None,
    compute_rho: bool = True,
) -> RunRecord:
    """Uniform random search over distinct settlements.

    Draws without replacement until the budget is reached (clamped to the
    full space when it exceeds 2^n) and returns the best penalized score.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    n = instance.n_transactions
    pconf = penalty if penalty is not None else PenaltyConfig(lam=lam)
    cache = CostCache(instance, pconf)
    space = 1 << n
    clamped = budget > space
    budget = min(budget, space)
    record = RunRecord(
        solver="sampler",
        seed=seed,
        instance_label=label or instance_label(instance),
        n_transactions=n,
        config={"solver": "sampler", "budget": budget, "seed": seed, "lambda": pconf.lam},
    )
    record.budget = budget
    record.budget_clamped = clamped

    rng = np.random.default_rng(seed)
    best_bits: str | None = None
    best_cost = float("-inf")

    if budget == space:
        codes_iter = _chunked_range(space, 1 << 14)
    else:
        codes_iter = _distinct_codes(rng, space, budget, 1 << 14)
    for codes in codes_iter:
        keys = [format(c, f"0{n}b") for c in codes]
        costs = cache.costs(keys)
        top = int(np.argmax(costs))
        if costs[top] > best_cost or (
            costs[top] == best_cost and best_bits is not None and keys[top] < best_bits
        ):
            best_cost = float(costs[top])
            best_bits = keys[top]

    return _finalize(record, instance, pconf.lam, best_bits, best_cost, cache, compute_rho)


def _chunked_range(space: int, chunk: int):
    for start in range(0, space, chunk):
        yield range(start, min(space, start + chunk))


def _distinct_codes(rng: np.random.Generator, space: int, budget: int, chunk: int):
    seen: set[int] = set()
    while len(seen) < budget:
        draw = rng.integers(0, space, size=min(chunk, 4 * (budget - len(seen)) + 16))
        fresh = []
        for c in draw.tolist():
            if c not in seen:
                seen.add(c)
                fresh.append(c)
                if len(seen) >= budget:
                    break
        if fresh:
            yield fresh


def run_exact(
    instance: Instance,
    lam: float = 0.5,
    budget: int | None = None,
    label: str | None = None,
) -> RunRecord:
    """Wrap the exhaustive oracle in a run record for reporting."""
    solution = solve_exact(instance, lam, budget=budget)
    record = RunRecord(
        solver="exact",
        seed=0,
        instance_label=label or instance_label(instance),
        n_transactions=instance.n_transactions,
        config={"solver": "exact", "lambda": lam, "budget": budget},
    )
    record.best_bitstring = settlement_to_bitstring(solution.x_star)
    record.best_lots = [int(v) for v in solution.y_star]
    record.payoff = solution.payoff_star
    record.best_cost = solution.payoff_star
    record.valid = True
    record.explored = solution.explored
    record.rho = 1.0 if solution.payoff_star > 0 else None
    if not solution.optimal:
        record.warnings.append("evaluation budget exhausted; payoff is a lower bound")
    return record


def run_from_config(instance: Instance, config: RunConfig, label: str | None = None) -> RunRecord:
    if config.solver in ("qtsa", "qinsp"):
        return run_variational(instance, config, label=label)
    if config.solver == "sampler":
        return run_sampler(
            instance,
            config.sampler_budget,
            seed=config.seed,
            lam=config.lam,
            penalty=config.penalty,
            label=label,
        )
    return run_exact(instance, lam=config.lam, label=label)


def save_record(record: RunRecord, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"run_{record.solver}_{record.instance_label}_{record.seed}.json"
    path.write_text(record.to_json(), encoding="utf-8")
    return path


def load_records(run_dir) -> list[RunRecord]:
    paths = sorted(Path(run_dir).glob("*.json"))
    return [RunRecord.from_document(json.loads(p.read_text(encoding="utf-8"))) for p in paths]
