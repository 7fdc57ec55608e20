"""Sampling simulator for the rotation-plus-CNOT ansatz.

The circuit family is a block of per-qubit Ry rotations followed by two
nearest-neighbor CNOT layers, repeated ``layers`` times (zero repetitions
keeps a single rotation layer with no entanglers).  Because a single rotation
block produces a product state and CNOT layers permute basis states, the
one-block family admits an exact fast sampling path: draw each bit from its
rotation probability and push it through the CNOT network as xor updates.
Deeper circuits fall back to a dense statevector (real amplitudes suffice
for this gate set).

The module also provides the angle-sharpening map that drives sampled
distributions toward sparse support, and the calibration that picks the map's
width from a target support size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize, stats
from scipy.special import ndtr

STATEVECTOR_MAX_QUBITS = 26


class SimulationCapacityError(RuntimeError):
    """The requested circuit exceeds what the chosen path can simulate."""


def nearest_neighbor_layers(n: int) -> tuple[tuple[tuple[int, int], ...], ...]:
    """Default entangler pattern: even pairs then odd pairs."""
    even = tuple((i, i + 1) for i in range(0, n - 1, 2))
    odd = tuple((i, i + 1) for i in range(1, n - 1, 2))
    return (even, odd)


@dataclass(frozen=True)
class AnsatzConfig:
    n: int
    layers: int = 1            # rotation-block repetitions; 0 = single bare rotation layer
    entanglers: tuple[tuple[tuple[int, int], ...], ...] | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("need at least one qubit")
        if self.layers < 0:
            raise ValueError("layers must be >= 0")
        if self.entanglers is None:
            pattern = nearest_neighbor_layers(self.n) if self.layers > 0 else ()
            object.__setattr__(self, "entanglers", pattern)
        for layer in self.entanglers:
            for c, t in layer:
                if not (0 <= c < self.n and 0 <= t < self.n) or c == t:
                    raise ValueError(f"bad entangler pair ({c}, {t})")

    @property
    def rotation_layers(self) -> int:
        return max(self.layers, 1)

    @property
    def n_params(self) -> int:
        return self.n * self.rotation_layers


@dataclass(frozen=True)
class MappingConfig:
    sigma: float

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")


@dataclass(frozen=True)
class ReadoutNoise:
    flip01: float      # probability of reading a 1 as 0
    flip10: float      # probability of reading a 0 as 1
    seed: int = 0

    def __post_init__(self):
        for p in (self.flip01, self.flip10):
            if not 0.0 <= p < 1.0:
                raise ValueError("flip probabilities must lie in [0, 1)")


# Presets standing in for two hardware generations; the second is strictly
# less noisy than the first.
NOISE_PRESETS = {
    "eagle-like": {"flip01": 0.02, "flip10": 0.008},
    "heron-like": {"flip01": 0.008, "flip10": 0.003},
}


@dataclass(frozen=True)
class OutcomeDistribution:
    """Counts per measured bitstring; character i is qubit/transaction i."""

    counts: dict[str, int]
    shots: int

    def __post_init__(self):
        if self.shots < 0 or sum(self.counts.values()) != self.shots:
            raise ValueError("counts must sum to shots")
        lengths = {len(k) for k in self.counts}
        if len(lengths) > 1:
            raise ValueError("bitstrings must share one length")

    @property
    def n(self) -> int:
        return len(next(iter(self.counts))) if self.counts else 0

    def probabilities(self) -> dict[str, float]:
        return {k: v / self.shots for k, v in self.counts.items()}


# ---------------------------------------------------------------------------
# Parameter mapping


def map_params(theta, config: MappingConfig):
    """Push rotation angles toward the nearest of {0, pi}.

    The map is the normalized mixture of two Gaussian CDFs centered at the
    endpoints, evaluated at theta + pi/2 and shifted back; pi/2 is its fixed
    point and it is monotone on [0, pi].
    """
    th = np.clip(np.asarray(theta, dtype=np.float64), 0.0, np.pi)
    s = config.sigma
    num = (ndtr((th + np.pi / 2) / s) - 0.5) + (ndtr((th - np.pi / 2) / s) - ndtr(-np.pi / s))
    den = (2.0 / np.pi) * (ndtr(np.pi / s) - 0.5)
    out = num / den - np.pi / 2
    return np.clip(out, 0.0, np.pi)


def solve_sigma(n: int, shots: int, delta: int) -> float:
    """Map width for which at most ceil(log2(delta)) of n bits flip, except
    in one shot out of `shots`, under the per-bit flip law (1 - e^(-s/2))/2."""
    if n < 1 or shots < 2 or delta < 1:
        raise ValueError("need n >= 1, shots >= 2, delta >= 1")
    k = int(np.ceil(np.log2(delta))) if delta > 1 else 0
    if k >= n:
        raise ValueError("delta admits every bitstring; no finite width")
    target = 1.0 - 1.0 / shots

    def gap(sigma: float) -> float:
        p = (1.0 - np.exp(-sigma / 2.0)) / 2.0
        return stats.binom.cdf(k, n, p) - target

    hi = 1.0
    while gap(hi) > 0:
        hi *= 2.0
        if hi > 1e6:
            raise ValueError("no width matches the requested support")
    return float(optimize.brentq(gap, 0.0, hi, xtol=1e-8))


# ---------------------------------------------------------------------------
# Sampling


def _check_params(config: AnsatzConfig, theta: np.ndarray) -> np.ndarray:
    th = np.asarray(theta, dtype=np.float64).reshape(-1)
    if th.shape[0] != config.n_params:
        raise ValueError(f"expected {config.n_params} parameters, got {th.shape[0]}")
    return th


def _fast_path_ok(config: AnsatzConfig) -> bool:
    return config.rotation_layers == 1


def statevector(config: AnsatzConfig, theta) -> np.ndarray:
    """Dense real statevector of the circuit; index bit i is qubit i."""
    if config.n > STATEVECTOR_MAX_QUBITS:
        raise SimulationCapacityError(
            f"statevector path is capped at {STATEVECTOR_MAX_QUBITS} qubits"
        )
    th = _check_params(config, theta)
    state = np.zeros(1 << config.n, dtype=np.float64)
    state[0] = 1.0
    state = state.reshape((2,) * config.n)
    for block in range(config.rotation_layers):
        for q in range(config.n):
            angle = th[block * config.n + q]
            c, s = np.cos(angle / 2.0), np.sin(angle / 2.0)
            moved = np.moveaxis(state, q, 0)
            a0 = moved[0].copy()
            moved[0] = c * a0 - s * moved[1]
            moved[1] = s * a0 + c * moved[1]
        for layer in config.entanglers:
            for ctrl, targ in layer:
                moved = np.moveaxis(state, (ctrl, targ), (0, 1))
                swap = moved[1, 0].copy()
                moved[1, 0] = moved[1, 1]
                moved[1, 1] = swap
    return state.reshape(-1)


def exact_probabilities(config: AnsatzConfig, theta, mapping: MappingConfig | None = None) -> np.ndarray:
    th = _check_params(config, theta)
    if mapping is not None:
        th = map_params(th, mapping)
    amps = statevector(config, th)
    return amps * amps


def _apply_entanglers(config: AnsatzConfig, bits: np.ndarray) -> np.ndarray:
    for layer in config.entanglers:
        for ctrl, targ in layer:
            bits[:, targ] ^= bits[:, ctrl]
    return bits


def exact_distribution(
    config: AnsatzConfig,
    theta,
    mapping: MappingConfig | None = None,
    max_uncertain: int = 20,
) -> dict[str, float]:
    """Exact outcome probabilities as a bitstring map.

    Single-block circuits enumerate only the qubits whose rotation is not a
    multiple of pi (the rest are deterministic), which scales to wide
    registers with sparse excitation; deeper circuits use the statevector.
    """
    th = _check_params(config, theta)
    if mapping is not None:
        th = map_params(th, mapping)
    if _fast_path_ok(config):
        p_one = np.sin(th / 2.0) ** 2
        fixed = np.where(p_one >= 1.0, 1, 0).astype(np.uint8)
        uncertain = np.nonzero((p_one > 0.0) & (p_one < 1.0))[0]
        k = len(uncertain)
        if k > max_uncertain:
            raise SimulationCapacityError(
                f"{k} uncertain qubits exceed the enumeration cap ({max_uncertain})"
            )
        codes = np.arange(1 << k, dtype=np.int64)
        combos = ((codes[:, None] >> np.arange(k - 1, -1, -1)[None, :]) & 1).astype(np.uint8)
        bits = np.tile(fixed, (1 << k, 1))
        bits[:, uncertain] = combos
        p = p_one[uncertain]
        weights = np.prod(np.where(combos == 1, p[None, :], 1.0 - p[None, :]), axis=1)
        bits = _apply_entanglers(config, bits)
        out: dict[str, float] = {}
        for row, w in zip(bits, weights):
            key = "".join("1" if b else "0" for b in row)
            out[key] = out.get(key, 0.0) + float(w)
        return out
    probs = exact_probabilities(config, th)
    shifts = np.arange(config.n - 1, -1, -1, dtype=np.int64)
    nz = np.nonzero(probs > 0)[0]
    out = {}
    for code in nz:
        bits_row = (int(code) >> shifts) & 1
        key = "".join("1" if b else "0" for b in bits_row)
        out[key] = float(probs[code])
    return out


def _apply_readout_noise(bits: np.ndarray, noise: ReadoutNoise, rng: np.random.Generator) -> np.ndarray:
    u = rng.random(bits.shape)
    flip = np.where(bits == 1, u < noise.flip01, u < noise.flip10)
    return bits ^ flip.astype(np.uint8)


def _counts_from_bits(bits: np.ndarray) -> dict[str, int]:
    # np.unique on packed rows keeps key order deterministic (lexicographic).
    packed = np.ascontiguousarray(bits).view(
        np.dtype((np.void, bits.shape[1] * bits.dtype.itemsize))
    )
    uniq, counts = np.unique(packed, return_counts=True)
    out: dict[str, int] = {}
    for row, c in zip(uniq, counts):
        key = "".join("1" if b else "0" for b in np.frombuffer(row.tobytes(), dtype=np.uint8))
        out[key] = int(c)
    return out


def sample(
    config: AnsatzConfig,
    theta,
    mapping: MappingConfig | None,
    shots: int,
    noise: ReadoutNoise | None = None,
    seed=0,
    method: str = "auto",
) -> OutcomeDistribution:
    """Measure the circuit `shots` times; deterministic for a fixed seed.

    Single-block circuits sample per-qubit bits and push them through the
    CNOT network; deeper circuits sample from the statevector ("auto", the
    default, picks between them; both can be forced).  Readout noise flips
    each measured bit independently per shot.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if method not in ("auto", "fast", "statevector"):
        raise ValueError(f"unknown sampling method {method!r}")
    th = _check_params(config, theta)
    if mapping is not None:
        th = map_params(th, mapping)
    rng = np.random.default_rng(seed)
    use_fast = _fast_path_ok(config) if method == "auto" else method == "fast"
    if use_fast:
        if not _fast_path_ok(config):
            raise SimulationCapacityError("fast path requires a single rotation block")
        p_one = np.sin(th / 2.0) ** 2
        bits = (rng.random((shots, config.n)) < p_one[None, :]).astype(np.uint8)
        bits = _apply_entanglers(config, bits)
    else:
        probs = exact_probabilities(config, th)
        codes = rng.choice(probs.shape[0], size=shots, p=probs / probs.sum())
        shifts = np.arange(config.n - 1, -1, -1, dtype=np.int64)
        bits = ((codes[:, None] >> shifts[None, :]) & 1).astype(np.uint8)
    if noise is not None:
        noise_rng = np.random.default_rng((noise.seed, seed))
        bits = _apply_readout_noise(bits, noise, noise_rng)
    return OutcomeDistribution(counts=_counts_from_bits(bits), shots=shots)


def calibration_sample(
    config: AnsatzConfig,
    shots: int,
    noise: ReadoutNoise | None = None,
    seed: int = 0,
) -> OutcomeDistribution:
    """Sample the same circuit with all rotation angles at zero."""
    theta = np.zeros(config.n_params)
    return sample(config, theta, None, shots, noise=noise, seed=seed)


def bitstring_to_settlement(bitstring: str) -> np.ndarray:
    return np.array([int(c) for c in bitstring], dtype=np.int8)


def settlement_to_bitstring(x) -> str:
    return "".join("1" if int(b) else "0" for b in np.asarray(x).reshape(-1))
