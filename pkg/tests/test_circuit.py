import numpy as np
import pytest
from scipy.stats import chi2_contingency

from settleopt.circuit import (
    AnsatzConfig,
    MappingConfig,
    OutcomeDistribution,
    ReadoutNoise,
    SimulationCapacityError,
    calibration_sample,
    exact_distribution,
    exact_probabilities,
    map_params,
    nearest_neighbor_layers,
    sample,
    solve_sigma,
    statevector,
)

TABLE_SIGMAS = {20: 0.35587, 25: 0.26877, 30: 0.21609, 35: 0.18074, 40: 0.15536}


# -- parameter mapping -------------------------------------------------------


def test_mapping_fixed_points():
    cfg = MappingConfig(sigma=0.14361)
    assert map_params(np.pi / 2, cfg) == pytest.approx(np.pi / 2, abs=1e-12)
    assert map_params(0.0, cfg) == pytest.approx(0.0, abs=1e-12)
    assert map_params(np.pi, cfg) == pytest.approx(np.pi, abs=1e-12)


def test_mapping_pushes_toward_endpoints():
    cfg = MappingConfig(sigma=0.14361)
    assert map_params(0.9 * np.pi, cfg) > 0.9 * np.pi
    assert map_params(0.1 * np.pi, cfg) < 0.1 * np.pi


def test_mapping_monotone_and_in_range():
    for sigma in (0.14361, 0.35587, 1.0):
        grid = np.linspace(0, np.pi, 2001)
        mapped = map_params(grid, MappingConfig(sigma=sigma))
        assert np.all(np.diff(mapped) >= -1e-12)
        assert mapped.min() >= 0.0 and mapped.max() <= np.pi


def test_mapping_clamps_out_of_range_proposals():
    cfg = MappingConfig(sigma=0.3)
    assert map_params(-0.5, cfg) == map_params(0.0, cfg)
    assert map_params(4.0, cfg) == map_params(np.pi, cfg)


# -- map-width calibration ----------------------------------------------------


def test_solve_sigma_reproduces_published_widths():
    for n, expected in TABLE_SIGMAS.items():
        assert solve_sigma(n, 10_000, 128) == pytest.approx(expected, abs=1e-4)


def test_solve_sigma_sparse_profile():
    assert solve_sigma(20, 2000, 16) == pytest.approx(0.14361, abs=1e-4)


def test_solve_sigma_decreasing_in_n():
    widths = [solve_sigma(n, 10_000, 128) for n in (20, 25, 30, 35, 40)]
    assert all(a > b for a, b in zip(widths, widths[1:]))


def test_solve_sigma_degenerate_support():
    with pytest.raises(ValueError):
        solve_sigma(5, 1000, 64)  # 2^6 >= 2^5 possible outcomes


# -- ansatz and statevector ---------------------------------------------------


def test_entangler_pattern_covers_neighbors():
    even, odd = nearest_neighbor_layers(5)
    assert even == ((0, 1), (2, 3))
    assert odd == ((1, 2), (3, 4))


def test_param_count():
    assert AnsatzConfig(n=6, layers=0).n_params == 6
    assert AnsatzConfig(n=6, layers=1).n_params == 6
    assert AnsatzConfig(n=6, layers=3).n_params == 18


def test_statevector_single_qubit_rotation():
    cfg = AnsatzConfig(n=1, layers=0)
    amps = statevector(cfg, [np.pi / 3])
    assert amps[0] == pytest.approx(np.cos(np.pi / 6))
    assert amps[1] == pytest.approx(np.sin(np.pi / 6))


def test_statevector_cnot_entangles():
    # rotate the control by pi, target untouched: CNOT flips the target
    cfg = AnsatzConfig(n=2, layers=1)
    probs = exact_probabilities(cfg, [np.pi, 0.0])
    assert probs[0b11] == pytest.approx(1.0)


def test_statevector_capacity_error():
    cfg = AnsatzConfig(n=30, layers=2)
    with pytest.raises(SimulationCapacityError):
        statevector(cfg, np.zeros(cfg.n_params))


# -- sampling -----------------------------------------------------------------


def test_sample_identity_circuit_all_zeros():
    for layers in (0, 1, 2):
        cfg = AnsatzConfig(n=5, layers=layers)
        dist = sample(cfg, np.zeros(cfg.n_params), None, 200, seed=1)
        assert dist.counts == {"00000": 200}


def test_sample_deterministic_rotation_sets_bit():
    cfg = AnsatzConfig(n=3, layers=0)
    dist = sample(cfg, [0.0, np.pi, 0.0], None, 100, seed=2)
    assert dist.counts == {"010": 100}


def test_sample_seed_determinism():
    cfg = AnsatzConfig(n=4, layers=1)
    theta = [0.3, 2.5, 1.1, 0.9]
    a = sample(cfg, theta, MappingConfig(0.4), 500, seed=11)
    b = sample(cfg, theta, MappingConfig(0.4), 500, seed=11)
    assert a.counts == b.counts


def test_sample_matches_statevector_distribution():
    cfg = AnsatzConfig(n=4, layers=1)
    rng = np.random.default_rng(8)
    theta = rng.uniform(0, np.pi, 4)
    probs = exact_probabilities(cfg, theta)
    dist = sample(cfg, theta, None, 100_000, seed=5)
    empirical = np.zeros(16)
    for key, c in dist.counts.items():
        empirical[int(key, 2)] = c / dist.shots
    tv = 0.5 * np.abs(empirical - probs).sum()
    assert tv < 0.02


def test_fast_and_statevector_paths_agree():
    # two-sample homogeneity test on shared draws, every register size
    for n in range(2, 11):
        cfg = AnsatzConfig(n=n, layers=1)
        rng = np.random.default_rng(n)
        theta = rng.uniform(0, np.pi, n)
        fast = sample(cfg, theta, None, 4000, seed=100 + n, method="fast")
        slow = sample(cfg, theta, None, 4000, seed=200 + n, method="statevector")
        keys = sorted(set(fast.counts) | set(slow.counts))
        table = np.array(
            [[fast.counts.get(k, 0) for k in keys], [slow.counts.get(k, 0) for k in keys]]
        )
        keep = table.sum(axis=0) > 0
        _chi2, p, _dof, _exp = chi2_contingency(table[:, keep])
        assert p > 0.01, (n, p)


def test_statevector_method_rejects_deep_fast_request():
    cfg = AnsatzConfig(n=3, layers=2)
    with pytest.raises(SimulationCapacityError):
        sample(cfg, np.zeros(cfg.n_params), None, 10, method="fast")


def test_flip_counts_follow_binomial_law():
    # mapped angles drawn near zero with variance sigma: the mean Hamming
    # weight across shots tracks n * (1 - exp(-sigma/2)) / 2
    n, sigma = 20, 0.14361
    cfg = AnsatzConfig(n=n, layers=0)
    rng = np.random.default_rng(77)
    block_means = []
    for _ in range(200):
        theta = np.abs(rng.normal(0.0, np.sqrt(sigma), n))
        dist = sample(cfg, theta, None, 100, seed=rng.integers(2**31))
        weights = [key.count("1") * c for key, c in dist.counts.items()]
        block_means.append(sum(weights) / dist.shots)
    block_means = np.array(block_means)
    expected = n * (1.0 - np.exp(-sigma / 2.0)) / 2.0
    se = block_means.std(ddof=1) / np.sqrt(len(block_means))
    assert abs(block_means.mean() - expected) < 3 * se


# -- readout noise and calibration ---------------------------------------------


def test_calibration_noiseless_point_mass():
    cfg = AnsatzConfig(n=6, layers=1)
    dist = calibration_sample(cfg, 300, seed=4)
    assert dist.counts == {"000000": 300}


def test_calibration_flip_frequency():
    cfg = AnsatzConfig(n=1, layers=0)
    noise = ReadoutNoise(flip01=0.0, flip10=0.1, seed=3)
    dist = calibration_sample(cfg, 200_000, noise=noise, seed=6)
    assert dist.counts["1"] / dist.shots == pytest.approx(0.1, abs=0.005)


def test_calibration_determinism():
    cfg = AnsatzConfig(n=4, layers=1)
    noise = ReadoutNoise(flip01=0.02, flip10=0.01, seed=9)
    a = calibration_sample(cfg, 1000, noise=noise, seed=13)
    b = calibration_sample(cfg, 1000, noise=noise, seed=13)
    assert a.counts == b.counts


def test_flip01_only_affects_set_bits():
    cfg = AnsatzConfig(n=2, layers=0)
    noise = ReadoutNoise(flip01=0.25, flip10=0.0, seed=1)
    dist = sample(cfg, [np.pi, 0.0], None, 100_000, noise=noise, seed=2)
    ones = sum(c for k, c in dist.counts.items() if k[0] == "1")
    assert ones / dist.shots == pytest.approx(0.75, abs=0.01)
    assert all(k[1] == "0" for k in dist.counts)


# -- exact distribution ---------------------------------------------------------


def test_exact_distribution_matches_statevector():
    cfg = AnsatzConfig(n=6, layers=1)
    rng = np.random.default_rng(21)
    theta = np.where(rng.random(6) < 0.5, 0.0, rng.uniform(0, np.pi, 6))
    by_enum = exact_distribution(cfg, theta)
    probs = exact_probabilities(cfg, theta)
    for code in range(64):
        key = format(code, "06b")
        assert by_enum.get(key, 0.0) == pytest.approx(float(probs[code]), abs=1e-12)


def test_exact_distribution_wide_sparse_register():
    cfg = AnsatzConfig(n=40, layers=1)
    theta = np.zeros(40)
    theta[[3, 11, 29]] = np.pi / 3
    dist = exact_distribution(cfg, theta)
    assert len(dist) == 8
    assert sum(dist.values()) == pytest.approx(1.0)


def test_outcome_distribution_validation():
    with pytest.raises(ValueError):
        OutcomeDistribution(counts={"01": 3}, shots=4)
    with pytest.raises(ValueError):
        OutcomeDistribution(counts={"01": 1, "011": 1}, shots=2)
