"""Test flexsim capacity region, max-flow and rate constructions"""
import numpy as np
import pytest

from flexsim.capacity.flows import solve_max_flow
from flexsim.capacity.region import (
    FixedRates,
    RateClass,
    RateClassSampler,
    RateVector,
    SparseBernoulliRates,
    UniformRates,
    Verdict,
    adversarial_modular_rates,
    augment_rates,
    estimate_feasibility_probability,
    hall_oracle,
    is_feasible,
    modular_cluster_loads,
    parse_rates,
    rate_condition_check,
    read_rates,
    write_rates,
)
from flexsim.errors import ConfigError, DomainError, VerificationTooLargeError
from flexsim.topology.builders import build_erdos_renyi_bipartite, build_inflexible, build_modular, random_partition
from flexsim.topology.graph import BipartiteGraph, contiguous_partition


# ========== RATE TYPES ==========

def test_rate_vector_validation():
    lam = RateVector((0.5, 1.5))
    assert lam.total == 2.0
    assert lam.maximum == 1.5
    assert lam.scaled(0.5).rates == (0.25, 0.75)
    with pytest.raises(DomainError):
        RateVector((0.5, -0.1))
    with pytest.raises(DomainError):
        RateVector((float("nan"),))


def test_rate_condition_check():
    assert rate_condition_check((0.5, 0.5), RateClass(2, 1, 0.5))
    assert not rate_condition_check((1.2, 0.0), RateClass(2, 1, 0.9))
    assert not rate_condition_check((0.6, 0.6), RateClass(2, 1, 0.5))


# ========== FEASIBILITY ==========

def test_feasible_on_complete(k22):
    result = is_feasible(k22, (0.5, 0.5))
    assert result.verdict is Verdict.FEASIBLE
    assert result.max_flow == pytest.approx(1.0)
    # interior flow leaves every server strictly below capacity
    assert max(result.server_loads) < 1


@pytest.mark.parametrize("slack", [0.0, 0.2, 0.5])
def test_infeasible_modular_certificate(modular_4_2, slack):
    result = is_feasible(modular_4_2, (1.5, 1.5, 0, 0), slack=slack)
    assert result.verdict is Verdict.INFEASIBLE
    assert result.subset == (0, 1)
    assert result.subset_rate == pytest.approx(3.0)
    assert result.neighborhood_size == 2
    assert result.to_dict()["subset"] == [1, 2]


def test_feasible_path_graph(path_graph):
    assert is_feasible(path_graph, (0.5, 0.5, 0.5)).verdict is Verdict.FEASIBLE
    assert hall_oracle(path_graph, (0.5, 0.5, 0.5))


def test_boundary_verdict():
    g = build_inflexible(2)
    result = is_feasible(g, (1.0, 0.5))
    assert result.verdict is Verdict.BOUNDARY
    assert result.subset == (0,)
    assert not result.is_feasible
    assert not hall_oracle(g, (1.0, 0.5))
    assert hall_oracle(g, (0.9, 0.9))


def test_slack_tightens_capacity(k22):
    assert is_feasible(k22, (0.7, 0.7), slack=0.2).verdict is Verdict.FEASIBLE
    assert is_feasible(k22, (0.9, 0.9), slack=0.2).verdict is Verdict.INFEASIBLE
    with pytest.raises(DomainError):
        is_feasible(k22, (0.1, 0.1), slack=1.0)


def test_length_mismatch(k22):
    with pytest.raises(DomainError):
        is_feasible(k22, (0.1,))


def test_zero_rate_isolated_queue_is_fine():
    g = BipartiteGraph.from_edges(2, 1, [(0, 0)])
    assert is_feasible(g, (0.5, 0.0)).is_feasible
    assert hall_oracle(g, (0.5, 0.0))


def test_flow_respects_capacities(modular_4_2):
    sol = solve_max_flow(modular_4_2, (0.6, 0.6, 0.3, 0.3), 0.8)
    assert sol.value == pytest.approx(1.8)
    assert all(load <= 0.8 + 1e-12 for load in sol.server_loads)
    for (i, j), f in sol.edge_flows.items():
        assert modular_4_2.has_edge(i, j) and f >= 0


def test_oracle_equivalence():
    rng = np.random.default_rng(2024)
    for trial in range(200):
        n = int(rng.integers(1, 11))
        g = build_erdos_renyi_bipartite(n, float(rng.uniform(0.5, n)), seed=int(rng.integers(1 << 30)))
        lam = rng.uniform(0, 1.5, n) * (rng.random(n) < 0.8)
        verdict = is_feasible(g, lam, want_flow=False).is_feasible
        assert verdict == hall_oracle(g, lam), f"trial {trial}: n={n} lam={lam.tolist()}"


def test_feasibility_monotone():
    rng = np.random.default_rng(7)
    for _ in range(50):
        g = build_erdos_renyi_bipartite(6, 2.0, seed=int(rng.integers(1 << 30)))
        lam = rng.uniform(0, 1.2, 6)
        if is_feasible(g, lam, want_flow=False).is_feasible:
            assert is_feasible(g, lam * 0.5, want_flow=False).is_feasible
            extra = BipartiteGraph.from_neighbor_sets(6, [set(row) | {0} for row in g.queue_adj])
            assert is_feasible(extra, lam, want_flow=False).is_feasible


def test_hall_oracle_size_guard():
    with pytest.raises(VerificationTooLargeError):
        hall_oracle(build_inflexible(21), [0.5] * 21)


# ========== CONSTRUCTIONS ==========

@pytest.mark.parametrize("n,d", [(8, 2), (16, 4), (32, 8)])
def test_adversarial_rates_defeat_modular(n, d):
    lam = adversarial_modular_rates(n, d, 3, 0.5)
    assert rate_condition_check(lam, RateClass(n, 3, 0.5))
    assert is_feasible(build_modular(n, d), lam).verdict is Verdict.INFEASIBLE


def test_adversarial_rates_values():
    lam = adversarial_modular_rates(8, 2, 3, 0.5)
    assert lam.rates == (2, 2, 0, 0, 0, 0, 0, 0)
    assert modular_cluster_loads(contiguous_partition(8, 2), lam)[0] == 4

    lam = adversarial_modular_rates(8, 2, 1.5, 0.5)
    assert lam.rates[:2] == (1.25, 1.25)
    assert not is_feasible(build_modular(8, 2), lam).is_feasible

    with pytest.raises(DomainError):
        adversarial_modular_rates(8, 2, 1, 0.5)
    with pytest.raises(DomainError):
        adversarial_modular_rates(8, 3, 3, 0.5)


def test_augment_rates():
    lam, rho_prime = augment_rates((0.5, 0.5), 0.5)
    assert rho_prime == 0.75
    assert lam.rates == (0.75, 0.75)

    lam, _ = augment_rates((0.0, 0.0), 0.5)
    assert lam.rates == (0.25, 0.25)
    assert lam.total == pytest.approx((1 - 0.75) * 2)


def test_augment_rates_stays_in_class():
    rng = np.random.default_rng(3)
    sampler = RateClassSampler(u=2.0, rho=0.5)
    for _ in range(1000):
        base = sampler(8, rng)
        lam, rho_prime = augment_rates(base, 0.5)
        assert lam.maximum < 2.0 + (1 - rho_prime)
        assert (1 - rho_prime) * 8 - 1e-9 <= lam.total <= rho_prime * 8 + 1e-9


def test_modular_cluster_loads():
    p = random_partition(8, 4, seed=1)
    lam = [0.1 * (i + 1) for i in range(8)]
    loads = modular_cluster_loads(p, lam)
    assert sum(loads) == pytest.approx(sum(lam))
    for k in range(2):
        assert loads[k] == pytest.approx(sum(lam[i] for i in p.queue_members(k)))


# ========== SAMPLERS AND ESTIMATES ==========

def test_samplers():
    rng = np.random.default_rng(0)
    assert UniformRates(0.5)(3, rng).rates == (0.5, 0.5, 0.5)
    assert FixedRates((1.0, 0.0))(2, rng).rates == (1.0, 0.0)
    with pytest.raises(DomainError):
        FixedRates((1.0,))(2, rng)

    lam = RateClassSampler(u=3, rho=0.5)(10, rng)
    assert rate_condition_check(lam, RateClass(10, 3, 0.5))

    lam = SparseBernoulliRates(v=2.0, rho=0.5)(40, rng)
    assert set(lam.rates) <= {0.0, 2.0}
    assert lam.total <= 20


def test_estimate_feasibility_probability():
    assert estimate_feasibility_probability(16, 4, UniformRates(0.5), trials=20, seed=1) == 1.0
    with pytest.raises(DomainError):
        estimate_feasibility_probability(16, 4, UniformRates(0.5), trials=0)

    sampler = SparseBernoulliRates(v=3.0, rho=0.5)
    a = estimate_feasibility_probability(32, 4, sampler, trials=30, seed=5)
    b = estimate_feasibility_probability(32, 4, sampler, trials=30, seed=5)
    assert a == b
    assert 0 <= a <= 1


# ========== RATE FILES ==========

def test_rate_files(tmp_path):
    path = tmp_path / "rates.txt"
    write_rates((0.5, 0.25, 0.0), path)
    assert read_rates(path).rates == (0.5, 0.25, 0.0)
    assert parse_rates("# header\n0.5\n\n1\n").rates == (0.5, 1.0)
    with pytest.raises(ConfigError):
        parse_rates("0.5\nabc\n")
    with pytest.raises(ConfigError):
        parse_rates("-1\n")
    with pytest.raises(ConfigError):
        read_rates(tmp_path / "missing.txt")
