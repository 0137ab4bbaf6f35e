"""Test flexsim topology builders, graph files and expansion"""
import math
from collections import Counter

import pytest

from flexsim.errors import ConfigError, DomainError, GraphError, VerificationTooLargeError
from flexsim.topology.builders import (
    build_complete,
    build_erdos_renyi_bipartite,
    build_expanded_modular,
    build_family,
    build_inflexible,
    build_modular,
    build_random_modular,
    build_random_regular_bipartite,
)
from flexsim.topology.expansion import (
    erdos_renyi_expansion,
    expanded_modular_params,
    expander_degree_bound,
    expansion_capacity_guarantee,
    expansion_params,
    theorem1_params,
    verify_expander,
)
from flexsim.topology.graph import (
    BipartiteGraph,
    contiguous_partition,
    format_graph,
    parse_graph,
    read_graph,
    write_graph,
)


# ========== BUILDERS ==========

def test_complete_graph():
    g = build_complete(1)
    assert list(g.edges()) == [(0, 0)]

    g = build_complete(3)
    assert g.num_edges == 9
    assert all(g.queue_degree(i) == 3 and g.server_degree(i) == 3 for i in range(3))
    assert verify_expander(build_complete(2), 0.5, 2)


def test_inflexible_graph():
    assert list(build_inflexible(2).edges()) == [(0, 0), (1, 1)]
    g = build_inflexible(4)
    assert g.avg_degree() == 1
    # |N({1,2})| = 2 < 4
    assert not verify_expander(g, 0.5, 2)


def test_modular_blocks():
    g = build_modular(4, 2, contiguous_partition(4, 2))
    assert list(g.edges()) == [(0, 0), (0, 1), (1, 0), (1, 1), (2, 2), (2, 3), (3, 2), (3, 3)]
    assert build_modular(2, 2) == build_complete(2)
    with pytest.raises(GraphError):
        build_modular(4, 3)


def test_random_modular_is_deterministic():
    g1, p1 = build_random_modular(4, 2, seed=11)
    g2, p2 = build_random_modular(4, 2, seed=11)
    assert g1 == g2 and p1 == p2
    for seed in range(5):
        g, _ = build_random_modular(4, 4, seed=seed)
        assert g == build_complete(4)


def test_random_modular_partition_is_uniform():
    # queue 1 shares its cluster with each other queue w.p. 1/7
    samples = 10_000
    partners = Counter()
    for seed in range(samples):
        _, p = build_random_modular(8, 2, seed=seed)
        k = p.queue_cluster[0]
        (other,) = [i for i in p.queue_members(k) if i != 0]
        partners[other] += 1
    sigma = math.sqrt(samples * (1 / 7) * (6 / 7))
    for j in range(1, 8):
        assert abs(partners[j] - samples / 7) < 4 * sigma


def test_random_regular_degrees():
    assert build_random_regular_bipartite(3, 3, seed=1) == build_complete(3)
    g = build_random_regular_bipartite(5, 1, seed=2)
    assert sorted(j for _, j in g.edges()) == list(range(5))

    for n, d, seed in [(6, 2, 0), (10, 3, 1), (27, 9, 2), (64, 16, 3)]:
        g = build_random_regular_bipartite(n, d, seed=seed)
        assert all(g.queue_degree(i) == d for i in range(n))
        assert all(g.server_degree(j) == d for j in range(n))
    assert build_random_regular_bipartite(20, 5, seed=9) == build_random_regular_bipartite(20, 5, seed=9)


def test_random_regular_rejects_bad_degree():
    with pytest.raises(GraphError):
        build_random_regular_bipartite(4, 5)
    with pytest.raises(GraphError):
        build_random_regular_bipartite(4, 0)


def test_erdos_renyi():
    assert build_erdos_renyi_bipartite(6, 6, seed=0) == build_complete(6)
    with pytest.raises(GraphError):
        build_erdos_renyi_bipartite(6, 0)

    n, d = 100, 10
    means = [build_erdos_renyi_bipartite(n, d, seed=s).avg_degree() for s in range(20)]
    # mean of 20 * n binomial(n, d/n) degrees
    sigma = math.sqrt(d * (1 - d / n) / (n * len(means)))
    assert abs(sum(means) / len(means) - d) < 4 * sigma


def test_expanded_modular_products():
    single = BipartiteGraph.from_edges(1, 1, [(0, 0)])
    assert build_expanded_modular(single, 2) == build_complete(2)
    assert build_expanded_modular(build_inflexible(3), 2) == build_modular(6, 2)
    assert build_expanded_modular(build_complete(2), 2) == build_complete(4)

    cg = build_random_regular_bipartite(6, 2, seed=5)
    g = build_expanded_modular(cg, 3)
    assert g.max_degree() == 3 * cg.max_degree()


def test_build_family_dispatch():
    top = build_family("expanded-modular", 12, 3, seed=4, cluster_degree=2)
    assert top.cluster_graph.n_queues == 4
    assert top.partition.cluster_size == 3
    assert top.graph.avg_degree() == 6

    top = build_family("inflexible", 5)
    assert top.partition.cluster_size == 1
    with pytest.raises(GraphError):
        build_family("regular", 5)
    with pytest.raises(GraphError):
        build_family("ring", 5, 2)


# ========== GRAPH FILES ==========

def test_graph_file_format(tmp_path, path_graph):
    text = format_graph(path_graph)
    assert text == "bipartite 3 2\n1 1\n2 1\n2 2\n3 2\n"
    assert parse_graph(text) == path_graph

    path = tmp_path / "g.txt"
    write_graph(path_graph, path)
    assert read_graph(path) == path_graph


@pytest.mark.parametrize(
    "text",
    [
        "",
        "graph 2 2\n1 1\n",
        "bipartite 2 2\n1\n",
        "bipartite 2 2\n3 1\n",
        "bipartite 2 2\n1 1\n1 1\n",
        "bipartite 2 2\na b\n",
    ],
)
def test_bad_graph_files(text):
    with pytest.raises(ConfigError):
        parse_graph(text)


def test_to_networkx(path_graph):
    nxg = path_graph.to_networkx()
    assert nxg.number_of_nodes() == 5
    assert nxg.number_of_edges() == 4
    assert nxg.has_edge(("q", 1), ("s", 0))


# ========== EXPANSION ==========

def test_verify_expander_examples(k22, modular_4_2):
    assert verify_expander(k22, 0.5, 2)
    assert not verify_expander(modular_4_2, 0.5, 2)

    assert verify_expander(build_complete(8), 0.5, 2)
    assert not verify_expander(build_modular(8, 2), 0.5, 2)
    assert not verify_expander(build_inflexible(8), 0.25, 2)


def test_verify_expander_singletons():
    isolated = BipartiteGraph.from_edges(3, 3, [(0, 0), (1, 2)])
    assert not verify_expander(isolated, 1 / 3, 1)
    assert verify_expander(build_inflexible(3), 1 / 3, 1)


def test_verify_expander_monotone():
    for seed in range(10):
        g = build_random_regular_bipartite(8, 3, seed=seed)
        for alpha in (0.25, 0.5):
            for beta in (1.5, 2.0):
                if verify_expander(g, alpha, beta):
                    assert verify_expander(g, alpha / 2, beta)
                    assert verify_expander(g, alpha, beta - 0.5)


def test_verify_expander_size_guard():
    g = build_inflexible(30)
    with pytest.raises(VerificationTooLargeError):
        verify_expander(g, 0.5, 1)
    assert verify_expander(g, 0.5, 1, max_subset_size=2)


def test_expander_degree_bound():
    assert expander_degree_bound(0.25, 2) == pytest.approx(9.3281, abs=1e-4)
    assert expander_degree_bound(0.5, 1) == pytest.approx(5.8854, abs=1e-4)
    with pytest.raises(DomainError):
        expander_degree_bound(0.5, 2)


def test_theorem1_params():
    p = theorem1_params(64, 100, 0.5)
    assert p.rho_hat == pytest.approx(0.941176, abs=1e-6)
    assert p.gamma == pytest.approx(0.970142, abs=1e-6)
    assert p.beta_n == pytest.approx(2.8583, abs=1e-3)
    assert p.alpha == pytest.approx(p.gamma / p.beta_n)
    assert p.u_cap == pytest.approx(0.25 * p.beta_n)

    near_one = theorem1_params(64, 100, 0.9999)
    assert near_one.rho_hat > 0.9999
    assert near_one.beta_n < 1e-3


def test_expansion_params_and_variants():
    p = expansion_params(100, 10, 0.5)
    assert p.gamma == pytest.approx(math.sqrt(0.5))
    assert p.beta_n == pytest.approx(0.5 * math.log(2) / (1 + math.log(2)) * 10)

    em = expanded_modular_params(100, 10, 0.5)
    assert em.u_cap == pytest.approx(0.75 * em.beta_n)

    er = erdos_renyi_expansion(100, 40, 0.5)
    assert er.beta_n == pytest.approx(0.125 * 40 / math.log(100))
    assert er.alpha * er.beta_n == pytest.approx(0.5)

    assert expansion_capacity_guarantee(p, 0.5, 1.0)
    assert not expansion_capacity_guarantee(p, 0.8, 1.0)
    assert not expansion_capacity_guarantee(p, 0.5, p.beta_n + 1)
