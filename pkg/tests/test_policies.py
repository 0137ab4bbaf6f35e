"""Test flexsim scheduling policies"""
import math

import networkx as nx
import numpy as np
import pytest

from flexsim.errors import AuditError, ConfigError, DomainError, InfeasibleFlowError, SimulationError
from flexsim.experiments.study import figure_scenario, reproduce_figure, run_study
from flexsim.policies import (
    build_policy,
    cluster_choice_probabilities,
    expanded_modular_policy,
    figure_batch_size,
    find_batch_assignment,
    greedy_policy,
    make_vq_params,
    modular_greedy_policy,
    virtual_queue_policy,
)
from flexsim.policies.base import PolicySpec
from flexsim.policies.virtual_queue import Batch
from flexsim.sim.engine import Simulation, event_order_audit, run, work_conservation_audit
from flexsim.sim.model import Horizon, Job, JobSizeDist
from flexsim.sim.trace import read_trace
from flexsim.topology.builders import (
    build_complete,
    build_erdos_renyi_bipartite,
    build_expanded_modular,
    build_family,
    build_inflexible,
    build_modular,
    build_random_regular_bipartite,
)
from flexsim.topology.graph import BipartiteGraph, contiguous_partition


def _idle_sim(graph: BipartiteGraph, policy: PolicySpec) -> Simulation:
    return Simulation(
        graph, (0.0,) * graph.n_queues, policy, JobSizeDist.exponential(), Horizon.time(10.0)
    )


# ========== GREEDY ==========

def test_greedy_fetches_longest_queue_lowest_index_on_ties():
    # server 1 serves queues 2, 5 and 7 holding 3, 3 and 1 jobs
    g = BipartiteGraph.from_edges(8, 1, [(1, 0), (4, 0), (6, 0)])
    sim = _idle_sim(g, greedy_policy())
    for queue, count in ((1, 3), (4, 3), (6, 1)):
        sim.state.queues[queue].extend(Job(queue, 0.0) for _ in range(count))

    sim.policy.on_completion(sim, 0, Job(1, 0.0))
    assert sim.state.server_job[0].queue_id == 1
    assert [len(q) for q in sim.state.queues] == [0, 2, 0, 0, 3, 0, 1, 0]


def test_greedy_arrival_takes_lowest_idle_server():
    g = BipartiteGraph.from_edges(1, 4, [(0, j) for j in range(4)])
    sim = _idle_sim(g, greedy_policy())
    sim.state.server_job[0] = Job(0, 0.0)
    sim.state.server_job[2] = Job(0, 0.0)

    job = Job(0, 0.0)
    sim.policy.on_arrival(sim, job)
    assert sim.state.server_job[1] is job
    assert sim.state.server_job[3] is None
    assert job.service_start_time == 0.0


def test_greedy_arrival_waits_when_all_busy():
    g = build_complete(2)
    sim = _idle_sim(g, greedy_policy())
    sim.state.server_job[0] = Job(0, 0.0)
    sim.state.server_job[1] = Job(1, 0.0)
    sim.policy.on_arrival(sim, Job(1, 0.0))
    assert len(sim.state.queues[1]) == 1


def test_greedy_idle_server_with_empty_queues_stays_idle(k22):
    sim = _idle_sim(k22, greedy_policy())
    sim.policy.on_completion(sim, 0, Job(0, 0.0))
    assert sim.state.is_idle(0)


# ========== MODULAR ==========

def test_modular_never_serves_across_clusters():
    partition = contiguous_partition(8, 2)

    def same_cluster(sim, kind):
        for j, job in enumerate(sim.state.server_job):
            if job is not None and not job.is_dummy:
                if partition.queue_cluster[job.queue_id] != partition.server_cluster[j]:
                    raise AuditError(f"server {j + 1} serves queue {job.queue_id + 1}")

    res = run(
        build_modular(8, 2, partition),
        (0.8,) * 8,
        modular_greedy_policy(partition),
        horizon=Horizon.time(200.0),
        seed=3,
        audits=[same_cluster, work_conservation_audit],
    )
    assert res.unserved_jobs == 0


def test_modular_rejects_mismatched_graph():
    sim = _idle_sim(build_complete(4), modular_greedy_policy(contiguous_partition(4, 2)))
    with pytest.raises(SimulationError):
        sim.run()


def test_modular_needs_partition():
    with pytest.raises(ConfigError):
        PolicySpec("modular").create(build_complete(2))


# ========== VIRTUAL QUEUE PARAMETERS ==========

def test_make_vq_params():
    p = make_vq_params(10, 0.5, 10.0)
    assert p.epsilon == pytest.approx(0.25)
    assert p.slot_length == pytest.approx(0.75 * 10.0 / 10)
    assert p.batch_jobs == 5

    p = make_vq_params(1000, 0.5, 69.08, d=100)
    assert p.batch_jobs == 35
    assert p.slot_length == pytest.approx(0.75 * 69.08 / 1000)


def test_make_vq_params_domain():
    with pytest.raises(DomainError):
        make_vq_params(10, 0.5, 0.5)
    with pytest.raises(DomainError):
        make_vq_params(10, 1.0, 10.0)
    with pytest.raises(DomainError):
        make_vq_params(10, 0.5)


def test_default_batch_size_is_large():
    p = make_vq_params(64, 0.5, d=16)
    assert p.b_n == pytest.approx(320 / 0.25 * 64 * math.log(64) / p.beta_n)
    assert p.batch_jobs > 64


def test_figure_batch_size():
    assert figure_batch_size(64, 16) == pytest.approx(16.636, abs=1e-3)
    with pytest.raises(DomainError):
        figure_batch_size(1, 1)


# ========== MATCHING ==========

def test_find_batch_assignment_examples():
    g = build_complete(3)
    assignment = find_batch_assignment(g, [0, 0, 1], [0, 1, 2])
    assert sorted(assignment) == [0, 1, 2]
    assert sorted(assignment.values()) == [0, 1, 2]

    assert find_batch_assignment(build_inflexible(2), [0, 0], [0, 1]) is None
    assert find_batch_assignment(g, [0, 1], [2]) is None
    assert find_batch_assignment(g, [], []) == {}

    a = find_batch_assignment(g, [2], [1, 2])
    assert a == find_batch_assignment(g, [2], [1, 2])
    assert a[0] in (1, 2)


def _unit_flow_value(g, batch, idle):
    net = nx.DiGraph()
    net.add_nodes_from(["src", "sink"])
    for k, i in enumerate(batch):
        net.add_edge("src", ("job", k), capacity=1)
        for j in g.neighbors(i):
            if j in idle:
                net.add_edge(("job", k), ("s", j), capacity=1)
    for j in idle:
        net.add_edge(("s", j), "sink", capacity=1)
    return nx.maximum_flow_value(net, "src", "sink")


def test_find_batch_assignment_matches_unit_flow():
    rng = np.random.default_rng(11)
    for trial in range(1000):
        n = int(rng.integers(1, 13))
        g = build_erdos_renyi_bipartite(n, float(rng.uniform(0.5, n)), seed=int(rng.integers(1 << 30)))
        batch = [int(i) for i in rng.integers(0, n, int(rng.integers(0, n + 1)))]
        idle = {int(j) for j in np.flatnonzero(rng.random(n) < 0.6)}

        assignment = find_batch_assignment(g, batch, idle)
        full = _unit_flow_value(g, batch, idle) == len(batch)
        assert (assignment is not None) == full, f"trial {trial}"
        if assignment is not None:
            assert len(set(assignment.values())) == len(batch)
            for k, j in assignment.items():
                assert j in idle and g.has_edge(batch[k], j)


# ========== VIRTUAL QUEUE RUNS ==========

def test_empty_virtual_queue_issues_dummies():
    params = make_vq_params(3, 0.5, 2.0)
    assert params.batch_jobs == 1
    res = run(build_complete(3), (0, 0, 0), virtual_queue_policy(params), horizon=Horizon.slots(1, burn_in=0))
    assert res.dummy_jobs == 3
    assert res.jobs_arrived == 0


def test_virtual_queue_run_invariants():
    n, d = 16, 4
    g = build_random_regular_bipartite(n, d, seed=8)
    params = make_vq_params(n, 0.5, figure_batch_size(n, d), d)
    res = run(
        g,
        (0.5,) * n,
        virtual_queue_policy(params),
        horizon=Horizon.slots(400),
        seed=5,
        audits=[event_order_audit],
    )
    assert res.unserved_jobs == 0
    assert res.dummy_jobs > 0

    s = params.slot_length
    log = res.batch_log
    assert log
    departed = [b for b in log if b["departure_time"] is not None]
    assert departed
    for b in departed:
        assert b["departure_time"] / s == pytest.approx(round(b["departure_time"] / s), abs=1e-6)
        assert b["start_time"] >= b["formation_time"]
    # batches start and depart in formation order
    starts = [b["start_time"] for b in log if b["start_time"] is not None]
    assert starts == sorted(starts)
    departures = [b["departure_time"] for b in departed]
    assert departures == sorted(departures)
    assert [b["index"] for b in departed] == sorted(b["index"] for b in departed)

    diag = res.diagnostics
    assert diag["batch_jobs"] == params.batch_jobs
    assert diag["batch_slot_length"] == pytest.approx(s)
    assert 0.0 <= diag["batch_long_fraction"] <= 1.0


def test_virtual_queue_rejects_isolated_queue():
    g = BipartiteGraph.from_edges(2, 2, [(0, 0), (0, 1)])
    params = make_vq_params(2, 0.5, 4.0)
    with pytest.raises(ConfigError):
        run(g, (0.5, 0.0), virtual_queue_policy(params), horizon=Horizon.slots(10))


def test_augmented_virtual_queue_adds_dummy_arrivals():
    n, d = 8, 4
    rho = 0.5
    params = make_vq_params(n, (1 + rho) / 2, figure_batch_size(n, d), d)
    spec = virtual_queue_policy(params, augment=True, rho=rho)
    res = run(build_complete(n), (0.25,) * n, spec, horizon=Horizon.slots(200), seed=2)
    assert res.unserved_jobs == 0
    assert res.dummy_jobs > 0


def _next_boundary(t: float, s: float) -> float:
    """First slot boundary strictly after t."""
    return s * (math.floor(t / s + 1e-9) + 1)


def test_batch_into_empty_virtual_queue_is_matched_at_end_of_its_slot():
    n = 8
    params = make_vq_params(n, 0.5, 8.0)
    assert params.batch_jobs == 4
    assert params.slot_length == pytest.approx(0.75)
    s = params.slot_length
    res = run(build_complete(n), (0.05,) * n, virtual_queue_policy(params), horizon=Horizon.slots(2000), seed=3)
    assert res.unserved_jobs == 0

    log = [b for b in res.batch_log if b["jobs"] == params.batch_jobs and b["departure_time"] is not None]
    found_empty = 0
    for prev, b in zip([None] + log[:-1], log):
        slot_start = s * math.floor(b["formation_time"] / s)
        if prev is None or prev["departure_time"] <= slot_start + 1e-9:
            # service runs from formation; the match is tried when the arrival slot ends
            assert b["start_time"] == b["formation_time"]
            if not b["long"]:
                assert b["departure_time"] == pytest.approx(slot_start + s)
                found_empty += 1
        else:
            assert b["start_time"] == pytest.approx(prev["departure_time"])
        if not b["long"]:
            assert b["departure_time"] == pytest.approx(_next_boundary(b["start_time"], s))
    assert found_empty >= 30
    assert res.diagnostics["batch_wait_mean"] < s


def test_fallback_greedy_run(tmp_path):
    # two jobs of queue 1 can never be matched to distinct servers
    graph = build_inflexible(2)
    params = make_vq_params(2, 0.5, 4.0)
    assert params.batch_jobs == 2
    s = params.slot_length
    trace = tmp_path / "vq.trace"
    sim = Simulation(
        graph,
        (0.3, 0.0),
        virtual_queue_policy(params),
        JobSizeDist.exponential(),
        Horizon.slots(400),
        seed=4,
        trace_path=trace,
    )
    res = sim.run()
    assert res.unserved_jobs == 0

    dummy_starts = [t for t, event, fields in read_trace(trace) if event == "start" and fields[-1] == "dummy"]
    assert dummy_starts
    batches = [b for b in sim.policy.batches if len(b.jobs) == 2 and b.departure_time is not None]
    assert len(batches) > 20
    for b in batches:
        assert b.long_service
        fallback_from = _next_boundary(b.start_time, s)
        starts = [job.service_start_time for job in b.jobs]
        # lowest job position is served first
        assert starts == sorted(starts)
        assert starts[0] >= fallback_from - 1e-9
        assert b.last_assign_time == starts[-1]
        assert b.departure_time == pytest.approx(_next_boundary(b.last_assign_time, s))
        assert not [t for t in dummy_starts if fallback_from - 1e-9 <= t < b.departure_time - 1e-9]


def test_fallback_pick_takes_lowest_connected_position():
    graph = BipartiteGraph.from_edges(2, 2, [(0, 0), (1, 1)])
    sim = _idle_sim(graph, virtual_queue_policy(make_vq_params(2, 0.5, 6.0)))
    policy = sim.policy
    batch = Batch(index=0, jobs=[Job(1, 0.0), Job(0, 0.0), Job(0, 0.0)], formation_time=0.0)
    batch.unassigned = [0, 1, 2]
    assert policy._fallback_pick(batch, 0) == 1
    assert policy._fallback_pick(batch, 0) == 2
    assert policy._fallback_pick(batch, 0) is None
    assert policy._fallback_pick(batch, 1) == 0
    assert batch.unassigned == []


def test_dummy_jobs_stay_out_of_real_accounting():
    n = 8
    params = make_vq_params(n, 0.75, figure_batch_size(n, 4), 4)
    lam = (0.25,) * n
    horizon = Horizon.time(150.0)
    plain = run(build_complete(n), lam, virtual_queue_policy(params), horizon=horizon, seed=2)
    augmented = run(
        build_complete(n), lam, virtual_queue_policy(params, augment=True, rho=0.5), horizon=horizon, seed=2
    )

    assert plain.dummy_jobs > 0
    assert augmented.dummy_jobs > 0
    for res in (plain, augmented):
        assert res.unserved_jobs == 0
        assert [q.started for q in res.queue_stats] == [q.arrivals for q in res.queue_stats]
    assert augmented.jobs_arrived == plain.jobs_arrived
    assert augmented.jobs_measured == plain.jobs_measured
    assert [q.arrivals for q in augmented.queue_stats] == [q.arrivals for q in plain.queue_stats]


def test_dummy_streams_leave_greedy_waits_unchanged():
    graph = build_random_regular_bipartite(8, 2, seed=1)
    lam = (0.5,) * 8
    plain = run(graph, lam, greedy_policy(), horizon=Horizon.time(300.0), seed=9)
    toggled = run(graph, lam, PolicySpec("greedy", augment=True, rho=0.5), horizon=Horizon.time(300.0), seed=9)

    assert plain.dummy_jobs == toggled.dummy_jobs == 0
    assert toggled.jobs_measured == plain.jobs_measured > 0
    assert toggled.unserved_jobs == plain.unserved_jobs
    assert toggled.per_queue_mean_wait == plain.per_queue_mean_wait
    assert toggled.job_mean_wait == plain.job_mean_wait
    assert toggled.wait_stderr == plain.wait_stderr


def test_failed_attach_writes_no_trace(tmp_path):
    g = BipartiteGraph.from_edges(2, 2, [(0, 0), (0, 1)])
    trace = tmp_path / "never.trace"
    sim = Simulation(
        g,
        (0.5, 0.0),
        virtual_queue_policy(make_vq_params(2, 0.5, 4.0)),
        JobSizeDist.exponential(),
        Horizon.slots(10),
        trace_path=trace,
    )
    with pytest.raises(ConfigError):
        sim.run()
    assert sim.trace is None
    assert not trace.exists()


# ========== EXPANDED MODULAR ==========

def test_cluster_choice_probabilities():
    assert cluster_choice_probabilities([1, 1], 0.5) == pytest.approx([0.5, 0.5])
    assert cluster_choice_probabilities([3, 1], 0.5) == pytest.approx([0.6875, 0.3125])
    assert cluster_choice_probabilities([0, 0, 0], 0.5) == pytest.approx([1 / 3] * 3)
    assert cluster_choice_probabilities([], 0.5) == []


def test_cluster_choice_probabilities_are_distributions():
    rng = np.random.default_rng(5)
    for _ in range(1000):
        deg = int(rng.integers(1, 9))
        flows = rng.exponential(1.0, deg) * (rng.random(deg) < 0.7)
        probs = cluster_choice_probabilities(flows.tolist(), float(rng.uniform(0.01, 0.99)))
        assert all(p >= 0 for p in probs)
        assert abs(math.fsum(probs) - 1) <= 1e-12


def test_expanded_modular_infeasible_stage_one():
    partition = contiguous_partition(4, 2)
    with pytest.raises(InfeasibleFlowError) as info:
        expanded_modular_policy(build_inflexible(2), partition, (1.9, 1.9, 0, 0), 0.5)
    assert info.value.cut["subset"] == [1]
    assert info.value.exit_code == 3


def test_expanded_modular_run():
    cluster_graph = build_complete(2)
    partition = contiguous_partition(4, 2)
    graph = build_expanded_modular(cluster_graph, 2)
    lam = (0.5, 0.5, 0.5, 0.5)
    spec = expanded_modular_policy(cluster_graph, partition, lam, 0.5)
    for row in spec.cluster_probs:
        assert math.fsum(p for _, p in row) == pytest.approx(1.0)

    res = run(graph, lam, spec, horizon=Horizon.time(300.0), seed=6, audits=[event_order_audit])
    assert res.unserved_jobs == 0
    assert res.jobs_measured > 0
    assert res.diagnostics["idle_periods"] >= 0


def test_expanded_modular_idles_on_empty_clusters():
    cluster_graph = build_complete(2)
    partition = contiguous_partition(4, 2)
    graph = build_expanded_modular(cluster_graph, 2)
    spec = expanded_modular_policy(cluster_graph, partition, (0.0,) * 4, 0.5)

    first = run(graph, (0.0,) * 4, spec, horizon=Horizon.time(50.0), seed=1)
    again = run(graph, (0.0,) * 4, spec, horizon=Horizon.time(50.0), seed=1)
    # four servers re-pick after Exp(1) idle periods, about 50 each
    assert 100 < first.diagnostics["idle_periods"] < 320
    assert first.diagnostics == again.diagnostics


def test_expanded_modular_rejects_wrong_graph():
    partition = contiguous_partition(4, 2)
    spec = expanded_modular_policy(build_inflexible(2), partition, (0.2,) * 4, 0.5)
    with pytest.raises(SimulationError):
        run(build_complete(4), (0.2,) * 4, spec, horizon=Horizon.time(10.0))


# ========== FACTORY ==========

def test_build_policy_kinds():
    top = build_family("regular", 16, 4, seed=1)
    lam = (0.5,) * 16
    assert build_policy("greedy", top, lam, 0.5).kind == "greedy"
    spec = build_policy("virtual-queue", top, lam, 0.5, "figure")
    assert spec.vq.b_n == pytest.approx(figure_batch_size(16, 4))
    spec = build_policy("virtual-queue", top, lam, 0.5, "explicit", b_n=8.0)
    assert spec.vq.batch_jobs == 4
    spec = build_policy("virtual-queue", top, lam, 0.5, "explicit", b_n=8.0, augment=True)
    assert spec.augment and spec.rho == 0.5 and spec.vq.rho == 0.75

    top = build_family("modular", 8, 2)
    assert build_policy("modular", top, (0.5,) * 8, 0.5).partition == top.partition


def test_build_policy_errors():
    top = build_family("regular", 16, 4, seed=1)
    lam = (0.5,) * 16
    with pytest.raises(ConfigError):
        build_policy("round-robin", top, lam, 0.5)
    with pytest.raises(ConfigError):
        build_policy("modular", top, lam, 0.5)
    with pytest.raises(ConfigError):
        build_policy("expanded-modular", top, lam, 0.5)
    with pytest.raises(ConfigError):
        build_policy("virtual-queue", top, lam, 0.5, "explicit")
    with pytest.raises(ConfigError):
        build_policy("virtual-queue", top, lam, 0.5, "guess")


# ========== LONG RUNS ==========

@pytest.mark.slow
def test_figure_delay_falls_with_n():
    studies = reproduce_figure([64, 216, 512], replications=10, seed=0, sizes=("exponential",))
    medians = [s.median for s in studies]
    assert all(m > 0 for m in medians)
    assert medians[0] > medians[1] > medians[2]
    assert medians[2] <= 0.75 * medians[0]

    lognormal = run_study(figure_scenario(512, size_kind="lognormal"))
    assert medians[2] / 2 <= lognormal.median <= 2 * medians[2]


@pytest.mark.slow
def test_batch_gap_moments_and_kingman():
    scn = figure_scenario(216, replications=1, seed=3, slots=3500, burn_in=300)
    (res,) = run_study(scn).replicates
    diag = res.diagnostics
    count = len(res.batch_log) - 1
    assert count >= 2000

    # inter-formation gaps of a batch are a sum of batch_jobs exponential gaps at rate r
    r = 216 * 0.5
    se = math.sqrt(diag["batch_gap_var"] / count)
    assert diag["batch_gap_lower"] - 3 * se <= diag["batch_gap_mean"] <= diag["batch_gap_upper"] + 3 * se
    assert diag["batch_gap_var"] == pytest.approx(0.5 * diag["batch_b_n"] / r ** 2, rel=0.2)

    assert diag["batch_wait_mean"] <= diag["batch_kingman"] + 3 * diag["batch_wait_stderr"]
