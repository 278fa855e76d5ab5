import hashlib
import io
import math
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from dmpa import _pykernel
from dmpa.errors import GraphFormatError, InvalidInitialGraph, RejectionLimitExceeded
from dmpa.model import ModelParams, acceptance_table
from dmpa.simulator import (
    GrowthGraph,
    SimConfig,
    Simulation,
    Trajectory,
    available_backends,
    default_initial_graph,
    export_graph,
    geometric_schedule,
    graph_from_text,
    graph_to_text,
    import_graph,
    simulate,
)

GOLDEN = Path(__file__).parent / "golden"
CASE_I = ModelParams.shared(0.35, 0.25, 0.25, 0.5, 0.5, 2.0)
BACKENDS = available_backends()


# -- initial state ------------------------------------------------------------


def test_default_seed_graph():
    sim = Simulation(SimConfig(CASE_I))
    g = sim.graph
    assert (g.n_nodes, g.n_edges) == (2, 2)
    assert sim.theta() == (0.5, 0.5) or tuple(sim.theta()) == (0.5, 0.5)


def test_empty_initial_graph_rejected():
    empty = GrowthGraph.from_edges([], np.zeros((0, 2)))
    with pytest.raises(InvalidInitialGraph):
        Simulation(SimConfig(ModelParams.shared(0.5, 0.0, 0.0, 0.5, 0.5, 1.0), initial_graph=empty))


def test_inconsistent_initial_graph_rejected():
    g = default_initial_graph()
    bad = GrowthGraph(g.colors, g.in_degree + 1, g.out_degree, g.sources, g.targets)
    with pytest.raises(InvalidInitialGraph, match="in-degrees"):
        Simulation(SimConfig(CASE_I, initial_graph=bad))


def test_config_checks():
    with pytest.raises(ValueError):
        SimConfig(CASE_I, steps=-1)
    with pytest.raises(ValueError):
        SimConfig(CASE_I, max_rejections=0)


@pytest.mark.parametrize("backend", BACKENDS)
def test_same_seed_same_edges(backend):
    a, _, _ = simulate(CASE_I, 5000, seed=99, backend=backend)
    b, _, _ = simulate(CASE_I, 5000, seed=99, backend=backend)
    assert np.array_equal(a.sources, b.sources) and np.array_equal(a.targets, b.targets)


def test_different_seeds_differ():
    a, _, _ = simulate(CASE_I, 2000, seed=1)
    b, _, _ = simulate(CASE_I, 2000, seed=2)
    assert not np.array_equal(a.targets, b.targets)


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled kernel not built")
@pytest.mark.parametrize("params", [
    CASE_I,
    ModelParams.shared(0.3, 0.2, 0.3, 0.0, 1.0, 1.0),
    ModelParams.shared(0.2, 0.1, 0.1, 0.95, 0.05, 0.3),
])
def test_backends_bitwise_identical(params):
    a, ta, sa = simulate(params, 20_000, seed=5, backend="cython")
    b, tb, sb = simulate(params, 20_000, seed=5, backend="python")
    for attr in ("colors", "in_degree", "out_degree", "sources", "targets"):
        assert np.array_equal(getattr(a, attr), getattr(b, attr))
    assert ta.to_csv() == tb.to_csv()
    assert (sa.rejections, sa.resamples) == (sb.rejections, sb.resamples)


def test_golden_digest_fixed_seed():
    g, _, _ = simulate(CASE_I, 10_000, seed=2024)
    digest = hashlib.sha256(graph_to_text(g).encode()).hexdigest()
    assert digest == (GOLDEN / "sim_T10000_seed2024.sha256").read_text().strip()


def test_result_independent_of_uniform_chunking(monkeypatch):
    ref, _, _ = simulate(CASE_I, 30_000, seed=8)
    monkeypatch.setattr(Simulation, "MIN_CHUNK", 7)
    monkeypatch.setattr(Simulation, "MAX_CHUNK", 64)
    alt, _, _ = simulate(CASE_I, 30_000, seed=8)
    assert np.array_equal(ref.targets, alt.targets) and np.array_equal(ref.sources, alt.sources)


# -- samplers -----------------------------------------------------------------


def _fixture_sim(colors, edges, delta_in, delta_out, backend=None):
    P = ModelParams.shared(0.5, 0.3, 0.3, 0.5, 0.5, delta_in, delta_out)
    return Simulation(SimConfig(P, seed=17, initial_graph=GrowthGraph.from_edges(colors, edges)),
                      backend)


def test_single_node_always_sampled():
    sim = _fixture_sim([1], [(0, 0)], 1.0, 1.0)
    assert set(sim.sample_in_batch(1000).tolist()) == {0}
    assert sim.sample_by_out_degree() == 0


@pytest.mark.parametrize("backend", BACKENDS)
def test_in_degree_sampler_chi_square(backend):
    # in-degrees (0, 1, 2) with delta_in = 1 -> weights (1, 2, 3) / 6
    sim = _fixture_sim([0, 1, 0], [(0, 1), (0, 2), (1, 2)], 1.0, 1.0, backend)
    counts = np.bincount(sim.sample_in_batch(100_000), minlength=3)
    res = stats.chisquare(counts, 100_000 * np.array([1, 2, 3]) / 6)
    assert res.pvalue > 0.001


def test_equal_degrees_sample_uniformly():
    sim = _fixture_sim([0, 1, 0, 1], [(0, 1), (1, 2), (2, 3), (3, 0)], 0.7, 0.7)
    counts = np.bincount(sim.sample_out_batch(100_000), minlength=4)
    assert stats.chisquare(counts).pvalue > 0.001


def test_pick_edge_and_node_branches():
    ends = [5, 6, 7]
    # total weight 3 edges + 8 nodes * 1.0 = 11
    assert _pykernel.pick(0.0, ends, 3, 8, 1.0) == 5
    assert _pykernel.pick(2.5 / 11, ends, 3, 8, 1.0) == 7
    assert _pykernel.pick(3.5 / 11, ends, 3, 8, 1.0) == 0
    assert _pykernel.pick(np.nextafter(1.0, 0), ends, 3, 8, 1.0) == 7


# -- stepping -----------------------------------------------------------------


def test_all_red_homophilic_never_rejects_and_mixes_events():
    P = ModelParams.shared(1.0, 0.2, 0.5, 1.0, 1.0, 1.0)
    g0 = GrowthGraph.from_edges([1, 1], [(0, 1), (1, 0)])
    sim = Simulation(SimConfig(P, seed=4, initial_graph=g0))
    sim.run(10_000, schedule=[])
    assert sim.rejections == 0 and sim.resamples == 0
    counts = np.array(sim.event_counts)
    expect = 10_000 * np.array([0.2, 0.5, 0.3])
    sd = np.sqrt(10_000 * np.array([0.2, 0.5, 0.3]) * (1 - np.array([0.2, 0.5, 0.3])))
    assert (np.abs(counts - expect) < 3 * sd).all()


@pytest.mark.parametrize("backend", BACKENDS)
def test_step_records_event_shape(backend):
    sim = Simulation(SimConfig(CASE_I, seed=3), backend)
    m0, n0 = sim.n_edges, sim.n_nodes
    for _ in range(300):
        rec = sim.step()
        g = sim.graph
        assert (rec.source, rec.target) == (int(g.sources[-1]), int(g.targets[-1]))
        if rec.event_kind == 1:
            assert rec.new_node == rec.source
        elif rec.event_kind == 2:
            assert rec.new_node == rec.target
        else:
            assert rec.new_node is None and max(rec.source, rec.target) < g.n_nodes
    assert sim.n_edges == m0 + 300
    assert sim.n_nodes == n0 + sum(sim.event_counts[:2])
    sim.graph.check_invariants()


def test_rejection_limit_path():
    # red newcomers must follow, but every existing node is blue and red only accepts red
    P = ModelParams.shared(1.0, 0.0, 1.0, 0.0, 1.0, 1.0)
    g0 = GrowthGraph.from_edges([0, 0], [(0, 1), (1, 0)])
    sim = Simulation(SimConfig(P, seed=1, initial_graph=g0, max_rejections=50))
    with pytest.raises(RejectionLimitExceeded) as exc:
        sim.step()
    assert exc.value.event == 2
    assert sim.n_edges == 2


def test_low_acceptance_loop_retries_then_succeeds():
    P = ModelParams.shared(1.0, 0.0, 0.0, 0.5, 0.05, 1.0)
    g0 = GrowthGraph.from_edges([1, 1], [(0, 1), (1, 0)])
    sim = Simulation(SimConfig(P, seed=2, initial_graph=g0, max_rejections=10**6))
    recs = [sim.step() for _ in range(50)]
    assert sum(r.rejections for r in recs) > 50 * 5
    sim.graph.check_invariants()


def test_zero_steps_leaves_graph_unchanged():
    g, traj, _ = simulate(CASE_I, 0, seed=1)
    assert graph_to_text(g) == graph_to_text(default_initial_graph())
    assert traj.times == []


def test_edges_grow_by_one_per_step_and_shares_stay_in_unit_square():
    g, traj, sim = simulate(ModelParams.shared(0.2, 0.3, 0.1, 0.9, 0.1, 0.5), 20_000, seed=6)
    assert g.n_edges == 2 + 20_000
    g.check_invariants()
    assert all(0 <= th.theta_in <= 1 and 0 <= th.theta_out <= 1 for th in traj.theta)
    assert all(a < b for a, b in zip(traj.times, traj.times[1:]))


def test_debug_mode_checks_every_step(monkeypatch):
    monkeypatch.setenv("DMPA_DEBUG", "1")
    g, _, _ = simulate(CASE_I, 500, seed=1)
    g.check_invariants()


def test_geometric_schedule():
    s = geometric_schedule(10**6)
    assert s[0] == 1 and s[-1] == 10**6 and len(s) <= 50
    assert all(a < b for a, b in zip(s, s[1:]))
    assert geometric_schedule(0) == []
    assert geometric_schedule(3) == [1, 2, 3]


def test_simulated_shares_approach_group_size():
    P = ModelParams.shared(0.35, 0.25, 0.25, 0.5, 0.5, 2.0)
    ths = [simulate(P, 200_000, seed=s)[0].theta() for s in range(4)]
    assert abs(np.mean([t.theta_in for t in ths]) - 0.35) < 0.02
    assert abs(np.mean([t.theta_out for t in ths]) - 0.35) < 0.02


def test_simulated_shares_match_general_fixed_point():
    from dmpa.analytic import exponents_both_groups
    from dmpa.model import AnalyticParams

    ap = AnalyticParams(0.3, 0.2, 0.3, 0.7, 0.8, 3.0)
    star = exponents_both_groups(ap).theta_star
    ths = [simulate(ap.to_model(), 300_000, seed=s)[0].theta() for s in range(4)]
    assert abs(np.mean([t.theta_in for t in ths]) - star.theta_in) < 0.02
    assert abs(np.mean([t.theta_out for t in ths]) - star.theta_out) < 0.02


# -- frozen-graph acceptance harness -----------------------------------------


def _kernel_for(backend):
    if backend == "cython":
        from dmpa import _ckernel
        return _ckernel
    return _pykernel


@pytest.mark.parametrize("event", [1, 2, 3])
def test_frozen_graph_acceptance_frequency(event):
    """Acceptance rate seen by the kernel on a fixed graph matches the model within 3 sigma."""
    backend = BACKENDS[0]
    kern = _kernel_for(backend)
    p, q = {1: (1.0, 0.0), 2: (0.0, 1.0), 3: (0.0, 0.0)}[event]
    P = ModelParams.shared(0.4, p, q, 0.7, 0.2, 1.5, 0.5)
    colors = [1, 0, 0, 1]
    edges = [(0, 1), (1, 2), (2, 0), (3, 1), (1, 1)]
    g = GrowthGraph.from_edges(colors, edges)
    n, m = g.n_nodes, g.n_edges
    pi_in = (g.in_degree + P.delta_in) / (m + n * P.delta_in)
    pi_out = (g.out_degree + P.delta_out) / (m + n * P.delta_out)
    acc = acceptance_table(P)
    # the newcomer's colour is fixed across retries, so attempts per step are
    # geometric with a colour-dependent rate: pooled rate = 1 / E[1 / rate_c]
    if event == 1:
        rate_c = {c: sum(pi_in[v] * acc[colors[v] * 2 + c] for v in range(n)) for c in (0, 1)}
    elif event == 2:
        rate_c = {c: sum(pi_out[u] * acc[4 + c * 2 + colors[u]] for u in range(n)) for c in (0, 1)}
    if event in (1, 2):
        expected = 1 / (P.r / rate_c[1] + (1 - P.r) / rate_c[0])
    else:
        expected = sum(pi_out[u] * pi_in[v] * acc[8 + colors[v] * 2 + colors[u]]
                       for u in range(n) for v in range(n))

    rng = np.random.default_rng(123)
    u = rng.random(4_000_000)
    to_np = backend == "cython"

    def arr(x, dtype):
        return np.array(x, dtype=dtype) if to_np else list(x)

    params = arr([P.r, P.p, P.q, P.delta_in, P.delta_out], np.float64)
    acct = arr(acc, np.float64)
    base_ctr = [n, m, g.n_red, g.d_in_red, g.d_out_red, 0, 0, 0, 0, 0]
    pos, attempts, accepted = 0, 0, 0
    while attempts < 100_000:
        color = arr(list(colors) + [0], np.int8)
        din = arr(g.in_degree.tolist() + [0], np.int64)
        dout = arr(g.out_degree.tolist() + [0], np.int64)
        esrc = arr(g.sources.tolist() + [0], np.int64)
        edst = arr(g.targets.tolist() + [0], np.int64)
        ctr = arr(base_ctr, np.int64)
        last = arr([0] * _pykernel.N_LAST, np.int64)
        status, done, pos = kern.run_steps(1, u, pos, color, din, dout, esrc, edst, ctr,
                                           params, acct, 10**6, last)
        assert status == 0 and done == 1
        accepted += 1
        attempts += 1 + int(last[_pykernel.L_STEP_REJ])
    rate = accepted / attempts
    sigma = math.sqrt(expected * (1 - expected) / attempts)
    assert abs(rate - expected) < 3 * sigma


# -- edge-list I/O ------------------------------------------------------------


def test_default_graph_golden_file():
    assert graph_to_text(default_initial_graph()) == (GOLDEN / "default_g0.edges").read_text()


def test_round_trip_large_graph(tmp_path):
    g, _, _ = simulate(CASE_I, 10_000, seed=3)
    path = tmp_path / "g.edges"
    export_graph(g, path)
    h = import_graph(path)
    assert graph_to_text(h) == graph_to_text(g)
    assert np.array_equal(h.in_degree, g.in_degree)


def test_export_to_stream():
    buf = io.StringIO()
    export_graph(default_initial_graph(), buf)
    assert buf.getvalue().startswith("# dmpa v1 nodes=2 edges=2\n")


def test_export_to_empty_path_raises_and_keeps_prior_file(tmp_path):
    g = default_initial_graph()
    with pytest.raises(OSError):
        export_graph(g, "")
    target = tmp_path / "keep.edges"
    target.write_text("previous contents")
    with pytest.raises(OSError):
        export_graph(g, tmp_path / "missing_dir" / "x.edges")
    assert target.read_text() == "previous contents"
    assert [p.name for p in tmp_path.iterdir()] == ["keep.edges"]


@pytest.mark.parametrize("text", [
    "",
    "# dmpa v1 nodes=1 edges=0\nN 1 R\n",
    "# dmpa v1 nodes=1 edges=1\nN 0 R\nE 0 3\n",
    "# dmpa v1 nodes=2 edges=0\nN 0 R\n",
    "# dmpa v1 nodes=1 edges=0\nN 0 G\n",
])
def test_malformed_edge_lists(text):
    with pytest.raises(GraphFormatError):
        graph_from_text(text)


def test_trajectory_csv_columns():
    _, traj, _ = simulate(CASE_I, 1000, seed=1)
    lines = traj.to_csv().splitlines()
    assert lines[0] == "t,theta_in,theta_out,frac_red_nodes,rejections_cum"
    assert len(lines) == len(traj.times) + 1
    assert Trajectory().to_csv() == lines[0] + "\n"
