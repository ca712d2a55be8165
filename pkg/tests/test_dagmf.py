import numpy as np
import pytest

from pseudoflow.energy import total_variation
from pseudoflow.fields import pointwise_norm
from pseudoflow.graph import DagModel, IshikawaModel, PottsModel, buffer_budget, path_weight
from pseudoflow.solvers import SolverConfig, dagmf, ishikawa, potts


def chain():
    return DagModel(edges=[("S", "A", 1.0), ("A", "B", 1.0)], data={"B": [1.0, 0.0]},
                    smoothness={"A": 1.0, "B": 1.0}, dims=(2,))


def diamond():
    return DagModel(edges=[("S", "A", 0.5), ("S", "B", 0.5), ("A", "C", 0.5),
                           ("B", "C", 0.5)],
                    data={"C": 0.0}, smoothness={"A": 1.0, "B": 1.0}, dims=(2,))


def hmf(rng, dims=(6, 6), s_super=0.3):
    """Two-level tree: S -> {T, U}; T -> {A, B}; U -> {C}."""
    return DagModel(
        edges=[("S", "T", 1.0), ("S", "U", 1.0), ("T", "A", 1.0), ("T", "B", 1.0),
               ("U", "C", 1.0)],
        data={x: rng.uniform(0, 1, dims) for x in "ABC"},
        smoothness={"T": s_super, "U": s_super, "A": 0.1, "B": 0.1, "C": 0.1},
        dims=dims, kind="hmf")


def random_dag(rng, dims=(5, 5)):
    edges = [("S", "M", 1.0), ("S", "N", 1.0), ("M", "A", 0.6), ("M", "B", 0.4),
             ("N", "B", 0.5), ("N", "C", 0.5)]
    return DagModel(edges=edges, data={x: rng.uniform(0, 1, dims) for x in "ABC"},
                    smoothness={n: rng.uniform(0, 0.4, dims) for n in "MNABC"}, dims=dims)


def test_accumulate_chain():
    m = chain()
    s = dagmf.init(m, SolverConfig())
    r = s.plan.row
    s.q[r["A"], 0] = [0.1, 0.0]
    s.q[r["B"], 0] = [0.2, 0.0]
    dagmf.accumulate_excess_topdown(s, m)
    assert s.d[r["A"], 0] == pytest.approx(0.1)
    assert s.d[r["B"], 0] == pytest.approx(1.3)


def test_accumulate_diamond_sums_weighted_parents():
    m = diamond()
    s = dagmf.init(m, SolverConfig())
    r = s.plan.row
    s.q[r["A"], 0] = [1.0, 0.0]
    s.q[r["B"], 0] = [1.0, 0.0]
    dagmf.accumulate_excess_topdown(s, m)
    assert s.d[r["C"], 0] == pytest.approx(0.5 * 1.0 + 0.5 * 1.0)


def test_accumulate_with_zero_flows_is_data_term():
    m = random_dag(np.random.default_rng(0))
    s = dagmf.init(m, SolverConfig())
    dagmf.accumulate_excess_topdown(s, m)
    for n in m.end_labels:
        np.testing.assert_array_equal(s.d[s.plan.row[n]], m.data[n])
    for n in m.intermediates:
        assert not s.d[s.plan.row[n]].any()


def test_update_labels_hand_values():
    c = 0.25
    m = DagModel(edges=[("S", "A", 1.0), ("S", "B", 1.0)],
                 data={"A": 0.0, "B": c * np.log(2)}, smoothness={}, dims=(1,))
    s = dagmf.init(m, SolverConfig(c=c))
    dagmf.accumulate_excess_topdown(s, m)
    dagmf.update_labels(s, m, SolverConfig(c=c))
    np.testing.assert_allclose(s.u[:, 0], [2 / 3, 1 / 3], rtol=1e-14)
    # unnormalized masses are left in the d rows
    np.testing.assert_allclose(s.d[:, 0], [0.5, 0.25], rtol=1e-14)


def test_update_labels_large_c_is_near_identity():
    m = random_dag(np.random.default_rng(1))
    cfg = SolverConfig(c=1e8)
    s = dagmf.init(m, cfg)
    before = s.u.copy()
    dagmf.accumulate_excess_topdown(s, m)
    dagmf.update_labels(s, m, cfg)
    np.testing.assert_allclose(s.u, before, atol=1e-8)


def test_bottom_up_mass_is_path_weighted_sum():
    rng = np.random.default_rng(2)
    m = random_dag(rng)
    cfg = SolverConfig()
    s = dagmf.init(m, cfg)
    for _ in range(3):
        dagmf.iterate(s, m, cfg)
    dagmf.accumulate_excess_topdown(s, m)
    dagmf.update_labels(s, m, cfg)
    masses = {n: s.d[s.plan.row[n]].copy() for n in m.end_labels}
    dagmf.propagate_mass_and_update_flows(s, m, cfg)
    for n in m.nodes:
        if n == m.source:
            continue
        expect = sum(path_weight(m, n, b) * masses[b] for b in m.end_labels)
        np.testing.assert_allclose(s.d[s.plan.row[n]], expect, atol=1e-10)


def test_zero_mass_leaves_flows():
    m = random_dag(np.random.default_rng(3))
    s = dagmf.init(m, SolverConfig())
    for n, r in s.plan.row.items():
        s.q[r] = 0.5 * m.smoothness[n] / np.sqrt(2)
    before = s.q.copy()
    s.d[:] = 0.0
    dagmf.propagate_mass_and_update_flows(s, m, SolverConfig())
    np.testing.assert_array_equal(s.q, before)
    assert s.flow_change == 0.0


@pytest.mark.parametrize("seed", range(3))
def test_star_matches_potts_bit_for_bit(seed):
    rng = np.random.default_rng(seed)
    pm = PottsModel(rng.uniform(0, 1, (4, 6, 5)), rng.uniform(0, 0.5, (4, 6, 5)))
    dm = pm.as_dag()
    cfg = SolverConfig()
    ps, ds = potts.init(pm, cfg), dagmf.init(dm, cfg)
    assert ds.plan.ends == tuple(pm.names)
    for _ in range(50):
        potts.iterate(ps, pm, cfg)
        dagmf.iterate(ds, dm, cfg)
        assert ps.u.tobytes() == ds.u.tobytes()
        assert ps.q.tobytes() == ds.q.tobytes()


@pytest.mark.parametrize("n", [1, 2, 4])
def test_chain_matches_ishikawa(n):
    rng = np.random.default_rng(10 + n)
    im = IshikawaModel(rng.uniform(0, 1, (n + 1, 5, 5)), rng.uniform(0, 0.4, (n, 5, 5)))
    dm = im.as_dag()
    cfg = SolverConfig()
    i_s, ds = ishikawa.init(im, cfg), dagmf.init(dm, cfg)
    order = [ds.plan.ends.index(x) for x in im.names]
    for _ in range(60):
        ishikawa.iterate(i_s, im, cfg)
        dagmf.iterate(ds, dm, cfg)
    np.testing.assert_allclose(ds.u[order], i_s.u, atol=1e-12)


def test_strong_super_object_smoothness_regularizes_union():
    rng = np.random.default_rng(4)
    free = hmf(rng, s_super=0.0)
    tied = DagModel(edges=free.edges, data=free.data,
                    smoothness={**free.smoothness, "T": 5.0, "U": 5.0},
                    dims=free.dims, kind="hmf")
    cfg = SolverConfig(max_iters=800)
    lf, _ = dagmf.run(free, cfg)
    lt, _ = dagmf.run(tied, cfg)
    one = np.ones(free.dims)
    assert total_variation(lt["T"], one) <= total_variation(lf["T"], one) + 1e-9


def test_tree_source_label_is_one():
    m = hmf(np.random.default_rng(5))
    labels, _ = dagmf.run(m, SolverConfig(max_iters=100))
    np.testing.assert_allclose(labels["S"], 1.0, atol=1e-12)


def test_reconstructed_labels_satisfy_constraints():
    m = random_dag(np.random.default_rng(5))
    labels, report = dagmf.run(m, SolverConfig(max_iters=200))
    for node in m.nodes:
        if m.children[node]:
            expect = sum(w * labels[c] for c, w in m.children[node])
            np.testing.assert_allclose(labels[node], expect, atol=1e-12)
    ends = dagmf.end_label_stack(m, labels)
    assert np.all(ends >= 0)
    assert report.iterations == 200 or report.converged


def test_feasibility_each_iteration():
    m = hmf(np.random.default_rng(6))
    cfg = SolverConfig()
    s = dagmf.init(m, cfg)
    for _ in range(80):
        dagmf.iterate(s, m, cfg)
        assert np.all(s.u >= 0)
        assert np.abs(s.u.sum(axis=0) - 1).max() <= 1e-6
        for n, r in s.plan.row.items():
            assert np.all(pointwise_norm(s.q[r]) <= m.smoothness[n] + 1e-12)


def test_buffer_count_matches_budget():
    for dims in ((5, 5), (3, 3, 3)):
        m = hmf(np.random.default_rng(7), dims=dims)
        s = dagmf.init(m, SolverConfig())
        dagmf.iterate(s, m, SolverConfig())
        assert s.buffer_count() == buffer_budget(m).pseudo


def test_invalid_model_rejected_before_solving():
    m = DagModel(edges=[("S", "A", 1.0), ("A", "S", 1.0)], data={}, smoothness={}, dims=(2,))
    with pytest.raises(ValueError):
        dagmf.init(m, SolverConfig())


def test_threads_do_not_change_result():
    m = hmf(np.random.default_rng(8))
    cfg = SolverConfig(max_iters=100)
    l1, r1 = dagmf.run(m, cfg)
    l2, r2 = dagmf.run(m, cfg.replace(workers=3))
    for n in l1:
        assert l1[n].tobytes() == l2[n].tobytes()
    assert r1.as_dict() == r2.as_dict()
