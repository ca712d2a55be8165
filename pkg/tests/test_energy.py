import itertools

import numpy as np
import pytest

from pseudoflow.energy import (
    brute_force_discrete,
    compare_runs,
    dag_energy,
    ishikawa_energy,
    one_hot,
    potts_energy,
    reconstruct_labels,
)
from pseudoflow.graph import DagModel, IshikawaModel, PottsModel


def random_simplex(rng, k, dims):
    u = rng.random((k,) + dims)
    return u / u.sum(axis=0)


def test_constant_labeling_zero_data_has_zero_energy():
    m = PottsModel(np.zeros((3, 4, 4)), 1.0)
    assert potts_energy(m, one_hot(np.ones((4, 4), int), 3)) == 0.0


def test_two_voxel_boundary_counts_once_per_label():
    s = 0.7
    m = PottsModel(np.zeros((2, 2)), s)
    u = one_hot(np.array([0, 1]), 2)
    assert potts_energy(m, u) == pytest.approx(2 * s, abs=1e-15)


def test_argmin_with_zero_smoothness():
    rng = np.random.default_rng(0)
    D = rng.normal(size=(4, 3, 5))
    m = PottsModel(D, 0.0)
    u = one_hot(D.argmin(axis=0), 4)
    assert potts_energy(m, u) == pytest.approx(D.min(axis=0).sum(), rel=1e-14)


def test_infeasible_labeling_rejected():
    m = PottsModel(np.zeros((2, 2, 2)))
    with pytest.raises(ValueError, match="simplex"):
        potts_energy(m, np.full((2, 2, 2), 0.6))
    with pytest.raises(ValueError, match="negative"):
        potts_energy(m, np.stack([np.full((2, 2), 1.5), np.full((2, 2), -0.5)]))


def test_star_dag_energy_equals_potts():
    rng = np.random.default_rng(1)
    for _ in range(20):
        D = rng.normal(size=(3, 4, 3))
        m = PottsModel(D, rng.uniform(0, 1, size=(3, 4, 3)))
        u = random_simplex(rng, 3, (4, 3))
        assert dag_energy(m.as_dag(), u) == pytest.approx(potts_energy(m, u), abs=1e-12)


def test_chain_dag_energy_equals_ishikawa():
    rng = np.random.default_rng(2)
    for n in (1, 2, 4):
        m = IshikawaModel(rng.normal(size=(n + 1, 3, 3)), rng.uniform(0, 1, (n, 3, 3)))
        u = random_simplex(rng, n + 1, (3, 3))
        assert dag_energy(m.as_dag(), u) == pytest.approx(ishikawa_energy(m, u), abs=1e-12)


def test_ishikawa_energy_hand_case():
    # 1D, labels [0, 2, 1]: cumulative level 1 = [0,1,1], level 2 = [0,1,0]
    m = IshikawaModel(np.zeros((3, 3)), [0.5, 2.0])
    u = one_hot(np.array([0, 2, 1]), 3)
    assert ishikawa_energy(m, u) == pytest.approx(0.5 * 1 + 2.0 * 2)


def test_dag_zero_smoothness_is_data_only():
    rng = np.random.default_rng(3)
    D = {x: rng.normal(size=(3, 3)) for x in "ABC"}
    m = DagModel(edges=[("S", "M", 1.0), ("M", "A", 0.5), ("M", "B", 0.5), ("S", "C", 1.0)],
                 data=D, smoothness={}, dims=(3, 3), kind="hmf")
    u = random_simplex(rng, 3, (3, 3))
    expect = sum((D[n] * u[i]).sum() for i, n in enumerate(m.end_labels))
    assert dag_energy(m, u) == pytest.approx(expect, abs=1e-12)


def test_reconstruct_weighted_sums():
    m = DagModel(edges=[("S", "M", 1.0), ("M", "A", 0.25), ("M", "B", 0.75),
                        ("S", "B", 1.0)],
                 data={"A": 0.0, "B": 0.0}, smoothness={}, dims=(2,))
    u = np.array([[0.2, 1.0], [0.8, 0.0]])
    labels = reconstruct_labels(m, u)
    np.testing.assert_allclose(labels["M"], 0.25 * u[0] + 0.75 * u[1])
    np.testing.assert_allclose(labels["S"], labels["M"] + u[1])


@pytest.mark.parametrize("dims,k,count", [((3, 3), 2, 512), ((2, 2), 3, 81)])
def test_brute_force_counts(dims, k, count):
    rng = np.random.default_rng(4)
    m = PottsModel(rng.normal(size=(k,) + dims), 0.3)
    _, _, n = brute_force_discrete(m)
    assert n == count


def test_brute_force_zero_smoothness_is_argmin():
    rng = np.random.default_rng(5)
    D = rng.normal(size=(3, 2, 3))
    lab, e, _ = brute_force_discrete(PottsModel(D, 0.0))
    np.testing.assert_array_equal(lab, D.argmin(axis=0))
    assert e == pytest.approx(D.min(axis=0).sum())


def naive_optimum(model, energy_fn, k, dims):
    best = (np.inf, None)
    n = int(np.prod(dims))
    for flat in itertools.product(range(k), repeat=n):
        lab = np.array(flat).reshape(dims, order="F")
        e = energy_fn(model, one_hot(lab, k))
        if e < best[0]:
            best = (e, lab)
    return best


@pytest.mark.parametrize("seed", range(3))
def test_brute_force_matches_naive_scoring(seed):
    rng = np.random.default_rng(seed)
    potts = PottsModel(rng.normal(size=(3, 2, 2)), rng.uniform(0, 1, (3, 2, 2)))
    ish = IshikawaModel(rng.normal(size=(3, 2, 2)), rng.uniform(0, 1, (2, 2, 2)))
    hmf = DagModel(edges=[("S", "M", 1.0), ("M", "A", 1.0), ("M", "B", 1.0), ("S", "C", 1.0)],
                   data={x: rng.normal(size=(2, 2)) for x in "ABC"},
                   smoothness={"M": rng.uniform(0, 1, (2, 2)), "A": 0.2},
                   dims=(2, 2), kind="hmf")
    for model, fn in ((potts, potts_energy), (ish, ishikawa_energy), (hmf, dag_energy)):
        lab, e, _ = brute_force_discrete(model)
        e_naive, lab_naive = naive_optimum(model, fn, 3, (2, 2))
        assert e == pytest.approx(e_naive, abs=1e-12)
        np.testing.assert_array_equal(lab, lab_naive)


def test_brute_force_guard():
    with pytest.raises(ValueError, match="exceed"):
        brute_force_discrete(PottsModel(np.zeros((3, 4, 4))), max_states=1000)


def test_compare_runs():
    rng = np.random.default_rng(6)
    u = random_simplex(rng, 2, (10, 10))
    c = compare_runs(1.0, u, 1.0, u)
    assert (c.energy_gap, c.agreement, c.max_label_difference) == (0.0, 1.0, 0.0)
    v = u.copy()
    v[:, 3, 4] = v[::-1, 3, 4]
    v[:, 3, 4] = [0.9, 0.1] if u[0, 3, 4] < 0.5 else [0.1, 0.9]
    assert compare_runs(1.0, u, 1.0, v).agreement == pytest.approx(0.99)
    assert compare_runs(10.0, u, 10.001, u).energy_gap == pytest.approx(1e-4, rel=1e-9)
    with pytest.raises(ValueError):
        compare_runs(1.0, u, 1.0, u[:, :5])
