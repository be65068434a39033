import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from potts_adm.core_types import GridImage, Labeling, PairwiseGraph, ScribbleMask, SoftSegmentation
from potts_adm.energy import (
    PROHIBITIVE, EnergyParams, UnaryTable, adm_unary_from_prediction, build_dense_weights,
    build_grid_weights, neighbor_pairs,
)
from potts_adm.errors import InvalidArgument, ResourceLimit
from potts_adm.solvers import (
    DiscreteProblem, alpha_expansion, brute_force, decode, expansion_move, icm, max_flow,
    maxflow_binary, mean_field_dense, mean_field_free_energy, solve,
)


def random_problem(rng, h, w, k, neighborhood="grid4", wscale=1.0):
    p, q = neighbor_pairs(h, w, neighborhood)
    graph = PairwiseGraph(h * w, np.stack([p, q], 1), wscale * rng.random(p.size), neighborhood)
    return DiscreteProblem(UnaryTable(rng.random((h * w, k))), graph, k, h, w)


def enumerate_min(problem):
    """Independent oracle: plain Python loop over all labelings."""
    best = np.inf
    for labs in itertools.product(range(problem.num_labels), repeat=problem.num_pixels):
        best = min(best, problem.energy(np.array(labs)))
    return best


def test_problem_validation():
    g = PairwiseGraph(2, [[0, 1]], [1.0])
    with pytest.raises(InvalidArgument):
        DiscreteProblem(UnaryTable(np.zeros((3, 2))), g, 2)
    with pytest.raises(InvalidArgument):
        DiscreteProblem(UnaryTable(np.zeros((2, 3))), g, 2)
    with pytest.raises(InvalidArgument):
        DiscreteProblem(UnaryTable(np.zeros((2, 2))), g, 2, 2, 2)
    prob = DiscreteProblem(UnaryTable(np.zeros((2, 2))), g, 2)
    with pytest.raises(InvalidArgument):
        prob.check_init([0, 2])


def test_max_flow_small_network():
    # s=0, t=3; two disjoint paths with bottlenecks 2 and 3
    tails = np.array([0, 0, 1, 2])
    heads = np.array([1, 2, 3, 3])
    flow, side = max_flow(4, tails, heads, np.array([2.0, 5.0, 4.0, 3.0]), np.zeros(4), 0, 3)
    assert flow == pytest.approx(5.0)
    assert side[0] and not side[3]


def test_maxflow_zero_unaries():
    rng = np.random.default_rng(0)
    p = random_problem(rng, 3, 3, 2)
    zero = DiscreteProblem(UnaryTable(np.zeros((9, 2))), p.graph, 2, 3, 3)
    assert maxflow_binary(zero).final_energy == 0.0


def test_maxflow_two_pixel_cut():
    g = PairwiseGraph(2, [[0, 1]], [1.0])
    u = UnaryTable(np.array([[0.0, 10.0], [10.0, 0.0]]))
    rep = maxflow_binary(DiscreteProblem(u, g, 2))
    np.testing.assert_array_equal(rep.labeling.flat(), [0, 1])
    assert rep.final_energy == 1.0


def test_maxflow_rejects_multilabel():
    with pytest.raises(InvalidArgument):
        maxflow_binary(random_problem(np.random.default_rng(0), 2, 2, 3))


@pytest.mark.parametrize("seed", range(10))
def test_maxflow_matches_enumeration_3x4(seed):
    prob = random_problem(np.random.default_rng(seed), 3, 4, 2, wscale=2.0)
    assert maxflow_binary(prob).final_energy == brute_force(prob).final_energy


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.integers(1, 4), st.integers(1, 4))
def test_maxflow_equals_brute_force(seed, h, w):
    prob = random_problem(np.random.default_rng(seed), h, w, 2, "grid8", 1.5)
    assert maxflow_binary(prob).final_energy == brute_force(prob).final_energy


def test_brute_force_examples():
    u = UnaryTable(np.array([[3.0, 1.0, 2.0]]))
    prob = DiscreteProblem(u, PairwiseGraph(1, np.zeros((0, 2)), []), 3)
    assert brute_force(prob).labeling.flat().tolist() == [1]
    # unaries forcing a checkerboard on a 2x2 unit grid
    image = GridImage(np.zeros((2, 2)))
    graph = build_grid_weights(image, EnergyParams(lam=1.0))
    costs = np.array([[0.0, 5.0], [5.0, 0.0], [5.0, 0.0], [0.0, 5.0]])
    rep = brute_force(DiscreteProblem(UnaryTable(costs), graph, 2, 2, 2))
    np.testing.assert_array_equal(rep.labeling.labels, [[0, 1], [1, 0]])
    assert rep.final_energy == 4.0


def test_brute_force_tie_break_and_guard():
    prob = DiscreteProblem(UnaryTable(np.zeros((3, 2))), PairwiseGraph(3, np.zeros((0, 2)), []), 2)
    assert brute_force(prob).labeling.flat().tolist() == [0, 0, 0]
    big = DiscreteProblem(UnaryTable(np.zeros((25, 2))), PairwiseGraph(25, np.zeros((0, 2)), []), 2)
    with pytest.raises(ResourceLimit):
        brute_force(big)


def test_brute_force_matches_python_loop():
    for seed in range(5):
        prob = random_problem(np.random.default_rng(seed), 2, 3, 3)
        assert brute_force(prob).final_energy == pytest.approx(enumerate_min(prob), abs=1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_expansion_move_is_optimal_move(seed):
    rng = np.random.default_rng(seed)
    prob = random_problem(rng, 2, 3, 3)
    labels = rng.integers(0, 3, 6)
    alpha = int(rng.integers(3))
    got = prob.energy(expansion_move(prob, labels, alpha))
    best = min(prob.energy(np.where(np.array(mask) == 1, alpha, labels))
               for mask in itertools.product((0, 1), repeat=6))
    assert got == pytest.approx(best, abs=1e-12)


def test_alpha_expansion_binary_matches_maxflow():
    for seed in range(10):
        prob = random_problem(np.random.default_rng(seed), 3, 3, 2)
        assert alpha_expansion(prob).final_energy == pytest.approx(maxflow_binary(prob).final_energy,
                                                                    abs=1e-12)


def test_alpha_expansion_optimal_init_unchanged():
    prob = random_problem(np.random.default_rng(4), 3, 3, 3)
    opt = brute_force(prob).labeling
    rep = alpha_expansion(prob, opt)
    np.testing.assert_array_equal(rep.labeling.labels, opt.labels)
    assert rep.sweeps == 1 and rep.converged


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.integers(2, 4))
def test_alpha_expansion_trace_and_bound(seed, k):
    rng = np.random.default_rng(seed)
    prob = random_problem(rng, 2, 4, k, "grid8", 2.0)
    rep = alpha_expansion(prob, rng.integers(0, k, 8), max_sweeps=5)
    assert np.all(np.diff(rep.energy_trace) <= 0)
    opt = brute_force(prob).final_energy
    assert rep.final_energy >= opt - 1e-12
    assert rep.final_energy <= 2 * opt + 1e-12


def test_icm_trap():
    # strong coupling, both pixels weakly prefer label 1; ICM from (0, 0) cannot move
    g = PairwiseGraph(2, [[0, 1]], [10.0])
    prob = DiscreteProblem(UnaryTable(np.array([[1.0, 0.0], [1.0, 0.0]])), g, 2)
    rep = icm(prob, [0, 0])
    assert rep.final_energy == 2.0
    assert maxflow_binary(prob).final_energy == 0.0
    assert alpha_expansion(prob, [0, 0]).final_energy == 0.0


def test_icm_single_pixel_and_fixed_point():
    prob = DiscreteProblem(UnaryTable(np.array([[2.0, 0.5, 1.0]])), PairwiseGraph(1, np.zeros((0, 2)), []), 3)
    assert icm(prob, [0]).labeling.flat().tolist() == [1]
    rep = icm(prob, [1])
    assert rep.sweeps == 1 and rep.converged


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.integers(2, 4))
def test_icm_monotone_and_dominated(seed, k):
    rng = np.random.default_rng(seed)
    prob = random_problem(rng, 3, 3, k, "grid4", 1.5)
    init = rng.integers(0, k, 9)
    r_icm = icm(prob, init)
    assert np.all(np.diff(r_icm.energy_trace) <= 1e-12)
    assert r_icm.final_energy >= brute_force(prob).final_energy - 1e-12


def test_icm_never_beats_alpha_expansion():
    for seed in range(300):
        rng = np.random.default_rng(seed)
        k = int(rng.integers(2, 5))
        prob = random_problem(rng, 4, 4, k, "grid4", 1.5)
        init = rng.integers(0, k, 16)
        assert icm(prob, init).final_energy >= alpha_expansion(prob, init).final_energy - 1e-9


def test_mean_field_zero_weights_is_softmax():
    rng = np.random.default_rng(0)
    costs = rng.normal(size=(6, 3))
    graph = PairwiseGraph(6, [[0, 1], [2, 5]], [0.0, 0.0])
    prob = DiscreteProblem(UnaryTable(costs), graph, 3, 2, 3)
    q, _ = mean_field_dense(prob, max_sweeps=3)
    e = np.exp(-costs - (-costs).max(axis=1, keepdims=True))
    np.testing.assert_allclose(q.flat(), e / e.sum(axis=1, keepdims=True), atol=1e-9, rtol=0)


def test_mean_field_symmetric_pair():
    g = PairwiseGraph(2, [[0, 1]], [0.7])
    prob = DiscreteProblem(UnaryTable(np.array([[0.3, 0.1], [0.3, 0.1]])), g, 2)
    q, _ = mean_field_dense(prob, max_sweeps=200)
    np.testing.assert_allclose(q.flat()[0], q.flat()[1], atol=1e-9)


def test_mean_field_free_energy_monotone_dense():
    rng = np.random.default_rng(5)
    image = GridImage(rng.random((6, 6)))
    graph = build_dense_weights(image, EnergyParams(lam=0.5, sigma2=0.1, delta=2.0,
                                                    connectivity="dense"))
    for k in (2, 3):
        prob = DiscreteProblem(UnaryTable(rng.random((36, k)) * 2), graph, k, 6, 6)
        init = SoftSegmentation(rng.dirichlet(np.ones(k), size=36).reshape(6, 6, k))
        q, trace = mean_field_dense(prob, init, max_sweeps=8)
        assert np.all(np.diff(trace) <= 1e-9)
        assert trace[-1] == pytest.approx(mean_field_free_energy(prob, q.flat()), rel=1e-9)


def test_mean_field_decoded_not_below_optimum():
    for seed in range(5):
        prob = random_problem(np.random.default_rng(seed), 3, 3, 3)
        q, _ = mean_field_dense(prob, max_sweeps=10)
        assert decode(prob, q).final_energy >= brute_force(prob).final_energy - 1e-12


def test_mean_field_damping_validation():
    prob = random_problem(np.random.default_rng(0), 2, 2, 2)
    with pytest.raises(InvalidArgument):
        mean_field_dense(prob, damping=1.0)


def test_solve_dispatch():
    prob = random_problem(np.random.default_rng(1), 2, 3, 2)
    for name in ("alpha_expansion", "maxflow_binary", "icm"):
        assert solve(name, prob).final_energy >= brute_force(prob).final_energy - 1e-12
    with pytest.raises(InvalidArgument):
        solve("trws", prob)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.integers(2, 3), st.sampled_from(["alpha_expansion", "icm"]))
def test_scribble_constraints_respected(seed, k, solver):
    rng = np.random.default_rng(seed)
    h, w = 4, 4
    labels = np.where(rng.random((h, w)) < 0.3, rng.integers(0, k, (h, w)), -1)
    mask = ScribbleMask(labels, k)
    seg = SoftSegmentation(rng.dirichlet(np.ones(k) * 0.3, size=h * w).reshape(h, w, k))
    unary = adm_unary_from_prediction(seg, mask, 1.0)
    graph = build_grid_weights(GridImage(rng.random((h, w))), EnergyParams(lam=2.0, sigma2=0.1))
    prob = DiscreteProblem(unary, graph, k, h, w)
    init = np.where(mask.labeled, mask.labels, 0).reshape(-1)
    x = solve(solver, prob, init).labeling.labels
    np.testing.assert_array_equal(x[mask.labeled], mask.labels[mask.labeled])
    assert np.all(unary.costs[np.arange(h * w), x.reshape(-1)] < PROHIBITIVE)


def test_prohibitive_guard():
    g = PairwiseGraph(2, [[0, 1]], [PROHIBITIVE])
    u = UnaryTable(np.array([[0.0, PROHIBITIVE], [0.0, 0.0]]))
    with pytest.raises(InvalidArgument):
        DiscreteProblem(u, g, 2)


def test_report_energy_matches_labeling():
    prob = random_problem(np.random.default_rng(2), 3, 3, 3)
    rep = alpha_expansion(prob)
    assert isinstance(rep.labeling, Labeling)
    assert rep.final_energy == prob.energy(rep.labeling)
    assert rep.energy_trace[-1] == pytest.approx(rep.final_energy, rel=1e-9)
