import itertools
import math

import numpy as np
import pytest
from scipy.special import digamma

from graphgen import random_hybrid_graph, random_tree_graph
from hmpce.factorgraph import (
    BP,
    FLAT,
    MF,
    CGaussPriorFactor,
    FactorGraph,
    GammaPriorFactor,
    MixtureObservationFactor,
    PrecisionGaussFactor,
    TableFactor,
    UnnormalizableMessageError,
    UnsupportedGraphError,
    exact_marginals,
    stretched_graph_equivalence_check,
)


def one_sweep_reference(table, anchors, tags):
    """First synchronous sweep of the edge-typed rule on a single factor,
    written with explicit loops as an independent reference.  On the first
    sweep both n-messages and beliefs reduce to the normalized anchors
    (uniform where absent)."""
    k = table.ndim
    sizes = table.shape
    logf = np.log(table)

    def unit(i):
        if anchors[i] is None:
            return np.full(sizes[i], 1.0 / sizes[i])
        vec = np.asarray(anchors[i], dtype=float)
        return vec / vec.sum()

    n_vecs = [unit(i) for i in range(k)]
    beliefs = [unit(i) for i in range(k)]
    bp = [i for i in range(k) if tags[i] == BP]
    mf = [i for i in range(k) if tags[i] == MF]

    def expected_log(idx_fixed, over):
        total = 0.0
        for combo in itertools.product(*(range(sizes[j]) for j in over)):
            idx = list(idx_fixed)
            w = 1.0
            for pos, j in enumerate(over):
                idx[j] = combo[pos]
                w *= beliefs[j][combo[pos]]
            total += w * logf[tuple(idx)]
        return total

    msgs = {}
    for i in bp:
        others = [j for j in bp if j != i]
        vec = np.zeros(sizes[i])
        for xi in range(sizes[i]):
            for combo in itertools.product(*(range(sizes[j]) for j in others)):
                idx = [None] * k
                idx[i] = xi
                w = 1.0
                for pos, j in enumerate(others):
                    idx[j] = combo[pos]
                    w *= n_vecs[j][combo[pos]]
                vec[xi] += w * math.exp(expected_log(idx, mf))
        msgs[i] = vec / vec.sum()

    joint = {}
    for combo in itertools.product(*(range(sizes[j]) for j in bp)):
        idx = [None] * k
        w = 1.0
        for pos, j in enumerate(bp):
            idx[j] = combo[pos]
            w *= n_vecs[j][combo[pos]]
        joint[combo] = w * math.exp(expected_log(idx, mf))
    z = sum(joint.values())
    joint = {key: val / z for key, val in joint.items()}

    for l in mf:
        others = [j for j in mf if j != l]
        vec = np.zeros(sizes[l])
        for xl in range(sizes[l]):
            total = 0.0
            for combo, w in joint.items():
                idx = [None] * k
                for pos, j in enumerate(bp):
                    idx[j] = combo[pos]
                idx[l] = xl
                total += w * expected_log(idx, others)
            vec[xl] = total
        vec = np.exp(vec - vec.max())
        msgs[l] = vec / vec.sum()
    return msgs


def build_single_factor_graph(table, anchors, tags):
    names = ["a", "b", "c", "d"][: table.ndim]
    g = FactorGraph()
    for name, size in zip(names, table.shape):
        g.add_variable(name, "discrete", size)
    hub = TableFactor("hub", names, table)
    g.add_factor(hub, tags=dict(zip(names, tags)))
    for name, anchor in zip(names, anchors):
        if anchor is not None:
            g.add_factor(TableFactor("anchor_" + name, [name], anchor))
    return g, hub, names


def test_bp_message_reduces_to_sum_product_without_mf_neighbors():
    table = np.array([[1.0, 2.0], [3.0, 4.0]])
    anchor_b = np.array([0.6, 0.4])
    g, hub, names = build_single_factor_graph(table, [None, anchor_b], [BP, BP])
    g.sweep()
    expect = table @ anchor_b
    assert np.allclose(g.message(hub, "a").probs, expect / expect.sum(), atol=1e-14)


def test_bp_message_with_point_mass_mf_neighbor():
    # point-mass belief on the mf neighbor picks out one slice of the factor
    table = np.array([[1.0, 2.0], [3.0, 4.0], [0.5, 0.25]])
    g, hub, names = build_single_factor_graph(
        table, [None, np.array([0.0, 1.0])], [BP, MF]
    )
    g.sweep()
    expect = table[:, 1] / table[:, 1].sum()
    assert np.allclose(g.message(hub, "a").probs, expect, atol=1e-14)


def test_mf_message_without_bp_neighbors():
    table = np.array([[0.5, 1.5, 2.0], [1.0, 0.25, 0.75]])
    anchor_b = np.array([1.0, 2.0, 1.0])
    g, hub, names = build_single_factor_graph(table, [None, anchor_b], [MF, MF])
    g.sweep()
    q = anchor_b / anchor_b.sum()
    expect = np.exp(np.log(table) @ q)
    assert np.allclose(g.message(hub, "a").probs, expect / expect.sum(), atol=1e-14)


def test_mf_message_under_uniform_bp_belief_is_geometric_mean():
    # the two rows hold the same multiset of potentials, so the collapsed
    # bp table is constant and the bp-neighborhood belief stays uniform
    table = np.array([[0.2, 0.9, 1.4], [1.4, 0.2, 0.9]])
    g, hub, names = build_single_factor_graph(table, [None, None], [BP, MF])
    g.sweep()
    assert np.allclose(g.message(hub, "a").probs, [0.5, 0.5], atol=1e-14)
    expect = np.sqrt(table[0] * table[1])
    assert np.allclose(g.message(hub, "b").probs, expect / expect.sum(), atol=1e-14)


def test_mixed_tag_messages_match_loop_reference():
    rng = np.random.default_rng(17)
    tag_sets = [
        (BP, BP, MF),
        (BP, MF, MF),
        (MF, MF, MF),
        (BP, BP, BP),
        (MF, BP, MF),
    ]
    for tags in tag_sets:
        for _ in range(4):
            table = rng.uniform(0.1, 2.0, size=(2, 3, 2))
            anchors = [
                rng.uniform(0.2, 1.5, size=s) if rng.random() < 0.7 else None
                for s in table.shape
            ]
            g, hub, names = build_single_factor_graph(table, anchors, tags)
            g.sweep()
            ref = one_sweep_reference(table, anchors, tags)
            for i, name in enumerate(names):
                got = g.message(hub, name).probs
                assert np.max(np.abs(got - ref[i])) < 1e-12, (tags, name)


def test_gamma_message_shape_increment_one():
    # unit exponents make the shape increment equal the total joint weight
    g = FactorGraph()
    g.add_variable("x", "discrete", 2)
    g.add_variable("v", "gamma")
    obs_sq = np.array([0.4, 1.3])
    factor = MixtureObservationFactor(
        "mix", ["x"], ["v"],
        log_base=np.zeros(2), exponents=[np.ones(2)], obs_sq=[obs_sq],
    )
    g.add_factor(GammaPriorFactor("pv", "v", 1.5, 2.0))
    g.add_factor(factor)
    g.add_factor(TableFactor("ax", ["x"], np.array([0.3, 0.7])))
    g.sweep()
    msg = g.message(factor, "v")
    assert msg.shape == pytest.approx(2.0, abs=1e-12)
    # hand-computed joint weight over x at the first sweep
    log_ev = digamma(1.5) - math.log(2.0)
    lt = (log_ev - math.log(math.pi)) - 0.75 * obs_sq
    w = np.exp(lt - lt.max()) * np.array([0.3, 0.7])
    w /= w.sum()
    assert msg.rate == pytest.approx(float(w @ obs_sq), rel=1e-12)
    belief = g.belief("v")
    assert belief.shape == pytest.approx(1.5 + 1.0, abs=1e-12)
    assert belief.rate == pytest.approx(2.0 + float(w @ obs_sq), rel=1e-12)


def test_precision_gauss_single_sweep():
    # anchored at CN(2, 1) and Ga(1, 1): the combined Gaussian belief is
    # (mean 1, variance 0.5) and the precision belief becomes Ga(2, 2.5)
    g = FactorGraph()
    g.add_variable("h", "cgauss")
    g.add_variable("v", "gamma")
    factor = PrecisionGaussFactor("pg", "h", "v")
    g.add_factor(CGaussPriorFactor("ph", "h", 2.0, 1.0))
    g.add_factor(GammaPriorFactor("pv", "v", 1.0, 1.0))
    g.add_factor(factor, tags={"h": BP})
    g.sweep()
    hb = g.belief("h")
    assert hb.mean == pytest.approx(1.0, abs=1e-14)
    assert hb.variance == pytest.approx(0.5, abs=1e-14)
    msg = g.message(factor, "v")
    assert msg.shape == pytest.approx(2.0, abs=1e-14)
    assert msg.rate == pytest.approx(1.5, abs=1e-14)
    vb = g.belief("v")
    assert vb.shape == pytest.approx(2.0, abs=1e-14)
    assert vb.rate == pytest.approx(2.5, abs=1e-14)


def test_variable_to_factor_rules():
    g = FactorGraph()
    g.add_variable("a", "discrete", 2)
    g.add_variable("b", "discrete", 2)
    hub = TableFactor("hub", ["a", "b"], np.array([[1.0, 2.0], [3.0, 4.0]]))
    g.add_factor(hub, tags={"a": BP, "b": MF})
    # degree-1 variable on a bp edge: empty product, the flat marker
    assert g.n_message("a", hub) is FLAT
    g.add_factor(TableFactor("ab", ["b"], np.array([0.3, 0.7])))
    # mf edge: the full belief, anchor included
    assert np.allclose(g.n_message("b", hub).probs, g.belief("b").probs)
    assert np.allclose(g.belief("b").probs, [0.3, 0.7])
    # degree-2 variable on a bp edge: copy of the other incoming message
    g2 = FactorGraph()
    g2.add_variable("a", "discrete", 2)
    g2.add_variable("b", "discrete", 2)
    hub2 = TableFactor("hub", ["a", "b"], np.array([[1.0, 2.0], [3.0, 4.0]]))
    g2.add_factor(hub2)
    g2.add_factor(TableFactor("ab", ["b"], np.array([2.0, 6.0])))
    assert np.allclose(g2.n_message("b", hub2).probs, [0.25, 0.75])


def test_all_bp_tree_beliefs_match_enumeration():
    rng = np.random.default_rng(23)
    for _ in range(5):
        g = random_tree_graph(rng)
        g.run(max_sweeps=200, tol=1e-12)
        exact = exact_marginals(g)
        for name, probs in exact.items():
            assert np.max(np.abs(g.belief(name).probs - probs)) < 1e-10


def test_all_mf_fixed_point_is_stationary():
    rng = np.random.default_rng(29)
    for _ in range(5):
        table = rng.uniform(0.1, 2.0, size=(2, 3))
        g, hub, names = build_single_factor_graph(
            table,
            [rng.uniform(0.2, 1.5, size=2), rng.uniform(0.2, 1.5, size=3)],
            [MF, MF],
        )
        g.run(max_sweeps=500, tol=1e-12)
        assert g.sweep() < 1e-10


def test_emitted_discrete_messages_are_normalized():
    rng = np.random.default_rng(31)
    for _ in range(10):
        g = random_hybrid_graph(rng)
        for _ in range(3):
            g.sweep()
            for factor in g.factors:
                for var in factor.vars:
                    msg = g.message(factor, var)
                    if msg is FLAT or not hasattr(msg, "probs"):
                        continue
                    assert abs(msg.probs.sum() - 1.0) < 1e-12
                    assert np.all(msg.probs >= 0.0)


def test_unnormalizable_message_names_the_factor():
    g = FactorGraph()
    g.add_variable("a", "discrete", 2)
    g.add_variable("b", "discrete", 2)
    g.add_factor(TableFactor("fz", ["a", "b"], np.zeros((2, 2))))
    with pytest.raises(UnnormalizableMessageError, match="fz"):
        g.sweep()


def test_parametric_edges_must_be_mf():
    g = FactorGraph()
    g.add_variable("x", "discrete", 2)
    g.add_variable("v", "gamma")
    factor = MixtureObservationFactor(
        "mix", ["x"], ["v"],
        log_base=np.zeros(2), exponents=[np.ones(2)], obs_sq=[np.ones(2)],
    )
    with pytest.raises(UnsupportedGraphError):
        g.add_factor(factor, tags={"v": BP})


def test_exact_marginals_rejects_parametric_graphs():
    g = FactorGraph()
    g.add_variable("v", "gamma")
    g.add_factor(GammaPriorFactor("pv", "v", 1.0, 1.0))
    with pytest.raises(UnsupportedGraphError):
        exact_marginals(g)


def test_stretched_check_needs_single_hybrid_factor():
    g = FactorGraph()
    for name in ("a", "b", "c"):
        g.add_variable(name, "discrete", 2)
    g.add_factor(TableFactor("f1", ["a", "b"], np.ones((2, 2))))
    g.add_factor(TableFactor("f2", ["b", "c"], np.ones((2, 2))))
    with pytest.raises(UnsupportedGraphError):
        stretched_graph_equivalence_check(g)


def test_stretched_equivalence_cn_mixture():
    rng = np.random.default_rng(42)
    g = FactorGraph()
    g.add_variable("x1", "discrete", 2)
    g.add_variable("x2", "discrete", 2)
    g.add_variable("v", "gamma")
    g.add_factor(GammaPriorFactor("pv", "v", 1.5, 1.0))
    factor = MixtureObservationFactor(
        "mix", ["x1", "x2"], ["v"],
        log_base=rng.normal(size=(2, 2)),
        exponents=[rng.uniform(0.0, 2.0, size=(2, 2))],
        obs_sq=[rng.uniform(0.1, 2.0, size=(2, 2))],
    )
    g.add_factor(factor, tags={"x1": BP, "x2": BP})
    g.add_factor(TableFactor("a1", ["x1"], rng.uniform(0.2, 1.5, size=2)))
    g.add_factor(TableFactor("a2", ["x2"], rng.uniform(0.2, 1.5, size=2)))
    report = stretched_graph_equivalence_check(g)
    assert report["max_discrepancy"] < 1e-10
    assert report["messages_compared"] >= 8


def test_stretched_equivalence_degenerate_tags():
    rng = np.random.default_rng(47)
    table = rng.uniform(0.1, 2.0, size=(2, 3))
    anchors = [rng.uniform(0.2, 1.5, size=2), rng.uniform(0.2, 1.5, size=3)]
    # all edges bp degenerates to plain sum-product: the check passes and
    # the converged beliefs equal the enumeration marginals
    g, hub, names = build_single_factor_graph(table, anchors, [BP, BP])
    report = stretched_graph_equivalence_check(g)
    assert report["max_discrepancy"] < 1e-10
    exact = exact_marginals(g)
    for name in names:
        assert np.max(np.abs(g.belief(name).probs - exact[name])) < 1e-10
    # all edges mf degenerates to the variational fixed point
    g, hub, names = build_single_factor_graph(table, anchors, [MF, MF])
    report = stretched_graph_equivalence_check(g)
    assert report["max_discrepancy"] < 1e-10


def test_stretched_equivalence_random_graphs():
    rng = np.random.default_rng(53)
    for _ in range(8):
        g = random_hybrid_graph(rng)
        report = stretched_graph_equivalence_check(g)
        assert report["max_discrepancy"] < 1e-10
