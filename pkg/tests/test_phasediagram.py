import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinlab import engine
from spinlab.errors import InvalidParametersError, NotAntiferromagneticError
from spinlab.model import NEG_INF, SpinParams, WeightedNetwork, build_graph, to_weighted_network
from spinlab.phasediagram import (
    Regime,
    classify_uniqueness,
    extremal_marginals,
    hardcore_lambda_c,
    lambda_interval,
    tree_map,
    tree_map_derivative,
)


def regular_tree(delta, depth):
    """(delta-1)-ary tree of the given depth; returns (graph, root, leaves)."""
    arity = delta - 1
    vertices = [("n", "L")]
    edges = []
    level = ["n"]
    for d in range(1, depth + 1):
        side = "L" if d % 2 == 0 else "R"
        nxt = []
        for parent in level:
            for j in range(arity):
                child = f"{parent}.{j}"
                vertices.append((child, side))
                edges.append((parent, child))
                nxt.append(child)
        level = nxt
    return build_graph(vertices, edges), "n", level


def pinned_root_marginal(params, depth, leaf_spin):
    """Exact root marginal of the finite tree with all leaves pinned."""
    graph, root, leaves = regular_tree(params.delta, depth)
    net = to_weighted_network(graph, params)
    vlog = net.vertex_log.copy()
    for leaf in leaves:
        row = net.index[leaf]
        if leaf_spin == 1:
            vlog[row, 0] = NEG_INF
        else:
            vlog[row, 1] = NEG_INF
    pinned = WeightedNetwork(net.ids, vlog, net.edges_u, net.edges_v, net.edge_log)
    return engine.marginal(pinned, root)


class TestTreeMap:
    def test_symmetric_fixed_point(self):
        f = tree_map(SpinParams(0.5, 0.5, 1.0, 3))
        assert math.isclose(f(1.0), 1.0)

    def test_linear_in_activity(self):
        f1 = tree_map(SpinParams(0.5, 0.25, 1.0, 3))
        f2 = tree_map(SpinParams(0.5, 0.25, 2.0, 3))
        for x in (0.2, 1.0, 3.7):
            assert math.isclose(f2(x), 2.0 * f1(x))

    def test_hardcore_closed_form(self):
        f = tree_map(SpinParams(1.0, 0.0, 0.8, 5))
        for x in (0.1, 1.0, 2.5):
            assert math.isclose(f(x), 0.8 / (1.0 + x) ** 4)

    def test_derivative_matches_finite_difference(self):
        params = SpinParams(0.4, 0.6, 1.3, 4)
        f, fp = tree_map(params), tree_map_derivative(params)
        for x in (0.3, 1.1, 2.2):
            h = 1e-6
            fd = (f(x + h) - f(x - h)) / (2 * h)
            assert math.isclose(fp(x), fd, rel_tol=1e-7)

    def test_matches_exact_finite_tree_marginals(self):
        # the iterate of the map from a pinned boundary equals the exact
        # marginal of the corresponding finite tree, level by level
        cases = [
            (SpinParams(1.0, 0.0, 1.0, 6), 2),
            (SpinParams(0.3, 0.6, 0.8, 4), 3),
            (SpinParams(0.2, 0.2, 1.0, 3), 4),
            (SpinParams(1.0, 0.0, 4.5, 3), 4),
        ]
        for params, depth in cases:
            f = tree_map(params)
            for leaf_spin in (0, 1):
                r = math.inf if leaf_spin == 1 else 0.0
                for _ in range(depth):
                    if params.beta == 0.0 and r == 0.0:
                        r = math.inf
                    else:
                        r = f(r)
                expected = 1.0 if math.isinf(r) else r / (1.0 + r)
                exact = pinned_root_marginal(params, depth, leaf_spin)
                assert math.isclose(exact, expected, rel_tol=1e-11, abs_tol=1e-12)


class TestClassify:
    def test_symmetric_worked_value(self):
        # fixed point 1 with derivative magnitude 4/3
        params = SpinParams(0.2, 0.2, 1.0, 3)
        assert abs(tree_map_derivative(params)(1.0)) == pytest.approx(4.0 / 3.0)
        assert classify_uniqueness(params) is Regime.NON_UNIQUENESS

    def test_hardcore_thresholds(self):
        assert classify_uniqueness(SpinParams(1, 0, 0.5, 3)) is Regime.UNIQUENESS
        assert classify_uniqueness(SpinParams(1, 0, 1.0, 6)) is Regime.NON_UNIQUENESS

    def test_hardcore_agrees_with_lambda_c(self):
        rng = np.random.default_rng(2)
        for delta in range(3, 9):
            lc = hardcore_lambda_c(delta)
            for lam in rng.uniform(0.05, 4.0, size=20) * lc:
                if abs(lam - lc) <= 1e-6:
                    continue
                got = classify_uniqueness(SpinParams(1.0, 0.0, float(lam), delta))
                want = Regime.NON_UNIQUENESS if lam > lc else Regime.UNIQUENESS
                assert got is want, (delta, lam)

    def test_requires_antiferromagnetic(self):
        with pytest.raises(NotAntiferromagneticError):
            classify_uniqueness(SpinParams(2.0, 0.6, 1.0, 3))

    @given(
        st.floats(0.05, 0.95),
        st.floats(0.05, 0.95),
        st.floats(0.1, 4.0),
        st.integers(3, 6),
    )
    @settings(max_examples=40, deadline=None)
    def test_spin_flip_invariance(self, beta, gamma, lam, delta):
        if beta * gamma >= 0.99:
            return
        a = classify_uniqueness(SpinParams(beta, gamma, lam, delta), tol=1e-12)
        b = classify_uniqueness(SpinParams(gamma, beta, 1.0 / lam, delta), tol=1e-12)
        if Regime.CRITICAL in (a, b):
            return
        assert a is b


class TestLambdaC:
    def test_exact_values(self):
        assert hardcore_lambda_c(3) == 4.0
        assert hardcore_lambda_c(4) == 27.0 / 16.0
        assert hardcore_lambda_c(6) == 3125.0 / 4096.0

    def test_rejects_small_delta(self):
        with pytest.raises(InvalidParametersError):
            hardcore_lambda_c(2)


class TestLambdaInterval:
    def test_none_when_interaction_too_soft(self):
        assert lambda_interval(0.5, 0.5, 3) is None

    def test_contains_unit_activity(self):
        lo, hi = lambda_interval(0.2, 0.2, 3)
        assert lo < 1.0 < hi

    def test_symmetric_product_is_one(self):
        for b in (0.1, 0.2, 0.3):
            lo, hi = lambda_interval(b, b, 3)
            assert abs(lo * hi - 1.0) < 1e-6

    def test_endpoints_flip_classification(self):
        lo, hi = lambda_interval(0.3, 0.6, 4)
        for lam, inside in (
            (lo * (1 - 1e-5), False),
            (lo * (1 + 1e-5), True),
            (hi * (1 - 1e-5), True),
            (hi * (1 + 1e-5), False),
        ):
            got = classify_uniqueness(SpinParams(0.3, 0.6, lam, 4))
            want = Regime.NON_UNIQUENESS if inside else Regime.UNIQUENESS
            assert got is want


class TestExtremalMarginals:
    def test_uniqueness_collapses(self):
        params = SpinParams(1.0, 0.0, 0.5, 3)
        pt = extremal_marginals(params)
        assert abs(pt.q_plus - pt.q_minus) < 1e-9
        f = tree_map(params)
        xhat = pt.r_plus
        assert abs(f(xhat) - xhat) < 1e-9

    def test_symmetric_sum_is_one(self):
        pt = extremal_marginals(SpinParams(0.2, 0.2, 1.0, 3))
        assert abs(pt.q_plus + pt.q_minus - 1.0) < 1e-9
        assert pt.regime is Regime.NON_UNIQUENESS

    def test_two_cycle_residuals(self):
        for params in (
            SpinParams(1.0, 0.0, 1.0, 6),
            SpinParams(0.3, 0.6, 1.0, 4),
            SpinParams(0.2, 0.2, 2.0, 3),
        ):
            pt = extremal_marginals(params)
            f = tree_map(params)
            assert pt.q_minus < pt.q_plus
            assert abs(f(pt.r_plus) - pt.r_minus) <= 1e-10 * (1 + pt.r_minus)
            assert abs(f(pt.r_minus) - pt.r_plus) <= 1e-10 * (1 + pt.r_plus)

    def test_pinned_trees_decrease_onto_q_plus(self):
        # the even-depth all-one-boundary marginals decrease monotonically
        # and stay above the limit q+
        params = SpinParams(1.0, 0.0, 1.0, 6)
        pt = extremal_marginals(params)
        values = [pinned_root_marginal(params, depth, 1) for depth in (2, 4, 6)]
        assert values[0] > values[1] > values[2] > pt.q_plus

    def test_matches_deep_pinned_trees_when_contraction_is_strong(self):
        # far above the threshold the double map contracts fast (rate 0.08),
        # so a depth-10 tree already agrees with the limit to ~3e-8
        params = SpinParams(1.0, 0.0, 50.0, 3)
        pt = extremal_marginals(params)
        exact = pinned_root_marginal(params, 10, 1)
        assert abs(exact - pt.q_plus) < 1e-6

    def test_root_analogues_use_full_degree(self):
        params = SpinParams(1.0, 0.0, 1.0, 6)
        pt = extremal_marginals(params)
        rp = pt.p_plus / (1 - pt.p_plus)
        assert math.isclose(rp, 1.0 / (1.0 + pt.r_minus) ** 6, rel_tol=1e-9)
