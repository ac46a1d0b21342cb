import numpy as np
import pytest

from randtucker.dimtree import (
    all_mode_sketches,
    build_tree,
    naive_mode_sketches,
    predicted_sketch_flops,
    simulate_sketch_flops,
    ttm_calls,
)
from randtucker.tensor import FlopCounter, multi_ttm


def rand(shape, seed=0):
    return np.asfortranarray(np.random.default_rng(seed).standard_normal(shape))


def test_tree_shape_d4():
    root = build_tree(4)
    assert root.applied == ()
    left, right = root.children
    assert left.modes == (0, 1) and left.applied == (2, 3)
    assert right.modes == (2, 3) and right.applied == (0, 1)
    assert [leaf.applied for leaf in root.leaves()] == [(1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2)]


def test_odd_split_puts_extra_left():
    assert build_tree(5).children[0].modes == (0, 1, 2)


def test_d2_single_products():
    X = rand((4, 5))
    P = [rand((2, 4), 1), rand((3, 5), 2)]
    Y = all_mode_sketches(X, P)
    assert np.allclose(Y[0], X @ P[1].T)
    assert np.allclose(Y[1], P[0] @ X)


def test_matches_naive_d4():
    X = rand((6, 6, 6, 6))
    P = [rand((2, 6), k + 1) for k in range(4)]
    tree, naive = all_mode_sketches(X, P), naive_mode_sketches(X, P)
    for a, b in zip(tree, naive):
        assert np.linalg.norm(a - b) <= 1e-10 * np.linalg.norm(b)


@pytest.mark.parametrize("dims", [(5, 7, 3), (4, 3, 5, 2, 3), (9, 8, 7, 6)])
def test_matches_naive_uneven(dims):
    X = rand(dims)
    P = [rand((2, n), k + 1) for k, n in enumerate(dims)]
    for j, (a, b) in enumerate(zip(all_mode_sketches(X, P), naive_mode_sketches(X, P))):
        assert a.shape[j] == dims[j]
        assert np.linalg.norm(a - b) <= 1e-10 * np.linalg.norm(b)


@pytest.mark.parametrize("n,r,d,tree,naive", [
    (16, 2, 3, 38912, 55296),
    (16, 2, 4, 606208, 1196032),
    (16, 2, 5, 9674752, 23961600),
])
def test_closed_forms(n, r, d, tree, naive):
    assert predicted_sketch_flops(n, r, d, True) == tree
    assert predicted_sketch_flops(n, r, d, False) == naive


@pytest.mark.parametrize("d,n,r", [(3, 8, 2), (3, 10, 3), (4, 6, 2), (5, 4, 2)])
def test_measured_equals_predicted(d, n, r):
    X = rand((n,) * d)
    P = [rand((r, n), k) for k in range(d)]
    c1, c2 = FlopCounter(), FlopCounter()
    all_mode_sketches(X, P, c1)
    naive_mode_sketches(X, P, c2)
    assert c1.total() == predicted_sketch_flops(n, r, d, True)
    assert c2.total() == predicted_sketch_flops(n, r, d, False)


def test_simulation_matches_numeric_non_cubic():
    dims, rows = (7, 5, 6, 4), (2, 3, 2, 2)
    X = rand(dims)
    P = [rand((s, n), k) for k, (s, n) in enumerate(zip(rows, dims))]
    c = FlopCounter()
    all_mode_sketches(X, P, c)
    assert c.total() == simulate_sketch_flops(dims, rows, True)


def test_ratio_approaches_half_d():
    ratio = predicted_sketch_flops(512, 2, 4, False) / predicted_sketch_flops(512, 2, 4, True)
    assert abs(ratio - 2.0) <= 0.05 * 2.0


@pytest.mark.parametrize("d", [2, 3, 4, 5, 6])
def test_ttm_call_counts(d):
    for with_tree in (True, False):
        X = rand((2,) * d)
        P = [rand((1, 2), k) for k in range(d)]
        c = FlopCounter()
        (all_mode_sketches if with_tree else naive_mode_sketches)(X, P, c)
        assert sum(c.calls.values()) == ttm_calls(d, with_tree)
    assert ttm_calls(d, True) <= ttm_calls(d, False)


def test_wrong_factor_count():
    with pytest.raises(ValueError):
        all_mode_sketches(rand((2, 2, 2)), [np.eye(2)] * 2)


def test_single_ttm_count():
    c = FlopCounter()
    multi_ttm(rand((5, 5, 5)), {0: rand((2, 5))}, counter=c)
    assert c.total() == 2 * 2 * 125
