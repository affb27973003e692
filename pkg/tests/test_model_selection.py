import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simplexshot.data import generate_synthetic
from simplexshot.errors import InvalidInputError
from simplexshot.model_selection import (
    SelectionConfig,
    best_of_restarts,
    elbow_walk,
    select_k,
)
from simplexshot.solver import SolverConfig

from oracles import elbow_reference


@pytest.mark.parametrize("errors, expected", [
    ((10.0, 2.0, 1.9), 2),
    ((1.0, 0.9, 0.85), 1),
    ((9.0, 6.0, 3.0), 3),
    ((0.0, 0.0, 0.0), 1),
    ((4.0, 0.0, 0.0), 2),
    ((5.0,), 1),
])
def test_elbow_walk_examples(errors, expected):
    assert elbow_walk(errors, 1.5) == expected


def test_elbow_walk_threshold_is_inclusive():
    assert elbow_walk((3.0, 2.0), 1.5) == 2


@settings(max_examples=500, deadline=None)
@given(st.lists(st.floats(0, 1e6, allow_nan=False), min_size=1, max_size=6),
       st.floats(1.01, 10.0))
def test_elbow_walk_matches_reference(errors, threshold):
    k = elbow_walk(errors, threshold)
    assert k == elbow_reference(errors, threshold)
    assert 1 <= k <= len(errors)


def test_elbow_zero_tolerance_absorbs_rounding():
    assert elbow_walk((1e-28, 1e-31), 1.5, zero_tol=1e-20) == 1
    assert elbow_walk((1e-28, 1e-31), 1.5) == 2


def test_constant_cloud_selects_one():
    X = np.tile([[0.3, -1.2, 4.0]], (20, 1))
    result = select_k(X, SelectionConfig(restarts_per_k=1))
    assert result.chosen_k == 1
    assert result.errors[0] == pytest.approx(0.0, abs=1e-20)


def test_result_structure(rng):
    X = rng.normal(size=(40, 5))
    cfg = SelectionConfig(k_max=3, restarts_per_k=2, solver=SolverConfig(outer_iters=5))
    result = select_k(X, cfg)
    assert len(result.errors) == len(result.models) == 3
    assert all(e >= 0 for e in result.errors)
    assert [m.k for m in result.models] == [1, 2, 3]
    assert result.model is result.models[result.chosen_k - 1]


def test_best_error_nested_restarts(rng):
    X = rng.normal(size=(40, 5))
    cfg = SolverConfig(outer_iters=5, seed=3)
    errors = [best_of_restarts(X, 3, cfg, r).recon_error for r in range(1, 6)]
    assert all(b <= a for a, b in zip(errors, errors[1:]))


def test_select_k_deterministic(rng):
    X = rng.normal(size=(30, 4))
    cfg = SelectionConfig(restarts_per_k=2, solver=SolverConfig(outer_iters=5, seed=7))
    assert select_k(X, cfg).errors == select_k(X, cfg).errors


def test_select_k_needs_enough_crops():
    with pytest.raises(InvalidInputError):
        select_k(np.zeros((2, 3)), SelectionConfig(k_max=3))


@pytest.mark.parametrize("bad", [dict(k_max=0), dict(ratio_threshold=1.0), dict(restarts_per_k=0)])
def test_selection_config_validation(bad):
    with pytest.raises(InvalidInputError):
        SelectionConfig(**bad)


@pytest.mark.parametrize("true_k", [1, 2, 3])
def test_recovers_true_count_on_clean_synthetic(true_k):
    X, _ = generate_synthetic(true_k, 200, 8, 0.0, 10.0, 1.0, seed=true_k)
    assert select_k(X, SelectionConfig(solver=SolverConfig(seed=true_k))).chosen_k == true_k
