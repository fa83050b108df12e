from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from iomc.masks import (
    ObservationMask,
    as_mask,
    mask_split,
    positions,
    project,
    project_complement,
    validation_size,
)

masks = st.tuples(st.integers(1, 10), st.integers(1, 10)).flatmap(
    lambda s: arrays(np.bool_, s))


def test_as_mask_from_pairs():
    m = as_mask([(0, 1), (2, 0)], (3, 2))
    assert positions(m) == {(0, 1), (2, 0)}


def test_as_mask_out_of_range():
    with pytest.raises(ValueError):
        as_mask([(3, 0)], (3, 2))


def test_projections_sum_to_matrix(rng):
    m = rng.normal(size=(4, 5))
    omega = rng.random((4, 5)) < 0.5
    np.testing.assert_array_equal(project(m, omega) + project_complement(m, omega), m)
    assert np.all(project(m, omega)[~omega] == 0)


@pytest.mark.parametrize("n,expected", [(0, 0), (1, 0), (2, 1), (4, 1), (6, 2), (10, 3)])
def test_validation_size_rounding(n, expected):
    assert validation_size(n) == expected


@given(masks, st.integers(0, 2**32 - 1))
def test_split_is_partition(hidden, seed):
    mask = mask_split(hidden, rng_seed=seed)
    total = mask.train.astype(int) + mask.val + mask.test
    assert np.all(total == 1)
    np.testing.assert_array_equal(mask.obscured, hidden)
    assert mask.val.sum() == validation_size(int(hidden.sum()))


@given(masks, st.integers(0, 1000))
def test_split_is_deterministic(hidden, seed):
    a, b = mask_split(hidden, rng_seed=seed), mask_split(hidden, rng_seed=seed)
    np.testing.assert_array_equal(a.val, b.val)


def test_split_requires_shape_for_pairs():
    with pytest.raises(ValueError):
        mask_split([(0, 0)])
    mask = mask_split([(0, 0), (1, 1)], shape=(2, 2), rng_seed=0)
    assert mask.obscured.sum() == 2


def test_observation_mask_rejects_overlap():
    t = np.ones((2, 2), bool)
    with pytest.raises(ValueError):
        ObservationMask(t, t, ~t)


def test_observation_mask_is_read_only_copy():
    train = np.array([[True, False], [True, True]])
    mask = ObservationMask(train, ~train, np.zeros_like(train))
    assert train.flags.writeable
    with pytest.raises(ValueError):
        mask.train[0, 0] = False


def test_permuted_mask(rng):
    mask = mask_split(rng.random((4, 6)) < 0.4, rng_seed=3)
    rp, cp = rng.permutation(4), rng.permutation(6)
    p = mask.permuted(rp, cp)
    np.testing.assert_array_equal(p.val, mask.val[np.ix_(rp, cp)])
