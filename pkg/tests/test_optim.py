import copy

import numpy as np

from infoplane.optim import AdamState, adam_step


def make_params():
    return [{"w": np.array([[1.0, 2.0]]), "b": np.array([0.5])}, None]


def test_zero_gradient_leaves_params_unchanged():
    params = make_params()
    before = copy.deepcopy(params)
    grads = [{"w": np.zeros((1, 2)), "b": np.zeros(1)}, None]
    adam_step(params, grads, AdamState.for_params(params))
    assert np.array_equal(params[0]["w"], before[0]["w"])
    assert np.array_equal(params[0]["b"], before[0]["b"])


def test_first_step_delta_is_learning_rate():
    # bias corrections cancel on step 1: delta = -lr * g/|g| up to epsilon
    params = [{"w": np.array([2.0])}]
    grads = [{"w": np.array([1.0])}]
    state = AdamState.for_params(params, learning_rate=1e-3)
    adam_step(params, grads, state)
    assert state.step == 1
    assert abs((params[0]["w"][0] - 2.0) + 1e-3) < 1e-6


def test_step_increments_by_one():
    params = make_params()
    state = AdamState.for_params(params)
    grads = [{"w": np.ones((1, 2)), "b": np.ones(1)}, None]
    for expected in (1, 2, 3):
        adam_step(params, grads, state)
        assert state.step == expected


def test_determinism_bit_identical_after_k_steps():
    rng = np.random.default_rng(9)
    grads_seq = [
        [{"w": rng.normal(size=(1, 2)), "b": rng.normal(size=1)}, None] for _ in range(20)
    ]

    def run():
        params = make_params()
        state = AdamState.for_params(params)
        for g in grads_seq:
            adam_step(params, g, state)
        return params

    a, b = run(), run()
    assert np.array_equal(a[0]["w"], b[0]["w"])
    assert np.array_equal(a[0]["b"], b[0]["b"])


def test_moment_shapes_match_params():
    params = make_params()
    state = AdamState.for_params(params)
    assert state.first_moment[0]["w"].shape == params[0]["w"].shape
    assert state.second_moment[0]["b"].shape == params[0]["b"].shape
    assert state.first_moment[1] is None
