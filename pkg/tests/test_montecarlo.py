import math
import os
import subprocess
import sys

import numpy as np
import pytest

from hvkit.hypervolume import exact_hv, shift_and_clean
from hvkit.montecarlo import McConfig, binomial_sigma, estimate_hv
from oracles import mc_hv, random_front


def test_single_box_is_exact_for_any_seed():
    Y = np.array([[2.0], [3.0]])
    for seed in (0, 1, 12345):
        assert estimate_hv(Y, [0, 0], McConfig(1000, seed)) == 6.0


def test_two_boxes_within_three_sigma():
    Y = np.array([[3.0, 1.0], [1.0, 3.0]])
    sigma = 9 * math.sqrt(5 / 9 * 4 / 9 / 10_000)
    assert abs(estimate_hv(Y, [0, 0], McConfig(10_000, 7)) - 5.0) <= 3 * sigma
    assert binomial_sigma(5.0, 9.0, 10_000) == pytest.approx(sigma)


def test_single_sample_extremes():
    Y = np.array([[3.0, 1.0], [1.0, 3.0]])
    outcomes = {estimate_hv(Y, None, McConfig(1, s)) for s in range(40)}
    assert outcomes == {0.0, 9.0}


def test_empty_after_cleaning_is_zero():
    assert estimate_hv(np.array([[-1.0], [2.0]]), [0, 0]) == 0.0
    assert estimate_hv(np.zeros((3, 0))) == 0.0


def test_deterministic_and_bounded():
    rng = np.random.default_rng(0)
    Y = random_front(4, 15, rng)
    cfg = McConfig(5000, 99)
    a = estimate_hv(Y, None, cfg)
    assert a == estimate_hv(Y, None, cfg)
    assert 0.0 <= a <= float(np.prod(Y.max(axis=1)))


def test_batch_size_does_not_change_result():
    Y = random_front(3, 10, np.random.default_rng(4))
    a = estimate_hv(Y, None, McConfig(20_000, 5, batch=20_000))
    b = estimate_hv(Y, None, McConfig(20_000, 5, batch=999))
    assert a == b


def test_matches_loop_oracle_statistically():
    Y = random_front(3, 8, np.random.default_rng(8))
    exact = exact_hv(Y)
    box = float(np.prod(Y.max(axis=1)))
    sigma = binomial_sigma(exact, box, 4000)
    assert abs(mc_hv(Y, 4000, 1) - exact) < 4 * sigma
    assert abs(estimate_hv(Y, None, McConfig(4000, 1)) - exact) < 4 * sigma


def test_unbiased_over_seeds():
    Y = random_front(3, 12, np.random.default_rng(3))
    exact = exact_hv(Y)
    box = float(np.prod(Y.max(axis=1)))
    est = np.array([estimate_hv(Y, None, McConfig(2000, s)) for s in range(100)])
    stderr = binomial_sigma(exact, box, 2000) / math.sqrt(100)
    assert abs(est.mean() - exact) < 4 * stderr


def test_reference_point_is_respected():
    Y = random_front(3, 10, np.random.default_rng(1)) + 2.0
    r = np.full(3, 2.0)
    cfg = McConfig(10_000, 2)
    assert estimate_hv(Y, r, cfg) == estimate_hv(shift_and_clean(Y, r), None, cfg)


def test_config_validation():
    with pytest.raises(ValueError):
        McConfig(samples=0)
    with pytest.raises(ValueError):
        McConfig(seed=-1)
    with pytest.raises(ValueError):
        McConfig(seed=2**64)


def test_pure_python_fallback_selected_by_env():
    code = (
        "import numpy as np; from hvkit import _accel; from hvkit.montecarlo import estimate_hv, McConfig;"
        "from hvkit.hypervolume import exact_hv;"
        "Y=np.array([[3.,2.,1.],[1.,2.,4.]]);"
        "print(_accel.BACKEND_NAME, exact_hv(Y, method='sweep'), estimate_hv(Y, None, McConfig(5000, 3)))"
    )
    env = dict(os.environ, HVKIT_PURE_PYTHON="1")
    pure = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    name, hv, est = pure.stdout.split()
    assert name == "python"
    assert float(hv) == pytest.approx(7.0)
    # both backends count hits on the same sample stream
    assert float(est) == estimate_hv(np.array([[3.0, 2.0, 1.0], [1.0, 2.0, 4.0]]), None, McConfig(5000, 3))
