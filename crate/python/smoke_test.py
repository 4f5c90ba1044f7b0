"""Smoke test for the hornatlas_py bindings; run with pytest or directly."""

import math

import pytest

import hornatlas_py as ha

A = 0.36


def test_fixed_point_is_fixed():
    x, y = ha.fixed_point(A, 1.5)
    assert (x, y) == pytest.approx((math.sqrt(A), A))
    assert ha.apply(A, 1.5, x, y) == pytest.approx((x, y), abs=1e-14)


def test_preimages_map_back():
    w = (0.6, 0.36)
    pre = ha.preimages(A, 1.775, *w)
    assert len(pre) == 3
    for z in pre:
        assert ha.apply(A, 1.775, *z) == pytest.approx(w, abs=1e-10)


def test_j0_is_the_zero_set_of_the_determinant():
    for x, y in ha.j0(A, 1.775, -0.5, 0.5, 11):
        assert abs(ha.det_jacobian(A, 1.775, x, y)) < 1e-12


def test_hopf_of_the_fixed_point():
    tau = ha.locate(A, "neimark-sacker", 1, 1.3, 1.5)
    assert tau == pytest.approx(1 / (2 * A), abs=1e-6)


def test_orbit_statistics():
    l1, l2 = ha.lyapunov(A, 1.0, 0.61, 0.36, 20_000)
    assert l1 < -0.01 and l2 <= l1
    rho = ha.rotation_number(A, 1.55, 0.61, 0.36, 20_000)
    assert 0.0 < rho < 0.5
    assert ha.detect_period(A, 1.2, 0.61, 0.36, 10) == 1


def test_period_6_pair_and_branch():
    pair = ha.periodic_pair(0.465, 1.472, 6)
    assert pair["sink"]["q"] == 6 and len(pair["saddle"]["points"]) == 6
    assert pair["saddle"]["stability"] == "Saddle"
    branch = ha.unstable_branch(0.465, 1.472, 6, arclength=1.0)
    assert len(branch) > 10


def test_errors():
    with pytest.raises(ValueError):
        ha.locate(A, "no-such-kind", 1, 1.3, 1.5)
    with pytest.raises(ha.HornatlasError):
        ha.preimages(A, 1.0, 0.5, 0.5)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
