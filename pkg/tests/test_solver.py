import numpy as np
import pytest

from fraceig.energy import rayleigh
from fraceig.grid import assemble, build_grid_1d, build_grid_2d, reflect
from fraceig.kernel import make_fractional_kernel, make_kernel
from fraceig.solver import (
    EigenResult,
    SolveOptions,
    _pow_change,
    dense_oracle_p2,
    is_reflection_invariant,
    minimize_rayleigh,
    normalize,
    residual,
    solve_odd,
    symmetry_group,
)


def make(N=32, s=0.5, p=2.0, a=-1.0, b=1.0):
    return assemble(build_grid_1d(a, b, N), make_fractional_kernel(s, p, 1))


def test_matches_oracle_p2():
    A = make(64, 0.5, 2.0)
    res = minimize_rayleigh(A)
    orc = dense_oracle_p2(A)
    assert res.converged and res.status == "converged"
    assert abs(res.lam / orc.lambda_min - 1) <= 1e-8
    assert np.max(np.abs(res.u - orc.vector)) <= 1e-6


def test_single_node():
    A = make(1, 0.5, 3.0, 0.0, 1.0)
    res = minimize_rayleigh(A)
    assert res.converged and res.iterations <= 1
    assert res.lam == pytest.approx(A.t[0] / A.grid.h, rel=1e-14)


def test_zero_init_rejected():
    with pytest.raises(ValueError):
        minimize_rayleigh(make(8), init=np.zeros(8))


def test_max_iters_reported_not_raised():
    res = minimize_rayleigh(make(32, 0.5, 3.0), SolveOptions(max_iters=2))
    assert not res.converged
    assert res.status == "max_iters"
    assert res.iterations == 2


def test_history_nonincreasing():
    res = minimize_rayleigh(make(32, 0.3, 3.0))
    h = np.array(res.history)
    assert np.all(np.diff(h) <= 0)


def test_output_normalized_positive():
    A = make(24, 0.6, 2.5)
    res = minimize_rayleigh(A)
    assert res.u.min() > 0
    assert np.sum(np.abs(res.u) ** A.p) * A.grid.h == pytest.approx(1.0, rel=1e-12)
    assert res.lam == pytest.approx(rayleigh(A, res.u), rel=1e-14)


@pytest.mark.parametrize("s,p", [(0.3, 1.5), (0.7, 1.5), (0.3, 3.0), (0.7, 3.0)])
def test_converges_nonquadratic(s, p):
    res = minimize_rayleigh(make(32, s, p))
    assert res.converged
    assert res.residual <= 1e-6


def test_seeds_agree():
    A = make(48, 0.5, 3.0)
    runs = [minimize_rayleigh(A, SolveOptions(seed=sd)) for sd in range(4)]
    lams = np.array([r.lam for r in runs])
    assert np.ptp(lams) / lams[0] <= 1e-8
    for r in runs[1:]:
        assert np.max(np.abs(r.u - runs[0].u)) <= 1e-6


def test_odd_matches_oracle():
    A = make(64, 0.5, 2.0)
    odd = solve_odd(A)
    orc = dense_oracle_p2(A)
    assert odd.lam == pytest.approx(orc.lambda_min_odd, rel=1e-8)
    assert np.array_equal(odd.u, -reflect(A.grid, odd.u))


@pytest.mark.parametrize("p", [2.0, 3.0])
def test_odd_above_first(p):
    A = make(32, 0.5, p)
    first = minimize_rayleigh(A)
    odd = solve_odd(A)
    assert odd.lam > first.lam * (1 + 1e-3)
    assert odd.u.max() > 0 > odd.u.min()


def test_odd_requires_symmetry():
    A = assemble(build_grid_2d((-1, 1, -1, 1), 0.25, "lshape"), make_fractional_kernel(0.5, 2, 2))
    with pytest.raises(ValueError):
        solve_odd(A)


def test_oracle_requires_p2():
    with pytest.raises(ValueError):
        dense_oracle_p2(make(8, 0.5, 3.0))


def test_oracle_self_consistent():
    A = make(64, 0.5, 2.0)
    orc = dense_oracle_p2(A)
    assert rayleigh(A, orc.vector) == pytest.approx(orc.lambda_min, rel=1e-12)
    assert np.all(np.diff(orc.spectrum) >= 0)


def test_oracle_single_node():
    A = make(1, 0.4, 2.0, 0.0, 1.0)
    assert dense_oracle_p2(A).lambda_min == pytest.approx(A.t[0] / A.grid.h, rel=1e-14)


def test_residual_oracle_pair():
    A = make(48, 0.4, 2.0)
    orc = dense_oracle_p2(A)
    res = EigenResult(orc.lambda_min, orc.vector, A.grid, 2.0, 0, 0.0, 0.0, True)
    assert residual(A, res) <= 1e-10


def test_residual_converged_solve():
    A = make(40, 0.5, 3.0)
    res = minimize_rayleigh(A)
    assert residual(A, res) <= 1e-6


def test_residual_random_function_is_large():
    A = make(32, 0.5, 2.0)
    u = normalize(np.random.default_rng(0).uniform(-1, 1, 32), 2.0, A.grid.h)
    res = EigenResult(rayleigh(A, u), u, A.grid, 2.0, 0, 0.0, 0.0, False)
    assert residual(A, res) > 1e-2


def test_normalize():
    u = normalize(np.array([-1.0, -3.0, 2.0]), 2.0, 1.0)
    assert u[1] > 0
    assert np.sum(u**2) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        normalize(np.zeros(3), 2.0)


def test_pow_change_accuracy():
    y = np.array([1.0, 0.7, -2.0, 0.0, 1.0])
    d = np.array([1e-12, -3e-15, 1e-13, 0.5, -2.0])
    p = 2.5
    import mpmath

    mpmath.mp.dps = 50
    ref = [float(abs(mpmath.mpf(a) + mpmath.mpf(b)) ** p - abs(mpmath.mpf(a)) ** p) for a, b in zip(y, d)]
    out = _pow_change(y, d, p)
    assert np.allclose(out, ref, rtol=1e-12, atol=0)


def test_symmetry_group_and_invariance():
    A = make(16, 0.5, 2.0)
    assert is_reflection_invariant(A)
    assert len(symmetry_group(A)) == 2
    B = assemble(build_grid_1d(-1, 1, 16), make_kernel(0.5, 2.0, 1, "sin_bump"))
    assert not is_reflection_invariant(B)
    assert len(symmetry_group(B)) == 1


@pytest.mark.parametrize("mask", ["all", "disk", "lshape"])
def test_two_dimensional_p15(mask):
    A = assemble(build_grid_2d((-1, 1, -1, 1), 0.2, mask), make_fractional_kernel(0.4, 1.5, 2))
    res = minimize_rayleigh(A)
    assert res.converged
    assert res.u.min() > 0


def test_unit_square_matches_oracle():
    A = assemble(build_grid_2d((0, 1, 0, 1), 1 / 12), make_fractional_kernel(0.4, 2.0, 2))
    res = minimize_rayleigh(A)
    assert abs(res.lam / dense_oracle_p2(A).lambda_min - 1) <= 1e-8


def test_options_validation():
    for kw in ({"tol": 0}, {"backtrack": 1.0}, {"armijo": 0}, {"max_iters": 0}, {"mode": "second"}):
        with pytest.raises(ValueError):
            SolveOptions(**kw)


def test_multiplier_kernel_converges():
    A = assemble(build_grid_1d(-1, 1, 32), make_kernel(0.5, 2.0, 1, "sin_bump"))
    res = minimize_rayleigh(A)
    assert res.converged
    assert abs(res.lam / dense_oracle_p2(A).lambda_min - 1) <= 1e-8
