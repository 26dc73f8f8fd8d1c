import numpy as np
import pytest

from atomchain import oracle, pumped
from atomchain.dynamics import DensityState, evolve_spontaneous
from atomchain.eigen import WaveIndex, bound_state, cos_half_K
from atomchain.model import ChainParams, coupling_rate
from atomchain.oracle import TridiagonalProblem


def test_problem_dimension_floor():
    with pytest.raises(ValueError):
        TridiagonalProblem(8, 0.1, 1.0)


def test_tridiagonal_structure():
    prob = TridiagonalProblem(20, 0.3, 2.0)
    assert prob.diagonal()[0] == 2.0 and not np.any(prob.diagonal()[1:])
    assert np.all(prob.offdiagonal() == 0.3) and len(prob.offdiagonal()) == 19
    evals, vecs = oracle.diagonalize_relative(prob)
    assert np.all(np.diff(evals) >= 0)
    H = np.diag(prob.diagonal()) + np.diag(prob.offdiagonal(), 1) + np.diag(prob.offdiagonal(), -1)
    assert np.allclose(H @ vecs, vecs * evals, atol=1e-13)


def test_free_band_has_no_detached_level():
    assert oracle.detached_eigenvalue(TridiagonalProblem(400, -0.12, 0.0)) is None


@pytest.mark.parametrize("factor", [5, 50])
def test_detached_level(factor):
    params = ChainParams(M=801, lambda_over_a=0.5)
    K = WaveIndex.zero(801)
    t = coupling_rate(params, 1).imag * cos_half_K(K)
    params = params.with_(U=factor * abs(t))
    ev = oracle.detached_eigenvalue(TridiagonalProblem.from_params(params, K))
    assert ev == pytest.approx(params.U + t * t / params.U, rel=1e-6)


def test_residual_of_zero_vector_raises():
    with pytest.raises(ValueError):
        oracle.residual_vector(np.zeros(5), 1.0, 0.1, np.zeros(5))


def test_residual_of_exact_eigenvector():
    prob = TridiagonalProblem(30, 0.2, 1.0)
    evals, vecs = oracle.diagonalize_relative(prob)
    assert oracle.residual_vector(vecs[:, 3], evals[3], prob.hopping, prob.diagonal()) < 1e-13


def test_residual_with_explicit_dimension():
    params = ChainParams(M=101, lambda_over_a=0.5, U=1.0)
    bs, _ = bound_state(params, WaveIndex.zero(101))
    assert oracle.residual(params, bs, dimension=200) < 1e-12


def test_rk4_step_limit():
    params = ChainParams(M=5, lambda_over_a=0.5)
    init = DensityState.single(WaveIndex.zero(5))
    with pytest.raises(ValueError):
        oracle.integrate_spontaneous(params, init, 1.0, dt=0.02)
    with pytest.raises(ValueError):
        oracle.integrate_spontaneous(params, init, 1.005, dt=0.01)


def test_spontaneous_integration_matches_closed_form():
    params = ChainParams(M=11, lambda_over_a=0.5, U=1.5)
    K = WaveIndex.from_m(1, 11)
    init = DensityState.pair(K, "BS")
    ts, states = oracle.integrate_spontaneous(params, init, 5.0, record=1.0)
    assert len(ts) == 6
    for t, st in zip(ts, states):
        ana = evolve_spontaneous(params, init, t)
        assert np.max(np.abs(ana.pop1 - st.pop1)) < 1e-9
        assert st.trace == pytest.approx(1.0, abs=1e-12)


def test_spontaneous_integration_tight_binding_rates():
    params = ChainParams(M=11, lambda_over_a=0.4, U=0.7)
    init = DensityState.pair(WaveIndex.from_m(2, 11), WaveIndex.from_m(3, 11))
    ts, states = oracle.integrate_spontaneous(params, init, 3.0, rates="tight_binding")
    ana = evolve_spontaneous(params, init, 3.0, rates="tight_binding")
    assert np.max(np.abs(ana.pop1 - states[-1].pop1)) < 1e-9


def test_zero_pump_stays_in_vacuum():
    params = ChainParams(M=7, lambda_over_a=0.5, U=2.0)
    cfg = pumped.PumpConfig((pumped.Pump(WaveIndex.from_m(1, 7), 0.0),))
    _, out = oracle.integrate_pumped(params, cfg, 1.0)
    N0, N1, N2 = out[-1]
    assert N0 == 1.0 and not np.any(N1) and not any(N2.values())


def test_pumped_integration_relaxes_to_the_stationary_solution():
    M, Xi = 11, 1e-3
    params = ChainParams(M=M, lambda_over_a=0.5, U=2.0)
    kP = WaveIndex.from_m(2, M)
    cfg = pumped.PumpConfig((pumped.Pump(kP, Xi),))
    _, out = oracle.integrate_pumped(params, cfg, 30.0)
    N0, N1, N2 = out[-1]
    assert N0 + N1.sum() + sum(N2.values()) == pytest.approx(1.0, abs=1e-12)
    stat = pumped.rate_steady_numeric(params, cfg, normalize=True)
    assert max(abs(N1[k.ell] - stat.n1(k)) for k in WaveIndex.grid(M)) < 1e-12
    assert max(abs(v - stat.n2(*lab)) for lab, v in N2.items()) < 1e-14
    ana = pumped.single_pump_steady(params, kP, Xi, normalize=True)
    assert N1[kP.ell] == pytest.approx(ana.n1(kP), rel=10 * Xi)
