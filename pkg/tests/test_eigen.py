import numpy as np
import pytest

from atomchain import oracle
from atomchain.eigen import (
    OffGridError,
    WaveIndex,
    bound_exists,
    bound_state,
    cos_half_K,
    phase_shift,
    relative_wavefunction,
    scattering_energy,
    scattering_state,
    single_dispersion,
)
from atomchain.model import ChainParams, coupling_rate

M = 101


@pytest.fixture
def free():
    return ChainParams(M=M, lambda_over_a=0.5)


# grid arithmetic


def test_grid_is_centered_and_ordered():
    grid = WaveIndex.grid(7)
    assert [k.m for k in grid] == [-3, -2, -1, 0, 1, 2, 3]
    assert grid[3].is_zero


def test_half_inverts_doubling():
    for k in WaveIndex.grid(M):
        assert k.half().times(2) == k
        assert k.times(2).half() == k


def test_addition_wraps():
    a = WaveIndex.from_m(40, M)
    b = WaveIndex.from_m(30, M)
    assert (a + b).m == 70 - M
    assert (a + b - b) == a
    assert (-a).m == -40


def test_mixed_grids_rejected():
    with pytest.raises(ValueError):
        WaveIndex.zero(5) + WaveIndex.zero(7)


def test_off_grid_error_names_nearest_value():
    with pytest.raises(OffGridError) as info:
        WaveIndex.from_ka(np.pi / 2, M)
    assert info.value.nearest.m == 25
    assert "m = 25" in str(info.value)


def test_nearest_residual_bounded():
    k, res = WaveIndex.nearest(np.pi / 2, M)
    assert k.m == 25 and abs(res) <= 0.5
    assert WaveIndex.from_ka(k.ka, M) == k


# single excitation


def test_tight_binding_dispersion(free):
    g0 = coupling_rate(free, 0)
    g1 = coupling_rate(free, 1)
    for k in WaveIndex.grid(M)[::10]:
        s = single_dispersion(free, k)
        assert s.decay == pytest.approx(g0.real + 2 * g1.real * np.cos(k.ka), abs=1e-15)
        assert s.re_energy == pytest.approx(g0.imag / 2 + g1.imag * np.cos(k.ka), abs=1e-15)


def test_decay_is_gamma0_where_cos_vanishes(free):
    # nearest grid point to ka = pi/2: the decay departs from gamma0 only through cos(ka)
    k = WaveIndex.nearest(np.pi / 2, M)[0]
    s = single_dispersion(free, k)
    assert abs(s.decay - 1.0) <= 2 * abs(coupling_rate(free, 1).real * np.cos(k.ka)) + 1e-15
    assert abs(s.decay - 1.0) < 1e-3


def test_dicke_limit_full_range():
    params = ChainParams(M=51, lambda_over_a=2 * np.pi / 1e-4)
    decay = single_dispersion(params, WaveIndex.zero(51), "full_range").decay
    assert decay == pytest.approx(51, rel=1e-3)


def test_unknown_dispersion_mode(free):
    with pytest.raises(ValueError):
        single_dispersion(free, WaveIndex.zero(M), "dense")


@pytest.mark.parametrize("mode", ["tight_binding", "full_range"])
def test_bloch_waves_are_eigenvectors_of_the_ring(free, mode):
    for m in (0, 7, -30):
        k = WaveIndex.from_m(m, M)
        E, res = oracle.bloch_residual(free, k, mode)
        assert res < 1e-12
        assert E == pytest.approx(single_dispersion(free, k, mode).energy, abs=1e-12)


# two excitations


def test_phase_shift_free_is_minus_one(free):
    for K in WaveIndex.grid(M)[::9]:
        assert phase_shift(free, K, WaveIndex.from_m(3, M)) == -1


def test_phase_shift_strong_limit(free):
    strong = free.with_(U=1e6)
    for K in WaveIndex.grid(M)[::9]:
        for m in (1, 12, -40):
            p = WaveIndex.from_m(m, M)
            assert abs(phase_shift(strong, K, p) + np.exp(2j * p.ka)) <= 1e-4


def test_phase_shift_zero_p_rejected(free):
    with pytest.raises(ValueError):
        phase_shift(free.with_(U=1.0), WaveIndex.zero(M), WaveIndex.zero(M))


def test_free_wavefunction_is_a_sine(free):
    K = WaveIndex.zero(M)
    p = WaveIndex.from_m(9, M)
    _, wf = scattering_state(free, K, p)
    x = np.arange(len(wf.psi))
    assert np.allclose(wf.psi, 2j * np.sin(p.ka * x) / np.sqrt(M), atol=1e-15)


@pytest.mark.parametrize("U", [0.0, 0.3, 4.0, 1e6])
def test_scattering_energy_is_sum_of_single_energies(U):
    params = ChainParams(M=M, lambda_over_a=0.6, U=U)
    K = WaveIndex.from_m(17, M)
    p = WaveIndex.from_m(-5, M)
    k1 = K.half() + p
    k2 = K.half() - p
    want = single_dispersion(params, k1).energy + single_dispersion(params, k2).energy
    state, _ = scattering_state(params, K, p)
    assert state.energy == pytest.approx(want, abs=1e-14)
    assert scattering_energy(params, K, p) == state.energy


def test_no_bound_state_without_interaction(free):
    assert all(bound_state(free, K) is None for K in WaveIndex.grid(M))


def test_strong_bound_state_is_nearest_neighbour_pair(free):
    strong = free.with_(U=1e6)
    bs, wf = bound_state(strong, WaveIndex.from_m(10, M))
    expected = np.zeros(len(wf.psi))
    expected[1] = 1.0
    assert bs.alpha_nd == 0.0
    assert np.array_equal(wf.psi, expected.astype(complex))


def test_bound_alpha_inside_unit_disc_and_decreasing_in_U():
    K = WaveIndex.zero(M)
    last = np.inf
    for U in (0.15, 0.3, 1.0, 5.0, 50.0):
        params = ChainParams(M=M, lambda_over_a=0.5, U=U)
        bs, _ = bound_state(params, K)
        assert abs(bs.alpha_nd) < 1 and abs(bs.alpha) < 1
        assert abs(bs.alpha_nd) < last
        last = abs(bs.alpha_nd)


def test_existence_criterion_threshold():
    params = ChainParams(M=M, lambda_over_a=0.5, U=0.05)
    t = abs(coupling_rate(params, 1).imag)
    for K in WaveIndex.grid(M):
        assert bound_exists(params, K) == (t * abs(cos_half_K(K)) < 0.05)


def test_bound_wavefunction_normalized_on_half_line():
    params = ChainParams(M=M, lambda_over_a=0.5, U=0.3)
    bs, _ = bound_state(params, WaveIndex.zero(M))
    wf = relative_wavefunction(params, bs, length=2000)
    assert np.sum(np.abs(wf.psi) ** 2) == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("U", [0.3, 2.0, 500.0])
def test_bound_state_residuals(U):
    params = ChainParams(M=M, lambda_over_a=0.5, U=U)
    bs, _ = bound_state(params, WaveIndex.from_m(4, M))
    assert oracle.residual(params, bs) < 1e-12
    assert oracle.residual(params, bs, dissipative=True) < 1e-12


def test_strong_bound_state_residual_is_of_order_t_over_U():
    params = ChainParams(M=M, lambda_over_a=0.5, U=1e6)
    K = WaveIndex.from_m(4, M)
    bs, _ = bound_state(params, K)
    t = abs(coupling_rate(params, 1).imag * cos_half_K(K))
    assert oracle.residual(params, bs) == pytest.approx(t, rel=1e-9)
    assert oracle.residual(params, bs) / params.U < 1e-6


def test_bound_energy_against_exact_diagonalization():
    params = ChainParams(M=801, lambda_over_a=0.5, U=0.5)
    K = WaveIndex.zero(801)
    bs, _ = bound_state(params, K)
    ev = oracle.detached_eigenvalue(oracle.TridiagonalProblem.from_params(params, K))
    t = coupling_rate(params, 1).imag * cos_half_K(K)
    assert ev == pytest.approx(params.U + t * t / params.U, rel=1e-10)
    assert bs.re_energy - coupling_rate(params, 0).imag == pytest.approx(ev, rel=1e-2)


def test_scattering_residual_shrinks_with_chain_length():
    residuals = []
    for Mi in (51, 201, 801):
        params = ChainParams(M=Mi, lambda_over_a=0.5, U=2.0)
        K = WaveIndex.from_m(Mi // 8, Mi)
        p = WaveIndex.nearest(np.pi / 3, Mi)[0]
        state, _ = scattering_state(params, K, p)
        residuals.append((oracle.residual(params, state), oracle.residual(params, state, dissipative=True)))
    for (a, b), (c, d) in zip(residuals, residuals[1:]):
        assert c < a and d < b
