"""Brute-force reference computations used to check the analytic results.

* exact diagonalization of the relative-coordinate problem of two
  excitations (hard walls at x = 0 and x = N/2 + 1),
* residuals of analytic eigenpairs under the non-dissipative and the full
  complex relative Hamiltonian,
* the single-excitation Hamiltonian of the ring applied to Bloch waves,
* fixed-step Runge-Kutta integration of the population rate equations,
  spontaneous and pumped.

These routines trade speed for transparency and are written independently
of the closed forms they check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .dynamics import DensityState
from .eigen import (
    ScatteringState,
    TwoExcState,
    WaveIndex,
    cos_half_K,
    hopping_dissipative,
    relative_energy_nd,
    relative_wavefunction,
)
from .model import ChainParams, coupling_rate, resolve_regime
from .momentum import distribution, state_for, two_exc_labels

MAX_DT = 0.01


@dataclass(frozen=True)
class TridiagonalProblem:
    """Relative-coordinate Hamiltonian on sites x = 1 ... dimension.

    Constant hopping between neighbours, ``impurity`` added on site 1.
    """

    dimension: int
    hopping: float
    impurity: float

    def __post_init__(self):
        if self.dimension < 16:
            raise ValueError(f"dimension must be >= 16, got {self.dimension}")

    @classmethod
    def from_params(cls, params: ChainParams, K: WaveIndex, dimension: int | None = None) -> "TridiagonalProblem":
        t = coupling_rate(params, 1).imag * cos_half_K(K)
        return cls(params.half_N if dimension is None else dimension, float(t), float(params.U))

    def diagonal(self) -> np.ndarray:
        d = np.zeros(self.dimension)
        d[0] = self.impurity
        return d

    def offdiagonal(self) -> np.ndarray:
        return np.full(self.dimension - 1, self.hopping)


def apply_relative(psi: np.ndarray, hopping, diagonal) -> np.ndarray:
    """H psi for a tridiagonal H with constant ``hopping`` and hard walls."""
    out = np.asarray(diagonal) * psi
    out[:-1] += hopping * psi[1:]
    out[1:] += hopping * psi[:-1]
    return out


def diagonalize_relative(problem: TridiagonalProblem):
    """All eigenvalues (ascending) and eigenvectors (columns)."""
    return eigh_tridiagonal(problem.diagonal(), problem.offdiagonal())


def detached_eigenvalue(problem: TridiagonalProblem, rel_tol: float = 1e-12) -> float | None:
    """Eigenvalue above the scattering band [-2|t|, 2|t|], if any."""
    evals = eigh_tridiagonal(problem.diagonal(), problem.offdiagonal(), eigvals_only=True)
    edge = 2 * abs(problem.hopping)
    top = float(evals[-1])
    if top > edge * (1 + rel_tol) + 1e-300 and top > 0:
        return top
    return None


def residual_vector(psi: np.ndarray, energy, hopping, diagonal) -> float:
    """||(H - E) psi|| / ||psi|| for the tridiagonal H."""
    psi = np.asarray(psi)
    norm = np.linalg.norm(psi)
    if norm == 0:
        raise ValueError("zero vector has no residual")
    r = apply_relative(psi, hopping, diagonal) - energy * psi
    return float(np.linalg.norm(r) / norm)


def residual(params: ChainParams, state: TwoExcState, dissipative: bool = False, dimension: int | None = None) -> float:
    """Residual of an analytic two-excitation eigenpair.

    With ``dissipative=False`` the wavefunction and energy of the problem
    with the real parts of the rates set to zero are checked against the
    real symmetric relative Hamiltonian. With ``dissipative=True`` the
    complex wavefunction and the complex energy are checked against the
    full complex relative Hamiltonian.
    """
    L = params.half_N if dimension is None else dimension
    psi = relative_wavefunction(params, state, length=L, dissipative=dissipative).psi[1:]
    diag = np.zeros(L, dtype=complex if dissipative else float)
    diag[0] = params.U
    if dissipative:
        g0 = coupling_rate(params, 0)
        diag = diag - 1j * g0
        return residual_vector(psi, state.energy, hopping_dissipative(params, state.K), diag)
    t = coupling_rate(params, 1).imag * cos_half_K(state.K)
    return residual_vector(psi, relative_energy_nd(params, state), t, diag)


def bloch_residual(params: ChainParams, k: WaveIndex, mode: str = "tight_binding") -> tuple[complex, float]:
    """Apply the ring Hamiltonian -i/2 Gamma_{d(n,m)} to a Bloch wave.

    Returns the Rayleigh quotient (the complex energy relative to omega0)
    and the relative residual. ``d`` is the shortest distance on the ring;
    ``tight_binding`` keeps d <= 1 only.
    """
    M = params.M
    n = np.arange(M)
    d = np.abs(n[:, None] - n[None, :])
    d = np.minimum(d, M - d)
    reach = 1 if mode == "tight_binding" else params.half_N
    rates = np.array([coupling_rate(params, x) for x in range(reach + 1)])
    H = np.where(d <= reach, -0.5j * rates[np.minimum(d, reach)], 0.0)
    v = np.exp(1j * k.ka * n) / np.sqrt(M)
    Hv = H @ v
    E = complex(np.vdot(v, Hv))
    return E, float(np.linalg.norm(Hv - E * v))


# ---------------------------------------------------------------------------
# rate equations


def _rk4(f, y, t_end, dt, record=None):
    if dt <= 0 or dt > MAX_DT + 1e-15:
        raise ValueError(f"step dt = {dt} must lie in (0, {MAX_DT}]")
    steps = int(round(t_end / dt))
    if steps < 0 or abs(steps * dt - t_end) > 1e-9:
        raise ValueError("t_end must be a non-negative multiple of dt")
    times = [0.0]
    traj = [y.copy()]
    every = max(1, int(round(record / dt))) if record else steps or 1
    for i in range(1, steps + 1):
        k1 = f(y)
        k2 = f(y + dt / 2 * k1)
        k3 = f(y + dt / 2 * k2)
        k4 = f(y + dt * k3)
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if i % every == 0 or i == steps:
            times.append(i * dt)
            traj.append(y.copy())
    return np.array(times), traj


def _feed_over_k(params, K, nu, form, regime, normalize=True):
    """b_k = |eta_{K/2 - k}|^2 / 2 of (K, nu) over k (ell order), by explicit loop."""
    dist = distribution(params, K, nu, form, regime, normalize=normalize)
    b = np.zeros(params.M)
    for k in WaveIndex.grid(params.M):
        b[k.ell] = abs(dist.at(K.half() - k)) ** 2 / 2
    return b


def integrate_spontaneous(
    params: ChainParams,
    initial: DensityState,
    t_end: float,
    dt: float = MAX_DT,
    record: float | None = None,
    form: str = "asymptotic",
    regime: str | None = None,
    rates: str = "simplified",
):
    """Integrate the spontaneous rate equations; returns (times, list of DensityState)."""
    regime = resolve_regime(params, regime)
    M = params.M
    labels = list(initial.pop2)
    if rates == "simplified":
        gk = np.ones(M)
        gt = np.full(len(labels), 2.0)
    else:
        from .eigen import single_dispersion

        gk = np.array([single_dispersion(params, k).decay for k in WaveIndex.grid(M)])
        gt = np.array([state_for(params, K, nu, regime)[0].decay for K, nu in labels])
    B = np.array([_feed_over_k(params, K, nu, form, regime) for K, nu in labels]).reshape(len(labels), M)
    n2 = len(labels)

    def f(y):
        p0, p1, p2 = y[0], y[1 : M + 1], y[M + 1 :]
        dp2 = -gt * p2
        dp1 = -gk * p1 + (gt * p2) @ B
        dp0 = np.sum(gk * p1)
        return np.concatenate(([dp0], dp1, dp2))

    y0 = np.concatenate(([initial.pop0], initial.pop1, [initial.pop2[l] for l in labels]))
    times, traj = _rk4(f, y0, t_end, dt, record)
    states = [DensityState(M, float(y[0]), y[1 : M + 1].copy(), dict(zip(labels, map(float, y[M + 1 :])))) for y in traj]
    assert all(len(s.pop2) == n2 for s in states)
    return times, states


def integrate_pumped(
    params: ChainParams,
    pumps,
    t_end: float,
    dt: float = MAX_DT,
    record: float | None = None,
    form: str = "asymptotic",
    regime: str | None = None,
    normalize: bool = True,
):
    """Integrate the pumped rate equations from the vacuum with simplified decay rates.

    State vector: N_0, N_k (M values), N_{K nu} for every K and label nu.
    Returns (times, list of (N0, N_k array, dict of N_{K nu})). The trace is
    conserved exactly only with ``normalize=True``, where every pair state
    feeds the single-excitation states with branching ratios summing to one.
    """
    regime = resolve_regime(params, regime)
    M = params.M
    grid = WaveIndex.grid(M)
    labels = []
    for K in grid:
        for nu in two_exc_labels(params, K, regime):
            labels.append((K, nu))
    index = {lab: i for i, lab in enumerate(labels)}
    dists = {lab: distribution(params, lab[0], lab[1], form, regime, normalize=normalize) for lab in labels}
    n2 = len(labels)
    # pump-in: (pump n, label) -> coefficient and source single state
    rows, cols, coef = [], [], []
    for pump in pumps.pumps:
        for (K, nu), i in index.items():
            val = pump.rate * abs(dists[(K, nu)].at(K.half() - pump.k)) ** 2
            if val:
                rows.append(i)
                cols.append((K - pump.k).ell)
                coef.append(val)
    rows, cols, coef = np.array(rows, dtype=int), np.array(cols, dtype=int), np.array(coef)
    B = np.zeros((n2, M))
    for (K, nu), i in index.items():
        B[i] = _feed_over_k(params, K, nu, form, regime, normalize)
    src = np.zeros(M)
    for pump in pumps.pumps:
        src[pump.k.ell] += pump.rate

    def f(y):
        N0, N1, N2 = y[0], y[1 : M + 1], y[M + 1 :]
        flow = coef * N1[cols]
        dN2 = -2.0 * N2 + np.bincount(rows, flow, n2)
        dN1 = -N1 - np.bincount(cols, flow, M) + src * N0 + (2.0 * N2) @ B
        dN0 = np.sum(N1) - np.sum(src) * N0
        return np.concatenate(([dN0], dN1, dN2))

    y0 = np.zeros(1 + M + n2)
    y0[0] = 1.0
    times, traj = _rk4(f, y0, t_end, dt, record)
    out = [(float(y[0]), y[1 : M + 1].copy(), dict(zip(labels, y[M + 1 :]))) for y in traj]
    return times, out
