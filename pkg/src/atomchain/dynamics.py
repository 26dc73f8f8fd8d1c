"""Spontaneous decay of few-excitation eigenstates and far-field patterns.

Populations obey the rate equations that follow from the Lindblad equation
in the eigenbasis. Two-excitation states decay with their total rate into
single-excitation states |k> with partial rates b_k Gamma_tot, and |k>
decays to the ground state with Gamma_k. By default the simplified rates
Gamma_k = gamma0 and Gamma_tot = 2 gamma0 are used.

Branching ratios are taken from the collective dipole moments rescaled to
satisfy the sum rule exactly, so the evolution is trace preserving and the
emitted intensity of every eigenstate decays as a single exponential.

Far-field intensities are normalized as G1 / (xi^2 |w|^2 M): for a single
excitation detector wavenumber kbar this is the expectation value
``pop1[kbar] + sum_{K nu} |eta_{K/2 - kbar}|^2 pop2[K nu]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .eigen import (
    BoundState,
    ScatteringState,
    SingleExcState,
    WaveIndex,
    single_dispersion,
)
from .model import ChainParams, resolve_regime
from .momentum import branching_from_eta, distribution, state_for

RATE_MODELS = ("simplified", "tight_binding")


@dataclass(frozen=True)
class DensityState:
    """Diagonal (population) part of the density matrix.

    ``pop1`` is indexed by the grid index ``ell`` of k. ``pop2`` maps
    ``(K, nu)`` labels to populations. Coherences stay empty for the
    eigenstate initial conditions handled here.
    """

    M: int
    pop0: float
    pop1: np.ndarray
    pop2: dict
    coherences: dict = field(default_factory=dict)

    @classmethod
    def vacuum(cls, M: int) -> "DensityState":
        return cls(M, 1.0, np.zeros(M), {})

    @classmethod
    def single(cls, k: WaveIndex) -> "DensityState":
        pop1 = np.zeros(k.M)
        pop1[k.ell] = 1.0
        return cls(k.M, 0.0, pop1, {})

    @classmethod
    def pair(cls, K: WaveIndex, nu) -> "DensityState":
        return cls(K.M, 0.0, np.zeros(K.M), {(K, nu): 1.0})

    @property
    def trace(self) -> float:
        return self.pop0 + float(np.sum(self.pop1)) + float(sum(self.pop2.values()))


def _feeding(params, K, nu, form, regime, normalize=True):
    """2 b_k over the k grid for the pair state (K, nu)."""
    dist = distribution(params, K, nu, form, regime)
    b, _ = branching_from_eta(dist.eta, K, normalize=normalize)
    return 2 * b


def _phi(x):
    """(1 - exp(-x)) / x, continuous at x = 0."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-8
    safe = np.where(small, 1.0, x)
    return np.where(small, 1 - x / 2, -np.expm1(-safe) / safe)


def evolve_spontaneous(
    params: ChainParams,
    initial: DensityState,
    t: float,
    form: str = "asymptotic",
    regime: str | None = None,
    rates: str = "simplified",
) -> DensityState:
    """Closed-form populations at time ``t`` (units of 1/gamma0)."""
    if t < 0:
        raise ValueError(f"time must be non-negative, got {t}")
    if rates not in RATE_MODELS:
        raise ValueError(f"unknown rate model {rates!r}")
    if initial.M != params.M:
        raise ValueError("initial state belongs to a different chain")
    regime = resolve_regime(params, regime)
    M = params.M
    if rates == "simplified":
        gk = np.ones(M)
    else:
        gk = np.array([single_dispersion(params, k).decay for k in WaveIndex.grid(M)])
    pop1 = np.exp(-gk * t) * initial.pop1
    pop2 = {}
    for (K, nu), p0 in initial.pop2.items():
        if rates == "simplified":
            gtot = 2.0
        else:
            gtot = state_for(params, K, nu, regime)[0].decay
        feed = _feeding(params, K, nu, form, regime) / 2  # b_k
        # b gtot / (gtot - gk) (e^{-gk t} - e^{-gtot t}) written without cancellation
        pop1 = pop1 + feed * gtot * t * np.exp(-gk * t) * _phi((gtot - gk) * t) * p0
        pop2[(K, nu)] = float(np.exp(-gtot * t) * p0)
    pop0 = 1.0 - float(np.sum(pop1)) - sum(pop2.values())
    # the complement also absorbs whatever the initial trace was off by
    pop0 += initial.trace - 1.0
    return DensityState(M, pop0, pop1, pop2)


def intensity(
    params: ChainParams, state: DensityState, form: str = "asymptotic", regime: str | None = None
) -> np.ndarray:
    """Normalized far-field intensity for every detector wavenumber kbar (ell order)."""
    out = np.array(state.pop1, dtype=float)
    for (K, nu), pop in state.pop2.items():
        out = out + _feeding(params, K, nu, form, regime) * pop
    return out


# ---------------------------------------------------------------------------
# angles


def angle_to_k(params: ChainParams, beta: float) -> tuple[WaveIndex, float]:
    """Detector elevation -> grid wavenumber kbar and residual (grid units)."""
    if abs(beta) > np.pi / 2 + 1e-12:
        raise ValueError(f"|beta| must be <= pi/2, got {beta}")
    return WaveIndex.nearest(params.k_at_a * np.sin(beta), params.M)


def bragg_angles(params: ChainParams, k: WaveIndex) -> list[float]:
    """All elevations beta with sin(beta) = (lambda/a) (ka / 2 pi + n), sorted."""
    lam = params.lambda_over_a
    base = k.m / k.M
    n_lo = int(np.floor(-1 / lam - base)) - 1
    n_hi = int(np.ceil(1 / lam - base)) + 1
    out = []
    for n in range(n_lo, n_hi + 1):
        s = lam * (base + n)
        if abs(s) <= 1 + 1e-12:
            out.append(float(np.arcsin(np.clip(s, -1.0, 1.0))))
    return sorted(out)


def angular_width(params: ChainParams, beta: float) -> float:
    """Width in beta of one grid cell of kbar around ``beta``."""
    h = params.lambda_over_a / (2 * params.M)
    s = np.sin(beta)
    return float(np.arcsin(min(1.0, s + h)) - np.arcsin(max(-1.0, s - h)))


@dataclass(frozen=True)
class EmissionSample:
    """One point of an emission pattern.

    ``width`` is the angular bin of a discrete allowed angle and ``None``
    for the continuous bound-state pattern. ``k`` is the detector
    wavenumber for discrete samples.
    """

    beta_det: float
    value: float
    t_ret: float
    width: float | None = None
    k: WaveIndex | None = None


def bound_pattern_value(params: ChainParams, K: WaveIndex, beta, regime: str | None = None):
    """Continuous bound-state pattern G1 / (xi^2 |w|^2) at t = 0 (no 1/M).

    Equals 4 (1 - alpha^2) (cos q - alpha)^2 / (1 - 2 alpha cos q + alpha^2)^2
    with q a = Ka/2 - k_at a sin(beta); for alpha = 0 this is 4 cos^2(q a).
    """
    found = state_for(params, K, "BS", regime)[0]
    alpha = found.alpha_nd
    qa = K.half().ka - params.k_at_a * np.sin(np.asarray(beta, dtype=float))
    c = np.cos(qa)
    return 4 * (1 - alpha * alpha) * (c - alpha) ** 2 / (1 - 2 * alpha * c + alpha * alpha) ** 2


def emission_pattern(
    params: ChainParams,
    state,
    t_ret: float = 0.0,
    betas=None,
    beta_range: tuple[float, float] = (-np.pi / 2, np.pi / 2),
    form: str = "asymptotic",
    regime: str | None = None,
) -> list[EmissionSample]:
    """Angle-resolved intensity emitted by an eigenstate at retarded time ``t_ret``.

    ``state`` is a :class:`SingleExcState`, a :class:`WaveIndex` (the state
    |k>), a :class:`ScatteringState` or a :class:`BoundState`. Discrete
    states give samples at every allowed angle inside ``beta_range``. The
    bound state gives the continuous pattern at ``betas``.
    """
    if t_ret < 0:
        raise ValueError("t_ret must be non-negative")
    decay = np.exp(-t_ret)
    if isinstance(state, BoundState):
        if betas is None:
            raise ValueError("the bound-state pattern needs an explicit beta grid")
        values = bound_pattern_value(params, state.K, betas, state.regime) * decay
        return [EmissionSample(float(b), float(v), t_ret) for b, v in zip(betas, values)]
    M = params.M
    if isinstance(state, (SingleExcState, WaveIndex)):
        k = state.k if isinstance(state, SingleExcState) else state
        per_k = np.zeros(M)
        per_k[k.ell] = 1.0
    elif isinstance(state, ScatteringState):
        per_k = _feeding(params, state.K, state.p, form, state.regime)
    else:
        raise TypeError(f"unsupported state type {type(state).__name__}")
    lo, hi = beta_range
    samples = []
    for kbar in WaveIndex.grid(M):
        for beta in bragg_angles(params, kbar):
            if lo - 1e-12 <= beta <= hi + 1e-12:
                samples.append(
                    EmissionSample(beta, float(per_k[kbar.ell] * decay), t_ret, angular_width(params, beta), kbar)
                )
    samples.sort(key=lambda s: (s.beta_det, s.k.ell))
    return samples


def pattern_for_label(params: ChainParams, K: WaveIndex, nu, **kwargs) -> list[EmissionSample]:
    """Convenience wrapper building the eigenstate from its label first."""
    state, _ = state_for(params, K, nu, kwargs.get("regime"))
    return emission_pattern(params, state, **kwargs)
