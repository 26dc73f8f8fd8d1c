"""Single- and two-excitation eigenstates of the tight-binding chain.

Wavenumbers live on the discrete grid ``ka = 2 pi m / M`` with the centered
integer ``m`` in ``[-N/2, N/2]``. They are stored as :class:`WaveIndex`
objects so that sums, differences and halving are exact integer operations
modulo M. Halving uses the modular inverse of 2, which exists because M is
odd; ``K.half()`` is therefore a grid point ``kappa`` with
``2 kappa = K (mod 2 pi)``.

Two-excitation states are labelled by the center-of-mass wavenumber K and a
relative wavenumber p. The pair wavenumbers are ``k1 = K/2 + p`` and
``k2 = K/2 - p``. Energies are complex: ``energy = E - n omega0`` with the
real part the (Lamb shifted) level position and ``-2 Im`` the total decay
rate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .model import ChainParams, coupling_rate, coupling_rates, resolve_regime

#: Smallest denominator accepted in the phase-shift formula.
DEGENERATE_TOL = 1e-12


class OffGridError(ValueError):
    """A wavenumber does not lie on the discrete grid of the chain."""

    def __init__(self, ka: float, nearest: "WaveIndex"):
        self.ka = ka
        self.nearest = nearest
        super().__init__(
            f"ka = {ka!r} is not on the grid of M = {nearest.M}; "
            f"nearest grid value is m = {nearest.m} (ka = {nearest.ka!r})"
        )


class DegenerateParameterError(ValueError):
    """The phase-shift formula is 0/0 (U = 0 together with cos(Ka/2) = 0)."""


@dataclass(frozen=True, order=True)
class WaveIndex:
    """Exact grid wavenumber. ``ell`` runs over 0 ... M-1, ``m = ell - N/2``."""

    ell: int
    M: int

    def __post_init__(self):
        if self.M < 3 or self.M % 2 == 0:
            raise ValueError(f"grid size must be odd and >= 3, got {self.M}")
        if not 0 <= self.ell < self.M:
            raise ValueError(f"ell must lie in [0, {self.M}), got {self.ell}")

    @classmethod
    def from_m(cls, m: int, M: int) -> "WaveIndex":
        return cls((int(m) + M // 2) % M, M)

    @classmethod
    def zero(cls, M: int) -> "WaveIndex":
        return cls.from_m(0, M)

    @classmethod
    def nearest(cls, ka: float, M: int) -> tuple["WaveIndex", float]:
        """Snap ``ka`` (any real) to the grid; return the index and residual.

        The residual is in units of the grid spacing and lies in [-1/2, 1/2].
        """
        frac = ka * M / (2 * np.pi)
        m = int(np.round(frac))
        residual = float(frac - m)
        return cls.from_m(m, M), residual

    @classmethod
    def from_ka(cls, ka: float, M: int, tol: float = 1e-9) -> "WaveIndex":
        """Exact conversion; raises :class:`OffGridError` if ``ka`` is off grid."""
        idx, residual = cls.nearest(ka, M)
        if abs(residual) > tol:
            raise OffGridError(ka, idx)
        return idx

    @classmethod
    def grid(cls, M: int) -> list["WaveIndex"]:
        return [cls(ell, M) for ell in range(M)]

    @property
    def m(self) -> int:
        return self.ell - self.M // 2

    @property
    def ka(self) -> float:
        return 2 * np.pi * self.m / self.M

    def _check(self, other: "WaveIndex"):
        if not isinstance(other, WaveIndex) or other.M != self.M:
            raise ValueError("wave indices must share the same grid")

    def __add__(self, other: "WaveIndex") -> "WaveIndex":
        self._check(other)
        return WaveIndex.from_m(self.m + other.m, self.M)

    def __sub__(self, other: "WaveIndex") -> "WaveIndex":
        self._check(other)
        return WaveIndex.from_m(self.m - other.m, self.M)

    def __neg__(self) -> "WaveIndex":
        return WaveIndex.from_m(-self.m, self.M)

    def times(self, n: int) -> "WaveIndex":
        return WaveIndex.from_m(n * self.m, self.M)

    def half(self) -> "WaveIndex":
        """The grid point kappa with 2 kappa = self, via the inverse of 2 mod M."""
        return WaveIndex.from_m(self.m * ((self.M + 1) // 2), self.M)

    @property
    def is_zero(self) -> bool:
        return self.m == 0

    def __repr__(self) -> str:
        return f"WaveIndex(m={self.m}, M={self.M})"


def grid_m(M: int) -> np.ndarray:
    """Centered integers m in ell order."""
    return np.arange(M) - M // 2


def wrap_m(m, M: int):
    """Reduce integer(s) m to the centered range [-N/2, N/2]."""
    return (np.asarray(m) + M // 2) % M - M // 2


# ---------------------------------------------------------------------------
# single excitation


@dataclass(frozen=True)
class SingleExcState:
    k: WaveIndex
    re_energy: float
    decay: float

    @property
    def energy(self) -> complex:
        return complex(self.re_energy, -self.decay / 2)


def single_dispersion(params: ChainParams, k: WaveIndex, mode: str = "tight_binding") -> SingleExcState:
    """Single-excitation level ``Re E - omega0`` and decay rate ``Gamma_k``."""
    ka = k.ka
    g0 = coupling_rate(params, 0)
    if mode == "tight_binding":
        g1 = coupling_rate(params, 1)
        re_energy = g0.imag / 2 + g1.imag * np.cos(ka)
        decay = g0.real + 2 * g1.real * np.cos(ka)
    elif mode == "full_range":
        rates = coupling_rates(params, params.half_N)
        x = np.arange(1, params.half_N + 1)
        c = np.cos(ka * x)
        re_energy = g0.imag / 2 + float(np.sum(rates[1:].imag * c))
        decay = g0.real + 2 * float(np.sum(rates[1:].real * c))
    else:
        raise ValueError(f"unknown dispersion mode {mode!r}")
    return SingleExcState(k, float(re_energy), float(decay))


# ---------------------------------------------------------------------------
# two excitations


@dataclass(frozen=True)
class ScatteringState:
    """Scattering state |K p>. ``phase`` is the e^{i delta} used in the wavefunction."""

    K: WaveIndex
    p: WaveIndex
    phase: complex
    energy: complex
    regime: str

    kind = "scattering"

    @property
    def nu(self) -> WaveIndex:
        return self.p

    @property
    def re_energy(self) -> float:
        return self.energy.real

    @property
    def decay(self) -> float:
        return -2 * self.energy.imag


@dataclass(frozen=True)
class BoundState:
    """Two-body bound state |K BS>.

    ``alpha`` is the complex decay parameter -i Gamma_1 cos(Ka/2) / U of the
    dissipative problem. ``alpha_nd`` is its counterpart with the real parts
    of the rates set to zero; it is real and defines the wavefunction used
    for matrix elements. In the strong regime ``alpha_nd`` is 0.
    """

    K: WaveIndex
    alpha: complex
    alpha_nd: float
    energy: complex
    regime: str

    kind = "bound"
    nu = "BS"

    @property
    def re_energy(self) -> float:
        return self.energy.real

    @property
    def decay(self) -> float:
        return -2 * self.energy.imag


TwoExcState = Union[ScatteringState, BoundState]


@dataclass(frozen=True)
class RelativeWavefunction:
    """Relative-coordinate amplitudes Psi_x for x = 0 ... len(psi) - 1."""

    psi: np.ndarray
    M: int

    def __post_init__(self):
        if self.psi[0] != 0:
            raise ValueError("Psi_0 must vanish (hard-core constraint)")

    @property
    def length(self) -> int:
        return len(self.psi) - 1


def cos_half_K(K: WaveIndex) -> float:
    return float(np.cos(K.half().ka))


def hopping_nd(params: ChainParams, K: WaveIndex) -> float:
    """Relative-coordinate hopping Im(Gamma_1) cos(Ka/2) with Re(Gamma) zeroed."""
    return coupling_rate(params, 1).imag * cos_half_K(K)


def phase_shift(params: ChainParams, K: WaveIndex, p: WaveIndex) -> complex:
    """Scattering phase e^{i delta_Kp} of the non-dissipative problem."""
    if p.is_zero:
        raise ValueError("relative wavenumber p must be nonzero")
    if params.U == 0:
        return complex(-1.0)
    t = hopping_nd(params, K)
    pa = p.ka
    num = t - params.U * np.exp(1j * pa)
    den = t - params.U * np.exp(-1j * pa)
    if abs(den) < DEGENERATE_TOL:
        raise DegenerateParameterError(f"phase shift is undefined for K={K}, p={p}")
    return complex(-num / den)


def _scattering_phase(params: ChainParams, K: WaveIndex, p: WaveIndex, regime: str) -> complex:
    if regime == "free":
        return complex(-1.0)
    if regime == "strong":
        return complex(-np.exp(2j * p.ka))
    return phase_shift(params, K, p)


def scattering_energy(params: ChainParams, K: WaveIndex, p: WaveIndex) -> complex:
    g0 = coupling_rate(params, 0)
    g1 = coupling_rate(params, 1)
    c = cos_half_K(K) * np.cos(p.ka)
    re = g0.imag + 2 * g1.imag * c
    decay = 2 * g0.real + 4 * g1.real * c
    return complex(re, -decay / 2)


def bound_energy(params: ChainParams, K: WaveIndex) -> complex:
    g0 = coupling_rate(params, 0)
    g1 = coupling_rate(params, 1)
    U = params.U
    c2 = cos_half_K(K) ** 2
    re = g0.imag + U - c2 * (g1.real**2 - g1.imag**2) / U
    decay = 2 * g0.real + 4 * c2 * g1.real * g1.imag / U
    return complex(re, -decay / 2)


def scattering_state(
    params: ChainParams, K: WaveIndex, p: WaveIndex, regime: str | None = None
) -> tuple[ScatteringState, RelativeWavefunction]:
    """Scattering eigenstate |K p> and its relative wavefunction on x = 0 ... N/2."""
    regime = resolve_regime(params, regime)
    if p.is_zero:
        raise ValueError("relative wavenumber p must be nonzero")
    phase = _scattering_phase(params, K, p, regime)
    state = ScatteringState(K, p, phase, scattering_energy(params, K, p), regime)
    return state, relative_wavefunction(params, state)


def bound_exists(params: ChainParams, K: WaveIndex, regime: str | None = None) -> bool:
    regime = resolve_regime(params, regime)
    if regime == "free":
        return False
    if regime == "strong":
        return True
    return abs(hopping_nd(params, K)) < params.U


def bound_state(
    params: ChainParams, K: WaveIndex, regime: str | None = None
) -> tuple[BoundState, RelativeWavefunction] | None:
    """Bound state |K BS>, or ``None`` when the existence criterion fails."""
    regime = resolve_regime(params, regime)
    if not bound_exists(params, K, regime):
        return None
    g1 = coupling_rate(params, 1)
    alpha = complex(-1j * g1 * cos_half_K(K) / params.U)
    alpha_nd = 0.0 if regime == "strong" else hopping_nd(params, K) / params.U
    state = BoundState(K, alpha, alpha_nd, bound_energy(params, K), regime)
    return state, relative_wavefunction(params, state)


def relative_wavefunction(
    params: ChainParams, state: TwoExcState, length: int | None = None, dissipative: bool = False
) -> RelativeWavefunction:
    """Psi_x for x = 0 ... length (default N/2).

    With ``dissipative=True`` the phase shift and alpha of the full complex
    problem are used instead of the non-dissipative ones.
    """
    if length is None:
        length = params.half_N
    x = np.arange(length + 1)
    psi = np.zeros(length + 1, dtype=complex)
    if isinstance(state, ScatteringState):
        S = _dissipative_phase(params, state) if dissipative else state.phase
        pa = state.p.ka
        psi[1:] = (np.exp(1j * pa * x[1:]) + S * np.exp(-1j * pa * x[1:])) / np.sqrt(params.M)
    else:
        alpha = state.alpha if dissipative else state.alpha_nd
        # normalized so that sum_{x >= 1} |Psi_x|^2 = 1 on the half line
        psi[1] = np.sqrt(1 - abs(alpha) ** 2)
        if length > 1 and alpha != 0:
            psi[2:] = psi[1] * alpha ** (x[2:] - 1)
    return RelativeWavefunction(psi, params.M)


def hopping_dissipative(params: ChainParams, K: WaveIndex) -> complex:
    """Complex relative-coordinate hopping -i Gamma_1 cos(Ka/2)."""
    return complex(-1j * coupling_rate(params, 1) * cos_half_K(K))


def _dissipative_phase(params: ChainParams, state: ScatteringState) -> complex:
    if params.U == 0:
        return complex(-1.0)
    tau = hopping_dissipative(params, state.K)
    pa = state.p.ka
    return complex(-(tau - params.U * np.exp(1j * pa)) / (tau - params.U * np.exp(-1j * pa)))


def relative_energy_nd(params: ChainParams, state: TwoExcState) -> float:
    """Eigenvalue of the non-dissipative relative problem (offset Im Gamma_0 removed)."""
    t = hopping_nd(params, state.K)
    if isinstance(state, ScatteringState):
        return 2 * t * float(np.cos(state.p.ka))
    return params.U + t * t / params.U
