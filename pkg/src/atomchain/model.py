"""Chain parameters and the complex dipole-dipole coupling rates.

All rates are expressed in units of the single-atom decay rate gamma0.
The complex rate Gamma_x couples two atoms a distance ``x`` lattice
constants apart; its real part is a dissipative (collective decay)
contribution and its imaginary part an energy shift.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: U / gamma0 at or above which the strong-interaction limit is selected.
STRONG_U_THRESHOLD = 1.0e3

#: Allowed interaction regimes. ``free`` is U = 0, ``strong`` is U >> gamma0.
REGIMES = ("free", "finite", "strong")

# below this xi the bracket of B_x is evaluated from its Taylor series
_SERIES_XI = 1.0e-2


@dataclass(frozen=True)
class ChainParams:
    """Physical configuration of the atom chain.

    Parameters
    ----------
    M : int
        Number of atoms. Must be odd so that N = M - 1 is even and the
        sites run over -N/2 ... N/2.
    lambda_over_a : float
        Transition wavelength in units of the lattice constant.
    theta : float
        Angle between the transition dipole and the chain axis (radians).
    gamma0 : float
        Single-atom decay rate. Every rate, energy and interaction handled
        by the package is given in units of gamma0, so this only fixes the
        unit.
    U : float
        Nearest-neighbour interaction in units of gamma0.
    omega0 : float or None
        Bare transition frequency. Spectra are always reported against
        omega - omega0, so the value is informational only; ``None`` means
        "much larger than every other scale".
    """

    M: int
    lambda_over_a: float
    theta: float = np.pi / 2
    gamma0: float = 1.0
    U: float = 0.0
    omega0: float | None = None

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 3 or self.M % 2 == 0:
            raise ValueError(f"M must be an odd integer >= 3, got {self.M}")
        if not self.lambda_over_a > 0 or not np.isfinite(self.lambda_over_a):
            raise ValueError(f"lambda_over_a must be positive, got {self.lambda_over_a}")
        if not 0.0 <= self.theta <= np.pi / 2 + 1e-12:
            raise ValueError(f"theta must lie in [0, pi/2], got {self.theta}")
        if not self.gamma0 > 0:
            raise ValueError(f"gamma0 must be positive, got {self.gamma0}")
        if not self.U >= 0 or not np.isfinite(self.U):
            raise ValueError(f"U must be finite and >= 0, got {self.U}")

    @property
    def N(self) -> int:
        return self.M - 1

    @property
    def half_N(self) -> int:
        return (self.M - 1) // 2

    @property
    def k_at_a(self) -> float:
        """Atomic wavenumber times the lattice constant, 2 pi a / lambda."""
        return 2 * np.pi / self.lambda_over_a

    @property
    def regime(self) -> str:
        """Interaction regime selected from U alone."""
        if self.U == 0:
            return "free"
        if self.U >= STRONG_U_THRESHOLD:
            return "strong"
        return "finite"

    def with_(self, **changes) -> "ChainParams":
        fields = dict(
            M=self.M,
            lambda_over_a=self.lambda_over_a,
            theta=self.theta,
            gamma0=self.gamma0,
            U=self.U,
            omega0=self.omega0,
        )
        fields.update(changes)
        return ChainParams(**fields)


def resolve_regime(params: ChainParams, regime: str | None) -> str:
    """Return ``regime`` if given, otherwise the one implied by ``params``."""
    if regime is None:
        return params.regime
    if regime not in REGIMES:
        raise ValueError(f"unknown regime {regime!r}; expected one of {REGIMES}")
    if regime == "free" and params.U != 0:
        raise ValueError("regime 'free' requires U = 0")
    if regime != "free" and params.U == 0:
        raise ValueError(f"regime {regime!r} requires U > 0")
    return regime


def _b_bracket(xi):
    """sin(xi) - xi cos(xi), accurate also for small xi."""
    xi = np.asarray(xi, dtype=float)
    direct = np.sin(xi) - xi * np.cos(xi)
    x2 = xi * xi
    series = xi**3 * (1 / 3 - x2 / 30 + x2**2 / 840 - x2**3 / 45360)
    return np.where(xi < _SERIES_XI, series, direct)


def coupling_rate_xi(xi, theta: float):
    """Gamma_x / gamma0 as a function of xi = k_at a x > 0 (vectorised)."""
    xi = np.asarray(xi, dtype=float)
    if np.any(xi <= 0):
        raise ValueError("xi must be positive")
    A = -1.5j * np.exp(1j * xi) / xi
    B = 3.0 / xi**3 * (_b_bracket(xi) - 1j * (np.cos(xi) + xi * np.sin(xi)))
    s2 = np.sin(theta) ** 2
    c2 = np.cos(theta) ** 2
    return A * s2 + B * (3 * c2 - 1) / 2


def coupling_rate(params: ChainParams, x: int) -> complex:
    """Complex rate Gamma_x / gamma0 for two atoms ``x`` sites apart.

    ``x = 0`` gives the single-atom value 1 - 2i/pi.
    """
    if x < 0:
        raise ValueError(f"site separation must be >= 0, got {x}")
    if x == 0:
        return complex(1.0, -2.0 / np.pi)
    xi = params.k_at_a * x
    return complex(coupling_rate_xi(xi, params.theta))


def coupling_rates(params: ChainParams, xmax: int) -> np.ndarray:
    """Array of Gamma_x / gamma0 for x = 0 ... xmax."""
    out = np.empty(xmax + 1, dtype=complex)
    out[0] = coupling_rate(params, 0)
    if xmax > 0:
        x = np.arange(1, xmax + 1)
        out[1:] = coupling_rate_xi(params.k_at_a * x, params.theta)
    return out


def detector_direction(beta: float, phi: float = np.pi / 2) -> np.ndarray:
    """Unit vector for elevation ``beta`` above the x-y plane and azimuth ``phi``.

    The chain lies along z. The default azimuth points along y, which is
    perpendicular to a dipole lying in the x-z plane.
    """
    cb = np.cos(beta)
    return np.array([cb * np.cos(phi), cb * np.sin(phi), np.sin(beta)])


def dipole_pattern(r_hat, theta: float) -> float:
    """Single-dipole far-field factor 1 - (d.r)^2 for the dipole in the x-z plane."""
    r_hat = np.asarray(r_hat, dtype=float)
    norm = np.linalg.norm(r_hat)
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"r_hat must be a unit vector, |r_hat| = {norm}")
    d_hat = np.array([np.sin(theta), 0.0, np.cos(theta)])
    proj = float(d_hat @ r_hat)
    return max(0.0, 1.0 - proj * proj)
