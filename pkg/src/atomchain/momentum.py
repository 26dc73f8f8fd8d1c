"""Collective dipole moments, momentum distributions and branching ratios.

The collective dipole moment of a two-excitation eigenstate (K, nu) with
respect to the relative wavenumber q is

    eta_q = sum_{zeta = +-1} sum_{z=1}^{N/2} exp(-i zeta q a z) Psi_z / sqrt(M).

Two evaluations are provided:

``form="asymptotic"``
    The large-M closed forms: a direct term (1 + e^{i delta}) / 2 at q = p,
    a background term present only for odd ``m_p - m_q``, and the bound
    state expression in terms of alpha.
``form="exact"``
    The finite geometric sums above, evaluated in closed form. This agrees
    with direct summation to rounding error.

State sums ``sum_nu`` run over every nonzero relative wavenumber on the
grid, counting p and -p separately, plus the bound state when it exists.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .eigen import (
    BoundState,
    RelativeWavefunction,
    ScatteringState,
    TwoExcState,
    WaveIndex,
    bound_state,
    grid_m,
    relative_wavefunction,
    scattering_state,
    wrap_m,
)
from .model import ChainParams, resolve_regime

FORMS = ("asymptotic", "exact")

Nu = Union[WaveIndex, str]


def state_for(params: ChainParams, K: WaveIndex, nu: Nu, regime: str | None = None):
    """Return (state, wavefunction) for the label (K, nu); nu is a p index or "BS"."""
    if isinstance(nu, str):
        if nu != "BS":
            raise ValueError(f"unknown state label {nu!r}")
        found = bound_state(params, K, regime)
        if found is None:
            raise ValueError(f"no bound state exists for K = {K} (U = {params.U})")
        return found
    return scattering_state(params, K, nu, regime)


def two_exc_labels(params: ChainParams, K: WaveIndex, regime: str | None = None) -> list:
    """All relative labels nu for center-of-mass K: nonzero p (both signs) then "BS"."""
    from .eigen import bound_exists

    labels: list = [p for p in WaveIndex.grid(params.M) if not p.is_zero]
    if bound_exists(params, K, regime):
        labels.append("BS")
    return labels


# ---------------------------------------------------------------------------
# vectorised kernels working on centered integer indices


def _geom_sum(n, M: int, L: int):
    """sum_{z=1}^{L} exp(2 pi i n z / M) for integer array n."""
    n = np.asarray(n)
    theta = 2 * np.pi * n / M
    resonant = (n % M) == 0
    e = np.exp(1j * theta)
    den = np.where(resonant, 1.0, 1 - e)
    val = e * (1 - np.exp(1j * theta * L)) / den
    return np.where(resonant, float(L), val)


def _eta_scattering(M: int, mp, mq, S, form: str):
    mp = np.asarray(mp)
    mq = np.asarray(mq)
    S = np.asarray(S, dtype=complex)
    if form == "exact":
        L = (M - 1) // 2
        out = np.zeros(np.broadcast(mp, mq, S).shape, dtype=complex)
        for zeta in (1, -1):
            out = out + _geom_sum(mp - zeta * mq, M, L) + S * _geom_sum(-mp - zeta * mq, M, L)
        return out / M
    # asymptotic: use p > 0 and q >= 0; the -p state carries an extra factor S_{-p}
    ap = np.abs(mp)
    aq = np.abs(mq)
    S_pos = np.where(mp > 0, S, np.conj(S))
    delta = np.angle(S_pos)
    dm = ap - aq
    theta = 2 * np.pi * dm / M
    odd = (dm % 2) == 1
    safe = np.where(dm == 0, 1.0, np.sin(theta / 2))
    background = (2.0 / M) * np.exp(1j * delta / 2) * np.sin((delta - theta) / 2) / safe
    direct = (1 + S_pos) / 2
    val = np.where(dm == 0, direct, np.where(odd, background, 0.0))
    return np.where(mp > 0, val, S * val)


def _eta_bound(M: int, mq, alpha: float, form: str):
    mq = np.asarray(mq)
    qa = 2 * np.pi * mq / M
    if form == "exact":
        L = (M - 1) // 2
        out = np.zeros(mq.shape, dtype=complex)
        for zeta in (1, -1):
            w = np.exp(-1j * zeta * qa)
            out = out + w * (1 - (alpha * w) ** L) / (1 - alpha * w)
        return out * np.sqrt((1 - alpha * alpha) / M)
    cq = np.cos(qa)
    return 2 * np.sqrt((1 - alpha * alpha) / M) * (cq - alpha) / (1 - 2 * alpha * cq + alpha * alpha) + 0j


def eta_of_state(params: ChainParams, state: TwoExcState, mq, form: str = "asymptotic"):
    """eta_q of ``state`` for integer index array ``mq`` (vectorised)."""
    if form not in FORMS:
        raise ValueError(f"unknown form {form!r}; expected one of {FORMS}")
    if isinstance(state, ScatteringState):
        return _eta_scattering(params.M, state.p.m, mq, state.phase, form)
    return _eta_bound(params.M, mq, state.alpha_nd, form)


def eta_closed(
    params: ChainParams,
    K: WaveIndex,
    nu: Nu,
    q: WaveIndex,
    form: str = "asymptotic",
    regime: str | None = None,
) -> complex:
    """Closed-form collective dipole moment eta^{(K nu)}_q."""
    state, _ = state_for(params, K, nu, regime)
    return complex(eta_of_state(params, state, q.m, form))


def eta_table(
    params: ChainParams,
    K: WaveIndex,
    form: str = "asymptotic",
    regime: str | None = None,
    normalize: bool = False,
):
    """eta^{(K nu)}_q for every label nu of K and every q.

    Returns ``(labels, eta)`` with ``eta[i, ell]`` belonging to ``labels[i]``
    and the q grid index ``ell``.
    """
    regime = resolve_regime(params, regime)
    M = params.M
    mq = grid_m(M)[None, :]
    labels = two_exc_labels(params, K, regime)
    ps = [nu for nu in labels if not isinstance(nu, str)]
    rows = []
    if ps:
        mp = np.array([p.m for p in ps])[:, None]
        S = np.array([scattering_state(params, K, p, regime)[0].phase for p in ps])[:, None]
        rows.append(_eta_scattering(M, mp, mq, S, form))
    if labels and labels[-1] == "BS":
        bs, _ = bound_state(params, K, regime)
        rows.append(_eta_bound(M, mq, bs.alpha_nd, form))
    eta = np.vstack(rows) if rows else np.zeros((0, M), dtype=complex)
    if normalize and len(eta):
        eta = normalize_eta(eta)
    return labels, eta


@dataclass(frozen=True)
class MomentumDistribution:
    """eta over the full q grid (ell order) for the state (K, nu)."""

    K: WaveIndex
    nu: Nu
    eta: np.ndarray

    @property
    def abs2(self) -> np.ndarray:
        return np.abs(self.eta) ** 2

    def at(self, q: WaveIndex) -> complex:
        return complex(self.eta[q.ell])

    @property
    def total(self) -> float:
        """Sum rule value Z = sum_q |eta_q|^2."""
        return float(np.sum(self.abs2))


def distribution(
    params: ChainParams,
    K: WaveIndex,
    nu: Nu,
    form: str = "asymptotic",
    regime: str | None = None,
    normalize: bool = False,
) -> MomentumDistribution:
    """eta^{(K nu)}_q over the whole q grid.

    ``normalize=True`` rescales by sqrt(2 / Z) so the sum rule holds
    exactly; for the exact form this is the same as normalizing Psi.
    """
    state, _ = state_for(params, K, nu, regime)
    eta = np.asarray(eta_of_state(params, state, grid_m(params.M), form), dtype=complex)
    if normalize:
        eta = normalize_eta(eta)
    return MomentumDistribution(K, nu, eta)


def normalize_eta(eta: np.ndarray) -> np.ndarray:
    """Rescale eta rows (last axis = q) to satisfy sum_q |eta_q|^2 = 2."""
    Z = np.sum(np.abs(eta) ** 2, axis=-1, keepdims=True)
    return eta * np.sqrt(2.0 / Z)


def eta_bruteforce(wavefn: RelativeWavefunction, q) -> complex:
    """Direct summation of the defining series for eta_q (q as WaveIndex or ka)."""
    qa = q.ka if isinstance(q, WaveIndex) else float(q)
    L = (wavefn.M - 1) // 2
    z = np.arange(1, L + 1)
    psi = wavefn.psi[1 : L + 1]
    total = 0j
    for zeta in (1, -1):
        total += np.sum(np.exp(-1j * zeta * qa * z) * psi)
    return complex(total / np.sqrt(wavefn.M))


def eta_windowed(params: ChainParams, state: TwoExcState) -> np.ndarray:
    """eta_q from the full double transform over the finite lattice.

    Builds the pair amplitude Phi_{n1 n2} = exp(i K a (n1+n2)/2) Psi_{|n1-n2|}
    / (2 sqrt(M)) on all sites -N/2 ... N/2 and projects it onto the pair of
    plane waves k1 = K/2 + q, k2 = K/2 - q. Returns values in q grid order.
    """
    M = params.M
    wf = relative_wavefunction(params, state, length=M - 1)
    n = np.arange(M) - M // 2
    sep = np.abs(n[:, None] - n[None, :])
    kappa = state.K.half().ka
    phi = np.exp(1j * kappa * (n[:, None] + n[None, :])) * wf.psi[sep] / (2 * np.sqrt(M))
    m = grid_m(M)
    k1 = 2 * np.pi * wrap_m(state.K.half().m + m, M) / M
    k2 = 2 * np.pi * wrap_m(state.K.half().m - m, M) / M
    F1 = np.exp(-1j * np.outer(k1, n))
    F2 = np.exp(-1j * np.outer(k2, n))
    # <k1 k2 | Phi> = sum_{n1 n2} e^{-i k1 n1} e^{-i k2 n2} Phi_{n1 n2} / M = eta_q / 2
    proj = np.einsum("qi,ij,qj->q", F1, phi, F2) / M
    return 2 * proj


# ---------------------------------------------------------------------------
# branching ratios


@dataclass(frozen=True)
class BranchingTable:
    """Branching ratios b_k and partial rates of the state (K, nu), k in ell order."""

    K: WaveIndex
    nu: Nu
    b: np.ndarray
    rates: np.ndarray
    total_decay: float
    Z: float


def branching_from_eta(eta_q: np.ndarray, K: WaveIndex, normalize: bool = True):
    """Map eta over q (ell order) to b over k (ell order) with q = K/2 - k."""
    M = K.M
    mk = grid_m(M)
    mq = wrap_m(K.half().m - mk, M)
    abs2 = np.abs(eta_q[..., mq + M // 2]) ** 2
    Z = np.sum(np.abs(eta_q) ** 2, axis=-1, keepdims=True)
    return abs2 / (Z if normalize else 2.0), Z[..., 0]


def branching(
    params: ChainParams,
    K: WaveIndex,
    nu: Nu,
    form: str = "asymptotic",
    regime: str | None = None,
    normalize: bool = True,
    decay: float | None = None,
) -> BranchingTable:
    """Branching ratios of the decay (K, nu) -> |k>.

    With ``normalize=True`` the ratios are |eta|^2 / Z with Z the finite-M
    sum rule value, so they add up to one exactly. ``normalize=False``
    gives the large-M value |eta|^2 / 2. ``decay`` overrides the total
    decay rate (default: the simplified value 2 gamma0).
    """
    dist = distribution(params, K, nu, form, regime)
    b, Z = branching_from_eta(dist.eta, K, normalize)
    total = 2.0 if decay is None else float(decay)
    return BranchingTable(K, nu, b, b * total, total, float(Z))


# ---------------------------------------------------------------------------
# lattice sums

LATTICE_SUMS = ("Q_bg", "R_bg", "R_dir", "R_BS", "Q_cross", "R_cross", "R_crossBS")


def _q_index(q, M: int) -> int:
    if isinstance(q, WaveIndex):
        if q.M != M:
            raise ValueError("q belongs to a different grid")
        return abs(q.m)
    frac = float(q) * M / (2 * np.pi)
    mq = int(np.round(frac))
    if abs(frac - mq) > 1e-9:
        raise ValueError(f"qa = {q} is not on the grid of M = {M}; nearest m = {mq}")
    # reduce to [0, M/2]
    mq = mq % M
    return min(mq, M - mq)


def lattice_sum(kind: str, q, M: int, mode: str = "finite") -> float:
    """Lattice sums over products of |eta|^2 in the U = 0 and strong regimes.

    ``q`` is a WaveIndex or a value of qa on the grid 2 pi m / M. ``M`` may
    be any integer >= 3 here since these are plain sums. ``mode="limit"``
    returns the M -> infinity closed forms (keeping the explicit 1/M^2
    factors of the bound-state terms).
    """
    if kind not in LATTICE_SUMS:
        raise ValueError(f"unknown lattice sum {kind!r}; expected one of {LATTICE_SUMS}")
    if mode not in ("finite", "limit"):
        raise ValueError(f"unknown mode {mode!r}")
    mq = _q_index(q, M)
    qa = 2 * np.pi * mq / M
    d0 = 1.0 if mq == 0 else 0.0
    if kind == "R_dir":
        return 2 * np.sin(qa) ** 4
    if kind == "R_BS":
        return 16 / M**2 * np.cos(qa) ** 4
    if kind == "R_crossBS":
        return 16 / M**2 * np.cos(qa) ** 2
    if mode == "limit":
        q_bg = (2 - d0) / 3
        return {
            "Q_bg": q_bg,
            "R_bg": np.cos(qa) ** 4 * q_bg,
            "Q_cross": d0 / 3,
            "R_cross": d0 / 3,
        }[kind]
    mp = np.arange(1, M // 2 + 1)
    dm = mp - mq
    keep = (dm % 2 == 1) & (dm != 0)
    mp, dm = mp[keep], dm[keep]
    pa = 2 * np.pi * mp / M
    half_diff = np.pi * dm / M
    if kind == "Q_bg":
        terms = 1 / np.tan(half_diff) ** 4
    elif kind == "R_bg":
        terms = np.cos((pa + qa) / 2) ** 4 / np.sin(half_diff) ** 4
    elif kind == "Q_cross":
        terms = 1 / np.tan(pa / 2) ** 2 / np.tan(half_diff) ** 2
    else:  # R_cross
        terms = (1 + np.cos(pa + qa)) / (1 - np.cos(2 * half_diff)) / np.tan(pa / 2) ** 2
    return float(32 / M**4 * np.sum(terms))
