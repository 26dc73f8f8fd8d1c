"""Steady states under weak incoherent pumping and their far-field observables.

A pump n with rate |P_n|^2 (units of gamma0) drives transitions with
wavenumber k_n: |0> -> |k_n> and |k> -> |K nu> with K = k + k_n. The
matrix element of the second process is eta^{(K nu)}_{(k - k_n)/2}.

Analytic steady states keep terms up to second order in Xi = |P|^2 /
gamma0 and use the simplified rates Gamma_k = gamma0, Gamma_tot = 2 gamma0.
:func:`rate_steady_numeric` solves the full stationary rate equations
instead and serves as the reference for the analytic expressions.

State sums use the closed-form collective dipole moments as they are, so
finite-M sums converge to the lattice-sum closed forms. Pass
``normalize=True`` to rescale every state to the exact sum rule instead
(see :func:`atomchain.momentum.normalize_eta`).

Closed-form observables (functions ending in ``_closed``) exist for the
non-interacting (``free``) and strongly interacting (``strong``) regimes
only. They take ``qa`` as a float and the Kronecker delta separately, so
they can be evaluated off the grid and in the M -> infinity limit
(``M=None``).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .dynamics import angle_to_k
from .eigen import WaveIndex, grid_m, single_dispersion, wrap_m
from .model import ChainParams, resolve_regime
from .momentum import eta_table, state_for

XI_MAX = 0.05
XI_WARN = 0.01


def check_xi(Xi: float) -> float:
    if Xi < 0:
        raise ValueError(f"pump parameter must be non-negative, got {Xi}")
    if Xi > XI_MAX:
        raise ValueError(f"pump parameter {Xi} exceeds {XI_MAX}; the weak-pump expansion does not apply")
    if Xi > XI_WARN:
        warnings.warn(f"pump parameter {Xi} > {XI_WARN}: second-order results lose accuracy", stacklevel=3)
    return float(Xi)


def as_k(params: ChainParams, x, max_residual: float = 0.5) -> WaveIndex:
    """Accept a WaveIndex or a detector/pump elevation in radians."""
    if isinstance(x, WaveIndex):
        if x.M != params.M:
            raise ValueError("wave index belongs to a different grid")
        return x
    k, residual = angle_to_k(params, float(x))
    if abs(residual) > max_residual:
        raise ValueError(f"angle {x} is {residual:+.3f} grid spacings from the nearest k (m = {k.m})")
    return k


@dataclass(frozen=True)
class Pump:
    k: WaveIndex
    rate: float
    beta_exc: float | None = None


@dataclass(frozen=True)
class PumpConfig:
    """List of pumps. ``Xi`` is the rate of the first pump, ``epsilon`` the amplitude ratio."""

    pumps: tuple = ()

    def __post_init__(self):
        for p in self.pumps:
            check_xi(p.rate)

    @classmethod
    def from_angles(cls, params: ChainParams, pumps, max_residual: float = 0.5) -> "PumpConfig":
        out = []
        for beta, rate in pumps:
            out.append(Pump(as_k(params, beta, max_residual), float(rate), float(beta)))
        return cls(tuple(out))

    @property
    def Xi(self) -> float:
        return self.pumps[0].rate if self.pumps else 0.0

    @property
    def epsilon(self) -> float:
        if len(self.pumps) < 2 or self.pumps[0].rate == 0:
            return 0.0
        return float(np.sqrt(self.pumps[1].rate / self.pumps[0].rate))


@dataclass(frozen=True)
class SteadyState:
    """Occupation numbers. Missing entries are zero."""

    M: int
    N_k: dict
    N_2exc: dict
    order: str
    meta: dict = field(default_factory=dict)

    def n1(self, k: WaveIndex) -> float:
        return self.N_k.get(k, 0.0)

    def n2(self, K: WaveIndex, nu) -> float:
        return self.N_2exc.get((K, nu), 0.0)

    @property
    def N0(self) -> float:
        return 1.0 - sum(self.N_k.values()) - sum(self.N_2exc.values())


class PairTables:
    """Cache of eta tables (labels x q) for every center-of-mass K."""

    def __init__(self, params: ChainParams, form: str = "asymptotic", regime: str | None = None, normalize=False):
        self.params = params
        self.form = form
        self.regime = resolve_regime(params, regime)
        self.normalize = normalize
        self._cache: dict = {}

    def get(self, K: WaveIndex):
        if K not in self._cache:
            self._cache[K] = eta_table(self.params, K, self.form, self.regime, self.normalize)
        return self._cache[K]

    def abs2_at(self, K: WaveIndex, q: WaveIndex) -> np.ndarray:
        """|eta^{(K nu)}_q|^2 for every label nu of K."""
        _, eta = self.get(K)
        return np.abs(eta[:, q.ell]) ** 2

    def abs2_over_k(self, K: WaveIndex) -> np.ndarray:
        """|eta^{(K nu)}_{K/2 - k}|^2 with rows nu and columns k (ell order)."""
        _, eta = self.get(K)
        M = self.params.M
        mq = wrap_m(K.half().m - grid_m(M), M)
        return np.abs(eta[:, mq + M // 2]) ** 2


def _fill_singles(tables: PairTables, N2: dict, base: dict) -> dict:
    """N_k = base_k + sum_{K nu} |eta^{(K nu)}_{K/2-k}|^2 N_{K nu} over all k."""
    M = tables.params.M
    total = np.zeros(M)
    by_K: dict = {}
    for (K, nu), val in N2.items():
        by_K.setdefault(K, {})[nu] = val
    for K, vals in by_K.items():
        labels, _ = tables.get(K)
        weights = np.array([vals.get(nu, 0.0) for nu in labels])
        total += weights @ tables.abs2_over_k(K)
    for k, v in base.items():
        total[k.ell] += v
    return {k: float(total[k.ell]) for k in WaveIndex.grid(M)}


def _pair_populations(tables: PairTables, K: WaveIndex, q: WaveIndex, factor: float) -> dict:
    labels, _ = tables.get(K)
    vals = factor * tables.abs2_at(K, q)
    return {(K, nu): float(v) for nu, v in zip(labels, vals)}


def single_pump_steady(
    params: ChainParams,
    kP,
    Xi: float,
    form: str = "asymptotic",
    regime: str | None = None,
    normalize: bool = False,
    tables: PairTables | None = None,
) -> SteadyState:
    """Second-order occupations for a single pump at wavenumber ``kP``."""
    Xi = check_xi(Xi)
    kP = as_k(params, kP)
    tables = tables or PairTables(params, form, regime, normalize)
    K = kP.times(2)
    N2 = _pair_populations(tables, K, WaveIndex.zero(params.M), Xi * Xi / 2)
    N1 = _fill_singles(tables, N2, {kP: Xi})
    return SteadyState(params.M, N1, N2, "analytic", {"setup": "single", "kP": kP, "Xi": Xi})


def two_pump_steady(
    params: ChainParams,
    k1,
    k2,
    Xi: float,
    epsilon: float,
    form: str = "asymptotic",
    regime: str | None = None,
    normalize: bool = False,
    tables: PairTables | None = None,
) -> SteadyState:
    """Second-order occupations for pumps at k1 (rate Xi) and k2 (rate eps^2 Xi).

    Single-excitation occupations are given for every k by the same
    second-order expression; the ones at k1 and k2 are the listed closed
    forms.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    Xi = check_xi(Xi)
    check_xi(Xi * epsilon**2)
    k1 = as_k(params, k1)
    k2 = as_k(params, k2)
    tables = tables or PairTables(params, form, regime, normalize)
    meta = {"setup": "two", "k1": k1, "k2": k2, "Xi": Xi, "epsilon": float(epsilon)}
    if epsilon == 0:
        st = single_pump_steady(params, k1, Xi, tables=tables)
        return SteadyState(st.M, st.N_k, st.N_2exc, "analytic", meta)
    if k1 == k2:
        st = single_pump_steady(params, k1, Xi * (1 + epsilon**2), tables=tables)
        return SteadyState(st.M, st.N_k, st.N_2exc, "analytic", meta)
    zero = WaveIndex.zero(params.M)
    e2 = epsilon**2
    N2: dict = {}
    for K, q, factor in (
        (k1.times(2), zero, Xi * Xi / 2),
        (k2.times(2), zero, e2 * e2 * Xi * Xi / 2),
        (k1 + k2, (k1 + k2).half() - k2, e2 * Xi * Xi),
    ):
        for key, val in _pair_populations(tables, K, q, factor).items():
            N2[key] = N2.get(key, 0.0) + val
    N1 = _fill_singles(tables, N2, {k1: Xi, k2: e2 * Xi})
    return SteadyState(params.M, N1, N2, "analytic", meta)


def rate_steady_numeric(
    params: ChainParams,
    pumps: PumpConfig,
    form: str = "asymptotic",
    regime: str | None = None,
    normalize: bool = False,
    rates: str = "simplified",
    tables: PairTables | None = None,
) -> SteadyState:
    """Stationary solution of the full rate equations, without expansion in Xi.

    Two-excitation occupations are eliminated exactly, leaving an M x M
    linear system for the single-excitation occupations.
    """
    M = params.M
    tables = tables or PairTables(params, form, regime, normalize)
    grid = WaveIndex.grid(M)
    if rates == "simplified":
        gk = np.ones(M)
    elif rates == "tight_binding":
        gk = np.array([single_dispersion(params, k).decay for k in grid])
    else:
        raise ValueError(f"unknown rate model {rates!r}")

    def gtot_of(K, labels):
        if rates == "simplified":
            return np.full(len(labels), 2.0)
        return np.array([state_for(params, K, nu, tables.regime)[0].decay for nu in labels])

    A = np.diag(gk).astype(float)
    source = np.zeros(M)
    w = np.zeros(M)
    # pump-in coefficients for each (pump, K): rows nu, from the single state K - k_n
    for pump in pumps.pumps:
        P2 = pump.rate
        source[pump.k.ell] += P2
        for K in grid:
            labels, _ = tables.get(K)
            if not labels:
                continue
            kprime = K - pump.k
            q = K.half() - pump.k
            inflow = P2 * tables.abs2_at(K, q)  # per nu, multiplies N_{k'}
            A[kprime.ell, kprime.ell] += inflow.sum()  # pump-induced broadening
            gt = gtot_of(K, labels)
            w[kprime.ell] += np.sum(inflow / gt)
            # decay back: Gamma_tot b_k N_{K nu} with b = |eta|^2 / 2 of the rescaled eta
            feed = tables.abs2_over_k(K) / 2  # rows nu, columns k
            A[:, kprime.ell] -= (gt * (inflow / gt)) @ feed
    A += np.outer(source, 1.0 + w)
    if not np.any(source):
        N = np.zeros(M)
    else:
        N = np.linalg.solve(A, source)
    N1 = {k: float(N[k.ell]) for k in grid}
    N2: dict = {}
    for pump in pumps.pumps:
        for K in grid:
            labels, _ = tables.get(K)
            if not labels:
                continue
            kprime = K - pump.k
            inflow = pump.rate * tables.abs2_at(K, K.half() - pump.k) * N[kprime.ell] / gtot_of(K, labels)
            for nu, v in zip(labels, inflow):
                N2[(K, nu)] = N2.get((K, nu), 0.0) + float(v)
    return SteadyState(M, N1, N2, "numeric", {"setup": "numeric", "pumps": pumps})


# ---------------------------------------------------------------------------
# observables from a steady state


def g1_steady(params: ChainParams, steady: SteadyState, kbar, tables: PairTables | None = None, **kw) -> float:
    """Normalized intensity G1 / (xi^2 |w|^2 M) at detector wavenumber (or angle) ``kbar``."""
    kbar = as_k(params, kbar)
    tables = tables or PairTables(params, **kw)
    total = steady.n1(kbar)
    by_K: dict = {}
    for (K, nu), val in steady.N_2exc.items():
        by_K.setdefault(K, {})[nu] = val
    for K, vals in by_K.items():
        labels, _ = tables.get(K)
        q = K.half() - kbar
        weights = np.array([vals.get(nu, 0.0) for nu in labels])
        total += float(weights @ tables.abs2_at(K, q))
    return float(total)


def lorentz_single(delta):
    """Lorentzian of the single-excitation line, 2 / ((2 delta)^2 + 1)."""
    delta = np.asarray(delta, dtype=float)
    return 2.0 / ((2 * delta) ** 2 + 1)


def lorentz_pair(delta):
    """Lorentzian of a two-excitation line, (2/3) / ((2 delta / 3)^2 + 1)."""
    delta = np.asarray(delta, dtype=float)
    return (2.0 / 3.0) / ((2 * delta / 3) ** 2 + 1)


def spectrum_from_steady(
    params: ChainParams,
    steady: SteadyState,
    kbar,
    omega_offset,
    tables: PairTables | None = None,
    **kw,
):
    """Normalized spectrum S gamma0 / (2 xi^2 |w|^2 M) versus (omega - omega0) / gamma0.

    Single-excitation transitions give a line of width gamma0 at 0,
    scattering states one of width 3 gamma0 at 0 and bound states one of
    width 3 gamma0 at U.
    """
    kbar = as_k(params, kbar)
    tables = tables or PairTables(params, **kw)
    delta = np.asarray(omega_offset, dtype=float)
    out = steady.n1(kbar) * lorentz_single(delta)
    by_K: dict = {}
    for (K, nu), val in steady.N_2exc.items():
        by_K.setdefault(K, {})[nu] = val
    scat = 0.0
    bound = 0.0
    for K, vals in by_K.items():
        labels, _ = tables.get(K)
        amp = tables.abs2_at(K, K.half() - kbar)
        for nu, a in zip(labels, amp):
            if nu == "BS":
                bound += a * vals.get(nu, 0.0)
            else:
                scat += a * vals.get(nu, 0.0)
    return out + scat * lorentz_pair(delta) + bound * lorentz_pair(delta - params.U)


def spectrum(params: ChainParams, setup: dict, kbar, omega_offset, **kw):
    """Spectrum for ``setup`` = {"kP", "Xi"} (single pump) or {"k1", "k2", "Xi", "epsilon"}."""
    if "kP" in setup:
        st = single_pump_steady(params, setup["kP"], setup["Xi"], **kw)
    else:
        st = two_pump_steady(params, setup["k1"], setup["k2"], setup["Xi"], setup["epsilon"], **kw)
    return spectrum_from_steady(params, st, kbar, omega_offset, **kw)


# ---------------------------------------------------------------------------
# finite-M state sums


def sum_nu(tables: PairTables, K: WaveIndex, q1: WaveIndex, q2: WaveIndex, only=None) -> float:
    """sum_nu |eta^{(K nu)}_{q1}|^2 |eta^{(K nu)}_{q2}|^2, optionally over "scattering" or "bound"."""
    labels, _ = tables.get(K)
    prod = tables.abs2_at(K, q1) * tables.abs2_at(K, q2)
    mask = np.ones(len(labels), dtype=bool)
    if only == "scattering":
        mask = np.array([nu != "BS" for nu in labels], dtype=bool)
    elif only == "bound":
        mask = np.array([nu == "BS" for nu in labels], dtype=bool)
    return float(np.sum(prod[mask])) if len(labels) else 0.0


def g1_single_pump(params: ChainParams, kP, kbar, Xi: float, **kw) -> float:
    """Intensity for one pump at ``kbar`` from the second-order occupations."""
    kP = as_k(params, kP)
    tables = PairTables(params, **kw)
    st = single_pump_steady(params, kP, Xi, tables=tables)
    return g1_steady(params, st, kbar, tables=tables)


def g1_two_pump(params: ChainParams, k1, k2, Xi: float, epsilon: float, **kw) -> float:
    """Intensity at the first pump direction, in the reduced level scheme of the two-pump setup.

    Includes the single-excitation occupation of k1 and the emission of the
    pair states 2k1 and k1 + k2 towards k1; the transition 2k2 -> 2k2 - k1
    is left out.
    """
    k1 = as_k(params, k1)
    k2 = as_k(params, k2)
    Xi = check_xi(Xi)
    tables = PairTables(params, **kw)
    zero = WaveIndex.zero(params.M)
    e2 = epsilon**2
    q = (k1 + k2).half() - k2
    d = 1.0 if k1 == k2 else 0.0
    s_00 = sum_nu(tables, k1.times(2), zero, zero)
    s_qq = sum_nu(tables, k1 + k2, q, q)
    K2 = k2.times(2)
    s_cross = sum_nu(tables, K2, K2.half() - k1, zero)
    return float(
        Xi * (1 + e2 * d) + Xi**2 * s_00 + 2 * e2 * Xi**2 * s_qq + e2 * e2 * Xi**2 / 2 * (1 + d) * s_cross
    )


def delta_g1_nl(params: ChainParams, k1, k2, epsilon: float, form: str = "closed", **kw) -> float:
    """Relative nonlinear change of the second-order intensity at k1 caused by the second pump.

    ``form="closed"`` is the large-M closed form including the 96/M^2
    bound-state correction, ``"ratio"`` the unexpanded ratio of lattice sums,
    ``"limit"`` drops all 1/M terms and ``"sums"`` evaluates the finite-M
    state sums.
    """
    k1 = as_k(params, k1)
    k2 = as_k(params, k2)
    e2 = epsilon**2
    q = (k1 + k2).half() - k2
    if k1 == k2:
        return e2 * (e2 + 2)
    if form == "sums":
        tables = PairTables(params, **kw)
        zero = WaveIndex.zero(params.M)
        K2 = k2.times(2)
        num = 2 * sum_nu(tables, k1 + k2, q, q) + e2 / 2 * sum_nu(tables, K2, K2.half() - k1, zero)
        return e2 * num / sum_nu(tables, k1.times(2), zero, zero)
    regime = resolve_regime(params, kw.get("regime"))
    M = params.M
    return delta_g1_nl_closed(q.ka, False, epsilon, regime, None if form == "limit" else M, form)


def delta_g1_nl_closed(qa: float, q_is_zero: bool, epsilon: float, regime: str, M=None, form="closed") -> float:
    e2 = epsilon**2
    if q_is_zero:
        return e2 * (e2 + 2)
    if regime == "free":
        return 4 * e2
    if regime != "strong":
        raise ValueError("closed forms exist only for the free and strong regimes")
    c4 = np.cos(qa) ** 4
    s4 = np.sin(qa) ** 4
    inv = 0.0 if M is None else 1.0 / M**2
    if form == "ratio":
        return e2 * (4 / 3 * c4 + 4 * s4 + 32 * inv * c4) / (1 / 3 + 16 * inv)
    return e2 * (4 * (c4 + 3 * s4) + 96 * inv * c4)


def g1_single_pump_closed(qa: float, q_is_zero: bool, Xi: float, regime: str, M=None) -> float:
    """Second-order intensity for one pump, qa = (kbar - kP) a."""
    d = 1.0 if q_is_zero else 0.0
    val = Xi * d + Xi**2 * d / 3
    if regime == "strong":
        if M is None:
            raise ValueError("the strong-regime bound-state term needs M")
        val += Xi**2 * 16 / M**2 * np.cos(qa) ** 2
    elif regime != "free":
        raise ValueError("closed forms exist only for the free and strong regimes")
    return float(val)


def spectrum_center_closed(qa: float, q_is_zero: bool, Xi: float, regime: str, M=None) -> float:
    """Normalized spectrum at omega = omega0 for one pump (bound-state line excluded)."""
    d = 1.0 if q_is_zero else 0.0
    val = 2 * Xi * d + 4 / 9 * Xi**2 * d
    if regime == "strong":
        val += Xi**2 * 16 / M**2 * np.cos(qa) ** 2
    elif regime != "free":
        raise ValueError("closed forms exist only for the free and strong regimes")
    return float(val)


def spectrum_bound_peak_closed(qa: float, Xi: float, M: int) -> float:
    """Normalized spectrum at omega = omega0 + U for one pump, strong regime."""
    return float(Xi**2 / 3 * 16 / M**2 * np.cos(qa) ** 2)


def spectrum_bound_peak(params: ChainParams, kP, kbar, Xi: float, **kw) -> float:
    """Height of the bound-state line at omega0 + U from the state sums (that line only)."""
    if params.U == 0:
        raise ValueError("there is no bound-state line for U = 0")
    kP = as_k(params, kP)
    kbar = as_k(params, kbar)
    tables = PairTables(params, **kw)
    K = kP.times(2)
    st = single_pump_steady(params, kP, Xi, tables=tables)
    n_bs = st.n2(K, "BS")
    if n_bs == 0.0:
        return 0.0
    labels, eta = tables.get(K)
    a = np.abs(eta[labels.index("BS"), (K.half() - kbar).ell]) ** 2
    return float(lorentz_pair(0.0) * a * n_bs)


def bound_signature(params: ChainParams, kP, kbar, **kw) -> float:
    """Bound-state line height at kbar relative to the one at kP; cos^2((kP - kbar) a) for U >> gamma0."""
    ref = spectrum_bound_peak(params, kP, kP, 1e-3, **kw)
    return spectrum_bound_peak(params, kP, kbar, 1e-3, **kw) / ref


def delta_S_closed(qa: float, q_is_zero: bool, epsilon: float) -> float:
    """Relative change of the bound-state line at k1 caused by the second pump."""
    e2 = epsilon**2
    d = 1.0 if q_is_zero else 0.0
    return float(e2 * (e2 * d + 2 * np.cos(qa) ** 4))


def delta_S(params: ChainParams, k1, k2, epsilon: float, **kw) -> float:
    """delta S from the finite-M bound-state sums (reduced two-pump level scheme)."""
    if params.U == 0:
        raise ValueError("there is no bound-state line for U = 0")
    k1 = as_k(params, k1)
    k2 = as_k(params, k2)
    tables = PairTables(params, **kw)
    zero = WaveIndex.zero(params.M)
    e2 = epsilon**2
    if k1 == k2:
        return (1 + e2) ** 2 - 1
    q = (k1 + k2).half() - k2
    base = sum_nu(tables, k1.times(2), zero, zero, only="bound") / 2
    extra = e2 * sum_nu(tables, k1 + k2, q, q, only="bound")
    return float(extra / base)


def g2_closed(qa: float, q_is_zero: bool, regime: str, M=None) -> float:
    """Zero-delay correlation of two detectors; qa = (k1 - k2) a / 2."""
    d = 1.0 if q_is_zero else 0.0
    if regime == "free":
        return float(d / 6 + 2 / 3 * (1 - d))
    if regime != "strong":
        raise ValueError("closed forms exist only for the free and strong regimes")
    c4 = np.cos(qa) ** 4
    val = d / 6 + 2 / 3 * (1 - d) * (c4 + 3 * np.sin(qa) ** 4)
    if M is not None:
        val += 16 / M**2 * (1 - d / 2) * c4
    return float(val)


def g2(params: ChainParams, k1, k2, form: str = "closed", **kw) -> float:
    """g2 for detectors at k1 and k2 (WaveIndex or elevation angles).

    ``form="closed"`` uses the closed form with its 1/M^2 term, ``"limit"``
    drops it and ``"sums"`` evaluates (1 - delta/2) sum_nu |eta_q|^4.
    """
    k1 = as_k(params, k1)
    k2 = as_k(params, k2)
    q = (k1 + k2).half() - k2
    d = 1.0 if k1 == k2 else 0.0
    if form == "sums":
        tables = PairTables(params, **kw)
        return (1 - d / 2) * sum_nu(tables, k1 + k2, q, q)
    regime = resolve_regime(params, kw.get("regime"))
    return g2_closed(q.ka, k1 == k2, regime, None if form == "limit" else params.M)
