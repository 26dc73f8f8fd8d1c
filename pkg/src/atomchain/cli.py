"""Command-line driver.

Every task is a subcommand (``atomchain pattern ...``). ``atomchain run
CONFIG.json`` reads the same options from a JSON object whose ``task`` key
names the subcommand; option names may use ``-`` or ``_``.
"""

from __future__ import annotations

import argparse
import concurrent.futures as cf
import csv
import io
import json
import os
import re
import sys
from fractions import Fraction

import numpy as np

from . import dynamics, momentum, pumped, verify
from .eigen import (
    OffGridError,
    WaveIndex,
    bound_energy,
    bound_state,
    scattering_energy,
    scattering_state,
    single_dispersion,
)
from .model import ChainParams, coupling_rate

STRONG_U = 1.0e6
WORKERS_ENV = "ATOMCHAIN_WORKERS"
TASKS = ("rates", "dispersion", "eigen", "momdist", "pattern", "pump1", "pump2", "spectrum", "g2", "sums", "verify")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# value parsing


def parse_angle(text) -> float:
    """Angle in radians from ``0.25`` or ``1/4`` (fractions of pi) or ``arcsin(x)``."""
    s = str(text).strip().replace(" ", "")
    sign = 1.0
    if s.startswith("-"):
        sign, s = -1.0, s[1:]
    m = re.fullmatch(r"arcsin\((.+)\)", s)
    try:
        if m:
            x = float(Fraction(m.group(1)))
            if abs(x) > 1:
                raise ValueError
            return sign * float(np.arcsin(x))
        return sign * float(Fraction(s)) * np.pi
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"bad angle {text!r}: use a fraction of pi (0.25, 1/4) or arcsin(x)") from None


def parse_wavenumber(text) -> float:
    """ka from ``pi/2a``, ``-pi/4``, ``0``, ``0.5`` (units of pi/a) or ``m:12`` (grid index, kept as str)."""
    s = str(text).strip().replace(" ", "")
    if s.endswith("a") and "pi" in s:
        s = s[:-1]
    m = re.fullmatch(r"(-?)(\d*)pi(?:/(\d+))?", s)
    try:
        if m:
            num = int(m.group(2)) if m.group(2) else 1
            den = int(m.group(3)) if m.group(3) else 1
            return (-1 if m.group(1) else 1) * np.pi * num / den
        return float(Fraction(s)) * np.pi
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"bad wavenumber {text!r}: use e.g. pi/2a, 0.5 (units of pi/a) or m:12") from None


def to_index(text, M: int, snap: bool) -> WaveIndex:
    s = str(text).strip()
    if s.startswith("m:"):
        return WaveIndex.from_m(int(s[2:]), M)
    ka = parse_wavenumber(s)
    if snap:
        return WaveIndex.nearest(ka, M)[0]
    return WaveIndex.from_ka(ka, M)


def parse_state(text) -> dict:
    """``K=0,p=pi/2a`` or ``K=0,nu=BS``."""
    out = {}
    for part in str(text).split(","):
        if "=" not in part:
            raise argparse.ArgumentTypeError(f"bad state {text!r}: expected K=...,p=... or K=...,nu=BS")
        key, val = part.split("=", 1)
        out[key.strip()] = val.strip()
    if "K" not in out or ("p" in out) == ("nu" in out):
        raise argparse.ArgumentTypeError(f"bad state {text!r}: give K and exactly one of p, nu")
    if "nu" in out and out["nu"] != "BS":
        raise argparse.ArgumentTypeError("nu must be BS; give scattering states with p=...")
    return out


def parse_U(text) -> float:
    s = str(text).strip().lower()
    if s == "strong":
        return STRONG_U
    try:
        val = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad U {text!r}: a number or 'strong'") from None
    if val < 0:
        raise argparse.ArgumentTypeError("U must be >= 0")
    return val


def parse_list(kind):
    def parse(text):
        if isinstance(text, (list, tuple)):
            items = list(text)
        else:
            items = [t for t in str(text).split(",") if t.strip()]
        return [kind(t) for t in items]

    parse.__name__ = f"list of {kind.__name__}"
    return parse


def parse_range(text):
    """``start:stop:num`` (inclusive) or a comma separated list of numbers."""
    if isinstance(text, (list, tuple)):
        return [float(t) for t in text]
    s = str(text)
    if ":" in s:
        try:
            a, b, n = s.split(":")
            return [float(x) for x in np.linspace(float(a), float(b), int(n))]
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad range {text!r}: use start:stop:num") from None
    return [float(t) for t in s.split(",") if t.strip()]


def positive_int(text) -> int:
    val = int(text)
    if val < 1:
        raise argparse.ArgumentTypeError("expected a positive integer")
    return val


def parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    s = str(text).lower()
    if s in ("1", "true", "yes"):
        return True
    if s in ("0", "false", "no"):
        return False
    raise argparse.ArgumentTypeError(f"bad boolean {text!r}")


def fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if x == 0:
        return "0"
    return f"{x:.12g}"


# ---------------------------------------------------------------------------
# worker pool


def worker_count(flag: int | None) -> int:
    if flag:
        return flag
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def ordered_map(fn, items, workers: int):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with cf.ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# tasks; each returns (columns, rows, meta)


def _params(args, **over) -> ChainParams:
    fields = dict(M=args.M, lambda_over_a=args.lambda_over_a, theta=args.theta, U=args.U)
    fields.update(over)
    return ChainParams(**fields)


def task_rates(args):
    params = _params(args)
    rows = []
    for x in range(args.xmax + 1):
        g = coupling_rate(params, x)
        rows.append([x, g.real, g.imag])
    return ["x[a]", "re_Gamma[gamma0]", "im_Gamma[gamma0]"], rows, {}


def task_dispersion(args):
    params = _params(args)
    grid = WaveIndex.grid(params.M)
    if args.manifold == "single":
        rows = []
        for k in grid:
            s = single_dispersion(params, k, args.mode)
            rows.append([k.ka / np.pi, s.re_energy, s.decay])
        return ["ka[pi]", "re_energy[gamma0]", "decay[gamma0]"], rows, {}
    rows = []
    for K in grid:
        for p in grid:
            if p.m <= 0:
                continue
            E = scattering_energy(params, K, p)
            rows.append([K.ka / np.pi, "scattering", p.ka / np.pi, E.real, -2 * E.imag])
        if params.U > 0 and bound_state(params, K) is not None:
            E = bound_energy(params, K)
            rows.append([K.ka / np.pi, "bound", "", E.real, -2 * E.imag])
    return ["Ka[pi]", "kind", "pa[pi]", "re_energy[gamma0]", "decay[gamma0]"], rows, {}


def task_eigen(args):
    params = _params(args)
    K = to_index(args.K, params.M, args.snap)
    rows = []
    for nu in momentum.two_exc_labels(params, K):
        state, _ = momentum.state_for(params, K, nu)
        Z = momentum.distribution(params, K, nu, args.form).total
        if nu == "BS":
            rows.append(["BS", "", state.re_energy, state.decay, "", "", state.alpha_nd, Z])
        else:
            rows.append([nu.m, nu.ka / np.pi, state.re_energy, state.decay, state.phase.real, state.phase.imag, "", Z])
    cols = ["nu", "pa[pi]", "re_energy[gamma0]", "decay[gamma0]", "re_phase[1]", "im_phase[1]", "alpha[1]", "sum_rule_Z[1]"]
    return cols, rows, {"K_m": K.m}


def _state_label(params, state_spec, snap):
    K = to_index(state_spec["K"], params.M, snap)
    if "nu" in state_spec:
        return K, "BS"
    p = to_index(state_spec["p"], params.M, snap)
    if p.is_zero:
        raise ConfigError("relative wavenumber p must be nonzero")
    return K, p


def task_momdist(args):
    params = _params(args)
    K, nu = _state_label(params, args.state, args.snap)
    dist = momentum.distribution(params, K, nu, args.form, normalize=args.normalize)
    rows = [[q.ka / np.pi, abs(e) ** 2, e.real, e.imag] for q, e in zip(WaveIndex.grid(params.M), dist.eta)]
    return ["qa[pi]", "abs2_eta[1]", "re_eta[1]", "im_eta[1]"], rows, {"K_m": K.m, "nu": str(getattr(nu, "m", nu))}


def _pattern_job(job):
    fields, state_spec, snap, form, t_ret, betas, beta_range, all_K = job
    params = ChainParams(**fields)
    try:
        K, nu = _state_label(params, state_spec, snap)
    except OffGridError as exc:
        raise ConfigError(f"{exc}; pass --snap to use the nearest grid value") from None
    Ks = WaveIndex.grid(params.M) if all_K else [K]
    rows = []
    for Kk in Ks:
        if nu == "BS":
            found = bound_state(params, Kk)
            if found is None:
                # no bound state: the pattern is dark
                rows.extend([params.lambda_over_a, params.U, Kk.ka / np.pi, b / np.pi, 0.0, "", ""] for b in betas)
                continue
            samples = dynamics.emission_pattern(params, found[0], t_ret, betas=betas, form=form)
            rows.extend([params.lambda_over_a, params.U, Kk.ka / np.pi, s.beta_det / np.pi, s.value, "", ""] for s in samples)
        else:
            state, _ = scattering_state(params, Kk, nu)
            samples = dynamics.emission_pattern(params, state, t_ret, beta_range=beta_range, form=form)
            rows.extend(
                [params.lambda_over_a, params.U, Kk.ka / np.pi, s.beta_det / np.pi, s.value, s.width / np.pi, s.k.ka / np.pi]
                for s in samples
            )
    return rows


def task_pattern(args):
    lams = args.lambda_grid or [args.lambda_over_a]
    Us = args.U_grid or [args.U]
    Ms = args.M_grid or [args.M]
    betas = np.linspace(args.beta_min, args.beta_max, args.n_beta)
    jobs = []
    for M in Ms:
        for U in Us:
            for lam in lams:
                fields = dict(M=M, lambda_over_a=lam, theta=args.theta, U=U)
                jobs.append((fields, args.state, args.snap, args.form, args.t_ret, betas, (args.beta_min, args.beta_max), args.all_K))
    chunks = ordered_map(_pattern_job, jobs, worker_count(args.workers))
    rows = []
    for M, chunk in zip([j[0]["M"] for j in jobs], chunks):
        rows.extend([M] + r for r in chunk)
    cols = ["M", "lambda_over_a[1]", "U[gamma0]", "Ka[pi]", "beta_det[pi]", "intensity[norm]", "width[pi]", "kbar_a[pi]"]
    return cols, rows, {}


def _detector_grid(args, params):
    """(beta, kbar) for every detector angle; off-grid angles are skipped unless --snap."""
    out = []
    for beta in np.linspace(args.beta_min, args.beta_max, args.n_beta):
        k, res = dynamics.angle_to_k(params, beta)
        if abs(res) > args.max_residual and not args.snap:
            continue
        out.append((beta, k))
    return out


def task_pump1(args):
    params = _params(args)
    kP, res = dynamics.angle_to_k(params, args.beta_exc)
    if abs(res) > args.max_residual and not args.snap:
        raise ConfigError(f"pump angle is {res:+.3f} grid spacings off the grid (nearest m = {kP.m}); pass --snap to accept")
    tables = pumped.PairTables(params, args.form)
    if args.numeric:
        st = pumped.rate_steady_numeric(params, pumped.PumpConfig((pumped.Pump(kP, args.Xi),)), tables=tables)
    else:
        st = pumped.single_pump_steady(params, kP, args.Xi, tables=tables)
    rows = []
    for beta, kbar in _detector_grid(args, params):
        g1 = pumped.g1_steady(params, st, kbar, tables=tables)
        s0 = float(pumped.spectrum_from_steady(params, st, kbar, 0.0, tables=tables))
        sU = float(pumped.spectrum_from_steady(params, st, kbar, params.U, tables=tables)) if params.U > 0 else ""
        rows.append([beta / np.pi, kbar.ka / np.pi, g1, s0, sU])
    cols = ["beta_det[pi]", "kbar_a[pi]", "G1[norm]", "S_at_omega0[norm]", "S_at_omega0_plus_U[norm]"]
    return cols, rows, {"kP_m": kP.m}


def _q_half(args, beta1, k2a):
    """qa = (k1 - k2) a / 2 for a continuous detector angle, and whether k1 = k2 (mod 2 pi)."""
    k1a = 2 * np.pi / args.lambda_over_a * np.sin(beta1)
    d = (k1a - k2a) / (2 * np.pi)
    return (k1a - k2a) / 2, abs(d - round(d)) < 1e-12


def _cross_angles(args, k2a):
    """Detector angles in range where k1 = k2 modulo reciprocal lattice vectors."""
    out = []
    lam = args.lambda_over_a
    for n in range(-int(2 / lam) - 2, int(2 / lam) + 3):
        s = lam * (k2a / (2 * np.pi) + n)
        if abs(s) <= 1:
            b = float(np.arcsin(s))
            if args.beta_min - 1e-12 <= b <= args.beta_max + 1e-12:
                out.append(b)
    return sorted(out)


def _beta2_k(args):
    beta2 = args.beta2 if args.beta2 is not None else float(np.arcsin(min(1.0, args.lambda_over_a)))
    return beta2, 2 * np.pi / args.lambda_over_a * np.sin(beta2)


def task_pump2(args):
    beta2, k2a = _beta2_k(args)
    e = args.epsilon
    Minv = None if args.M_limit else args.M
    rows = []
    grid = [(b, False) for b in np.linspace(args.beta_min, args.beta_max, args.n_beta)]
    grid += [(b, True) for b in _cross_angles(args, k2a)]
    grid.sort(key=lambda x: (x[0], x[1]))
    for beta1, cross in grid:
        qa, _ = _q_half(args, beta1, k2a)
        rows.append(
            [
                beta1 / np.pi,
                int(cross),
                pumped.delta_g1_nl_closed(qa, cross, e, "free"),
                pumped.delta_g1_nl_closed(qa, cross, e, "strong", Minv),
                pumped.delta_S_closed(qa, cross, e),
            ]
        )
    cols = ["beta1[pi]", "q_zero", "delta_G1_U0[1]", "delta_G1_Ustrong[1]", "delta_S[1]"]
    return cols, rows, {"beta2_over_pi": beta2 / np.pi}


def task_g2(args):
    beta2, k2a = _beta2_k(args)
    Minv = None if args.M_limit else args.M
    grid = [(b, False) for b in np.linspace(args.beta_min, args.beta_max, args.n_beta)]
    grid += [(b, True) for b in _cross_angles(args, k2a)]
    grid.sort(key=lambda x: (x[0], x[1]))
    rows = []
    for beta1, cross in grid:
        qa, _ = _q_half(args, beta1, k2a)
        rows.append([beta1 / np.pi, int(cross), pumped.g2_closed(qa, cross, "free"), pumped.g2_closed(qa, cross, "strong", Minv)])
    return ["beta1[pi]", "q_zero", "g2_U0[1]", "g2_Ustrong[1]"], rows, {"beta2_over_pi": beta2 / np.pi}


def task_spectrum(args):
    params = _params(args)
    kP, res = dynamics.angle_to_k(params, args.beta_exc)
    kbar, res2 = dynamics.angle_to_k(params, args.beta_det)
    worst = max(abs(res), abs(res2))
    if worst > args.max_residual and not args.snap:
        raise ConfigError(f"pump or detector angle is {worst:.3f} grid spacings off the grid; pass --snap to accept")
    tables = pumped.PairTables(params, args.form)
    st = pumped.single_pump_steady(params, kP, args.Xi, tables=tables)
    omegas = np.linspace(args.omega_min, args.omega_max, args.n_omega)
    S = pumped.spectrum_from_steady(params, st, kbar, omegas, tables=tables)
    rows = [[w, s] for w, s in zip(omegas, S)]
    return ["omega_minus_omega0[gamma0]", "S[norm]"], rows, {"kP_m": kP.m, "kbar_m": kbar.m}


def task_sums(args):
    M = args.M_sums
    rows = []
    for m in range(0, M // 2 + 1, args.q_step):
        qa = 2 * np.pi * m / M
        row = [qa / np.pi]
        for kind in momentum.LATTICE_SUMS:
            row.append(momentum.lattice_sum(kind, qa, M))
            row.append(momentum.lattice_sum(kind, qa, M, "limit"))
        rows.append(row)
    cols = ["qa[pi]"]
    for kind in momentum.LATTICE_SUMS:
        cols += [f"{kind}[1]", f"{kind}_limit[1]"]
    return cols, rows, {"M": M}


def task_verify(args):
    only = set(args.only) if args.only else None
    results = verify.run_all(only)
    rows = [[r.criterion, r.status, r.name, r.detail] for r in results]
    status = verify.exit_status(results, args.strict)
    return ["criterion", "status", "check", "detail"], rows, {"exit_status": status}


RUNNERS = {name: globals()[f"task_{name}"] for name in TASKS}


# ---------------------------------------------------------------------------
# argument parsing


def _add_chain(p, M=101):
    p.add_argument("--M", type=positive_int, default=M, help="number of atoms (odd)")
    p.add_argument("--lambda-over-a", type=float, default=0.5, help="transition wavelength over lattice constant")
    p.add_argument("--theta", type=parse_angle, default=np.pi / 2, help="dipole angle to the chain (fraction of pi or arcsin(x))")
    p.add_argument("--U", type=parse_U, default=0.0, help="interaction in gamma0, or 'strong'")


def _add_common(p):
    p.add_argument("--output", "-o", default=None, help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--workers", type=positive_int, default=None, help=f"worker processes (default: ${WORKERS_ENV} or all cores)")
    p.add_argument("--snap", action="store_true", help="snap off-grid wavenumbers and angles to the nearest grid point")


def _add_beta_range(p, lo=-0.5, hi=0.5, n=721):
    p.add_argument("--beta-min", type=parse_angle, default=lo * np.pi)
    p.add_argument("--beta-max", type=parse_angle, default=hi * np.pi)
    p.add_argument("--n-beta", type=positive_int, default=n)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="atomchain", description="Few-excitation physics of interacting atom chains.")
    sub = parser.add_subparsers(dest="task", required=True)

    p = sub.add_parser("run", help="run a JSON configuration")
    p.add_argument("config")
    p.add_argument("--output", "-o", default=None, help="override the output path of the config")

    p = sub.add_parser("rates", help="complex coupling rates Gamma_x")
    _add_chain(p)
    _add_common(p)
    p.add_argument("--xmax", type=int, default=10)

    p = sub.add_parser("dispersion", help="single or two-excitation dispersion relations")
    _add_chain(p)
    _add_common(p)
    p.add_argument("--manifold", choices=("single", "pair"), default="single")
    p.add_argument("--mode", choices=("tight_binding", "full_range"), default="tight_binding")

    p = sub.add_parser("eigen", help="two-excitation eigenstates for one K")
    _add_chain(p)
    _add_common(p)
    p.add_argument("--K", default="0")
    p.add_argument("--form", choices=momentum.FORMS, default="asymptotic")

    p = sub.add_parser("momdist", help="momentum distribution of one eigenstate")
    _add_chain(p)
    _add_common(p)
    p.add_argument("--state", type=parse_state, required=True)
    p.add_argument("--form", choices=momentum.FORMS, default="asymptotic")
    p.add_argument("--normalize", type=parse_bool, default=False)

    p = sub.add_parser("pattern", help="spontaneous emission pattern of an eigenstate")
    _add_chain(p)
    _add_common(p)
    p.add_argument("--state", type=parse_state, required=True)
    p.add_argument("--form", choices=momentum.FORMS, default="asymptotic")
    p.add_argument("--t-ret", type=float, default=0.0)
    p.add_argument("--lambda-grid", type=parse_range, default=None, help="sweep lambda/a (start:stop:num or list)")
    p.add_argument("--U-grid", type=parse_list(parse_U), default=None, help="sweep U (list)")
    p.add_argument("--M-grid", type=parse_list(positive_int), default=None, help="sweep M (list)")
    p.add_argument("--all-K", type=parse_bool, default=False, help="sweep every K on the grid")
    _add_beta_range(p)

    p = sub.add_parser("pump1", help="single incoherent pump: intensity and spectrum heights versus detector angle")
    _add_chain(p)
    _add_common(p)
    p.add_argument("--beta-exc", type=parse_angle, required=True)
    p.add_argument("--Xi", type=float, default=1e-3)
    p.add_argument("--form", choices=momentum.FORMS, default="asymptotic")
    p.add_argument("--numeric", type=parse_bool, default=False, help="solve the full rate equations instead")
    p.add_argument("--max-residual", type=float, default=0.05, help="largest accepted off-grid residual (grid units)")
    _add_beta_range(p)

    for name, helptext in (("pump2", "two pumps: nonlinear intensity change and bound-state signature"), ("g2", "intensity correlation g2")):
        p = sub.add_parser(name, help=helptext)
        _add_chain(p)
        _add_common(p)
        p.add_argument("--beta2", type=parse_angle, default=None, help="second detector/pump angle (default arcsin(lambda/a))")
        p.add_argument("--M-limit", type=parse_bool, default=True, help="drop the 1/M^2 bound-state terms")
        if name == "pump2":
            p.add_argument("--epsilon", type=float, default=1.0)
        _add_beta_range(p, 0.0, 0.5, 2001)

    p = sub.add_parser("spectrum", help="emission spectrum for a single pump")
    _add_chain(p, M=51)
    _add_common(p)
    p.add_argument("--beta-exc", type=parse_angle, required=True)
    p.add_argument("--beta-det", type=parse_angle, required=True)
    p.add_argument("--Xi", type=float, default=1e-3)
    p.add_argument("--form", choices=momentum.FORMS, default="asymptotic")
    p.add_argument("--omega-min", type=float, default=-10.0)
    p.add_argument("--omega-max", type=float, default=10.0)
    p.add_argument("--n-omega", type=positive_int, default=401)
    p.add_argument("--max-residual", type=float, default=0.05)

    p = sub.add_parser("sums", help="lattice sums and their large-M limits")
    _add_common(p)
    p.add_argument("--M-sums", type=positive_int, default=10_000)
    p.add_argument("--q-step", type=positive_int, default=100)

    p = sub.add_parser("verify", help="run the acceptance checks against the oracle")
    _add_common(p)
    p.add_argument("--only", type=parse_list(int), default=None, help="criterion numbers to run")
    p.add_argument("--strict", action="store_true", help="also fail on known deviations")
    return parser


def _subparser(parser, task):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[task]
    raise KeyError(task)


def _key_line(text: str, key: str) -> int:
    m = re.search(r'"' + re.escape(key) + r'"\s*:', text)
    return text.count("\n", 0, m.start()) + 1 if m else 1


def load_config(path: str, parser: argparse.ArgumentParser) -> argparse.Namespace:
    """Parse and validate a JSON config into the namespace of its task."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}:1: config must be a JSON object")
    task = data.get("task")
    if task not in TASKS:
        raise ConfigError(f"{path}:{_key_line(text, 'task')}: 'task' must be one of {', '.join(TASKS)}")
    sub = _subparser(parser, task)
    actions = {a.dest: a for a in sub._actions if a.dest != "help"}
    args = sub.parse_args(_required_stub(sub, data))
    for key, value in data.items():
        if key in ("task", "description"):
            continue
        dest = key.replace("-", "_")
        line = _key_line(text, key)
        if dest not in actions:
            raise ConfigError(f"{path}:{line}: unknown key {key!r} for task {task!r}")
        action = actions[dest]
        try:
            val = _convert(action, value)
        except (argparse.ArgumentTypeError, ValueError, TypeError) as exc:
            raise ConfigError(f"{path}:{line}: bad value for {key!r}: {exc}") from None
        setattr(args, dest, val)
    args.task = task
    return args


def _convert(action, value):
    """Convert a JSON value with the option's own parser."""
    if isinstance(action, argparse._StoreTrueAction):
        return parse_bool(value)
    if action.dest == "state" and isinstance(value, dict):
        value = ",".join(f"{k}={v}" for k, v in value.items())
    kind = action.type
    if kind is None:
        val = value if isinstance(value, str) else json.dumps(value)
    elif isinstance(value, list):
        if kind is not parse_range and not kind.__name__.startswith("list"):
            raise argparse.ArgumentTypeError("a list is not allowed here")
        val = kind(value)
    elif isinstance(value, (dict, type(None))):
        raise argparse.ArgumentTypeError(f"unexpected {type(value).__name__}")
    else:
        val = kind(value if isinstance(value, str) else json.dumps(value))
    if action.choices is not None and val not in action.choices:
        raise argparse.ArgumentTypeError(f"must be one of {', '.join(map(str, action.choices))}")
    return val


def _json_value(x):
    if isinstance(x, str):
        return x
    s = fmt(x)
    if s in ("nan", "inf", "-inf"):
        return None
    return json.loads(s)


def _required_stub(sub, data):
    """Placeholder values for required options so defaults can be collected."""
    argv = []
    for a in sub._actions:
        if a.required and a.option_strings:
            key = a.dest
            if key not in data and key.replace("_", "-") not in data:
                raise ConfigError(f"missing required key {key!r}")
            argv += [a.option_strings[0], {"state": "K=0,nu=BS"}.get(key, "0")]
    return argv


def render(columns, rows, meta, fmt_name: str, task: str) -> str:
    if fmt_name == "json":
        doc = {
            "task": task,
            "columns": columns,
            "rows": [[_json_value(x) for x in row] for row in rows],
            "meta": {k: _json_value(v) for k, v in meta.items()},
        }
        return json.dumps(doc, indent=1, sort_keys=False) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(x) for x in row])
    return buf.getvalue()


def run(args) -> int:
    """Execute a parsed task and write its output; returns the exit status."""
    try:
        columns, rows, meta = RUNNERS[args.task](args)
    except OffGridError as exc:
        raise ConfigError(f"{exc}; pass --snap to use the nearest grid value") from None
    text = render(columns, rows, meta, args.format, args.task)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return int(meta.get("exit_status", 0))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.task == "run":
            override = args.output
            args = load_config(args.config, parser)
            if override:
                args.output = override
        return run(args)
    except ConfigError as exc:
        print(f"atomchain: error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"atomchain: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
