"""Semiclassical engine: mean-field dynamics, steady states, and bistability.

The mean-field equations close on the three complex amplitudes <a>, <b>, <c>.
Eliminating <a> and <b> from the stationary conditions turns the controller
photon number into a real cubic; its root structure (one or three real roots)
is the bistability diagnostic, controlled by three dimensionless knobs:

    x = p1 / gamma,  y = p2 / gamma,  z = k |eps|^2 / gamma^2,
    k = g0^2 / (gamma omega_m),  lambda = k n,  n = |<c>|^2,

valid for mechanical quality factors Q_m = omega_m / gamma_m >> 1.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np


class FixedPointError(RuntimeError):
    """Self-consistent mean-field iteration failed to converge."""


class WindowUndefinedError(ValueError):
    """Bistable window requested below the detuning threshold."""


@dataclass(frozen=True)
class SemiclassicalParams:
    """Detunings, rates, coupling and drive, all in units of gamma."""

    delta_s: float
    delta_c: float
    omega_m: float
    kappa: float
    kappa_f: float
    gamma_m: float
    g0: float
    eps: float
    gamma: float = 1.0

    def __post_init__(self) -> None:
        for name in ("omega_m", "kappa", "kappa_f", "gamma_m", "g0", "gamma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    @property
    def q_m(self) -> float:
        """Mechanical quality factor; the cubic drops O(1/Q_m) terms."""
        return self.omega_m / self.gamma_m if self.gamma_m > 0 else math.inf

    @property
    def nu(self) -> float:
        return math.sqrt(self.kappa) + math.sqrt(self.kappa_f)

    @property
    def k_factor(self) -> float:
        """Nonlinearity scale k = g0^2 / (gamma omega_m)."""
        return self.g0**2 / (self.gamma * self.omega_m)


@dataclass(frozen=True)
class MeanFieldState:
    a: complex
    b: complex
    c: complex

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c], dtype=complex)


@dataclass(frozen=True)
class DimensionlessParams:
    x: float
    y: float
    z: float
    k: float
    K: float


@dataclass(frozen=True)
class CubicResult:
    """Real roots of 4 l^3 - 4 y l^2 + (x^2 + y^2) l - z, sorted ascending."""

    roots: tuple[float, ...]
    residuals: tuple[float, ...]
    boundary: bool = False

    @property
    def n_roots(self) -> int:
        return len(self.roots)


def mf_rhs(state: MeanFieldState, p: SemiclassicalParams) -> MeanFieldState:
    """Time derivatives of (<a>, <b>, <c>)."""
    a, b, c = state.a, state.b, state.c
    da = -1j * p.delta_s * a - 0.5 * p.nu**2 * a - math.sqrt(p.gamma * p.kappa_f) * c
    db = -1j * p.omega_m * b - 1j * p.g0 * abs(c) ** 2 - 0.5 * p.gamma_m * b
    dc = (
        -1j * p.delta_c * c
        - 1j * p.g0 * c * (b.conjugate() + b)
        - 1j * p.eps
        - math.sqrt(p.kappa * p.gamma) * a
        - 0.5 * p.gamma * c
    )
    return MeanFieldState(da, db, dc)


def _wirtinger_blocks(p: SemiclassicalParams, state: MeanFieldState):
    """d f_i / d v_j and d f_i / d conj(v_j) for the three complex equations."""
    c = state.c
    b = state.b
    z3 = 0.0j
    fv = np.array(
        [
            [-1j * p.delta_s - 0.5 * p.nu**2, z3, -math.sqrt(p.gamma * p.kappa_f)],
            [z3, -1j * p.omega_m - 0.5 * p.gamma_m, -1j * p.g0 * c.conjugate()],
            [-math.sqrt(p.kappa * p.gamma), -1j * p.g0 * c,
             -1j * p.delta_c - 1j * p.g0 * (b + b.conjugate()) - 0.5 * p.gamma],
        ],
        dtype=complex,
    )
    fvbar = np.array(
        [
            [z3, z3, z3],
            [z3, z3, -1j * p.g0 * c],
            [z3, -1j * p.g0 * c, z3],
        ],
        dtype=complex,
    )
    return fv, fvbar


def mf_jacobian(state: MeanFieldState, p: SemiclassicalParams) -> np.ndarray:
    """Real 6x6 Jacobian of the flow in (Re, Im) coordinates of (a, b, c)."""
    fv, fvbar = _wirtinger_blocks(p, state)
    jac = np.zeros((6, 6))
    for i in range(3):
        for j in range(3):
            dfdx = fv[i, j] + fvbar[i, j]
            dfdy = 1j * (fv[i, j] - fvbar[i, j])
            jac[2 * i, 2 * j] = dfdx.real
            jac[2 * i, 2 * j + 1] = dfdy.real
            jac[2 * i + 1, 2 * j] = dfdx.imag
            jac[2 * i + 1, 2 * j + 1] = dfdy.imag
    return jac


def mf_residual(state: MeanFieldState, p: SemiclassicalParams) -> float:
    """Largest per-equation residual, relative to the equation's term magnitudes."""
    a, b, c = state.a, state.b, state.c
    rhs = mf_rhs(state, p)
    scales = (
        abs(p.delta_s * a) + 0.5 * p.nu**2 * abs(a) + math.sqrt(p.gamma * p.kappa_f) * abs(c),
        abs(p.omega_m * b) + p.g0 * abs(c) ** 2 + 0.5 * p.gamma_m * abs(b),
        abs(p.delta_c * c) + p.g0 * abs(c) * abs(b + b.conjugate()) + abs(p.eps)
        + math.sqrt(p.kappa * p.gamma) * abs(a) + 0.5 * p.gamma * abs(c),
    )
    out = 0.0
    for f, s in zip(rhs.as_array(), scales):
        out = max(out, abs(f) / max(s, 1e-300)) if s or f else out
    return out


def _amplitudes_from_n(p: SemiclassicalParams, n: float) -> MeanFieldState:
    """Steady amplitudes implied by a controller photon number n = |<c>|^2."""
    b0 = -1j * p.g0 * n / (1j * p.omega_m + 0.5 * p.gamma_m)
    denom_a = 1j * p.delta_s + 0.5 * p.nu**2
    # <a> = mu <c>; eliminating <a> shifts the <c> denominator by -gamma sqrt(kappa kappa_f)/denom_a
    mu = -math.sqrt(p.gamma * p.kappa_f) / denom_a
    denom_c = (
        1j * p.delta_c
        + 1j * p.g0 * (b0 + b0.conjugate())
        + 0.5 * p.gamma
        + math.sqrt(p.kappa * p.gamma) * mu
    )
    c0 = -1j * p.eps / denom_c
    return MeanFieldState(mu * c0, b0, c0)


def _selfconsistent_n(p: SemiclassicalParams, n_seed: float, tol: float, max_iter: int) -> float:
    """Solve n = |C0(n)|^2 by a damped secant iteration seeded at n_seed."""

    def h(n: float) -> float:
        return abs(_amplitudes_from_n(p, n).c) ** 2 - n

    n0 = max(n_seed, 0.0)
    n1 = n0 * (1 + 1e-6) + 1e-12
    h0, h1 = h(n0), h(n1)
    for _ in range(max_iter):
        if abs(h1) <= tol * max(n1, 1.0):
            return max(n1, 0.0)
        dh = h1 - h0
        if dh == 0.0:
            break
        step = -h1 * (n1 - n0) / dh
        # keep the iterate in the physical half-line and damp wild steps
        limit = max(abs(n1), 1.0)
        step = max(min(step, 10 * limit), -0.9 * max(n1, 1e-12))
        n0, h0 = n1, h1
        n1 = n1 + step
        h1 = h(n1)
    raise FixedPointError(
        f"self-consistency for n did not converge from seed {n_seed:.6g} (h={h1:.3e})"
    )


def mf_steady_fixedpoint(
    p: SemiclassicalParams,
    n_seed: float | None = None,
    tol: float = 1e-12,
    max_iter: int = 200,
) -> MeanFieldState:
    """Self-consistent steady state of the mean-field equations.

    Seeding from different cubic roots reaches the different coexisting
    solutions in the bistable regime.  Residuals of all three stationarity
    equations are verified before returning.
    """
    if p.eps == 0.0:
        return MeanFieldState(0.0j, 0.0j, 0.0j)
    if n_seed is None:
        fp = dimensionless(p)
        roots = solve_cubic(fp.x, fp.y, fp.z).roots
        n_seed = roots[0] / fp.k if fp.k > 0 else abs(p.eps / (0.5 * p.gamma)) ** 2
    n = _selfconsistent_n(p, n_seed, tol, max_iter)
    state = _amplitudes_from_n(p, n)
    res = mf_residual(state, p)
    if res > 1e-10:
        raise FixedPointError(f"stationarity residual {res:.3e} from seed {n_seed:.6g}")
    return state


def mf_all_fixed_points(p: SemiclassicalParams, tol: float = 1e-12) -> list[MeanFieldState]:
    """All reachable steady states, one per real cubic root."""
    fp = dimensionless(p)
    if fp.k == 0.0:
        return [mf_steady_fixedpoint(p)]
    states = []
    for lam in solve_cubic(fp.x, fp.y, fp.z).roots:
        states.append(mf_steady_fixedpoint(p, n_seed=lam / fp.k, tol=tol))
    return states


def p1p2(p: SemiclassicalParams) -> tuple[float, float]:
    """Feedback-dressed damping and detuning parameters of the cubic."""
    nu4 = p.nu**4
    den = 4 * p.delta_s**2 + nu4
    root_kkf = math.sqrt(p.kappa * p.kappa_f)
    p1 = 0.5 * p.gamma - 2 * p.gamma * root_kkf * p.nu**2 / den
    p2 = p.delta_c + 4 * p.gamma * root_kkf * p.delta_s / den
    return p1, p2


def k_factor_A(p: SemiclassicalParams) -> float:
    """Ratio K of controlled-cavity to controller photon number, n_A = K n."""
    return 4 * p.gamma * p.kappa_f / (4 * p.delta_s**2 + p.nu**4)


def dimensionless(p: SemiclassicalParams) -> DimensionlessParams:
    if p.gamma == 0:
        raise ValueError("gamma must be positive to form dimensionless parameters")
    P1, P2 = p1p2(p)
    k = p.k_factor
    return DimensionlessParams(
        x=P1 / p.gamma,
        y=P2 / p.gamma,
        z=k * abs(p.eps) ** 2 / p.gamma**2,
        k=k,
        K=k_factor_A(p),
    )


def cubic_coefficients(p: SemiclassicalParams) -> tuple[float, float, float, float]:
    """(4, -4y, x^2 + y^2, -z) for the steady-state photon-number cubic."""
    fp = dimensionless(p)
    return (4.0, -4.0 * fp.y, fp.x**2 + fp.y**2, -fp.z)


def _cubic_f(lam: float, x: float, y: float, z: float) -> float:
    return 4 * lam**3 - 4 * y * lam**2 + (x**2 + y**2) * lam - z


def _cubic_df(lam: float, x: float, y: float) -> float:
    return 12 * lam**2 - 8 * y * lam + (x**2 + y**2)


def solve_cubic(x: float, y: float, z: float, boundary_tol: float = 1e-12) -> CubicResult:
    """Real roots of the photon-number cubic by closed form plus Newton polish.

    A near-zero discriminant is reported as a boundary case with the double
    root listed once.
    """
    if z < 0:
        raise ValueError("driving power z must be nonnegative")
    # monic form l^3 + B l^2 + C l + D, then depressed t^3 + p t + q
    B = -y
    C = (x**2 + y**2) / 4.0
    D = -z / 4.0
    shift = -B / 3.0
    pcoef = C - B**2 / 3.0
    qcoef = 2 * B**3 / 27.0 - B * C / 3.0 + D
    disc = -4 * pcoef**3 - 27 * qcoef**2

    boundary = abs(disc) < boundary_tol
    if boundary:
        if abs(pcoef) < boundary_tol:
            ts = [0.0]  # triple root
        else:
            ts = sorted({3 * qcoef / pcoef, -3 * qcoef / (2 * pcoef)})
    elif disc > 0:
        m = 2 * math.sqrt(-pcoef / 3.0)
        theta = math.acos(min(1.0, max(-1.0, 3 * qcoef / (pcoef * m))))
        ts = sorted(m * math.cos((theta - 2 * math.pi * j) / 3.0) for j in range(3))
    else:
        s = cmath.sqrt(qcoef**2 / 4.0 + pcoef**3 / 27.0)
        u = -qcoef / 2.0 + s
        v = -qcoef / 2.0 - s
        cbrt = lambda w: w ** (1 / 3) if w.imag or w.real >= 0 else -((-w) ** (1 / 3))
        ts = [(cbrt(u) + cbrt(v)).real]

    roots = []
    for t in ts:
        lam = t + shift
        for _ in range(4):  # Newton polish on the original cubic
            f = _cubic_f(lam, x, y, z)
            df = _cubic_df(lam, x, y)
            if df != 0.0:
                lam -= f / df
        roots.append(lam)
    roots = sorted(roots)
    residuals = tuple(abs(_cubic_f(r, x, y, z)) for r in roots)
    return CubicResult(roots=tuple(roots), residuals=residuals, boundary=boundary)


def thresholds(x: float) -> tuple[float, float]:
    """Detuning and driving-power thresholds (y~, z~) below which the cubic is single-valued."""
    ytilde = math.sqrt(3.0) * x
    ztilde = (4.0 / 27.0) * ytilde**3
    return ytilde, ztilde


def bistable_window(x: float, y: float) -> tuple[float, float]:
    """Driving-power interval (z-, z+) with three real roots at given (x, y)."""
    ytilde, _ = thresholds(x)
    if y < ytilde:
        raise WindowUndefinedError(
            f"window undefined: y={y:.6g} below threshold ytilde={ytilde:.6g}"
        )
    core = y * (y**2 + 3 * ytilde**2)
    wing = (y**2 - ytilde**2) ** 1.5
    return (core - wing) / 27.0, (core + wing) / 27.0


MARGINAL_EIG_TOL = 1e-8


def classify_stability(lam: float, p: SemiclassicalParams) -> str:
    """'stable' | 'unstable' | 'marginal' for the fixed point tied to a cubic root.

    The root is refined to an exact mean-field fixed point, then judged by
    the sign of the largest real part among the 6x6 Jacobian eigenvalues.
    """
    k = p.k_factor
    if k <= 0:
        state = mf_steady_fixedpoint(p)
    else:
        state = mf_steady_fixedpoint(p, n_seed=lam / k)
    eigs = np.linalg.eigvals(mf_jacobian(state, p))
    top = float(eigs.real.max())
    if abs(top) < MARGINAL_EIG_TOL:
        return "marginal"
    return "stable" if top < 0 else "unstable"


def params_for_xyz(
    x: float,
    y: float,
    z: float,
    gamma: float = 1.0,
    kappa: float = 1.0,
    omega_m: float = 100.0,
    q_m: float = 1e4,
    k: float = 0.01,
) -> SemiclassicalParams:
    """Physical parameter set realizing given dimensionless (x, y, z).

    x is tuned through the cavity detuning at fixed rates; x = 0.5 is only
    reached in the limit of vanishing feedback (or infinite detuning), so it
    is mapped to kappa_f = 0 exactly.  x below the Delta_s = 0 minimum of the
    chosen rate set is unreachable and raises.
    """
    if not 0.0 <= x <= 0.5:
        raise ValueError("the physical map covers 0 <= x <= 0.5 only")
    gamma_m = omega_m / q_m
    g0 = math.sqrt(k * gamma * omega_m)
    eps = gamma * math.sqrt(z / k) if k > 0 else 0.0
    if x == 0.5:
        kappa_f, delta_s = 0.0, 0.0
    else:
        kappa_f = kappa
        nu2 = 4.0 * kappa
        rhs = 2 * kappa * nu2 / (0.5 - x) - nu2**2
        if rhs < -1e-12:
            raise ValueError(f"x={x} unreachable with kappa={kappa}")
        delta_s = 0.5 * math.sqrt(max(rhs, 0.0))
    p_partial = SemiclassicalParams(
        delta_s=delta_s, delta_c=0.0, omega_m=omega_m, kappa=kappa,
        kappa_f=kappa_f, gamma_m=gamma_m, g0=g0, eps=eps, gamma=gamma,
    )
    _, p2_at_zero = p1p2(p_partial)
    delta_c = gamma * y - p2_at_zero
    return SemiclassicalParams(
        delta_s=delta_s, delta_c=delta_c, omega_m=omega_m, kappa=kappa,
        kappa_f=kappa_f, gamma_m=gamma_m, g0=g0, eps=eps, gamma=gamma,
    )


@dataclass(frozen=True)
class BranchPoint:
    """One real root of the cubic at one sweep setting."""

    sweep_value: float
    root_index: int
    lam: float
    n: float
    n_a: float
    stable: str
    boundary: bool


def bistability_sweep(
    sweep: str,
    values: np.ndarray,
    fixed: dict[str, float],
    classify: bool = True,
    map_kwargs: dict | None = None,
) -> list[BranchPoint]:
    """Branch table of the cubic over a sweep of one dimensionless knob.

    ``sweep`` is one of 'x', 'y', 'z'; the other two come from ``fixed``.
    Each root is mapped through a physical parameter set for the stability
    label and the controlled-cavity occupation n_A = K n.
    """
    if sweep not in ("x", "y", "z"):
        raise ValueError("sweep variable must be one of 'x', 'y', 'z'")
    missing = {"x", "y", "z"} - {sweep} - set(fixed)
    if missing:
        raise ValueError(f"missing fixed dimensionless parameters: {sorted(missing)}")
    map_kwargs = map_kwargs or {}
    table: list[BranchPoint] = []
    for v in np.asarray(values, dtype=float):
        knobs = dict(fixed)
        knobs[sweep] = float(v)
        result = solve_cubic(knobs["x"], knobs["y"], knobs["z"])
        params = params_for_xyz(knobs["x"], knobs["y"], knobs["z"], **map_kwargs)
        K = k_factor_A(params)
        k = params.k_factor
        for i, lam in enumerate(result.roots):
            n = lam / k if k > 0 else 0.0
            label = classify_stability(lam, params) if classify else "unknown"
            table.append(
                BranchPoint(
                    sweep_value=float(v), root_index=i, lam=float(lam),
                    n=float(n), n_a=float(K * n), stable=label,
                    boundary=result.boundary,
                )
            )
    return table
