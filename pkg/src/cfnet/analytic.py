"""Closed-form and weak-driving approximations for the photon statistics.

Once the mechanical resonator is eliminated, the controller cavity carries an
effective Kerr nonlinearity chi = g0^2 / omega_m with photon-number spectrum
E(n) = Delta_c n - chi n^2, i.e. normal ordered (Delta_c - chi) cdag c -
chi cdag cdag c c.  Stationary amplitudes on the two-excitation manifold of
the non-Hermitian (complex-detuning) Hamiltonian then give the second-order
correlation of either cavity directly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .network import DRIVE_CONTROLLED, DRIVE_CONTROLLER, NetworkParams, make_registry
from .operators import OperatorExpr
from .slh import SlhTriple, feedback_loop
import numpy.linalg as npl

COUPLING_CONDITIONAL = "conditional"
COUPLING_PHENOMENOLOGICAL = "phenomenological"

KERR_VALIDITY_WARN = 0.35  # largest g0/omega_m exercised by the reference sets
WEAK_DRIVE_MAX_EPS = 0.05


class SingularAmplitudeSystem(RuntimeError):
    """Exact multiphoton resonance with zero damping; amplitudes undefined."""


@dataclass(frozen=True)
class KerrParams:
    """Effective Kerr description of the feedback network at fixed detunings."""

    delta_s: float
    delta_c: float
    chi: float
    kappa: float
    kappa_f: float
    eps: float
    gamma: float = 1.0

    def __post_init__(self) -> None:
        if self.chi < 0:
            raise ValueError("chi must be nonnegative")

    @property
    def kappa_a(self) -> float:
        """Effective controlled-cavity linewidth (sqrt(kappa)+sqrt(kappa_f))^2 + gamma."""
        return (math.sqrt(self.kappa) + math.sqrt(self.kappa_f)) ** 2 + self.gamma

    @classmethod
    def from_network(cls, net: NetworkParams, delta_s: float, delta_c: float) -> "KerrParams":
        return cls(
            delta_s=delta_s, delta_c=delta_c, chi=net.chi,
            kappa=net.kappa, kappa_f=net.kappa_f, eps=net.eps, gamma=net.gamma,
        )


def effective_kerr_triple(
    net: NetworkParams,
    delta_s: float,
    delta_c: float,
    drive: str = DRIVE_CONTROLLER,
) -> SlhTriple:
    """Closed-loop triple with the optomechanical coupling folded into a Kerr term.

    Valid for g0/omega_m << 1; the mechanical mode stays in the Hamiltonian
    but is decoupled from the optics.  The Kerr spectrum is E(n) =
    Delta_c n - chi n^2, written in normal order.
    """
    ratio = net.g0 / net.omega_m if net.omega_m > 0 else math.inf
    if ratio >= 1.0:
        raise ValueError("effective Kerr model needs g0/omega_m < 1")
    if ratio > KERR_VALIDITY_WARN:
        warnings.warn(
            f"g0/omega_m = {ratio:.3f} beyond the validated range; "
            "Kerr reduction is uncontrolled here",
            stacklevel=2,
        )
    reg = make_registry()
    a = OperatorExpr.annihilator(reg, "a")
    c = OperatorExpr.annihilator(reg, "c")
    chi = net.chi
    plant_h = delta_s * OperatorExpr.number(reg, "a")
    if drive == DRIVE_CONTROLLED:
        plant_h = plant_h + net.eps * (a.dagger() + a)
    elif drive != DRIVE_CONTROLLER:
        raise ValueError(f"unknown drive placement {drive!r}")
    plant = SlhTriple(np.eye(1), (math.sqrt(net.kappa) * a,), plant_h)

    kerr_h = (
        (delta_c - chi) * OperatorExpr.number(reg, "c")
        - chi * (c.dagger() * c.dagger() * c * c)
        + net.omega_m * OperatorExpr.number(reg, "b")
    )
    if drive == DRIVE_CONTROLLER:
        kerr_h = kerr_h + net.eps * (c.dagger() + c)
    controller = SlhTriple(np.eye(1), (math.sqrt(net.gamma) * c,), kerr_h)
    return feedback_loop(
        plant, controller, math.sqrt(net.kappa_f) * OperatorExpr.annihilator(reg, "a")
    )


def g2_analytic(delta: float, chi: float, kappa_a: float, gamma: float) -> float:
    """Weak-driving second-order correlation of the controlled cavity.

    Resonant case: both cavities detuned by the same delta from the drive.
    """
    num = (4 * (delta - chi) ** 2 + kappa_a**2 / 4) * ((delta - chi) ** 2 + gamma**2 / 4)
    den = abs((2 * delta - chi - 0.5j * kappa_a) * (delta - 2 * chi - 0.5j * gamma)) ** 2
    return num / den


def g2_analytic_general(
    delta_s: float, delta_c: float, chi: float, kappa_a: float, gamma: float
) -> float:
    """General-detuning form; reduces to :func:`g2_analytic` at delta_s = delta_c."""
    num = (
        abs(delta_s + delta_c - 2 * chi - 0.5j * kappa_a) ** 2
        * abs(delta_c - chi - 0.5j * gamma) ** 2
    )
    den = (
        abs(
            (delta_s + delta_c - chi - 0.5j * kappa_a)
            * (delta_c - 2 * chi - 0.5j * gamma)
        )
        ** 2
    )
    return num / den


@dataclass(frozen=True)
class AmplitudeSet:
    """Stationary amplitudes C_{na,nc} on the two-excitation manifold.

    The vacuum amplitude is normalized to one; the single- and two-photon
    amplitudes carry the first and second order of the drive.
    """

    amplitudes: dict[tuple[int, int], complex]

    def probabilities(self, mode: str = "a") -> tuple[float, float, float]:
        """(P0, P1, P2) photon-number weights of one cavity."""
        axis = 0 if mode == "a" else 1
        p = [0.0, 0.0, 0.0]
        for (na, nc), amp in self.amplitudes.items():
            p[(na, nc)[axis]] += abs(amp) ** 2
        return tuple(p)

    def g2(self, mode: str = "a") -> float:
        """sum n(n-1) P_n / (sum n P_n)^2 at strict leading order in the drive.

        Only the leading power of the drive is kept in each factor (P2 is
        fourth order, P1 second order), which makes the ratio exactly
        drive-independent and exactly one for a linear network.
        """
        one = (1, 0) if mode == "a" else (0, 1)
        two = (2, 0) if mode == "a" else (0, 2)
        p1 = abs(self.amplitudes[one]) ** 2
        p2 = abs(self.amplitudes[two]) ** 2
        if p1 <= 0:
            raise SingularAmplitudeSystem(f"mode {mode!r} carries no excitation")
        return 2 * p2 / p1**2


def _complex_detunings(net: NetworkParams, delta_s: float, delta_c: float) -> tuple[complex, complex]:
    nu2 = (math.sqrt(net.kappa) + math.sqrt(net.kappa_f)) ** 2
    return delta_s - 0.5j * nu2, delta_c - 0.5j * net.gamma


def _couplings(net: NetworkParams, coupling: str) -> tuple[complex, complex]:
    """(adag c, cdag a) coefficients of the non-Hermitian coupling.

    'conditional' carries the full no-jump cross terms of the collective
    decay channel, reproducing the cascaded (unidirectional) structure;
    'phenomenological' keeps only the Hermitian interference term alongside
    the complex detunings.
    """
    eta = net.coupling_asymmetry
    if coupling == COUPLING_CONDITIONAL:
        return (
            -1j * math.sqrt(net.gamma * net.kappa_f),
            -1j * math.sqrt(net.gamma * net.kappa),
        )
    if coupling == COUPLING_PHENOMENOLOGICAL:
        return 0.5j * eta, -0.5j * eta
    raise ValueError(f"unknown coupling variant {coupling!r}")


def weak_drive_amplitudes(
    net: NetworkParams,
    delta_s: float,
    delta_c: float,
    drive: str = DRIVE_CONTROLLER,
    coupling: str = COUPLING_CONDITIONAL,
) -> AmplitudeSet:
    """Order-by-order stationary amplitudes under weak driving.

    Solves the zeroth, first (2x2), and second (3x3) order linear systems on
    the manifold of at most two photons, with the bosonic sqrt(2) enhancement
    on doubly occupied states and the Kerr shift on the controller.  The
    returned correlation is exact in the vanishing-drive limit.
    """
    if net.eps > WEAK_DRIVE_MAX_EPS * net.gamma:
        raise ValueError(
            f"weak-driving solver is valid for eps <= {WEAK_DRIVE_MAX_EPS} gamma; "
            f"got eps = {net.eps}"
        )
    if drive not in (DRIVE_CONTROLLER, DRIVE_CONTROLLED):
        raise ValueError(f"unknown drive placement {drive!r}")
    ds, dc = _complex_detunings(net, delta_s, delta_c)
    j_ac, j_ca = _couplings(net, coupling)
    chi = net.chi
    eps_a = net.eps if drive == DRIVE_CONTROLLED else 0.0
    eps_c = net.eps if drive == DRIVE_CONTROLLER else 0.0

    def energy(na: int, nc: int) -> complex:
        return ds * na + dc * nc - chi * nc**2

    c00 = 1.0 + 0.0j
    # first order: rows |10>, |01>
    m1 = np.array([[energy(1, 0), j_ac], [j_ca, energy(0, 1)]], dtype=complex)
    rhs1 = -c00 * np.array([eps_a, eps_c], dtype=complex)
    try:
        c10, c01 = npl.solve(m1, rhs1)
    except npl.LinAlgError as err:
        raise SingularAmplitudeSystem(f"first-order system singular: {err}") from err

    # second order: rows |20>, |11>, |02>
    r2 = math.sqrt(2.0)
    m2 = np.array(
        [
            [energy(2, 0), r2 * j_ac, 0.0],
            [r2 * j_ca, energy(1, 1), r2 * j_ac],
            [0.0, r2 * j_ca, energy(0, 2)],
        ],
        dtype=complex,
    )
    rhs2 = -np.array(
        [
            r2 * eps_a * c10,
            eps_a * c01 + eps_c * c10,
            r2 * eps_c * c01,
        ],
        dtype=complex,
    )
    try:
        c20, c11, c02 = npl.solve(m2, rhs2)
    except npl.LinAlgError as err:
        raise SingularAmplitudeSystem(f"second-order system singular: {err}") from err

    return AmplitudeSet(
        amplitudes={
            (0, 0): c00, (1, 0): complex(c10), (0, 1): complex(c01),
            (2, 0): complex(c20), (1, 1): complex(c11), (0, 2): complex(c02),
        }
    )


@dataclass(frozen=True)
class VariantComparison:
    """Pointwise comparison of the two non-Hermitian coupling conventions."""

    delta_over_chi: np.ndarray
    g2_conditional: np.ndarray
    g2_phenomenological: np.ndarray
    coupling_difference: OperatorExpr

    @property
    def max_abs_log10_ratio(self) -> float:
        r = np.log10(self.g2_conditional) - np.log10(self.g2_phenomenological)
        return float(np.nanmax(np.abs(r)))

    def dip_location(self, which: str) -> float:
        g2 = self.g2_conditional if which == COUPLING_CONDITIONAL else self.g2_phenomenological
        return float(self.delta_over_chi[int(np.nanargmin(g2))])


def _coupling_difference_expr(net: NetworkParams) -> OperatorExpr:
    """Symbolic difference (conditional - phenomenological) of the couplings."""
    reg = make_registry()
    a = OperatorExpr.annihilator(reg, "a")
    c = OperatorExpr.annihilator(reg, "c")
    j_ac_s, j_ca_s = _couplings(net, COUPLING_CONDITIONAL)
    j_ac_p, j_ca_p = _couplings(net, COUPLING_PHENOMENOLOGICAL)
    return (j_ac_s - j_ac_p) * (a.dagger() * c) + (j_ca_s - j_ca_p) * (c.dagger() * a)


def compare_nonhermitian_variants(
    net: NetworkParams,
    ratios: np.ndarray,
    drive: str = DRIVE_CONTROLLER,
) -> VariantComparison:
    """Evaluate g2 of the controlled cavity under both coupling conventions.

    For balanced rates the phenomenological Hermitian coupling vanishes
    identically and never excites the undriven cavity; it is evaluated in the
    limit of an infinitesimal rate imbalance instead of returning 0/0.
    """
    ratios = np.asarray(ratios, dtype=float)
    probe = net if net.eps <= WEAK_DRIVE_MAX_EPS * net.gamma else net.with_eps(
        WEAK_DRIVE_MAX_EPS * net.gamma
    )
    phen_net = probe
    if abs(probe.coupling_asymmetry) < 1e-12:
        phen_net = NetworkParams(
            kappa=probe.kappa, kappa_f=probe.kappa_f * (1 + 1e-7), g0=probe.g0,
            omega_m=probe.omega_m, gamma_m=probe.gamma_m, eps=probe.eps,
            gamma=probe.gamma, n_th=probe.n_th,
        )
    cond = np.empty_like(ratios)
    phen = np.empty_like(ratios)
    for i, r in enumerate(ratios):
        d = r * net.chi
        cond[i] = weak_drive_amplitudes(probe, d, d, drive, COUPLING_CONDITIONAL).g2("a")
        try:
            phen[i] = weak_drive_amplitudes(phen_net, d, d, drive, COUPLING_PHENOMENOLOGICAL).g2("a")
        except SingularAmplitudeSystem:
            phen[i] = np.nan
    return VariantComparison(
        delta_over_chi=ratios,
        g2_conditional=cond,
        g2_phenomenological=phen,
        coupling_difference=_coupling_difference_expr(net),
    )
