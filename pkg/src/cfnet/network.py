"""Builders for the feedback-controlled cavity network.

The system is a linear cavity (mode ``a``) whose output runs through an
optomechanical controller (optical mode ``c``, mechanical mode ``b``) and is
fed back into the cavity.  All rates and frequencies are in units of the
controller cavity decay rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import slh
from .fock import FockSpace
from .liouvillian import LindbladModel
from .operators import MECHANICAL, OPTICAL, ModeRegistry, OperatorExpr

DRIVE_CONTROLLER = "controller"
DRIVE_CONTROLLED = "controlled"

DEFAULT_DIMS = {"a": 5, "c": 5, "b": 10}


@dataclass(frozen=True)
class NetworkParams:
    """Rates and couplings of the feedback network (units of gamma)."""

    kappa: float
    kappa_f: float
    g0: float
    omega_m: float
    gamma_m: float
    eps: float
    gamma: float = 1.0
    n_th: float = 0.0

    def __post_init__(self) -> None:
        for name in ("kappa", "kappa_f", "g0", "omega_m", "gamma_m", "gamma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.n_th < 0:
            raise ValueError("n_th must be nonnegative")

    @property
    def chi(self) -> float:
        """Mechanically induced Kerr coefficient g0^2 / omega_m."""
        return self.g0**2 / self.omega_m

    @property
    def kappa_a(self) -> float:
        """Effective linewidth (sqrt(kappa) + sqrt(kappa_f))^2 + gamma."""
        return (math.sqrt(self.kappa) + math.sqrt(self.kappa_f)) ** 2 + self.gamma

    @property
    def coupling_asymmetry(self) -> float:
        """sqrt(gamma kappa) - sqrt(gamma kappa_f), the coherent-coupling strength."""
        return math.sqrt(self.gamma * self.kappa) - math.sqrt(self.gamma * self.kappa_f)

    def with_eps(self, eps: float) -> "NetworkParams":
        return replace(self, eps=eps)


# Reference parameter sets exercised throughout the test and reproduction
# harness (strong coupling, unbalanced rates, weak coupling).
STRONG_COUPLING = NetworkParams(kappa=1.0, kappa_f=1.0, g0=32.0, omega_m=100.0, gamma_m=0.01, eps=0.1)
UNBALANCED_RATES = NetworkParams(kappa=10.0, kappa_f=10.0, g0=2.5, omega_m=100.0, gamma_m=0.01, eps=0.01)
WEAK_COUPLING = NetworkParams(kappa=1.0, kappa_f=1.2, g0=0.3, omega_m=10.0, gamma_m=0.01, eps=0.01)


def make_registry() -> ModeRegistry:
    reg = ModeRegistry()
    reg.register("a", OPTICAL)
    reg.register("c", OPTICAL)
    reg.register("b", MECHANICAL)
    return reg


def plant_triple(reg: ModeRegistry, omega_s: float, kappa: float, drive_eps: float = 0.0) -> slh.SlhTriple:
    """Controlled linear cavity: L = sqrt(kappa) a, H = omega_s adag a (+ drive)."""
    a = OperatorExpr.annihilator(reg, "a")
    h = omega_s * OperatorExpr.number(reg, "a")
    if drive_eps:
        h = h + drive_eps * (a.dagger() + a)
    return slh.SlhTriple(np.eye(1), (math.sqrt(kappa) * a,), h)


def controller_triple(
    reg: ModeRegistry,
    omega_c: float,
    omega_m: float,
    g0: float,
    gamma: float,
    drive_eps: float = 0.0,
) -> slh.SlhTriple:
    """Optomechanical controller: cavity c coupled to resonator b via c^dag c (b^dag + b)."""
    c = OperatorExpr.annihilator(reg, "c")
    b = OperatorExpr.annihilator(reg, "b")
    h = (
        omega_c * OperatorExpr.number(reg, "c")
        + omega_m * OperatorExpr.number(reg, "b")
        + g0 * OperatorExpr.number(reg, "c") * (b.dagger() + b)
    )
    if drive_eps:
        h = h + drive_eps * (c.dagger() + c)
    return slh.SlhTriple(np.eye(1), (gamma**0.5 * c,), h)


def composed_triple(
    params: NetworkParams,
    delta_s: float,
    delta_c: float,
    drive: str = DRIVE_CONTROLLER,
    registry: ModeRegistry | None = None,
) -> slh.SlhTriple:
    """Closed-loop triple in the frame rotating at the drive frequency.

    The collective coupling comes out as (sqrt(kappa) + sqrt(kappa_f)) a +
    sqrt(gamma) c and the composed Hamiltonian picks up the interference term
    (i/2)(sqrt(gamma kappa) - sqrt(gamma kappa_f))(adag c - cdag a).
    """
    if drive not in (DRIVE_CONTROLLER, DRIVE_CONTROLLED):
        raise ValueError(f"unknown drive placement {drive!r}")
    reg = registry if registry is not None else make_registry()
    plant = plant_triple(
        reg, delta_s, params.kappa,
        drive_eps=params.eps if drive == DRIVE_CONTROLLED else 0.0,
    )
    controller = controller_triple(
        reg, delta_c, params.omega_m, params.g0, params.gamma,
        drive_eps=params.eps if drive == DRIVE_CONTROLLER else 0.0,
    )
    return_coupling = math.sqrt(params.kappa_f) * OperatorExpr.annihilator(reg, "a")
    return slh.feedback_loop(plant, controller, return_coupling)


def mechanical_channels(
    params: NetworkParams, reg: ModeRegistry
) -> list[tuple[OperatorExpr, float]]:
    """Local mechanical bath: cooling at gamma_m (n_th + 1), heating at gamma_m n_th."""
    b = OperatorExpr.annihilator(reg, "b")
    channels = [(b, params.gamma_m * (params.n_th + 1.0))]
    if params.n_th > 0:
        channels.append((b.dagger(), params.gamma_m * params.n_th))
    return channels


def lindblad_model(
    params: NetworkParams,
    delta_s: float,
    delta_c: float,
    drive: str = DRIVE_CONTROLLER,
    dims: dict[str, int] | None = None,
) -> LindbladModel:
    """Realize the composed network as a Lindblad model on a truncated space."""
    triple = composed_triple(params, delta_s, delta_c, drive)
    reg = triple.registry
    space = FockSpace(reg, tuple((dims or DEFAULT_DIMS)[m] for m in reg.labels))
    channels = [(space.realize(L), 1.0) for L in triple.coupling]
    channels += [(space.realize(op), rate) for op, rate in mechanical_channels(params, reg)]
    return LindbladModel(space=space, hamiltonian=space.realize(triple.hamiltonian), channels=channels)
