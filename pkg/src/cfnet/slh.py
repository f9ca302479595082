"""SLH triples and composition rules for cascaded and feedback networks.

A triple bundles the scattering matrix, the vector of coupling operators to
the input/output channels, and the internal Hamiltonian of an open system.
Only identity scattering matrices are supported; that is all the feedback
topologies built here need.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .operators import MECHANICAL, ModeRegistry, OperatorExpr

HERMITICITY_TOL = 1e-12


class CompositionError(ValueError):
    """Raised for invalid channel counts, scattering matrices, or couplings."""


@dataclass(frozen=True)
class SlhTriple:
    """Scattering matrix, coupling vector, and Hamiltonian of an open system."""

    scattering: np.ndarray
    coupling: tuple[OperatorExpr, ...]
    hamiltonian: OperatorExpr

    def __post_init__(self) -> None:
        s = np.asarray(self.scattering, dtype=complex)
        object.__setattr__(self, "scattering", s)
        object.__setattr__(self, "coupling", tuple(self.coupling))
        m = len(self.coupling)
        if m < 1:
            raise CompositionError("a triple needs at least one channel")
        if s.shape != (m, m):
            raise CompositionError(f"scattering matrix shape {s.shape} != ({m}, {m})")
        if not np.allclose(s, np.eye(m), atol=HERMITICITY_TOL):
            raise CompositionError("only identity scattering matrices are supported")
        reg = self.hamiltonian.registry
        for op in self.coupling:
            if op.registry is not reg:
                raise CompositionError("coupling and Hamiltonian use different registries")
        if not self.hamiltonian.is_hermitian(HERMITICITY_TOL):
            raise CompositionError("Hamiltonian is not Hermitian")

    @property
    def registry(self) -> ModeRegistry:
        return self.hamiltonian.registry

    @property
    def n_channels(self) -> int:
        return len(self.coupling)

    def support(self) -> frozenset[int]:
        s = self.hamiltonian.support()
        for op in self.coupling:
            s |= op.support()
        return s


def identity_triple(registry: ModeRegistry, n_channels: int = 1) -> SlhTriple:
    """Pass-through element: identity scattering, zero coupling, zero Hamiltonian."""
    zero = OperatorExpr.zero(registry)
    return SlhTriple(np.eye(n_channels), (zero,) * n_channels, zero)


def series(g1: SlhTriple, g2: SlhTriple) -> SlhTriple:
    """Feed the output of ``g1`` into the input of ``g2``.

    Returns the triple with S = S2 S1, L = L2 + S2 L1 and
    H = H1 + H2 + (1/2i)(L2^dag S2 L1 - L1^dag S2^dag L2).
    """
    if g1.n_channels != g2.n_channels:
        raise CompositionError(
            f"channel count mismatch: {g1.n_channels} vs {g2.n_channels}"
        )
    if g1.registry is not g2.registry:
        raise CompositionError("triples belong to different mode registries")
    reg = g1.registry
    m = g1.n_channels
    s1, s2 = g1.scattering, g2.scattering

    s_eff = s2 @ s1
    l_eff = []
    for i in range(m):
        op = g2.coupling[i]
        for j in range(m):
            if s2[i, j] != 0:
                op = op + s2[i, j] * g1.coupling[j]
        l_eff.append(op)

    cross = OperatorExpr.zero(reg)
    for i in range(m):
        for j in range(m):
            if s2[i, j] != 0:
                cross = cross + s2[i, j] * (g2.coupling[i].dagger() * g1.coupling[j])
    interference = (1.0 / 2.0j) * (cross - cross.dagger())

    h_eff = g1.hamiltonian + g2.hamiltonian + interference
    if not h_eff.is_hermitian(HERMITICITY_TOL):
        raise CompositionError("series produced a non-Hermitian Hamiltonian")
    return SlhTriple(s_eff, tuple(l_eff), h_eff)


def feedback_loop(
    plant: SlhTriple, controller: SlhTriple, return_coupling: OperatorExpr
) -> SlhTriple:
    """Close a coherent feedback loop: plant -> controller -> back into plant.

    Equivalent to cascading plant, controller, and a third stage carrying the
    return coupling.  The third stage has zero Hamiltonian so the plant
    Hamiltonian is counted exactly once.
    """
    if plant.n_channels != 1 or controller.n_channels != 1:
        raise CompositionError("feedback_loop expects single-channel subsystems")
    if return_coupling.registry is not plant.registry:
        raise CompositionError("return coupling uses a different mode registry")
    plant_modes = plant.support()
    controller_only = controller.support() - plant_modes
    overlap = return_coupling.support() & controller_only
    if overlap:
        labels = sorted(plant.registry.mode_at(i).label for i in overlap)
        raise CompositionError(
            f"return coupling must act on plant modes only, found {labels}"
        )
    closing_stage = SlhTriple(
        np.eye(1), (return_coupling,), OperatorExpr.zero(plant.registry)
    )
    return series(series(plant, controller), closing_stage)


def rotating_frame(triple: SlhTriple, drive_freq: float) -> SlhTriple:
    """Move to the frame rotating at the drive frequency on all optical modes.

    Number-conserving optical terms are invariant and every pure optical
    number operator has the drive frequency subtracted from its coefficient;
    bare single-photon drive terms become time independent and are kept as
    written.  Any other optically unbalanced term would acquire an explicit
    time dependence, which this representation cannot hold.
    """
    reg = triple.registry
    optical = set(reg.optical_indices())

    for key, _ in triple.hamiltonian.terms():
        imbalance = sum(c - a for idx, c, a in key if idx in optical)
        if imbalance == 0:
            continue
        bare_drive = (
            len(key) == 1
            and key[0][0] in optical
            and key[0][1] + key[0][2] == 1
        )
        if not bare_drive:
            raise CompositionError(
                "Hamiltonian term acquires explicit time dependence in the "
                "rotating frame: " + repr(key)
            )

    h = triple.hamiltonian
    if drive_freq != 0:
        for idx in optical:
            label = reg.mode_at(idx).label
            h = h - drive_freq * OperatorExpr.number(reg, label)
    return SlhTriple(triple.scattering, triple.coupling, h)


def heisenberg_drift(
    x: OperatorExpr,
    hamiltonian: OperatorExpr,
    channels: Iterable[OperatorExpr],
) -> OperatorExpr:
    """Adjoint-generator drift -i[x, H] + sum_k (Lk^dag x Lk - {Lk^dag Lk, x}/2)."""
    drift = -1.0j * (x * hamiltonian - hamiltonian * x)
    for L in channels:
        ld = L.dagger()
        ldl = ld * L
        drift = drift + ld * x * L - 0.5 * (ldl * x + x * ldl)
    return drift


def conditional_hamiltonian(triple: SlhTriple, extra_channels: Sequence[OperatorExpr] = ()) -> OperatorExpr:
    """Non-Hermitian no-jump generator H - (i/2) sum_k Lk^dag Lk."""
    h = triple.hamiltonian
    for L in tuple(triple.coupling) + tuple(extra_channels):
        h = h - 0.5j * (L.dagger() * L)
    return h


def check_triple(triple: SlhTriple, tol: float = 1e-10) -> dict[str, float]:
    """Hermiticity / unitarity diagnostics used by the CLI compose command."""
    s = triple.scattering
    unitarity = float(np.max(np.abs(s @ s.conj().T - np.eye(s.shape[0]))))
    h = triple.hamiltonian
    diff = h - h.dagger()
    herm = diff.max_abs_coeff() / max(h.max_abs_coeff(), 1.0)
    return {
        "scattering_unitarity_defect": unitarity,
        "hamiltonian_hermiticity_defect": herm,
        "tolerance": tol,
    }
