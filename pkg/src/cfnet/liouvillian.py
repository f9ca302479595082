"""Lindblad generator construction, steady states, and photon statistics.

The generator acts on column-stacked density matrices: vec(rho) stacks the
columns of rho, so vec(A rho B) = kron(B.T, A) vec(rho).  That convention is
used everywhere in this module.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fock import FockSpace

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-10
POSITIVITY_SLACK = -1e-8
RESIDUAL_TOL = 1e-9
OCCUPANCY_FLOOR = 1e-10


class SteadyStateError(RuntimeError):
    """Solver breakdown or a degenerate (non-unique) steady state."""


class VacuumOccupancyError(ValueError):
    """g2(0) requested for a mode with occupation below the defined floor."""


@dataclass
class LindbladModel:
    """Hamiltonian plus weighted collapse channels on a truncated Fock space.

    The feedback network's collective coupling must enter as a single channel;
    splitting it into independent per-mode channels would drop the dissipative
    cross terms that carry the feedback physics.
    """

    space: FockSpace
    hamiltonian: sp.spmatrix
    channels: list[tuple[sp.spmatrix, float]] = field(default_factory=list)

    def __post_init__(self) -> None:
        d = self.space.dim
        h = self.hamiltonian.tocsr()
        if h.shape != (d, d):
            raise ValueError(f"Hamiltonian shape {h.shape} != ({d}, {d})")
        defect = abs((h - h.conj().T)).max()
        scale = max(abs(h).max() if h.nnz else 0.0, 1.0)
        if defect > HERMITICITY_TOL * scale:
            raise ValueError(f"Hamiltonian not Hermitian: defect {defect:.3e}")
        self.hamiltonian = h
        checked = []
        for op, rate in self.channels:
            if op.shape != (d, d):
                raise ValueError(f"channel shape {op.shape} != ({d}, {d})")
            if rate < 0:
                raise ValueError("channel rate multipliers must be nonnegative")
            checked.append((op.tocsr(), float(rate)))
        self.channels = checked

    @property
    def dim(self) -> int:
        return self.space.dim


def build_liouvillian(model: LindbladModel) -> sp.csr_matrix:
    """Matrix of rho -> -i[H, rho] + sum_k r_k (L rho L^dag - {L^dag L, rho}/2)."""
    d = model.dim
    ident = sp.identity(d, dtype=complex, format="csr")
    h = model.hamiltonian
    gen = -1j * (sp.kron(ident, h, format="csr") - sp.kron(h.T, ident, format="csr"))
    for op, rate in model.channels:
        if rate == 0.0:
            continue
        ld_l = (op.conj().T @ op).tocsr()
        gen = gen + rate * (
            sp.kron(op.conj(), op, format="csr")
            - 0.5 * sp.kron(ident, ld_l, format="csr")
            - 0.5 * sp.kron(ld_l.T, ident, format="csr")
        )
    gen = gen.tocsr()
    defect = trace_defect(gen, d)
    scale = max(abs(gen).max() if gen.nnz else 0.0, 1.0)
    if defect > TRACE_TOL * scale:
        raise RuntimeError(f"generator is not trace preserving: defect {defect:.3e}")
    return gen


def trace_defect(superop: sp.spmatrix, dim: int) -> float:
    """Max-abs of vec(I)^T @ superop; zero for a trace-preserving generator."""
    vec_id = np.zeros(dim * dim, dtype=complex)
    vec_id[:: dim + 1] = 1.0
    return float(abs(superop.T @ vec_id).max())


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho, dtype=complex).flatten(order="F")


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(v, dtype=complex).reshape((dim, dim), order="F")


def apply_superop(superop: sp.spmatrix, rho: np.ndarray) -> np.ndarray:
    return unvec(superop @ vec(rho), rho.shape[0])


def validate_density_matrix(
    rho: np.ndarray,
    herm_tol: float = TRACE_TOL,
    trace_tol: float = TRACE_TOL,
    positivity_slack: float = POSITIVITY_SLACK,
    check_positivity: bool = True,
) -> None:
    if abs(rho - rho.conj().T).max() > herm_tol:
        raise SteadyStateError("density matrix not Hermitian within tolerance")
    if abs(np.trace(rho) - 1.0) > trace_tol:
        raise SteadyStateError("density matrix trace differs from one")
    if check_positivity:
        lowest = float(np.linalg.eigvalsh(rho).min())
        if lowest < positivity_slack:
            raise SteadyStateError(f"density matrix indefinite: min eigenvalue {lowest:.3e}")


@dataclass
class SteadyStateSolution:
    rho: np.ndarray
    residual: float
    method: str
    null_space_dim: int | None = None


def _constrained_system(gen: sp.csr_matrix, dim: int):
    """Trade the first row of the generator for the unit-trace constraint."""
    n = dim * dim
    weight = float(abs(gen.diagonal()).mean()) or 1.0
    constrained = gen.tolil()
    constrained.rows[0] = list(range(0, n, dim + 1))
    constrained.data[0] = [weight] * dim
    rhs = np.zeros(n, dtype=complex)
    rhs[0] = weight
    return constrained.tocsc(), rhs


def _nojump_preconditioner(nojump: np.ndarray, shift: float):
    """Inverse of rho -> G rho + rho G^dag (shifted), via a one-time Schur form.

    G is the no-jump drift matrix -iH - (1/2) sum_k r_k Lk^dag Lk; the jump
    refilling terms are what is left for the Krylov iteration to absorb.  A
    nonzero shift backs the triangular Sylvester solve away from exactly-real
    eigenvalue pairs (undamped dark modes) if the unshifted solve breaks down.
    """
    d = nojump.shape[0]
    t_mat, z_mat = la.schur(nojump - 0.5 * shift * np.eye(d), output="complex")
    trsyl = la.get_lapack_funcs("trsyl", (t_mat, t_mat))

    def apply(r: np.ndarray) -> np.ndarray:
        c = z_mat.conj().T @ r.reshape(d, d, order="F") @ z_mat
        y, scale, info = trsyl(t_mat, t_mat, c, tranb="C")
        if info != 0:  # pragma: no cover - trsyl failure
            raise SteadyStateError(f"triangular Sylvester solve failed: info={info}")
        x = z_mat @ (y / scale) @ z_mat.conj().T
        return x.flatten(order="F")

    return spla.LinearOperator((d * d, d * d), matvec=apply)


def _solve_direct(constrained: sp.csc_matrix, rhs: np.ndarray) -> np.ndarray:
    lu = spla.splu(constrained)
    x = lu.solve(rhs)
    for _ in range(2):  # iterative refinement on the constrained system
        r = rhs - constrained @ x
        if abs(r).max() == 0.0:
            break
        x = x + lu.solve(r)
    return x


def steady_state(
    superop: sp.spmatrix,
    dim: int,
    residual_tol: float = RESIDUAL_TOL,
    check_null_dim: bool = False,
    check_positivity: bool = True,
    nojump: np.ndarray | None = None,
    gmres_shift: float = 0.0,
) -> SteadyStateSolution:
    """Null vector of the generator, normalized to unit trace.

    One generator row is traded for the trace constraint.  When the no-jump
    drift matrix is available the system is solved by GMRES preconditioned
    with its exact (Schur-form) inverse, which sidesteps the heavy fill-in a
    direct factorization suffers on multimode problems; otherwise, or if the
    iteration stagnates, a direct sparse factorization runs, with
    shifted-inverse iteration as the last resort.  The reported residual is
    ||L rho|| / ||L||_F.
    """
    n = dim * dim
    if superop.shape != (n, n):
        raise ValueError("superoperator dimension does not match the Fock dimension")
    gen = superop.tocsr()
    gen_norm = spla.norm(gen, "fro")
    constrained, rhs = _constrained_system(gen, dim)

    x = None
    method = "direct"
    if nojump is not None:
        for shift in (gmres_shift, gmres_shift + 0.25):
            try:
                precond = _nojump_preconditioner(nojump, shift)
            except (SteadyStateError, la.LinAlgError):
                continue
            x, info = spla.gmres(
                constrained, rhs, M=precond, rtol=1e-13, atol=0.0,
                restart=80, maxiter=12,
            )
            if info == 0:
                method = "nojump-gmres"
                break
            x = None

    if x is None:
        try:
            x = _solve_direct(constrained, rhs)
            method = "direct"
        except RuntimeError as err:
            method = "inverse-iteration"
            try:
                _, vecs = spla.eigs(gen.tocsc(), k=1, sigma=1e-12, which="LM")
            except Exception as err2:  # pragma: no cover - double breakdown
                raise SteadyStateError(
                    f"direct solve failed ({err}); inverse iteration failed ({err2})"
                ) from err2
            x = vecs[:, 0]

    rho = unvec(x, dim)
    rho = 0.5 * (rho + rho.conj().T)
    tr = np.trace(rho)
    if abs(tr) < 1e-300:
        raise SteadyStateError("solver returned a traceless candidate state")
    rho = rho / tr

    residual = float(np.linalg.norm(gen @ vec(rho)) / max(gen_norm, 1e-300))
    if residual > residual_tol:
        raise SteadyStateError(
            f"steady-state residual {residual:.3e} above tolerance {residual_tol:.1e}"
        )
    validate_density_matrix(rho, check_positivity=check_positivity)

    null_dim = None
    if check_null_dim:
        null_dim = _null_space_dimension(gen, gen_norm)
        if null_dim != 1:
            raise SteadyStateError(f"degenerate steady state: null space dimension {null_dim}")
    return SteadyStateSolution(rho=rho, residual=residual, method=method, null_space_dim=null_dim)


def _null_space_dimension(gen: sp.csr_matrix, gen_norm: float, k: int = 4) -> int:
    k = min(k, gen.shape[0] - 2)
    vals = spla.eigs(gen.tocsc(), k=k, sigma=1e-12, which="LM", return_eigenvectors=False)
    return int(np.sum(np.abs(vals) < 1e-10 * max(gen_norm, 1.0)))


def nojump_matrix(model: LindbladModel) -> np.ndarray:
    """Dense no-jump drift -iH - (1/2) sum_k r_k Lk^dag Lk."""
    g = -1j * model.hamiltonian.toarray()
    for op, rate in model.channels:
        g -= 0.5 * rate * (op.conj().T @ op).toarray()
    return g


def solve_steady(model: LindbladModel, use_nojump: bool | None = None, **kwargs) -> SteadyStateSolution:
    """Build the generator for a model and solve for its steady state.

    The Schur-preconditioned path costs an O(D^3) dense decomposition, which
    beats sparse factorization fill once the Fock dimension is nontrivial;
    tiny models just use the direct solver.
    """
    if use_nojump is None:
        use_nojump = model.dim > 48
    nojump = nojump_matrix(model) if use_nojump else None
    return steady_state(build_liouvillian(model), model.dim, nojump=nojump, **kwargs)


def expectation(rho: np.ndarray, op: sp.spmatrix) -> complex:
    """Tr(rho op)."""
    if op.shape[0] != rho.shape[0]:
        raise ValueError("operator/state dimension mismatch")
    return complex((op @ rho).diagonal().sum())


def g2_zero(rho: np.ndarray, space: FockSpace, label: str) -> float:
    """Equal-time second-order correlation <adag adag a a> / <adag a>^2."""
    a = space.annihilator(label)
    n_op = (a.conj().T @ a).tocsr()
    occupation = expectation(rho, n_op).real
    if occupation < OCCUPANCY_FLOOR:
        raise VacuumOccupancyError(
            f"mode {label!r} occupation {occupation:.3e} below floor {OCCUPANCY_FLOOR:.1e}; "
            "g2(0) undefined for vacuum"
        )
    pair = expectation(rho, (n_op @ n_op - n_op).tocsr()).real  # adag adag a a
    return pair / occupation**2


def evolve(
    rho0: np.ndarray,
    superop: sp.spmatrix,
    t_final: float,
    dt: float,
    trace_drift_tol: float = 1e-6,
) -> np.ndarray:
    """Fixed-step RK4 integration of vec(rho); aborts on trace drift.

    The caller picks ``dt`` below the stability bound of the explicit scheme;
    instability shows up as trace drift and raises.
    """
    if dt <= 0 or t_final < 0:
        raise ValueError("need dt > 0 and t_final >= 0")
    dim = rho0.shape[0]
    x = vec(rho0)
    steps = int(round(t_final / dt))
    gen = superop.tocsr()
    for step in range(steps):
        k1 = gen @ x
        k2 = gen @ (x + 0.5 * dt * k1)
        k3 = gen @ (x + 0.5 * dt * k2)
        k4 = gen @ (x + dt * k3)
        x = x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if step % 50 == 0 or step == steps - 1:
            drift = abs(x[:: dim + 1].sum() - 1.0)
            if drift > trace_drift_tol:
                raise SteadyStateError(
                    f"trace drift {drift:.3e} at step {step}; reduce dt"
                )
    return unvec(x, dim)
