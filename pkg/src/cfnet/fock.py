"""Sparse-matrix realization of operator expressions on truncated Fock spaces."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .operators import ModeRegistry, OperatorExpr


class TruncationError(RuntimeError):
    """Raised when the convergence ladder fails to settle."""


@lru_cache(maxsize=None)
def _ladder(n: int) -> sp.csr_matrix:
    """Single-mode annihilation matrix with sqrt(k) on the superdiagonal."""
    rows = np.arange(n - 1)
    vals = np.sqrt(np.arange(1, n, dtype=float))
    return sp.csr_matrix((vals, (rows, rows + 1)), shape=(n, n), dtype=complex)


@dataclass(frozen=True)
class FockSpace:
    """Truncated multimode Fock space; mode order is the registry order.

    The first registered mode is the most significant in the composite index:
    |n1, n2, ...> maps to sum_i n_i * prod_{j>i} N_j.
    """

    registry: ModeRegistry
    dims: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "dims", tuple(int(n) for n in self.dims))
        if len(self.dims) != len(self.registry):
            raise ValueError("one truncation dimension per registered mode required")
        if any(n < 2 for n in self.dims):
            raise ValueError("every mode needs at least 2 Fock levels")

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    def dim_of(self, label: str) -> int:
        return self.dims[self.registry.index(label)]

    def with_dims(self, **overrides: int) -> "FockSpace":
        dims = list(self.dims)
        for label, n in overrides.items():
            dims[self.registry.index(label)] = n
        return FockSpace(self.registry, tuple(dims))

    # -- indexing ----------------------------------------------------------

    def strides(self) -> tuple[int, ...]:
        out = []
        acc = 1
        for n in reversed(self.dims):
            out.append(acc)
            acc *= n
        return tuple(reversed(out))

    def basis_index(self, occupations: Sequence[int]) -> int:
        if len(occupations) != len(self.dims):
            raise ValueError("occupation list length mismatch")
        idx = 0
        for n, dim, stride in zip(occupations, self.dims, self.strides()):
            if not 0 <= n < dim:
                raise ValueError(f"occupation {n} outside truncation {dim}")
            idx += n * stride
        return idx

    def occupations(self, index: int) -> tuple[int, ...]:
        out = []
        for stride, dim in zip(self.strides(), self.dims):
            q, index = divmod(index, stride)
            out.append(q)
        return tuple(out)

    def occupation_grid(self, label: str) -> np.ndarray:
        """Occupation number of the given mode for every composite basis index."""
        i = self.registry.index(label)
        grids = np.indices(self.dims).reshape(len(self.dims), -1)
        return grids[i]

    # -- operators ---------------------------------------------------------

    def _embed(self, mode_index: int, op: sp.spmatrix) -> sp.csr_matrix:
        mat = sp.identity(1, dtype=complex, format="csr")
        for j, n in enumerate(self.dims):
            factor = op if j == mode_index else sp.identity(n, dtype=complex, format="csr")
            mat = sp.kron(mat, factor, format="csr")
        return mat

    def annihilator(self, label: str) -> sp.csr_matrix:
        i = self.registry.index(label)
        return self._embed(i, _ladder(self.dims[i]))

    def creator(self, label: str) -> sp.csr_matrix:
        i = self.registry.index(label)
        return self._embed(i, _ladder(self.dims[i]).conj().T.tocsr())

    def number(self, label: str) -> sp.csr_matrix:
        i = self.registry.index(label)
        a = _ladder(self.dims[i])
        return self._embed(i, (a.conj().T @ a).tocsr())

    def identity(self) -> sp.csr_matrix:
        return sp.identity(self.dim, dtype=complex, format="csr")

    def vacuum(self) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[0] = 1.0
        return v

    def realize(self, expr: OperatorExpr) -> sp.csr_matrix:
        """Matrix of a normal-ordered expression under the composite-index convention."""
        if expr.registry is not self.registry:
            raise ValueError("expression uses a different mode registry")
        total = sp.csr_matrix((self.dim, self.dim), dtype=complex)
        for key, coeff in expr.terms():
            powers = {idx: (c, a) for idx, c, a in key}
            mat = sp.identity(1, dtype=complex, format="csr")
            for j, n in enumerate(self.dims):
                if j in powers:
                    adag = _ladder(n).conj().T.tocsr()
                    a = _ladder(n)
                    c_pow, a_pow = powers[j]
                    factor = sp.identity(n, dtype=complex, format="csr")
                    for _ in range(c_pow):
                        factor = factor @ adag
                    for _ in range(a_pow):
                        factor = factor @ a
                else:
                    factor = sp.identity(n, dtype=complex, format="csr")
                mat = sp.kron(mat, factor, format="csr")
            total = total + coeff * mat
        total.eliminate_zeros()
        return total


def realize(expr: OperatorExpr, space: FockSpace) -> sp.csr_matrix:
    return space.realize(expr)


@dataclass(frozen=True)
class CommutatorReport:
    """Deviations of ladder commutation relations on a truncated space."""

    entries: dict[tuple[str, str], dict[str, float]]

    @property
    def max_safe_deviation(self) -> float:
        return max((e["safe_subspace"] for e in self.entries.values()), default=0.0)


def op_norm_check(expr: OperatorExpr, space: FockSpace) -> CommutatorReport:
    """Verify [a_i, adag_j] = delta_ij on the subspace below the top Fock levels.

    Truncation necessarily breaks [a, adag] = 1 on the highest level of each
    mode; the report separates the safe-subspace deviation (should vanish)
    from the full-space one (documents the artifact).
    """
    labels = sorted(expr.support_labels())
    entries: dict[tuple[str, str], dict[str, float]] = {}
    for la in labels:
        for lb in labels:
            comm = space.annihilator(la) @ space.creator(lb) - space.creator(lb) @ space.annihilator(la)
            expected = space.identity() if la == lb else sp.csr_matrix((space.dim, space.dim))
            full_dev = abs((comm - expected).toarray()).max() if space.dim else 0.0
            occ_a = space.occupation_grid(la)
            occ_b = space.occupation_grid(lb)
            mask = (occ_a <= space.dim_of(la) - 2) & (occ_b <= space.dim_of(lb) - 2)
            idx = np.flatnonzero(mask)
            sub = (comm - expected).toarray()[np.ix_(idx, idx)]
            entries[(la, lb)] = {
                "safe_subspace": float(abs(sub).max()) if idx.size else 0.0,
                "full_space": float(full_dev),
            }
    return CommutatorReport(entries)


def converge_truncations(
    space: FockSpace,
    observable: Callable[[FockSpace], float],
    rtol: float = 1e-3,
    max_doublings: int = 3,
) -> tuple[FockSpace, list[tuple[tuple[int, ...], float]]]:
    """Double Fock dimensions until the observable moves less than ``rtol``.

    Each round doubles, one at a time, every mode whose doubling still moves
    the observable by at least ``rtol`` relative; returns the accepted space
    and the (dims, value) history.
    """
    history: list[tuple[tuple[int, ...], float]] = []
    current = space
    value = observable(current)
    history.append((current.dims, value))
    for _ in range(max_doublings):
        offenders = []
        for label in current.registry.labels:
            trial = current.with_dims(**{label: 2 * current.dim_of(label)})
            trial_value = observable(trial)
            history.append((trial.dims, trial_value))
            if abs(trial_value - value) > rtol * max(abs(value), 1e-300):
                offenders.append(label)
        if not offenders:
            return current, history
        current = current.with_dims(
            **{label: 2 * current.dim_of(label) for label in offenders}
        )
        value = observable(current)
        history.append((current.dims, value))
    raise TruncationError(
        f"observable did not settle within {max_doublings} doubling rounds; "
        f"history={history}"
    )
