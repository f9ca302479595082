"""Symbolic normal-ordered algebra for multimode bosonic operators.

An expression is a finite sum ``sum_k  coeff_k * prod_m  adag_m^p  a_m^q``
where, inside every term, creation powers stand to the left of annihilation
powers for each mode and factors belonging to different modes commute.
Coefficients are plain complex numbers; unit conventions (everything in
units of the controller decay rate) live with the callers.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator

OPTICAL = "optical"
MECHANICAL = "mechanical"

# Coefficients smaller than this, relative to the largest coefficient in the
# same expression, are treated as arithmetic residue and dropped.  All
# physical couplings handled here are >= 0.3 in gamma units, far above it.
ZERO_TOL = 1e-12

# A term is keyed by ((mode_index, create_power, annihilate_power), ...),
# sorted by mode index, entries with both powers zero omitted.
TermKey = tuple[tuple[int, int, int], ...]


class RegistryMismatchError(ValueError):
    """Raised when expressions over different mode registries are combined."""


@dataclass(frozen=True)
class Mode:
    label: str
    kind: str

    def __post_init__(self) -> None:
        if self.kind not in (OPTICAL, MECHANICAL):
            raise ValueError(f"unknown mode kind {self.kind!r}")


class ModeRegistry:
    """Ordered set of named modes; registration order is the canonical order.

    The registry instance is the identity token shared by all expressions of
    one network: combining expressions that hold different registry objects
    is an error even if the mode lists look alike.
    """

    def __init__(self) -> None:
        self._modes: list[Mode] = []
        self._index: dict[str, int] = {}

    def register(self, label: str, kind: str) -> Mode:
        if not label:
            raise ValueError("mode label must be nonempty")
        if label in self._index:
            raise ValueError(f"mode {label!r} already registered")
        mode = Mode(label, kind)
        self._index[label] = len(self._modes)
        self._modes.append(mode)
        return mode

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise KeyError(f"mode {label!r} not registered") from None

    def mode(self, label: str) -> Mode:
        return self._modes[self.index(label)]

    def mode_at(self, index: int) -> Mode:
        return self._modes[index]

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(m.label for m in self._modes)

    def optical_indices(self) -> tuple[int, ...]:
        return tuple(i for i, m in enumerate(self._modes) if m.kind == OPTICAL)

    def __len__(self) -> int:
        return len(self._modes)

    def __iter__(self) -> Iterator[Mode]:
        return iter(self._modes)

    def __contains__(self, label: str) -> bool:
        return label in self._index


def _normal_order_single_mode(a_pow: int, c_pow: int) -> list[tuple[float, int, int]]:
    """Rewrite a^m adag^n as sum of k! C(m,k) C(n,k) adag^(n-k) a^(m-k)."""
    out = []
    for k in range(min(a_pow, c_pow) + 1):
        coeff = math.comb(a_pow, k) * math.comb(c_pow, k) * math.factorial(k)
        out.append((float(coeff), c_pow - k, a_pow - k))
    return out


def _mul_keys(key1: TermKey, key2: TermKey) -> list[tuple[complex, TermKey]]:
    """Normal-ordered expansion of the product of two canonical monomials."""
    pow1 = {idx: (c, a) for idx, c, a in key1}
    pow2 = {idx: (c, a) for idx, c, a in key2}
    indices = sorted(set(pow1) | set(pow2))

    per_mode: list[list[tuple[float, tuple[int, int, int]]]] = []
    for idx in indices:
        c1, a1 = pow1.get(idx, (0, 0))
        c2, a2 = pow2.get(idx, (0, 0))
        options = []
        # adag^c1 a^a1 * adag^c2 a^a2: reorder the middle a^a1 adag^c2 block.
        for coeff, c_mid, a_mid in _normal_order_single_mode(a1, c2):
            c_tot = c1 + c_mid
            a_tot = a_mid + a2
            options.append((coeff, (idx, c_tot, a_tot)))
        per_mode.append(options)

    results = []
    for combo in itertools.product(*per_mode):
        coeff: complex = 1.0
        entries = []
        for c, entry in combo:
            coeff *= c
            if entry[1] or entry[2]:
                entries.append(entry)
        results.append((coeff, tuple(entries)))
    return results


class OperatorExpr:
    """Immutable normal-ordered polynomial in bosonic ladder operators.

    Two expressions compare equal iff their canonical term lists are
    identical; use :meth:`isclose` for floating-point comparisons.
    """

    __slots__ = ("_registry", "_terms")

    def __init__(self, registry: ModeRegistry, terms: dict[TermKey, complex] | None = None):
        self._registry = registry
        self._terms = _canonicalize(terms or {})

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, registry: ModeRegistry) -> "OperatorExpr":
        return cls(registry, {})

    @classmethod
    def scalar(cls, registry: ModeRegistry, value: complex) -> "OperatorExpr":
        return cls(registry, {(): complex(value)})

    @classmethod
    def annihilator(cls, registry: ModeRegistry, label: str) -> "OperatorExpr":
        idx = registry.index(label)
        return cls(registry, {((idx, 0, 1),): 1.0 + 0.0j})

    @classmethod
    def creator(cls, registry: ModeRegistry, label: str) -> "OperatorExpr":
        idx = registry.index(label)
        return cls(registry, {((idx, 1, 0),): 1.0 + 0.0j})

    @classmethod
    def number(cls, registry: ModeRegistry, label: str) -> "OperatorExpr":
        idx = registry.index(label)
        return cls(registry, {((idx, 1, 1),): 1.0 + 0.0j})

    # -- accessors ---------------------------------------------------------

    @property
    def registry(self) -> ModeRegistry:
        return self._registry

    def terms(self) -> Iterator[tuple[TermKey, complex]]:
        """Iterate (key, coefficient) pairs in canonical order."""
        return iter(sorted(self._terms.items()))

    def coefficient(self, powers: dict[str, tuple[int, int]]) -> complex:
        """Coefficient of the monomial with given {label: (create, annihilate)}."""
        key = tuple(
            sorted((self._registry.index(lbl), c, a) for lbl, (c, a) in powers.items() if c or a)
        )
        return self._terms.get(key, 0.0 + 0.0j)

    @property
    def identity_coefficient(self) -> complex:
        return self._terms.get((), 0.0 + 0.0j)

    def support(self) -> frozenset[int]:
        """Indices of all modes appearing with nonzero ladder power."""
        return frozenset(idx for key in self._terms for idx, _, _ in key)

    def support_labels(self) -> frozenset[str]:
        return frozenset(self._registry.mode_at(i).label for i in self.support())

    def is_zero(self) -> bool:
        return not self._terms

    def max_abs_coeff(self) -> float:
        return max((abs(c) for c in self._terms.values()), default=0.0)

    # -- algebra -----------------------------------------------------------

    def _check_registry(self, other: "OperatorExpr") -> None:
        if self._registry is not other._registry:
            raise RegistryMismatchError("expressions belong to different mode registries")

    def __add__(self, other):
        if isinstance(other, (int, float, complex)):
            other = OperatorExpr.scalar(self._registry, other)
        if not isinstance(other, OperatorExpr):
            return NotImplemented
        self._check_registry(other)
        merged = dict(self._terms)
        for key, coeff in other._terms.items():
            merged[key] = merged.get(key, 0.0) + coeff
        return OperatorExpr(self._registry, merged)

    __radd__ = __add__

    def __neg__(self):
        return OperatorExpr(self._registry, {k: -c for k, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-other if isinstance(other, OperatorExpr) else -complex(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float, complex)):
            return OperatorExpr(
                self._registry, {k: c * other for k, c in self._terms.items()}
            )
        if not isinstance(other, OperatorExpr):
            return NotImplemented
        self._check_registry(other)
        out: dict[TermKey, complex] = {}
        for key1, c1 in self._terms.items():
            for key2, c2 in other._terms.items():
                for factor, key in _mul_keys(key1, key2):
                    out[key] = out.get(key, 0.0) + c1 * c2 * factor
        return OperatorExpr(self._registry, out)

    def __rmul__(self, other):
        if isinstance(other, (int, float, complex)):
            return self.__mul__(other)
        return NotImplemented

    def dagger(self) -> "OperatorExpr":
        """Hermitian adjoint; an involution on canonical expressions."""
        out = {}
        for key, coeff in self._terms.items():
            # (adag^c a^a)^dag = adag^a a^c, already normal ordered.
            out[tuple((idx, a, c) for idx, c, a in key)] = coeff.conjugate()
        return OperatorExpr(self._registry, out)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return self.isclose(self.dagger(), tol=tol)

    # -- comparison --------------------------------------------------------

    def __eq__(self, other):
        if not isinstance(other, OperatorExpr):
            return NotImplemented
        return self._registry is other._registry and self._terms == other._terms

    __hash__ = None  # mutable-dict payload; identity hashing would be a trap

    def isclose(self, other: "OperatorExpr", tol: float = 1e-12) -> bool:
        """Term-by-term comparison, tolerance relative to the largest coefficient."""
        self._check_registry(other)
        scale = max(self.max_abs_coeff(), other.max_abs_coeff(), 1.0)
        keys = set(self._terms) | set(other._terms)
        return all(
            abs(self._terms.get(k, 0.0) - other._terms.get(k, 0.0)) <= tol * scale
            for k in keys
        )

    def __repr__(self) -> str:
        if not self._terms:
            return "OperatorExpr(0)"
        return f"OperatorExpr({format_expr(self)})"


def _canonicalize(terms: dict[TermKey, complex]) -> dict[TermKey, complex]:
    cleaned = {k: complex(v) for k, v in terms.items() if v != 0}
    if not cleaned:
        return {}
    scale = max(abs(c) for c in cleaned.values())
    return {k: c for k, c in cleaned.items() if abs(c) > ZERO_TOL * scale}


def dagger(x: OperatorExpr) -> OperatorExpr:
    return x.dagger()


def commutator(x: OperatorExpr, y: OperatorExpr) -> OperatorExpr:
    return x * y - y * x


def format_complex(z: complex, digits: int = 12) -> str:
    """Deterministic complex formatting, capped at `digits` significant digits."""
    re = format(z.real, f".{digits}g")
    if z.imag == 0:
        return re
    im = format(z.imag, f"+.{digits}g")
    return f"({re}{im}i)"


def format_expr(expr: OperatorExpr) -> str:
    """Canonical text form: terms in canonical order, ladder factors per mode."""
    parts = []
    for key, coeff in expr.terms():
        factors = []
        for idx, cpow, apow in key:
            label = expr.registry.mode_at(idx).label
            if cpow:
                factors.append(f"Adag({label})" + (f"^{cpow}" if cpow > 1 else ""))
            if apow:
                factors.append(f"A({label})" + (f"^{apow}" if apow > 1 else ""))
        body = " ".join(factors) if factors else "1"
        parts.append(f"{format_complex(coeff)} {body}")
    return " + ".join(parts) if parts else "0"
