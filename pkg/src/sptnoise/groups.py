"""Exact arithmetic for finite abelian groups and their degree-2 cohomology data.

Groups are direct products ``Z_{n_1} x ... x Z_{n_r}`` stored as residue
vectors.  Everything in this module is exact integer arithmetic; complex
phases are only materialized at the boundary (``Character.value`` and the
cocycle phase helpers) and are exact roots of unity up to floating-point
rounding of ``exp``.

The cohomology representatives, their commutator bicharacters, the induced
action of integer-matrix endomorphisms, and the star-pattern calculus are
the exact backbone used by the tensor-network and channel layers.
"""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Optional

__all__ = [
    "FiniteAbelianGroup",
    "GroupElement",
    "Character",
    "Endomorphism",
    "Cocycle",
    "PatternOfZeros",
    "PatternError",
    "character_value",
    "cocycle_value",
    "commutator_phase",
    "pullback",
    "projective_center",
    "complexity",
    "is_mnc",
    "pattern_of_zeros",
    "transform_pattern",
    "invariant_from_pattern",
    "match_pattern_candidates",
    "unit_phase",
]

PHASE_TOL = 1e-12


class PatternError(ValueError):
    """A star pattern is not the pattern of any SPT state."""


def unit_phase(numerator: int, denominator: int) -> complex:
    """exp(2*pi*i * numerator/denominator), reduced exactly first."""
    num = numerator % denominator
    if num == 0:
        return 1.0 + 0.0j
    g = math.gcd(num, denominator)
    num //= g
    den = denominator // g
    if 2 * num == den:
        return -1.0 + 0.0j
    if 4 * num == den:
        return 1.0j
    if 4 * num == 3 * den:
        return -1.0j
    return cmath.exp(2j * cmath.pi * num / den)


@dataclass(frozen=True)
class FiniteAbelianGroup:
    """Direct product of cyclic groups, ``moduli = (n_1, ..., n_r)``."""

    moduli: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.moduli or any(n < 1 for n in self.moduli):
            raise ValueError(f"moduli must be positive integers, got {self.moduli}")
        object.__setattr__(self, "moduli", tuple(int(n) for n in self.moduli))

    @property
    def order(self) -> int:
        return math.prod(self.moduli)

    @property
    def rank(self) -> int:
        return len(self.moduli)

    @property
    def is_uniform(self) -> bool:
        """True when all moduli are equal (the ``Z_n x Z_n x ...`` case)."""
        return len(set(self.moduli)) == 1

    @property
    def uniform_modulus(self) -> int:
        if not self.is_uniform:
            raise ValueError(f"group {self.moduli} does not have equal moduli")
        return self.moduli[0]

    def element(self, residues) -> "GroupElement":
        return GroupElement(self, tuple(int(r) % n for r, n in zip(residues, self.moduli, strict=True)))

    @property
    def identity(self) -> "GroupElement":
        return self.element((0,) * self.rank)

    def elements(self) -> list["GroupElement"]:
        """All elements in lexicographic residue order."""
        return [self.element(r) for r in itertools.product(*(range(n) for n in self.moduli))]

    def generators(self) -> list["GroupElement"]:
        gens = []
        for i in range(self.rank):
            res = [0] * self.rank
            res[i] = 1
            gens.append(self.element(res))
        return gens

    def character(self, residues) -> "Character":
        return Character(self, tuple(int(r) % n for r, n in zip(residues, self.moduli, strict=True)))

    @property
    def trivial_character(self) -> "Character":
        return self.character((0,) * self.rank)

    def characters(self) -> list["Character"]:
        """All characters in lexicographic residue order (the canonical row order)."""
        return [self.character(r) for r in itertools.product(*(range(n) for n in self.moduli))]

    def __iter__(self) -> Iterator["GroupElement"]:
        return iter(self.elements())

    def __str__(self) -> str:
        return " x ".join(f"Z{n}" for n in self.moduli)


@dataclass(frozen=True)
class GroupElement:
    group: FiniteAbelianGroup
    residues: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.residues) != self.group.rank:
            raise ValueError("residue vector length does not match group rank")
        object.__setattr__(
            self, "residues", tuple(r % n for r, n in zip(self.residues, self.group.moduli))
        )

    def __add__(self, other: "GroupElement") -> "GroupElement":
        _same_group(self, other)
        return self.group.element(tuple(a + b for a, b in zip(self.residues, other.residues)))

    def __neg__(self) -> "GroupElement":
        return self.group.element(tuple(-a for a in self.residues))

    def __sub__(self, other: "GroupElement") -> "GroupElement":
        return self + (-other)

    @property
    def is_identity(self) -> bool:
        return all(r == 0 for r in self.residues)

    def __str__(self) -> str:
        return "(" + ",".join(map(str, self.residues)) + ")"


@dataclass(frozen=True)
class Character:
    """chi(g) = exp(2*pi*i * sum_i p_i g_i / n_i)."""

    group: FiniteAbelianGroup
    residues: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.residues) != self.group.rank:
            raise ValueError("character residue vector length does not match group rank")
        object.__setattr__(
            self, "residues", tuple(r % n for r, n in zip(self.residues, self.group.moduli))
        )

    def value(self, g: GroupElement) -> complex:
        _same_group(self, g)
        lcm = math.lcm(*self.group.moduli)
        total = sum(
            p * r * (lcm // n)
            for p, r, n in zip(self.residues, g.residues, self.group.moduli)
        )
        return unit_phase(total, lcm)

    def __add__(self, other: "Character") -> "Character":
        """Pointwise product of characters (addition of residue labels)."""
        _same_group(self, other)
        return self.group.character(tuple(a + b for a, b in zip(self.residues, other.residues)))

    def __neg__(self) -> "Character":
        return self.group.character(tuple(-a for a in self.residues))

    def __sub__(self, other: "Character") -> "Character":
        return self + (-other)

    @property
    def is_trivial(self) -> bool:
        return all(r == 0 for r in self.residues)

    def is_trivial_on(self, elements) -> bool:
        """Exact check that chi restricted to the given elements is 1."""
        lcm = math.lcm(*self.group.moduli)
        for g in elements:
            total = sum(
                p * r * (lcm // n)
                for p, r, n in zip(self.residues, g.residues, self.group.moduli)
            )
            if total % lcm != 0:
                return False
        return True

    def __str__(self) -> str:
        return "chi(" + ",".join(map(str, self.residues)) + ")"


def _same_group(a, b) -> None:
    if a.group != b.group:
        raise ValueError(f"group mismatch: {a.group} vs {b.group}")


def character_value(alpha: Character, g: GroupElement) -> complex:
    """Value chi_alpha(g) as a unit complex number."""
    return alpha.value(g)


@dataclass(frozen=True)
class Endomorphism:
    """Integer matrix acting on residue column vectors.

    For uniform groups (all moduli equal to n) any matrix mod n is a valid
    endomorphism.  For mixed moduli only matrices with ``M[i][j] * n_j = 0
    (mod n_i)`` define homomorphisms; the constructor enforces this, which
    in practice restricts mixed-moduli groups to the identity and
    coordinate collapses.
    """

    group: FiniteAbelianGroup
    matrix: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        r = self.group.rank
        if len(self.matrix) != r or any(len(row) != r for row in self.matrix):
            raise ValueError(f"matrix must be {r}x{r}")
        reduced = tuple(
            tuple(int(m) % n for m in row) for row, n in zip(self.matrix, self.group.moduli)
        )
        object.__setattr__(self, "matrix", reduced)
        for i, ni in enumerate(self.group.moduli):
            for j, nj in enumerate(self.group.moduli):
                if (self.matrix[i][j] * nj) % ni != 0:
                    raise ValueError(
                        f"matrix entry [{i}][{j}]={self.matrix[i][j]} does not define a "
                        f"homomorphism for moduli {self.group.moduli}"
                    )

    @classmethod
    def identity(cls, group: FiniteAbelianGroup) -> "Endomorphism":
        r = group.rank
        return cls(group, tuple(tuple(1 if i == j else 0 for j in range(r)) for i in range(r)))

    @classmethod
    def collapse(cls, group: FiniteAbelianGroup, keep: tuple[int, ...]) -> "Endomorphism":
        """Projection keeping the listed coordinates and zeroing the rest."""
        r = group.rank
        return cls(
            group,
            tuple(tuple(1 if (i == j and i in keep) else 0 for j in range(r)) for i in range(r)),
        )

    @classmethod
    def constant(cls, group: FiniteAbelianGroup) -> "Endomorphism":
        """The zero map g -> identity."""
        r = group.rank
        return cls(group, tuple((0,) * r for _ in range(r)))

    def apply(self, g: GroupElement) -> GroupElement:
        _same_group(self, g)
        return self.group.element(
            tuple(sum(m * x for m, x in zip(row, g.residues)) for row in self.matrix)
        )

    def __call__(self, g: GroupElement) -> GroupElement:
        return self.apply(g)

    def compose(self, other: "Endomorphism") -> "Endomorphism":
        """self after other: (self.compose(other))(g) = self(other(g))."""
        _same_group(self, other)
        r = self.group.rank
        prod = tuple(
            tuple(sum(self.matrix[i][k] * other.matrix[k][j] for k in range(r)) for j in range(r))
            for i in range(r)
        )
        return Endomorphism(self.group, prod)

    @property
    def det(self) -> int:
        """Determinant mod n (uniform groups only)."""
        n = self.group.uniform_modulus
        return _int_det(self.matrix) % n

    @property
    def is_automorphism(self) -> bool:
        return math.gcd(self.det, self.group.uniform_modulus) == 1

    def star(self, alpha: Character) -> Character:
        """Pullback on characters: (sigma* chi)(g) = chi(sigma(g))."""
        _same_group(self, alpha)
        r = self.group.rank
        return self.group.character(
            tuple(sum(self.matrix[i][j] * alpha.residues[i] for i in range(r)) for j in range(r))
        )

    def __str__(self) -> str:
        return "[" + "; ".join(" ".join(map(str, row)) for row in self.matrix) + "]"


def _int_det(matrix: tuple[tuple[int, ...], ...]) -> int:
    n = len(matrix)
    if n == 1:
        return matrix[0][0]
    if n == 2:
        return matrix[0][0] * matrix[1][1] - matrix[0][1] * matrix[1][0]
    det = 0
    for j in range(n):
        minor = tuple(row[:j] + row[j + 1 :] for row in matrix[1:])
        det += (-1) ** j * matrix[0][j] * _int_det(minor)
    return det


@dataclass(frozen=True)
class Cocycle:
    """Representative 2-cocycle on Z_n x Z_n, labeled by an index k mod n.

    The representative is ``w_k[(w,x),(y,z)] = exp(2*pi*i * k*x*y / n)``.
    Only the index is stored: all observables downstream depend on the
    class through commutator phases, and the index is the class label.
    """

    group: FiniteAbelianGroup
    k: int

    def __post_init__(self) -> None:
        if self.group.rank != 2 or not self.group.is_uniform:
            raise ValueError(f"cocycle representatives require Z_n x Z_n, got {self.group}")
        object.__setattr__(self, "k", int(self.k) % self.group.uniform_modulus)

    @property
    def n(self) -> int:
        return self.group.uniform_modulus

    def value(self, g: GroupElement, h: GroupElement) -> complex:
        _same_group(self, g)
        _same_group(self, h)
        return unit_phase(self.k * g.residues[1] * h.residues[0], self.n)

    def commutator_exponent(self, g: GroupElement, h: GroupElement) -> int:
        """Integer e with w(h,g)/w(g,h) = exp(2*pi*i*e/n), reduced mod n."""
        _same_group(self, g)
        _same_group(self, h)
        w, x = g.residues
        y, z = h.residues
        return (self.k * (z * w - x * y)) % self.n

    def commutator_phase(self, g: GroupElement, h: GroupElement) -> complex:
        return unit_phase(self.commutator_exponent(g, h), self.n)

    def star_character(self, g: GroupElement) -> Character:
        """The unique character alpha with chi_alpha(h) = w(h,g)/w(g,h) for all h."""
        w, x = g.residues
        return self.group.character(((-self.k * x) % self.n, (self.k * w) % self.n))

    def __str__(self) -> str:
        return f"w_{self.k}[{self.group}]"


def cocycle_value(omega: Cocycle, g: GroupElement, h: GroupElement) -> complex:
    return omega.value(g, h)


def commutator_phase(omega: Cocycle, g: GroupElement, h: GroupElement) -> complex:
    """w(h,g)/w(g,h); a bicharacter in (g, h)."""
    return omega.commutator_phase(g, h)


def pullback(sigma: Endomorphism, omega: Cocycle) -> Cocycle:
    """Cocycle of the pulled-back class; on indices this is k -> k*det(sigma)."""
    _same_group(sigma, omega)
    return Cocycle(omega.group, omega.k * sigma.det)


def projective_center(omega: Cocycle) -> list[GroupElement]:
    """Elements whose commutator phase with every h is trivial (by enumeration)."""
    elems = omega.group.elements()
    center = [g for g in elems if all(omega.commutator_exponent(g, h) == 0 for h in elems)]
    members = {g.residues for g in center}
    for a in center:  # the center must close under addition
        for b in center:
            if (a + b).residues not in members:
                raise AssertionError("projective center failed closure check")
    return center


def complexity(omega: Cocycle) -> float:
    """sqrt(|G| / |K_w|), exact when the quotient is a perfect square."""
    ratio = omega.group.order // len(projective_center(omega))
    root = math.isqrt(ratio)
    if root * root == ratio:
        return float(root)
    return math.sqrt(ratio)


def is_mnc(omega: Cocycle) -> bool:
    """Maximally noncommutative: trivial projective center."""
    return len(projective_center(omega)) == 1


@dataclass(frozen=True)
class PatternOfZeros:
    """Star array over (group element column, character row).

    ``stars`` maps every group element to the character of its unique
    nonvanishing row, or to ``None`` for a column with no star (used to
    report measured patterns of states without SPT order).
    """

    group: FiniteAbelianGroup
    stars: tuple[tuple[GroupElement, Optional[Character]], ...]

    @classmethod
    def from_map(cls, group: FiniteAbelianGroup, mapping) -> "PatternOfZeros":
        items = []
        for g in group.elements():
            alpha = mapping.get(g) if hasattr(mapping, "get") else mapping(g)
            items.append((g, alpha))
        return cls(group, tuple(items))

    def star(self, g: GroupElement) -> Optional[Character]:
        for elem, alpha in self.stars:
            if elem == g:
                return alpha
        raise KeyError(str(g))

    @property
    def is_total(self) -> bool:
        return all(alpha is not None for _, alpha in self.stars)

    def empty_columns(self) -> list[GroupElement]:
        return [g for g, alpha in self.stars if alpha is None]

    def rank(self) -> int:
        """Number of distinct star rows among the populated columns."""
        return len({alpha.residues for _, alpha in self.stars if alpha is not None})

    def is_homomorphism(self) -> bool:
        """Exact check that g -> alpha_g is additive (requires totality)."""
        if not self.is_total:
            return False
        table = {g.residues: alpha for g, alpha in self.stars}
        for g, alpha in self.stars:
            for h, beta in self.stars:
                if table[(g + h).residues].residues != (alpha + beta).residues:
                    return False
        return True

    def as_array(self) -> list[list[str]]:
        """Rows = characters in canonical order, columns = elements in canonical order."""
        chars = self.group.characters()
        cols = [alpha for _, alpha in self.stars]
        return [
            ["*" if (alpha is not None and alpha.residues == row.residues) else "0" for alpha in cols]
            for row in chars
        ]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PatternOfZeros):
            return NotImplemented
        if self.group != other.group:
            return False
        for (g, a), (h, b) in zip(self.stars, other.stars):
            if g != h:
                return False
            if (a is None) != (b is None):
                return False
            if a is not None and a.residues != b.residues:
                return False
        return True

    def __hash__(self) -> int:
        return hash((self.group, tuple((g.residues, a.residues if a else None) for g, a in self.stars)))


def pattern_of_zeros(omega: Cocycle) -> PatternOfZeros:
    """Pattern with the star of column g at the commutator character of g."""
    return PatternOfZeros.from_map(omega.group, {g: omega.star_character(g) for g in omega.group.elements()})


def transform_pattern(sigma: Endomorphism, zeta: PatternOfZeros) -> PatternOfZeros:
    """Push a pattern through an endomorphism.

    For each g, look up the star row beta of column sigma(g) and place the
    new star at (g, sigma* beta).  Agrees with the pullback action on
    cocycle indices when the input is a valid SPT pattern.
    """
    _same_group(sigma, zeta)
    new = {}
    for g in zeta.group.elements():
        beta = zeta.star(sigma(g))
        if beta is None:
            raise PatternError(f"column {sigma(g)} has no star; cannot transform")
        new[g] = sigma.star(beta)
    return PatternOfZeros.from_map(zeta.group, new)


def match_pattern_candidates(zeta: PatternOfZeros, require_total: bool = True) -> list[int]:
    """Indices k whose pattern agrees with zeta on every populated column.

    With ``require_total`` the pattern must have a star in every column.
    Without it, empty columns are treated as unconstrained; callers use
    this to identify the invariant of measured patterns whose columns were
    annihilated by a noninvertible twist.
    """
    group = zeta.group
    n = group.uniform_modulus
    if require_total and not zeta.is_total:
        return []
    if all(alpha is None for _, alpha in zeta.stars):
        return []
    out = []
    for k in range(n):
        omega = Cocycle(group, k)
        if all(
            alpha is None or alpha.residues == omega.star_character(g).residues
            for g, alpha in zeta.stars
        ):
            out.append(k)
    return out


def invariant_from_pattern(zeta: PatternOfZeros) -> int:
    """The unique index k with pattern_of_zeros(w_k) == zeta.

    Raises :class:`PatternError` when a column has no star, when the star
    map fails the homomorphism test, or when no representative matches.
    """
    missing = zeta.empty_columns()
    if missing:
        raise PatternError(
            "not an SPT pattern: no star in column(s) " + ", ".join(map(str, missing))
        )
    if not zeta.is_homomorphism():
        raise PatternError("not an SPT pattern: star map is not a homomorphism")
    matches = match_pattern_candidates(zeta, require_total=True)
    if len(matches) != 1:
        raise PatternError(f"not an SPT pattern: {len(matches)} representatives match")
    return matches[0]


@lru_cache(maxsize=None)
def uniform_square_group(n: int) -> FiniteAbelianGroup:
    """Convenience constructor for Z_n x Z_n."""
    return FiniteAbelianGroup((n, n))
