"""Integer intersection lattices for the manifolds the engine works on.

Three concrete flavours are supported:

* projective space ``P^n``: curve basis ``(l)``, divisor basis ``(H)``,
  ``H.l = 1``, anticanonical class ``(n+1)H``;
* the one-point blow-up ``BlP^n``: curve basis ``(f, e)`` with ``f`` the
  *total* transform of a line and ``e`` a line in the exceptional divisor,
  divisor basis ``(h, E)``, pairing ``h.f = 1``, ``h.e = 0``, ``E.f = 0``,
  ``E.e = -1``, anticanonical class ``(n+1)h - (n-1)E``;
* blow-ups along a positive-dimensional centre, which carry only the
  minimal extension of the ambient lattice (ambient basis plus ``e``)
  needed for degree bookkeeping.

The proper transform of a line through the blown-up point is the derived
class ``L = f - e``; it satisfies ``L.E = 1``.  Projectivized-bundle pieces
are handled through formal first-Chern-class expressions (``proj_bundle_c1``)
rather than full lattices.

All values are immutable and every operation is a pure function, so the
module is safe for unrestricted concurrent use.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping


class LatticeError(ValueError):
    """Malformed manifold data, basis mismatch, or unsupported manifold pair."""


@dataclass(frozen=True)
class _BasisVector:
    basis: tuple[str, ...]
    coeffs: tuple[int, ...]

    def __post_init__(self):
        if len(self.basis) != len(self.coeffs):
            raise LatticeError(
                f"{len(self.coeffs)} coefficients for basis {self.basis}"
            )
        if not all(isinstance(c, int) for c in self.coeffs):
            raise LatticeError(f"non-integer coefficients {self.coeffs}")

    def _check_compatible(self, other: "_BasisVector") -> None:
        if type(self) is not type(other) or self.basis != other.basis:
            raise LatticeError(f"basis mismatch: {self} vs {other}")

    def __add__(self, other):
        self._check_compatible(other)
        return type(self)(self.basis, tuple(a + b for a, b in zip(self.coeffs, other.coeffs)))

    def __sub__(self, other):
        self._check_compatible(other)
        return type(self)(self.basis, tuple(a - b for a, b in zip(self.coeffs, other.coeffs)))

    def __neg__(self):
        return type(self)(self.basis, tuple(-a for a in self.coeffs))

    def __rmul__(self, k: int):
        if not isinstance(k, int):
            raise LatticeError(f"scalar must be an integer, got {k!r}")
        return type(self)(self.basis, tuple(k * a for a in self.coeffs))

    __mul__ = __rmul__

    @property
    def is_zero(self) -> bool:
        return all(c == 0 for c in self.coeffs)

    def coefficient(self, name: str) -> int:
        try:
            return self.coeffs[self.basis.index(name)]
        except ValueError:
            raise LatticeError(f"{name!r} not in basis {self.basis}") from None

    def serialize(self) -> list[int]:
        """Integer array in declared basis order."""
        return list(self.coeffs)

    def __str__(self):
        terms = [f"{c}{b}" for b, c in zip(self.basis, self.coeffs) if c != 0]
        return "+".join(terms).replace("+-", "-") or "0"


class CurveClass(_BasisVector):
    """Integer vector over a manifold's curve basis."""


class DivisorClass(_BasisVector):
    """Integer vector over a manifold's divisor basis."""


@dataclass(frozen=True)
class Manifold:
    """A manifold presented by its second-homology pairing data.

    ``pairing_table`` has one row per divisor generator and one column per
    curve generator.  Symbolic kinds ("proj-bundle") have empty bases and a
    formal anticanonical expression instead.
    """

    kind: str
    name: str
    n: int
    curve_basis: tuple[str, ...]
    divisor_basis: tuple[str, ...]
    pairing_table: tuple[tuple[int, ...], ...]
    c1: DivisorClass | None
    formal_c1: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        if self.n < 2:
            raise LatticeError(f"complex dimension must be >= 2, got n={self.n}")
        if len(self.pairing_table) != len(self.divisor_basis):
            raise LatticeError("pairing table rows must match divisor basis")
        for row in self.pairing_table:
            if len(row) != len(self.curve_basis):
                raise LatticeError("pairing table columns must match curve basis")

    @property
    def has_lattice(self) -> bool:
        return bool(self.curve_basis)

    def curve(self, **coeffs: int) -> CurveClass:
        unknown = set(coeffs) - set(self.curve_basis)
        if unknown:
            raise LatticeError(f"unknown curve generators {sorted(unknown)} on {self.name}")
        return CurveClass(self.curve_basis, tuple(coeffs.get(b, 0) for b in self.curve_basis))

    def divisor(self, **coeffs: int) -> DivisorClass:
        unknown = set(coeffs) - set(self.divisor_basis)
        if unknown:
            raise LatticeError(f"unknown divisor generators {sorted(unknown)} on {self.name}")
        return DivisorClass(self.divisor_basis, tuple(coeffs.get(b, 0) for b in self.divisor_basis))

    def zero_curve(self) -> CurveClass:
        return CurveClass(self.curve_basis, (0,) * len(self.curve_basis))

    def line_class(self) -> CurveClass:
        """Proper transform of a line through the blown-up point, ``f - e``."""
        if self.kind != "blowup-point":
            raise LatticeError(f"line_class is defined on point blow-ups, not {self.kind}")
        return self.curve(f=1, e=-1)

    def descriptor(self) -> dict:
        """JSON-serializable descriptor {kind, n, extra params}."""
        out = {"kind": self.kind, "n": self.n, "name": self.name}
        if self.formal_c1:
            out["formal_c1"] = dict(self.formal_c1)
        return out


def proj_space(n: int) -> Manifold:
    if n < 2:
        raise LatticeError(f"projective space needs n >= 2, got {n}")
    return Manifold(
        kind="projective-space",
        name=f"P{n}",
        n=n,
        curve_basis=("l",),
        divisor_basis=("H",),
        pairing_table=((1,),),
        c1=DivisorClass(("H",), (n + 1,)),
    )


def blowup_point(n: int) -> Manifold:
    if n < 2:
        raise LatticeError(f"point blow-up needs n >= 2, got {n}")
    return Manifold(
        kind="blowup-point",
        name=f"BlP{n}",
        n=n,
        curve_basis=("f", "e"),
        divisor_basis=("h", "E"),
        pairing_table=((1, 0), (0, -1)),
        c1=DivisorClass(("h", "E"), (n + 1, -(n - 1))),
    )


def blowup_along(ambient: Manifold, codim: int) -> Manifold:
    """Blow-up of ``ambient`` along a centre of complex codimension ``codim``.

    Carries only the pullback of the ambient lattice plus the fibre line
    class ``e`` (dual divisor ``E``), which is all the rewrite machinery
    needs: ``E`` pairs to zero with pulled-back curves, ``E.e = -1``, and
    the anticanonical class drops by ``(codim-1)E``.
    """
    if not ambient.has_lattice or ambient.c1 is None:
        raise LatticeError(f"ambient {ambient.name} has no concrete lattice")
    if codim < 2 or codim > ambient.n:
        raise LatticeError(f"codimension {codim} out of range for n={ambient.n}")
    curve_basis = ambient.curve_basis + ("e",)
    divisor_basis = ambient.divisor_basis + ("E",)
    table = tuple(row + (0,) for row in ambient.pairing_table)
    table += ((0,) * len(ambient.curve_basis) + (-1,),)
    return Manifold(
        kind="blowup-locus",
        name=f"Bl[{ambient.name}/codim{codim}]",
        n=ambient.n,
        curve_basis=curve_basis,
        divisor_basis=divisor_basis,
        pairing_table=table,
        c1=DivisorClass(divisor_basis, ambient.c1.coeffs + (-(codim - 1),)),
    )


def make_manifold(descriptor) -> Manifold:
    """Build a manifold from a descriptor dict or a shorthand name.

    Accepted descriptors: ``{"kind": "projective-space", "n": n}``,
    ``{"kind": "blowup-point", "n": n}``, ``{"kind": "proj-bundle",
    "base_n": k, "rank": r, "c1_base": {...}, "c1_bundle": {...}}``, or the
    strings ``"P<n>"`` / ``"BlP<n>"``.
    """
    if isinstance(descriptor, str):
        return manifold_from_name(descriptor)
    kind = descriptor.get("kind")
    if kind == "projective-space":
        return proj_space(descriptor["n"])
    if kind == "blowup-point":
        return blowup_point(descriptor["n"])
    if kind == "proj-bundle":
        base_n = descriptor["base_n"]
        rank = descriptor["rank"]
        if rank < 1:
            raise LatticeError(f"bundle rank must be >= 1, got {rank}")
        expr = proj_bundle_c1(descriptor["c1_base"], descriptor["c1_bundle"], rank)
        return Manifold(
            kind="proj-bundle",
            name=f"P(V{rank}/{base_n})",
            n=base_n + rank - 1,
            curve_basis=(),
            divisor_basis=(),
            pairing_table=(),
            c1=None,
            formal_c1=tuple(sorted(expr.items())),
        )
    raise LatticeError(f"unknown manifold kind {kind!r}")


_NAME_RE = re.compile(r"^(Bl)?P(\d+)$")


def manifold_from_name(name: str) -> Manifold:
    m = _NAME_RE.match(name)
    if not m:
        raise LatticeError(f"cannot parse manifold name {name!r} (expected P<n> or BlP<n>)")
    n = int(m.group(2))
    return blowup_point(n) if m.group(1) else proj_space(n)


def pairing(manifold: Manifold, divisor: DivisorClass, curve: CurveClass) -> int:
    """Bilinear integer pairing of a divisor class against a curve class."""
    if not manifold.has_lattice:
        raise LatticeError(f"{manifold.name} carries no concrete pairing")
    if divisor.basis != manifold.divisor_basis:
        raise LatticeError(f"divisor basis {divisor.basis} does not match {manifold.name}")
    if curve.basis != manifold.curve_basis:
        raise LatticeError(f"curve basis {curve.basis} does not match {manifold.name}")
    return sum(
        d * t * c
        for d, row in zip(divisor.coeffs, manifold.pairing_table)
        for t, c in zip(row, curve.coeffs)
    )


def c1_eval(manifold: Manifold, curve: CurveClass) -> int:
    """Anticanonical degree of a curve class."""
    if manifold.c1 is None:
        raise LatticeError(f"{manifold.name} has only a formal first Chern class")
    return pairing(manifold, manifold.c1, curve)


def proj_bundle_c1(
    c1_base: Mapping[str, int],
    c1_bundle: Mapping[str, int],
    rank: int,
    fiber_symbol: str = "xi",
) -> dict[str, int]:
    """First Chern class of a projectivized rank-``rank`` bundle.

    Returns the formal sum (pullback of base c1) + (pullback of bundle c1)
    - rank * (tautological class), over the extended divisor symbols.
    Pulled-back symbols keep their names; the tautological class is added
    under ``fiber_symbol``.
    """
    if rank < 1:
        raise LatticeError(f"bundle rank must be >= 1, got {rank}")
    out: dict[str, int] = {}
    for expr in (c1_base, c1_bundle):
        if fiber_symbol in expr:
            raise LatticeError(f"fiber symbol {fiber_symbol!r} already used in {dict(expr)}")
        for sym, coeff in expr.items():
            out[sym] = out.get(sym, 0) + coeff
    out = {sym: coeff for sym, coeff in out.items() if coeff != 0}
    out[fiber_symbol] = out.get(fiber_symbol, 0) - rank
    return out


# Restriction data for the identification of P(O(-1) + O) over P^{n-1} with
# the one-point blow-up of P^n: the pulled-back hyperplane meets both f and
# e once (both project to lines in the base), while the tautological class
# restricts to degree -1 on the fibre classes and is trivial on the zero
# section that contains e.
_PULLBACK_ON_CURVES = {"f": 1, "e": 1}
_TAUTOLOGICAL_ON_CURVES = {"f": -1, "e": 0}


def bundle_c1_on_blowup_curves(
    expr: Mapping[str, int],
    base_symbol: str = "H'",
    fiber_symbol: str = "xi",
) -> tuple[int, int]:
    """Evaluate a formal bundle c1 over P^{n-1} on the blow-up curve basis.

    ``expr`` may involve the pulled-back base hyperplane and the
    tautological class only.  Returns ``(c1.f, c1.e)``.
    """
    values = []
    for curve in ("f", "e"):
        total = 0
        for sym, coeff in expr.items():
            if sym == base_symbol:
                total += coeff * _PULLBACK_ON_CURVES[curve]
            elif sym == fiber_symbol:
                total += coeff * _TAUTOLOGICAL_ON_CURVES[curve]
            else:
                raise LatticeError(f"cannot evaluate symbol {sym!r} on blow-up curves")
        values.append(total)
    return values[0], values[1]


def p_shriek(base: Manifold, blowup: Manifold, curve: CurveClass) -> CurveClass:
    """Push-pull of a curve class to the blow-up: PD of the pullback of its PD.

    Implemented concretely for the pair (P^n, BlP^n): the Poincare dual of
    the class is pulled back along the projection (base divisors map to
    their pullbacks, nothing hits E) and dualized back through the blow-up
    pairing, which is unimodular.
    """
    if base.kind != "projective-space" or blowup.kind != "blowup-point" or base.n != blowup.n:
        raise LatticeError(f"unsupported manifold pair ({base.name}, {blowup.name})")
    if curve.basis != base.curve_basis:
        raise LatticeError(f"curve basis {curve.basis} does not match {base.name}")
    # Pairings of the pulled-back dual against the blow-up divisor basis:
    # pullback rows keep their values, the E row pairs to zero.
    target = [
        pairing(base, DivisorClass(base.divisor_basis, _unit_vector(len(base.divisor_basis), i)), curve)
        for i in range(len(base.divisor_basis))
    ] + [0]
    coeffs = _solve_integer(blowup.pairing_table, target)
    return CurveClass(blowup.curve_basis, coeffs)


def _unit_vector(length: int, index: int) -> tuple[int, ...]:
    return tuple(1 if i == index else 0 for i in range(length))


def _solve_integer(table: tuple[tuple[int, ...], ...], rhs: list[int]) -> tuple[int, ...]:
    """Solve table @ x = rhs exactly; the solution must be integral."""
    size = len(rhs)
    rows = [[Fraction(v) for v in row] + [Fraction(rhs[i])] for i, row in enumerate(table)]
    for col in range(size):
        pivot = next((r for r in range(col, size) if rows[r][col] != 0), None)
        if pivot is None:
            raise LatticeError("degenerate pairing table")
        rows[col], rows[pivot] = rows[pivot], rows[col]
        scale = rows[col][col]
        rows[col] = [v / scale for v in rows[col]]
        for r in range(size):
            if r != col and rows[r][col] != 0:
                factor = rows[r][col]
                rows[r] = [v - factor * w for v, w in zip(rows[r], rows[col])]
    solution = [row[-1] for row in rows]
    if any(v.denominator != 1 for v in solution):
        raise LatticeError(f"push-pull produced a non-integral class {solution}")
    return tuple(int(v) for v in solution)


def mori_decompose(blowup: Manifold, curve: CurveClass) -> tuple[int, int] | None:
    """Decompose a blow-up class as a(L-e) + b e with a, b >= 0.

    Returns ``(a, b)`` on success and ``None`` when no such decomposition
    exists (the class cannot be represented by stable maps).
    """
    if blowup.kind != "blowup-point":
        raise LatticeError(f"mori_decompose expects a point blow-up, not {blowup.name}")
    if curve.basis != blowup.curve_basis:
        raise LatticeError(f"curve basis {curve.basis} does not match {blowup.name}")
    a = curve.coefficient("f")
    b = curve.coefficient("e") + 2 * a
    if a < 0 or b < 0:
        return None
    return a, b


def mori_recompose(blowup: Manifold, a: int, b: int) -> CurveClass:
    """Inverse of mori_decompose: a(L-e) + b e = a f + (b-2a) e."""
    return blowup.curve(f=a, e=b - 2 * a)


_CLASS_TOKEN = re.compile(r"([+-]?\d*)([A-Za-z])")


def parse_curve_class(manifold: Manifold, text: str) -> CurveClass:
    """Parse class strings such as "3l", "3f-1e", "f-e" in the manifold basis."""
    compact = text.replace(" ", "")
    pos = 0
    coeffs = {name: 0 for name in manifold.curve_basis}
    while pos < len(compact):
        m = _CLASS_TOKEN.match(compact, pos)
        if not m:
            raise LatticeError(f"cannot parse class token at {compact[pos:]!r} in {text!r}")
        raw, letter = m.groups()
        if letter not in coeffs:
            raise LatticeError(f"unknown basis letter {letter!r} for {manifold.name} in {text!r}")
        coeff = int(raw) if raw not in ("", "+", "-") else (-1 if raw == "-" else 1)
        coeffs[letter] += coeff
        pos = m.end()
    return manifold.curve(**coeffs)
