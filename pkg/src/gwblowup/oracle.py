"""Exact genus-zero curve counts and the invariant evaluation dispatcher.

Two independent recursions provide the numbers:

* ``kontsevich_p2``: the classical recursion for N_d, the number of
  rational degree-d plane curves through 3d-1 general points, seeded by
  the unique line through two points;
* ``wdvv_f1``: curve counts N(a f + b e) on the one-point blow-up of the
  plane, derived from the WDVV associativity equations of the genus-zero
  potential in the basis {1, h, E, point} (full derivation in
  docs/wdvv.md), seeded by N(e) = N(f-e) = N(f) = 1.

Both recursions are exact: every value is a ``fractions.Fraction`` and, on
these surfaces, a nonnegative integer (asserted).  Counts are memoized in a
``MemoTable`` that can persist to a JSON cache file.

``evaluate`` dispatches an invariant query through the dimension gate, the
exceptional-multiple vanishing gate, divisor-axiom reduction, and finally
the counting routes; queries the engine cannot decide come back symbolic,
never guessed.

Two-point conventions: the engine treats the degree-one two-point count
on P^n (the unique line through two general points, value 1) as a seeded
identity; every other small invariant it needs reduces to the counting
recursions or to ``pn_three_point`` through the divisor axiom.

Evaluation is deterministic and side-effect-free apart from the memo
table.  The default shared table relies on the interpreter's serialized
dict writes; workers that want full isolation pass their own table.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction

from .index import required_degree_sum
from .lattice import (
    CurveClass,
    DivisorClass,
    LatticeError,
    Manifold,
    blowup_point,
    c1_eval,
    mori_decompose,
    pairing,
)

ExactRational = Fraction


class OracleError(ValueError):
    """Malformed oracle input."""


class NotEffectiveError(OracleError):
    """The class admits no stable-map representative."""


class MemoConflictError(RuntimeError):
    """An existing memo entry was about to be overwritten with a new value."""


# ---------------------------------------------------------------------------
# insertions and queries


_DIVISOR_LIKE = ("divisor", "exc_dual")


@dataclass(frozen=True)
class Insertion:
    """A cohomology-class slot in an invariant.

    Kinds: ``unit`` (degree 0), ``divisor`` (degree 2, carries the class),
    ``point`` (degree 2n), ``pullback`` (wraps an insertion on the base,
    same degree), ``exc_dual`` (the class dual to the exceptional divisor,
    degree 2).  ``away_from_locus`` records support away from a blow-up
    centre for the surface-rule gate.
    """

    kind: str
    real_degree: int
    divisor: DivisorClass | None = None
    base: "Insertion | None" = None
    away_from_locus: bool = False

    def __post_init__(self):
        if self.real_degree < 0 or self.real_degree % 2:
            raise OracleError(f"real degree must be even and >= 0, got {self.real_degree}")
        if self.kind == "unit" and self.real_degree != 0:
            raise OracleError("unit insertion has degree 0")
        if self.kind in _DIVISOR_LIKE and self.real_degree != 2:
            raise OracleError(f"{self.kind} insertion has degree 2")
        if self.kind == "divisor" and self.divisor is None:
            raise OracleError("divisor insertion needs a divisor class")
        if self.kind == "pullback":
            if self.base is None:
                raise OracleError("pullback insertion needs a base insertion")
            if self.base.real_degree != self.real_degree:
                raise OracleError("pullback preserves degree")
        if self.kind not in ("unit", "divisor", "point", "pullback", "exc_dual"):
            raise OracleError(f"unknown insertion kind {self.kind!r}")

    def describe(self) -> str:
        if self.kind == "pullback":
            return f"p*({self.base.describe()})"
        if self.kind == "divisor":
            return str(self.divisor)
        if self.kind == "exc_dual":
            return "PD(E)"
        return {"unit": "1", "point": "pt"}[self.kind]


def unit() -> Insertion:
    return Insertion("unit", 0)


def point(manifold: Manifold) -> Insertion:
    return Insertion("point", 2 * manifold.n)


def divisor_insertion(manifold: Manifold, **coeffs: int) -> Insertion:
    return Insertion("divisor", 2, divisor=manifold.divisor(**coeffs))


def exc_dual(manifold: Manifold) -> Insertion:
    if manifold.kind not in ("blowup-point", "blowup-locus"):
        raise OracleError(f"exc_dual lives on blow-ups, not {manifold.name}")
    return Insertion("exc_dual", 2)


def pullback(base: Insertion) -> Insertion:
    return Insertion("pullback", base.real_degree, base=base)


@dataclass(frozen=True)
class InvariantQuery:
    """The unit of evaluation: (manifold, class, genus, ordered insertions)."""

    manifold: Manifold
    curve_class: CurveClass
    genus: int
    insertions: tuple[Insertion, ...]

    def __post_init__(self):
        if self.genus < 0:
            raise OracleError(f"genus must be nonnegative, got {self.genus}")
        if self.curve_class.basis != self.manifold.curve_basis:
            raise OracleError(
                f"class basis {self.curve_class.basis} does not match {self.manifold.name}"
            )
        for ins in self.insertions:
            if ins.kind == "point" and ins.real_degree != 2 * self.manifold.n:
                raise OracleError(
                    f"point insertion must have degree {2 * self.manifold.n} on {self.manifold.name}"
                )

    @property
    def total_degree(self) -> int:
        return sum(ins.real_degree for ins in self.insertions)

    @property
    def m(self) -> int:
        return len(self.insertions)

    def describe(self) -> str:
        args = ",".join(ins.describe() for ins in self.insertions)
        return f"Psi^{self.manifold.name}_({self.curve_class},g={self.genus})({args})"


@dataclass(frozen=True)
class EvalResult:
    """Outcome of evaluate: exact value, proved zero, or symbolic residue."""

    status: str  # "exact" | "zero" | "symbolic"
    value: Fraction | None = None
    reason: str | None = None
    query: InvariantQuery | None = None

    @classmethod
    def exact(cls, value) -> "EvalResult":
        return cls("exact", value=Fraction(value))

    @classmethod
    def zero(cls, reason: str) -> "EvalResult":
        return cls("zero", reason=reason)

    @classmethod
    def symbolic(cls, query: InvariantQuery) -> "EvalResult":
        return cls("symbolic", query=query)

    @property
    def is_exact(self) -> bool:
        return self.status == "exact"

    def numeric(self) -> Fraction | None:
        """The proved value: exact values as-is, zeros as 0, else None."""
        if self.status == "exact":
            return self.value
        if self.status == "zero":
            return Fraction(0)
        return None

    def describe(self) -> str:
        if self.status == "exact":
            return str(self.value)
        if self.status == "zero":
            return f"ZERO({self.reason})"
        return f"SYMBOLIC({self.query.describe()})"


# ---------------------------------------------------------------------------
# memo table

MemoKey = tuple[str, tuple[int, ...]]


@dataclass
class MemoTable:
    """Map from (manifold key, class coefficients) to exact counts.

    Entries are immutable once written.  ``save`` is load-merge-save with
    last-writer-wins at whole-file granularity; the file format is a JSON
    map ``{"key|a,b": "num/den"}``.
    """

    path: str | None = None
    entries: dict[MemoKey, Fraction] = field(default_factory=dict)
    dirty: bool = False

    def get(self, key: MemoKey) -> Fraction | None:
        return self.entries.get(key)

    def put(self, key: MemoKey, value: Fraction) -> None:
        value = Fraction(value)
        existing = self.entries.get(key)
        if existing is not None:
            if existing != value:
                raise MemoConflictError(f"memo conflict at {key}: {existing} vs {value}")
            return
        self.entries[key] = value
        self.dirty = True

    def merge(self, other: "MemoTable") -> None:
        for key, value in other.entries.items():
            self.put(key, value)

    def __len__(self) -> int:
        return len(self.entries)

    @staticmethod
    def encode_key(key: MemoKey) -> str:
        name, coeffs = key
        return f"{name}|{','.join(str(c) for c in coeffs)}"

    @staticmethod
    def decode_key(text: str) -> MemoKey:
        name, _, coeffs = text.partition("|")
        if not coeffs:
            raise OracleError(f"malformed memo key {text!r}")
        return name, tuple(int(c) for c in coeffs.split(","))

    def to_json(self) -> dict[str, str]:
        return {
            self.encode_key(key): f"{v.numerator}/{v.denominator}"
            for key, v in sorted(self.entries.items())
        }

    def load(self, path: str | None = None) -> int:
        """Merge entries from the cache file; returns how many were read."""
        path = path or self.path
        if path is None or not os.path.exists(path):
            return 0
        with open(path, "r", encoding="utf-8") as handle:
            raw = json.load(handle)
        count = 0
        for key_text, value_text in raw.items():
            self.put(self.decode_key(key_text), Fraction(value_text))
            count += 1
        return count

    def save(self, path: str | None = None) -> str:
        path = path or self.path
        if path is None:
            raise OracleError("memo table has no backing path")
        merged = MemoTable(path=path, entries=dict(self.entries))
        try:
            merged.load(path)
        except (OSError, ValueError, MemoConflictError):
            # Unreadable or inconsistent existing file: this writer wins.
            merged = MemoTable(path=path, entries=dict(self.entries))
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(merged.to_json(), handle, indent=0, sort_keys=True)
            handle.write("\n")
        self.dirty = False
        return path


_DEFAULT_MEMO = MemoTable()


def default_memo() -> MemoTable:
    return _DEFAULT_MEMO


# ---------------------------------------------------------------------------
# plane curve counts


def kontsevich_p2(d: int, memo: MemoTable | None = None) -> Fraction:
    """Number of rational degree-d plane curves through 3d-1 general points.

    Standard genus-zero recursion seeded by N_1 = 1:

        N_d = sum over d1+d2=d, d1,d2>=1 of N_d1 N_d2 *
              (d1^2 d2^2 C(3d-4, 3d1-2) - d1^3 d2 C(3d-4, 3d1-1)).
    """
    if not isinstance(d, int) or d <= 0:
        raise OracleError(f"degree must be a positive integer, got {d!r}")
    memo = memo if memo is not None else _DEFAULT_MEMO
    cached = memo.get(("P2", (d,)))
    if cached is not None:
        return cached
    values: dict[int, int] = {1: 1}
    known = memo.get(("P2", (1,)))
    if known is None:
        memo.put(("P2", (1,)), Fraction(1))
    for degree in range(2, d + 1):
        cached = memo.get(("P2", (degree,)))
        if cached is not None:
            values[degree] = int(cached)
            continue
        total = 0
        for d1 in range(1, degree):
            d2 = degree - d1
            total += values[d1] * values[d2] * (
                d1 * d1 * d2 * d2 * math.comb(3 * degree - 4, 3 * d1 - 2)
                - d1 ** 3 * d2 * math.comb(3 * degree - 4, 3 * d1 - 1)
            )
        if total < 0:
            raise OracleError(f"negative plane count N_{degree} = {total}")
        values[degree] = total
        memo.put(("P2", (degree,)), Fraction(total))
    return Fraction(values[d])


# ---------------------------------------------------------------------------
# blow-up curve counts via WDVV


_BLP2 = blowup_point(2)


def _is_representable(a: int, b: int) -> bool:
    """Classes that can carry stable maps: the cone on f-e and e."""
    if a == 0:
        return b >= 1
    return a >= 1 and a + b >= 0


def _chern_degree(a: int, b: int) -> int:
    return 3 * a + b


def _comb0(n: int, k: int) -> int:
    return math.comb(n, k) if 0 <= k <= n else 0


def _wdvv_step(a: int, b: int, lookup) -> int:
    """One step of the blow-up recursion (docs/wdvv.md, recursion (R)).

    Valid for representable classes with Chern degree >= 4.  ``lookup``
    must already know every representable class of smaller Chern degree.
    """
    r = _chern_degree(a, b) - 1
    s = r - 3
    total = 0
    for a1 in range(0, a + 1):
        a2 = a - a1
        b1_lo = 1 if a1 == 0 else -a1
        b1_hi = b - 1 if a2 == 0 else b + a2
        for b1 in range(b1_lo, b1_hi + 1):
            b2 = b - b1
            if not (_is_representable(a1, b1) and _is_representable(a2, b2)):
                continue
            n1 = lookup(a1, b1)
            if n1 == 0:
                continue
            n2 = lookup(a2, b2)
            if n2 == 0:
                continue
            p1, q1 = a1, -b1
            p2, q2 = a2, -b2
            r1 = _chern_degree(a1, b1) - 1
            term = _comb0(s, r1 - 1) * (p1 * p1 * p2 * p2 - p1 * q1 * p2 * q2)
            term -= _comb0(s, r1) * (p1 ** 3 * p2 - p1 * p1 * q1 * q2)
            total += n1 * n2 * term
    return total


_F1_SEEDS = {(1, -1): 1, (1, 0): 1}


def wdvv_f1(a: int, b: int, memo: MemoTable | None = None) -> Fraction:
    """Count of rational curves on the blow-up of the plane in class a f + b e,
    through (Chern degree - 1) general points.

    Seeds: the exceptional curve e, the proper transform f-e of a line
    through the blown-up point, and the total transform f; everything else
    comes from the WDVV recursion, processed in increasing Chern degree
    with (a, b)-lexicographic tie-break.
    """
    if not isinstance(a, int) or not isinstance(b, int):
        raise OracleError(f"class coefficients must be integers, got ({a!r}, {b!r})")
    if mori_decompose(_BLP2, _BLP2.curve(f=a, e=b)) is None:
        raise NotEffectiveError(f"{a}f+{b}e has no nonnegative (L-e, e) decomposition")
    c1 = _chern_degree(a, b)
    if c1 - 1 < 0:
        raise NotEffectiveError(f"{a}f+{b}e has Chern degree {c1} < 1")
    memo = memo if memo is not None else _DEFAULT_MEMO

    def lookup(aa: int, bb: int) -> int:
        if aa == 0:
            # Multiples of e: only the exceptional curve itself counts; for
            # r >= 2 a general point misses the exceptional divisor.
            return 1 if bb == 1 else 0
        if aa + bb < 0:
            return 0
        seed = _F1_SEEDS.get((aa, bb))
        if seed is not None:
            return seed
        value = memo.get(("BlP2", (aa, bb)))
        if value is None:
            raise OracleError(f"recursion ordering bug: {aa}f+{bb}e not yet computed")
        return int(value)

    def compute(aa: int, bb: int) -> int:
        value = _wdvv_step(aa, bb, lookup)
        if value < 0:
            raise OracleError(f"negative blow-up count N({aa}f+{bb}e) = {value}")
        memo.put(("BlP2", (aa, bb)), Fraction(value))
        return value

    if a == 0:
        return Fraction(1 if b == 1 else 0)
    if a + b < 0:
        return Fraction(0)
    seed = _F1_SEEDS.get((a, b))
    if seed is not None:
        return Fraction(seed)
    cached = memo.get(("BlP2", (a, b)))
    if cached is not None:
        return cached
    # Fill the dependency box in increasing Chern degree; every class a
    # split can touch satisfies a' <= a and b' <= b + (a - a').
    for c1v in range(4, c1):
        for a1 in range(0, a + 1):
            b1 = c1v - 3 * a1
            if a1 == 0 or b1 > b + (a - a1):
                continue
            if not _is_representable(a1, b1) or (a1, b1) in _F1_SEEDS:
                continue
            if memo.get(("BlP2", (a1, b1))) is None:
                compute(a1, b1)
    return Fraction(compute(a, b))


# ---------------------------------------------------------------------------
# small projective-space invariants


def pn_three_point(n: int, a: int, b: int, c: int, d: int) -> Fraction:
    """Three-point genus-zero invariant of hyperplane powers on P^n.

    Equals 1 exactly in the classical case (d=0, a+b+c=n) and the line case
    (d=1, a+b+c=2n+1); every other configuration vanishes for dimension
    reasons.
    """
    if n < 2:
        raise OracleError(f"n must be >= 2, got {n}")
    for exponent in (a, b, c):
        if not (0 <= exponent <= n):
            raise OracleError(f"hyperplane exponent {exponent} out of range 0..{n}")
    if d < 0:
        raise OracleError(f"degree must be nonnegative, got {d}")
    total = a + b + c
    if (d == 0 and total == n) or (d == 1 and total == 2 * n + 1):
        return Fraction(1)
    return Fraction(0)


# ---------------------------------------------------------------------------
# divisor-axiom reduction and evaluation


def _divisor_class_of(manifold: Manifold, ins: Insertion) -> DivisorClass | None:
    """The degree-2 divisor class an insertion pairs through, if any."""
    if ins.real_degree != 2:
        return None
    if ins.kind == "divisor":
        return ins.divisor
    if ins.kind == "exc_dual":
        return manifold.divisor(E=1)
    if ins.kind == "pullback":
        base_class = ins.base.divisor if ins.base.kind == "divisor" else None
        if base_class is None:
            return None
        # Pullback divisors extend by zero on the exceptional generators.
        padded = base_class.coeffs + (0,) * (len(manifold.divisor_basis) - len(base_class.coeffs))
        return DivisorClass(manifold.divisor_basis, padded)
    return None


def reduce_divisor(query: InvariantQuery) -> tuple[Fraction, InvariantQuery]:
    """Strip degree-2 divisor insertions by the divisor axiom.

    Each removed insertion D multiplies the invariant by D.A; applied
    iteratively until no reducible insertion remains.  Requires genus 0 and
    a nonzero class (the axiom does not apply to the zero class).
    """
    if query.genus != 0:
        raise OracleError("divisor reduction applies to genus-zero queries")
    if query.curve_class.is_zero:
        raise OracleError("divisor reduction refuses the zero class")
    scalar = Fraction(1)
    remaining = list(query.insertions)
    reduced = True
    while reduced:
        reduced = False
        for i, ins in enumerate(remaining):
            div = _divisor_class_of(query.manifold, ins)
            if div is not None:
                scalar *= pairing(query.manifold, div, query.curve_class)
                del remaining[i]
                reduced = True
                break
    return scalar, InvariantQuery(query.manifold, query.curve_class, query.genus, tuple(remaining))


def lemma_exceptional_multiple_applies(query: InvariantQuery) -> bool:
    """Vanishing gate for exceptional multiples on a point blow-up.

    Fires when the class is a positive multiple of e and some insertion is
    a pullback: curves in such classes live inside the exceptional divisor
    and miss every constraint pulled back from the base, so the invariant
    is zero.
    """
    if query.manifold.kind != "blowup-point":
        return False
    if query.curve_class.coefficient("f") != 0:
        return False
    if query.curve_class.coefficient("e") < 1:
        return False
    return any(ins.kind == "pullback" for ins in query.insertions)


def _effective_kind(ins: Insertion) -> str:
    if ins.kind == "pullback":
        return _effective_kind(ins.base)
    return ins.kind


def evaluate(query: InvariantQuery, memo: MemoTable | None = None) -> EvalResult:
    """Evaluate an invariant query.

    Dispatch: (1) dimension gate, (2) exceptional-multiple gate,
    (3) classical triple products for the zero class, (4) divisor
    reduction, (5) counting routes (plane recursion, blow-up recursion,
    seeded two-point line count).  Anything else degrades to symbolic.
    """
    manifold = query.manifold
    if not manifold.has_lattice or manifold.c1 is None:
        return EvalResult.symbolic(query)
    c1A = c1_eval(manifold, query.curve_class)
    required = required_degree_sum(manifold.n, c1A, query.genus, query.m)
    if query.total_degree != required:
        return EvalResult.zero("dimension")
    if lemma_exceptional_multiple_applies(query):
        return EvalResult.zero("Lemma 1.1")
    if query.genus != 0:
        return EvalResult.symbolic(query)
    if query.curve_class.is_zero:
        return _classical_triple(query)
    try:
        scalar, residual = reduce_divisor(query)
    except LatticeError:
        return EvalResult.symbolic(query)
    if scalar == 0:
        return EvalResult.exact(0)
    kinds = {_effective_kind(ins) for ins in residual.insertions}
    if "unit" in kinds:
        # Fundamental-class axiom: a unit insertion kills any nonzero-class
        # genus-zero invariant.
        return EvalResult.zero("fundamental-class")
    if kinds <= {"point"}:
        value = _count_points_route(residual, memo)
        if value is None:
            return EvalResult.symbolic(residual)
        if value == "not-effective":
            return EvalResult.zero("not-effective")
        return EvalResult.exact(scalar * value)
    return EvalResult.symbolic(residual)


def _classical_triple(query: InvariantQuery) -> EvalResult:
    if query.manifold.kind != "projective-space" or query.m != 3:
        return EvalResult.symbolic(query)
    n = query.manifold.n
    exponents = []
    scalar = Fraction(1)
    for ins in query.insertions:
        if ins.kind == "unit":
            exponents.append(0)
        elif ins.kind == "point":
            exponents.append(n)
        elif ins.kind == "divisor":
            scalar *= ins.divisor.coefficient("H")
            exponents.append(1)
        else:
            return EvalResult.symbolic(query)
    a, b, c = exponents
    return EvalResult.exact(scalar * pn_three_point(n, a, b, c, 0))


def _count_points_route(residual: InvariantQuery, memo: MemoTable | None):
    """Route an all-points residual query to a counting recursion.

    Returns the exact count, the string "not-effective" for classes with
    no stable maps, or None when no oracle covers the query.
    """
    manifold = residual.manifold
    m = residual.m
    if manifold.kind == "projective-space":
        d = residual.curve_class.coefficient("l")
        if d < 0:
            return "not-effective"
        if manifold.n == 2:
            assert m == 3 * d - 1, "dimension gate guarantees the point count"
            return kontsevich_p2(d, memo)
        if d == 1 and m == 2:
            # Seeded identity: one line through two general points.
            return Fraction(1)
        return None
    if manifold.kind == "blowup-point" and manifold.n == 2:
        a = residual.curve_class.coefficient("f")
        b = residual.curve_class.coefficient("e")
        try:
            value = wdvv_f1(a, b, memo)
        except NotEffectiveError:
            return "not-effective"
        assert m == 3 * a + b - 1, "dimension gate guarantees the point count"
        return value
    return None
