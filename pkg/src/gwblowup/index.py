"""Fredholm-index bookkeeping for the components of a symplectic cut.

A cut splits a closed manifold into a plus piece (a projective space or a
projectivized-bundle neighbourhood of the centre) and a minus piece (the
blow-up), held together along contact orbits with multiplicities
``k_1..k_nu``.  The total index of a split map is

    2(n-1) nu + 2 c1(A) + 2(3-n)(g-1),

and each cut scenario has a closed-form plus-side index obtained from the
Chern degree of the fibre classes its components can carry.  The minus-side
index is the exact complement.  A component's contribution to an invariant
dies when either every constraint lives on the minus piece while the plus
piece still carries marked points, or the constraint degrees overshoot the
minus-side index budget.

Everything here is exact integer arithmetic; no floating point.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class IndexDataError(ValueError):
    """Component data violating the profile invariants."""


class Scenario(str, Enum):
    """Which cut the plus-side index formula belongs to.

    * ``point-blowup``: cut of the ambient at a point; plus side is P^n and
      component classes are multiples of the line.
    * ``thm14-side``: cut of the blow-up around E while the total class is
      p!(A) - e; components carry sum(k) L + (sum(k) - 1) e.
    * ``curve-case1``: cut of the ambient along a curve of positive genus;
      plus-side components stay in fibres.
    * ``curve-case2-lower-bound``: same formula for a rational centre with
      nonnegative ambient Chern degree, as a lower bound.
    * ``blowup-exceptional-side``: cut of the curve blow-up around E
      (a lower bound when the centre is rational).
    * ``surface``: cut along one of the admitted surfaces.
    """

    POINT_BLOWUP = "point-blowup"
    BLOWUP_EXCEPTIONAL_SIDE = "blowup-exceptional-side"
    THM14_SIDE = "thm14-side"
    CURVE_CASE1 = "curve-case1"
    CURVE_CASE2_LOWER_BOUND = "curve-case2-lower-bound"
    SURFACE = "surface"


#: Scenarios whose plus-side value is only a lower bound (so the minus-side
#: complement is only an upper bound).
_BOUND_SCENARIOS = frozenset(
    {Scenario.CURVE_CASE2_LOWER_BOUND, Scenario.BLOWUP_EXCEPTIONAL_SIDE}
)


class Side(str, Enum):
    PLUS = "plus"
    MINUS = "minus"


@dataclass(frozen=True)
class IndexValue:
    """An index together with its exactness: ``exact=False`` marks a bound
    (a lower bound on the plus side, an upper bound on the minus side)."""

    value: int
    exact: bool = True

    def __int__(self) -> int:
        return self.value


@dataclass(frozen=True)
class ComponentProfile:
    """Combinatorial data of one side of a cut component."""

    n: int
    side: Side
    c1A: int
    g: int
    g_side: int
    l_side: int
    m_side: int
    nu: int
    ks: tuple[int, ...]

    def __post_init__(self):
        if self.n < 2:
            raise IndexDataError(f"n must be >= 2, got {self.n}")
        if self.nu != len(self.ks):
            raise IndexDataError(f"nu={self.nu} but {len(self.ks)} contact multiplicities")
        if any(k < 1 for k in self.ks):
            raise IndexDataError(f"contact multiplicities must be >= 1, got {self.ks}")
        if self.l_side < 1:
            raise IndexDataError("a nonempty side has at least one component")
        if self.side is Side.PLUS and self.l_side > self.nu:
            raise IndexDataError(
                f"plus side needs l <= nu (each component has an end), got l={self.l_side}, nu={self.nu}"
            )
        if not (0 <= self.g_side <= self.g):
            raise IndexDataError(f"side genus {self.g_side} outside 0..{self.g}")
        if self.m_side < 0:
            raise IndexDataError("negative marked-point count")

    @property
    def sum_k(self) -> int:
        return sum(self.ks)


def index_sum(n: int, nu: int, c1A: int, g: int) -> int:
    """Total index of a split map: 2(n-1)nu + 2 c1(A) + 2(3-n)(g-1)."""
    if n < 2:
        raise IndexDataError(f"n must be >= 2, got {n}")
    if nu < 0 or g < 0:
        raise IndexDataError(f"nu and g must be nonnegative, got nu={nu}, g={g}")
    return 2 * (n - 1) * nu + 2 * c1A + 2 * (3 - n) * (g - 1)


def _validate_plus_args(n: int, l_plus: int, sum_k: int, nu: int) -> None:
    if n < 2:
        raise IndexDataError(f"n must be >= 2, got {n}")
    if nu < 1:
        raise IndexDataError("plus side needs at least one end")
    if not (1 <= l_plus <= nu):
        raise IndexDataError(f"l+ must satisfy 1 <= l+ <= nu, got l+={l_plus}, nu={nu}")
    if sum_k < nu:
        raise IndexDataError(f"sum(k) >= nu required (every k_i >= 1), got {sum_k} < {nu}")


def index_plus(
    scenario: Scenario,
    n: int,
    g_plus: int,
    l_plus: int,
    sum_k: int,
    nu: int,
) -> IndexValue:
    """Plus-side index for the given cut scenario.

    ``g_plus`` only enters the point-blowup formula; the genus-zero
    scenarios ignore it.  Bound scenarios return a tagged lower bound.
    """
    scenario = Scenario(scenario)
    _validate_plus_args(n, l_plus, sum_k, nu)
    if g_plus < 0:
        raise IndexDataError(f"g+ must be nonnegative, got {g_plus}")
    if scenario is Scenario.POINT_BLOWUP:
        value = 2 * (3 - n) * (g_plus - l_plus) + 2 * n * sum_k + 2 * nu
    elif scenario is Scenario.THM14_SIDE:
        value = 2 * n * sum_k - 4 * l_plus + 2 * nu
    elif scenario in (Scenario.CURVE_CASE1, Scenario.CURVE_CASE2_LOWER_BOUND):
        value = (2 * n - 6) * l_plus + 2 * (n - 1) * sum_k + 2 * nu
    elif scenario is Scenario.SURFACE:
        value = (2 * n - 6) * l_plus + 2 * (n - 2) * sum_k + 2 * nu
    elif scenario is Scenario.BLOWUP_EXCEPTIONAL_SIDE:
        value = (2 * n - 6) * l_plus + 2 * (2 * n - 3) * sum_k + 2 * nu
    else:  # pragma: no cover
        raise IndexDataError(f"unknown scenario {scenario}")
    return IndexValue(value, exact=scenario not in _BOUND_SCENARIOS)


def cut_total_c1(scenario: Scenario, n: int, c1A: int) -> int:
    """Chern degree of the class actually split by the scenario's cut.

    ``c1A`` is always the degree of the original ambient class.  The
    point-constraint cut of the blow-up splits p!(A) - e, whose degree
    drops by n-1; every other scenario splits a class of unchanged degree
    (E pairs to zero with pulled-back classes).
    """
    if Scenario(scenario) is Scenario.THM14_SIDE:
        return c1A - (n - 1)
    return c1A


def index_minus(
    n: int,
    c1A: int,
    g: int,
    g_plus: int,
    l_plus: int,
    nu: int,
    sum_k: int,
    scenario: Scenario,
) -> IndexValue:
    """Minus-side index: the exact complement of the plus side.

    Equals index_sum (over the scenario's cut class) minus index_plus, and
    agrees with the scenario closed forms, e.g. point-blowup
    ``2c1A + 2(3-n)(g-g+ + l+ - 1) + 2(n-2)nu - 2n sum(k)`` and
    point-constraint ``2c1A + 4(l+-1) + 2(n-2)nu - 2n sum(k)``.
    When the plus side is a lower bound the result is an upper bound.
    """
    scenario = Scenario(scenario)
    if scenario is not Scenario.POINT_BLOWUP and g != 0:
        raise IndexDataError(f"scenario {scenario.value} is genus-zero only, got g={g}")
    if not (0 <= g_plus <= g):
        raise IndexDataError(f"g+ must lie in 0..g, got g+={g_plus}, g={g}")
    plus = index_plus(scenario, n, g_plus, l_plus, sum_k, nu)
    total = index_sum(n, nu, cut_total_c1(scenario, n, c1A), g)
    return IndexValue(total - plus.value, exact=plus.exact)


def required_degree_sum(n: int, c1A: int, g: int, m: int) -> int:
    """Total real insertion degree an invariant needs to avoid the
    dimension gate: 2 c1(A) + 2(3-n)(g-1) + 2m."""
    if m < 0:
        raise IndexDataError(f"m must be nonnegative, got {m}")
    if n < 2 or g < 0:
        raise IndexDataError(f"invalid (n, g) = ({n}, {g})")
    return 2 * c1A + 2 * (3 - n) * (g - 1) + 2 * m


@dataclass(frozen=True)
class VanishingVerdict:
    vanishes: bool
    reason: str  # "support" | "degree-vs-index" | "not-excluded"


def component_vanishes(
    profile: ComponentProfile,
    insertion_degrees: list[int] | tuple[int, ...],
    scenario: Scenario,
) -> VanishingVerdict:
    """Decide whether a cut component is excluded from contributing.

    ``profile`` describes the plus side; the insertions are assumed
    supported on the minus piece (so they restrict to zero on the plus
    side).  Excluded when the plus side still carries marked points, or
    when the total insertion degree strictly exceeds the minus-side index
    budget plus 2m.  A bounded budget is treated conservatively: the
    overshoot must be strict against the bound.
    """
    if profile.side is not Side.PLUS:
        raise IndexDataError("component_vanishes expects the plus-side profile")
    if any(d % 2 for d in insertion_degrees):
        raise IndexDataError(f"insertion degrees must be even, got {insertion_degrees}")
    if profile.m_side > 0:
        return VanishingVerdict(True, "support")
    m = len(insertion_degrees)
    budget = index_minus(
        profile.n,
        profile.c1A,
        profile.g,
        profile.g_side,
        profile.l_side,
        profile.nu,
        profile.sum_k,
        scenario,
    )
    if sum(insertion_degrees) > budget.value + 2 * m:
        return VanishingVerdict(True, "degree-vs-index")
    return VanishingVerdict(False, "not-excluded")
