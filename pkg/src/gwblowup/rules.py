"""Blow-up transformation rules as gated, checked query rewrites.

Each rule in the catalog turns an invariant query on a manifold into a
query on a blow-up (or asserts vanishing), guarded by the hypotheses of
the corresponding identity:

* ``lemma1-1`` — exceptional-multiple vanishing: a class r e with a
  pulled-back insertion has invariant zero;
* ``thm1-2`` — point blow-up invariance for genus <= 1:
  value(A, alpha_i) = value(p!(A), p* alpha_i);
* ``thm1-3`` — the same rewrite with the genus gate replaced by the
  real-dimension bound dim_R <= 6, any genus;
* ``thm1-4`` — trading a point constraint for the exceptional curve:
  value(A, ..., [pt]) = value(p!(A) - e, ...);
* ``thm1-5`` — blow-up along a curve of genus >= 1, or a rational curve of
  nonnegative ambient Chern degree (symbolic rewrite, index-audited);
* ``thm1-6`` — blow-up along a product of positive-genus curves, a K3, or
  a torus, with the degree-2 support condition (symbolic rewrite);
* ``corollary-e`` — the two-point count of the exceptional curve against
  PD(E) twice equals 1.

A rule never produces a target when a gate fails, and a Verified verdict
requires both sides to evaluate to the same definite exact value.  Rules
are pure given oracle access; batch verification parallelizes across
parameter values as long as each worker respects the memo-table contract.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Callable

from . import oracle
from .index import Scenario, index_plus, required_degree_sum
from .lattice import (
    CurveClass,
    Manifold,
    blowup_along,
    blowup_point,
    c1_eval,
    p_shriek,
    proj_space,
)
from .oracle import (
    EvalResult,
    Insertion,
    InvariantQuery,
    MemoTable,
    divisor_insertion,
    evaluate,
    point,
    pullback,
)


class RulesError(ValueError):
    """Malformed rule input or a violated rewrite invariant."""


class NotApplicableError(RulesError):
    """The rule's shape requirements are not met (not a gate failure)."""


class Rule(str, Enum):
    LEMMA_1_1 = "lemma1-1"
    THM_1_2 = "thm1-2"
    THM_1_3 = "thm1-3"
    THM_1_4 = "thm1-4"
    THM_1_5 = "thm1-5"
    THM_1_6 = "thm1-6"
    COROLLARY_E = "corollary-e"


class Verdict(str, Enum):
    VERIFIED = "verified"
    GATE_FAILED = "gate-failed"
    SYMBOLIC_ONLY = "symbolic-only"
    MISMATCH = "mismatch"


SURFACE_SHAPES = ("product-positive-genus", "K3", "torus")


@dataclass(frozen=True)
class BlowupLocus:
    """The centre of a blow-up: a point, a curve, or an admitted surface."""

    kind: str
    ambient_n: int
    g0: int = 0
    c1m_on_locus: int = 0
    shape: str | None = None

    def __post_init__(self):
        if self.kind not in ("point", "curve", "surface"):
            raise RulesError(f"unknown locus kind {self.kind!r}")
        if self.g0 < 0:
            raise RulesError(f"locus genus must be nonnegative, got {self.g0}")
        minimum_n = {"point": 2, "curve": 3, "surface": 4}[self.kind]
        if self.ambient_n < minimum_n:
            raise RulesError(
                f"{self.kind} centre needs ambient n >= {minimum_n}, got {self.ambient_n}"
            )
        if self.kind == "surface" and self.shape not in SURFACE_SHAPES:
            raise RulesError(f"surface shape must be one of {SURFACE_SHAPES}, got {self.shape!r}")

    @property
    def codim(self) -> int:
        return {"point": self.ambient_n, "curve": self.ambient_n - 1, "surface": self.ambient_n - 2}[self.kind]


@dataclass(frozen=True)
class RuleApplication:
    """One rule applied to one query: gates, rewrite, and verification."""

    rule: Rule
    source: InvariantQuery
    gates: tuple[tuple[str, bool], ...]
    verdict: Verdict
    target: InvariantQuery | None = None
    target_is_zero: bool = False
    value: Fraction | None = None
    source_result: EvalResult | None = None
    target_result: EvalResult | None = None
    index_budget: tuple[tuple[str, int], ...] = ()
    degree_delta: int | None = None
    params: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if (self.target is not None or self.target_is_zero) and not self.gates_passed:
            raise RulesError("target populated although a gate failed")

    @property
    def gates_passed(self) -> bool:
        return all(ok for _, ok in self.gates)

    def to_row(self) -> dict:
        def result_text(result: EvalResult | None) -> str:
            return result.describe() if result is not None else ""

        return {
            "rule": self.rule.value,
            "params": dict(self.params),
            "gates": {name: ("pass" if ok else "fail") for name, ok in self.gates},
            "source": self.source.describe(),
            "target": "0" if self.target_is_zero else (self.target.describe() if self.target else ""),
            "source_value": result_text(self.source_result),
            "target_value": "0" if self.target_is_zero else result_text(self.target_result),
            "verdict": self.verdict.value,
            "index_budget": dict(self.index_budget),
        }


def _gate_failed(rule: Rule, source: InvariantQuery, gates, params=()) -> RuleApplication:
    return RuleApplication(
        rule=rule, source=source, gates=tuple(gates), verdict=Verdict.GATE_FAILED, params=tuple(params)
    )


def _verdict(source_result: EvalResult, target_result: EvalResult) -> tuple[Verdict, Fraction | None]:
    source_value = source_result.numeric()
    target_value = target_result.numeric()
    if source_value is None or target_value is None:
        return Verdict.SYMBOLIC_ONLY, None
    if source_value == target_value:
        return Verdict.VERIFIED, source_value
    return Verdict.MISMATCH, None


def _check_degree_bookkeeping(
    source: InvariantQuery, target: InvariantQuery, consumed_points: int
) -> int:
    """required_degree_sum(source) - required_degree_sum(target) must be
    2n per consumed point insertion and zero otherwise."""
    n = source.manifold.n
    required_source = required_degree_sum(
        n, c1_eval(source.manifold, source.curve_class), source.genus, source.m
    )
    required_target = required_degree_sum(
        n, c1_eval(target.manifold, target.curve_class), target.genus, target.m
    )
    delta = required_source - required_target
    if delta != 2 * n * consumed_points:
        raise RulesError(
            f"degree bookkeeping failed: delta {delta}, expected {2 * n * consumed_points}"
        )
    return delta


def apply_lemma_1_1(query: InvariantQuery) -> EvalResult | None:
    """Exceptional-multiple vanishing: Zero when the class is a positive
    multiple of e and some insertion is a pullback; None when the gate is
    unmet."""
    if query.manifold.kind != "blowup-point":
        raise RulesError(f"rule expects a point blow-up, got {query.manifold.name}")
    if oracle.lemma_exceptional_multiple_applies(query):
        return EvalResult.zero("Lemma 1.1")
    return None


def _point_blowup_rewrite(query: InvariantQuery) -> tuple[Manifold, CurveClass]:
    if query.manifold.kind != "projective-space":
        raise RulesError(
            f"concrete point-blow-up rewrites start from projective space, got {query.manifold.name}"
        )
    target_manifold = blowup_point(query.manifold.n)
    return target_manifold, p_shriek(query.manifold, target_manifold, query.curve_class)


def _pulled_back(insertions: tuple[Insertion, ...]) -> tuple[Insertion, ...]:
    return tuple(pullback(ins) for ins in insertions)


def _evaluated_application(
    rule: Rule,
    source: InvariantQuery,
    target: InvariantQuery,
    gates,
    memo: MemoTable | None,
    consumed_points: int = 0,
    params=(),
) -> RuleApplication:
    delta = _check_degree_bookkeeping(source, target, consumed_points)
    source_result = evaluate(source, memo)
    target_result = evaluate(target, memo)
    verdict, value = _verdict(source_result, target_result)
    return RuleApplication(
        rule=rule,
        source=source,
        gates=tuple(gates),
        verdict=verdict,
        target=target,
        value=value,
        source_result=source_result,
        target_result=target_result,
        degree_delta=delta,
        params=tuple(params),
    )


def transform_1_2(query: InvariantQuery, memo: MemoTable | None = None) -> RuleApplication:
    """Rewrite value(A, alpha_i) as value(p!(A), p* alpha_i) on the point
    blow-up, gated on genus <= 1; Verified when both sides evaluate to the
    same exact value."""
    gates = [("genus<=1", query.genus <= 1)]
    if not all(ok for _, ok in gates):
        return _gate_failed(Rule.THM_1_2, query, gates)
    target_manifold, target_class = _point_blowup_rewrite(query)
    target = InvariantQuery(
        target_manifold, target_class, query.genus, _pulled_back(query.insertions)
    )
    return _evaluated_application(Rule.THM_1_2, query, target, gates, memo)


def transform_1_3(query: InvariantQuery, memo: MemoTable | None = None) -> RuleApplication:
    """Same rewrite as transform_1_2 with the genus gate replaced by the
    real-dimension gate dim_R <= 6; numeric verification only exists at
    genus 0, higher genus stays symbolic."""
    gates = [("dim_R<=6", 2 * query.manifold.n <= 6)]
    if not all(ok for _, ok in gates):
        return _gate_failed(Rule.THM_1_3, query, gates)
    target_manifold, target_class = _point_blowup_rewrite(query)
    target = InvariantQuery(
        target_manifold, target_class, query.genus, _pulled_back(query.insertions)
    )
    return _evaluated_application(Rule.THM_1_3, query, target, gates, memo)


def transform_1_4(query: InvariantQuery, memo: MemoTable | None = None) -> RuleApplication:
    """Trade the last point insertion for the exceptional curve: rewrite
    value(A, ..., [pt]) as value(p!(A) - e, pulled-back rest)."""
    point_positions = [i for i, ins in enumerate(query.insertions) if ins.kind == "point"]
    if not point_positions:
        raise NotApplicableError("transform_1_4 needs a point insertion to consume")
    gates = [("genus=0", query.genus == 0)]
    if not all(ok for _, ok in gates):
        return _gate_failed(Rule.THM_1_4, query, gates)
    target_manifold, pushed = _point_blowup_rewrite(query)
    target_class = pushed - target_manifold.curve(e=1)
    consumed = point_positions[-1]
    remaining = tuple(ins for i, ins in enumerate(query.insertions) if i != consumed)
    target = InvariantQuery(target_manifold, target_class, 0, _pulled_back(remaining))
    return _evaluated_application(
        Rule.THM_1_4, query, target, gates, memo, consumed_points=1
    )


def _normalize_for_curve_rule(query: InvariantQuery) -> tuple[Fraction, InvariantQuery]:
    """Divisor-reduce so every surviving insertion has degree > 2."""
    if query.curve_class.is_zero or query.genus != 0:
        return Fraction(1), query
    if any(oracle._divisor_class_of(query.manifold, ins) is not None for ins in query.insertions):
        return oracle.reduce_divisor(query)
    return Fraction(1), query


def _locus_budget(scenarios: tuple[Scenario, ...], n: int) -> tuple[tuple[str, int], ...]:
    # Representative plus-side budget at the minimal component l+ = nu = sum k = 1.
    return tuple((s.value, index_plus(s, n, 0, 1, 1, 1).value) for s in scenarios)


def _symbolic_locus_application(
    rule: Rule,
    query: InvariantQuery,
    normalized: InvariantQuery,
    locus: BlowupLocus,
    gates,
    scenarios: tuple[Scenario, ...],
    params,
) -> RuleApplication:
    target_manifold = blowup_along(query.manifold, locus.codim)
    target_class = CurveClass(
        target_manifold.curve_basis, normalized.curve_class.coeffs + (0,)
    )
    target = InvariantQuery(
        target_manifold, target_class, normalized.genus, _pulled_back(normalized.insertions)
    )
    delta = _check_degree_bookkeeping(normalized, target, 0)
    return RuleApplication(
        rule=rule,
        source=query,
        gates=tuple(gates),
        verdict=Verdict.SYMBOLIC_ONLY,
        target=target,
        index_budget=_locus_budget(scenarios, query.manifold.n),
        degree_delta=delta,
        params=tuple(params),
    )


def transform_1_5(
    query: InvariantQuery, locus: BlowupLocus, memo: MemoTable | None = None
) -> RuleApplication:
    """Rewrite value(A, alpha_i) as value(p!(A), p* alpha_i) for a blow-up
    along a curve, gated on the curve hypothesis; always a symbolic,
    index-audited rewrite (no numeric oracle covers these ambients)."""
    if locus.kind != "curve":
        raise NotApplicableError(f"transform_1_5 expects a curve centre, got {locus.kind}")
    if locus.ambient_n != query.manifold.n:
        raise RulesError(
            f"locus ambient n={locus.ambient_n} does not match {query.manifold.name}"
        )
    params = [("g0", str(locus.g0)), ("c1M_on_C", str(locus.c1m_on_locus))]
    scalar, normalized = _normalize_for_curve_rule(query)
    if scalar != 1:
        params.append(("divisor_scalar", str(scalar)))
    gates = [
        ("genus=0", query.genus == 0),
        (
            "curve-hypothesis",
            locus.g0 >= 1 or (locus.g0 == 0 and locus.c1m_on_locus >= 0),
        ),
        ("insertion-degrees>2", all(ins.real_degree > 2 for ins in normalized.insertions)),
    ]
    if not all(ok for _, ok in gates):
        return _gate_failed(Rule.THM_1_5, query, gates, params)
    scenarios = (
        Scenario.CURVE_CASE1 if locus.g0 >= 1 else Scenario.CURVE_CASE2_LOWER_BOUND,
        Scenario.BLOWUP_EXCEPTIONAL_SIDE,
    )
    return _symbolic_locus_application(
        Rule.THM_1_5, query, normalized, locus, gates, scenarios, params
    )


def transform_1_6(
    query: InvariantQuery, locus: BlowupLocus, memo: MemoTable | None = None
) -> RuleApplication:
    """Rewrite for a blow-up along an admitted surface; every insertion
    needs degree >= 2, and degree exactly 2 needs support away from the
    centre.  Always a symbolic, index-audited rewrite."""
    if locus.kind != "surface":
        raise NotApplicableError(f"transform_1_6 expects a surface centre, got {locus.kind}")
    if locus.ambient_n != query.manifold.n:
        raise RulesError(
            f"locus ambient n={locus.ambient_n} does not match {query.manifold.name}"
        )
    params = [("shape", locus.shape)]
    bad = None
    for position, ins in enumerate(query.insertions):
        if ins.real_degree < 2 or (ins.real_degree == 2 and not ins.away_from_locus):
            bad = position
            break
    gate_name = "insertion-degrees"
    if bad is not None:
        gate_name = f"insertion-degrees[{bad}:{query.insertions[bad].describe()}]"
    gates = [
        ("genus=0", query.genus == 0),
        ("surface-shape", locus.shape in SURFACE_SHAPES),
        (gate_name, bad is None),
    ]
    if not all(ok for _, ok in gates):
        return _gate_failed(Rule.THM_1_6, query, gates, params)
    return _symbolic_locus_application(
        Rule.THM_1_6, query, query, locus, gates, (Scenario.SURFACE,), params
    )


def corollary_exceptional_value(memo: MemoTable | None = None) -> RuleApplication:
    """The exceptional curve against PD(E) twice: value 1 on BlP2."""
    manifold = blowup_point(2)
    query = InvariantQuery(
        manifold, manifold.curve(e=1), 0, (oracle.exc_dual(manifold), oracle.exc_dual(manifold))
    )
    result = evaluate(query, memo)
    verified = result.is_exact and result.value == 1
    return RuleApplication(
        rule=Rule.COROLLARY_E,
        source=query,
        gates=(("n=2", True),),
        verdict=Verdict.VERIFIED if verified else Verdict.MISMATCH,
        value=result.value if verified else None,
        source_result=result,
        params=(("n", "2"),),
    )


# ---------------------------------------------------------------------------
# batch verification


@dataclass(frozen=True)
class ReportRow:
    application: RuleApplication
    expected: Verdict

    @property
    def ok(self) -> bool:
        return self.application.verdict == self.expected

    def to_dict(self) -> dict:
        row = self.application.to_row()
        row["expected"] = self.expected.value
        row["ok"] = self.ok
        return row


def _plane_query(d: int) -> InvariantQuery:
    plane = proj_space(2)
    count = 3 * d - 1
    return InvariantQuery(plane, plane.curve(l=d), 0, tuple(point(plane) for _ in range(count)))


def _lemma_query(r: int) -> InvariantQuery:
    # One pulled-back hyperplane and r-1 pulled-back points: dimension-exact
    # for the class r e, so the exceptional-multiple gate is what fires.
    plane = proj_space(2)
    blowup = blowup_point(2)
    insertions = (pullback(divisor_insertion(plane, H=1)),) + tuple(
        pullback(point(plane)) for _ in range(r - 1)
    )
    return InvariantQuery(blowup, blowup.curve(e=r), 0, insertions)


def _projective_query(n: int, d: int, m: int, degree_two_insertions: int = 0, away: bool = False):
    space = proj_space(n)
    insertions: list[Insertion] = []
    for _ in range(degree_two_insertions):
        ins = divisor_insertion(space, H=1)
        if away:
            ins = Insertion("divisor", 2, divisor=ins.divisor, away_from_locus=True)
        insertions.append(ins)
    insertions.extend(point(space) for _ in range(m))
    return InvariantQuery(space, space.curve(l=d), 0, tuple(insertions))


@dataclass(frozen=True)
class VerificationTask:
    """One independently runnable verification unit (one parameter value)."""

    rule: Rule
    params: tuple[tuple[str, str], ...]
    run: "Callable[[MemoTable | None], ReportRow]"


def _degree_task(rule: Rule, transform, d: int) -> VerificationTask:
    def run(memo: MemoTable | None) -> ReportRow:
        app = _with_params(transform(_plane_query(d), memo), (("d", str(d)),))
        return ReportRow(app, Verdict.VERIFIED)

    return VerificationTask(rule, (("d", str(d)),), run)


def _lemma_task(r: int) -> VerificationTask:
    def run(memo: MemoTable | None) -> ReportRow:
        query = _lemma_query(r)
        fired = apply_lemma_1_1(query)
        result = evaluate(query, memo)
        confirmed = (
            fired is not None and result.status == "zero" and result.reason == "Lemma 1.1"
        )
        app = RuleApplication(
            rule=Rule.LEMMA_1_1,
            source=query,
            gates=(("class=r*e", True), ("pullback-insertion", True)),
            verdict=Verdict.VERIFIED if confirmed else Verdict.MISMATCH,
            target_is_zero=confirmed,
            value=Fraction(0) if confirmed else None,
            source_result=result,
            params=(("r", str(r)),),
        )
        return ReportRow(app, Verdict.VERIFIED)

    return VerificationTask(Rule.LEMMA_1_1, (("r", str(r)),), run)


def _locus_task(rule: Rule, query: InvariantQuery, locus: BlowupLocus, expected: Verdict) -> VerificationTask:
    transform = transform_1_5 if rule is Rule.THM_1_5 else transform_1_6
    if rule is Rule.THM_1_5:
        params = (("g0", str(locus.g0)), ("c1M_on_C", str(locus.c1m_on_locus)))
    else:
        params = (("shape", str(locus.shape)), ("insertions", ",".join(i.describe() for i in query.insertions)))

    def run(memo: MemoTable | None) -> ReportRow:
        return ReportRow(transform(query, locus, memo), expected)

    return VerificationTask(rule, params, run)


def verification_tasks(
    rule: Rule,
    max_degree: int = 6,
    r_values: tuple[int, ...] = (1, 2, 3, 4, 5),
) -> list[VerificationTask]:
    """The standard parameter sweep for a rule, one task per parameter."""
    rule = Rule(rule)
    if max_degree < 1:
        raise RulesError(f"max_degree must be >= 1, got {max_degree}")
    if rule is Rule.THM_1_2:
        return [_degree_task(rule, transform_1_2, d) for d in range(1, max_degree + 1)]
    if rule is Rule.THM_1_3:
        return [_degree_task(rule, transform_1_3, d) for d in range(1, max_degree + 1)]
    if rule is Rule.THM_1_4:
        return [_degree_task(rule, transform_1_4, d) for d in range(1, max_degree + 1)]
    if rule is Rule.LEMMA_1_1:
        return [_lemma_task(r) for r in r_values]
    if rule is Rule.COROLLARY_E:
        def run(memo: MemoTable | None) -> ReportRow:
            return ReportRow(corollary_exceptional_value(memo), Verdict.VERIFIED)

        return [VerificationTask(rule, (("n", "2"),), run)]
    if rule is Rule.THM_1_5:
        base = _projective_query(3, 2, 4)
        cases = [
            (BlowupLocus("curve", 3, g0=1, c1m_on_locus=-2), Verdict.SYMBOLIC_ONLY),
            (BlowupLocus("curve", 3, g0=2, c1m_on_locus=5), Verdict.SYMBOLIC_ONLY),
            (BlowupLocus("curve", 3, g0=0, c1m_on_locus=0), Verdict.SYMBOLIC_ONLY),
            (BlowupLocus("curve", 3, g0=0, c1m_on_locus=4), Verdict.SYMBOLIC_ONLY),
            (BlowupLocus("curve", 3, g0=0, c1m_on_locus=-1), Verdict.GATE_FAILED),
        ]
        return [_locus_task(rule, base, locus, expected) for locus, expected in cases]
    if rule is Rule.THM_1_6:
        plain = _projective_query(4, 1, 2)
        flagged = _projective_query(4, 1, 2, degree_two_insertions=1, away=True)
        unflagged = _projective_query(4, 1, 2, degree_two_insertions=1, away=False)
        cases = [
            (plain, BlowupLocus("surface", 4, shape="K3"), Verdict.SYMBOLIC_ONLY),
            (plain, BlowupLocus("surface", 4, shape="torus"), Verdict.SYMBOLIC_ONLY),
            (plain, BlowupLocus("surface", 4, shape="product-positive-genus"), Verdict.SYMBOLIC_ONLY),
            (flagged, BlowupLocus("surface", 4, shape="K3"), Verdict.SYMBOLIC_ONLY),
            (unflagged, BlowupLocus("surface", 4, shape="K3"), Verdict.GATE_FAILED),
        ]
        return [_locus_task(rule, query, locus, expected) for query, locus, expected in cases]
    raise RulesError(f"no verification driver for {rule}")  # pragma: no cover


def verify_rule(
    rule: Rule,
    max_degree: int = 6,
    r_values: tuple[int, ...] = (1, 2, 3, 4, 5),
    memo: MemoTable | None = None,
) -> list[ReportRow]:
    """Run a rule over its standard parameter range and report each row."""
    return [task.run(memo) for task in verification_tasks(rule, max_degree, r_values)]


def _with_params(app: RuleApplication, params: tuple[tuple[str, str], ...]) -> RuleApplication:
    return RuleApplication(
        rule=app.rule,
        source=app.source,
        gates=app.gates,
        verdict=app.verdict,
        target=app.target,
        target_is_zero=app.target_is_zero,
        value=app.value,
        source_result=app.source_result,
        target_result=app.target_result,
        index_budget=app.index_budget,
        degree_delta=app.degree_delta,
        params=params + app.params,
    )


ALL_RULES = (
    Rule.LEMMA_1_1,
    Rule.THM_1_2,
    Rule.THM_1_3,
    Rule.THM_1_4,
    Rule.THM_1_5,
    Rule.THM_1_6,
    Rule.COROLLARY_E,
)


def all_verification_tasks(
    max_degree: int = 6,
    r_values: tuple[int, ...] = (1, 2, 3, 4, 5),
) -> list[VerificationTask]:
    tasks: list[VerificationTask] = []
    for rule in ALL_RULES:
        tasks.extend(verification_tasks(rule, max_degree=max_degree, r_values=r_values))
    return tasks


def verify_all(
    max_degree: int = 6,
    r_values: tuple[int, ...] = (1, 2, 3, 4, 5),
    memo: MemoTable | None = None,
) -> list[ReportRow]:
    return [task.run(memo) for task in all_verification_tasks(max_degree, r_values)]
