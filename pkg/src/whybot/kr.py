"""Core representation: sorted signatures, literals, axioms, states, histories.

Everything here is a plain value. Operations never mutate their inputs, so
states and axioms can be shared freely between the planner, the tracer and
the learner.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Tuple, Union

FLUENT = "fluent"
STATIC = "static"
ACTION = "action"

CAUSAL = "causal"
CONSTRAINT = "constraint"
IMPOSSIBLE = "impossible"
DEFAULT = "default"


class KrError(Exception):
    pass


class UndeclaredSort(KrError):
    """A variable's sort has no declaration in the signature."""


class SortError(KrError):
    """A constant or argument does not fit the declared sort."""


@dataclass(frozen=True)
class Variable:
    name: str
    sort: str

    def __repr__(self):
        return f"{self.name}:{self.sort}"


# A term is either a constant (plain string) or a Variable.
Term = Union[str, Variable]


@dataclass(frozen=True)
class Literal:
    """A possibly negated atom. ``kind`` separates fluents, statics and
    action occurrences; default negation never appears here, only on the
    surrounding body condition."""

    pred: str
    args: Tuple[Term, ...]
    positive: bool = True
    kind: str = FLUENT

    def negate(self) -> "Literal":
        return replace(self, positive=not self.positive)

    @property
    def is_ground(self) -> bool:
        return all(isinstance(a, str) for a in self.args)

    def key(self) -> Tuple:
        """Stable sort key (ground literals only)."""
        return (self.kind, self.pred, self.args, not self.positive)

    def __str__(self):
        inner = f"{self.pred}({', '.join(str(a) for a in self.args)})"
        return inner if self.positive else "-" + inner


@dataclass(frozen=True)
class Condition:
    """One body element: a literal, optionally under default negation."""

    lit: Literal
    naf: bool = False

    def __str__(self):
        return ("not " if self.naf else "") + str(self.lit)


@dataclass(frozen=True)
class Guard:
    """Inequality test between two terms, usable in axiom bodies."""

    a: Term
    b: Term

    def __str__(self):
        return f"{self.a} != {self.b}"


BodyItem = Union[Condition, Guard]


@dataclass(frozen=True)
class Axiom:
    """A causal law, state constraint, executability condition or initial
    default.

    causal      head: fluent effect; body holds the action occurrence plus
                optional same-step conditions on the source state.
    constraint  head and body literals refer to the same step.
    impossible  head: negated action occurrence; body literals block it.
    default     head: fluent assumed at step 0 unless contradicted.
    """

    id: str
    kind: str
    head: Literal
    body: Tuple[BodyItem, ...] = ()

    def conditions(self) -> Tuple[Condition, ...]:
        return tuple(b for b in self.body if isinstance(b, Condition))

    def guards(self) -> Tuple[Guard, ...]:
        return tuple(b for b in self.body if isinstance(b, Guard))

    def occurrence(self) -> Optional[Literal]:
        """The action occurrence inside a causal law's body, if any."""
        for c in self.conditions():
            if c.lit.kind == ACTION:
                return c.lit
        return None

    def state_conditions(self) -> Tuple[Condition, ...]:
        return tuple(c for c in self.conditions() if c.lit.kind != ACTION)

    def __str__(self):
        body = ", ".join(str(b) for b in self.body)
        if self.kind == CAUSAL:
            occ = self.occurrence()
            rest = ", ".join(
                str(b) for b in self.body
                if not (isinstance(b, Condition) and b.lit.kind == ACTION))
            s = f"{occ} causes {self.head}"
            return s + (f" if {rest}" if rest else "")
        if self.kind == IMPOSSIBLE:
            return f"impossible {self.head.negate()} if {body}"
        if self.kind == DEFAULT:
            return f"default {self.head}" + (f" if {body}" if body else "")
        return f"{self.head} if {body}"


@dataclass
class SortedSignature:
    """Declares sorts (with single-inheritance hierarchy), predicates and
    actions.

    sorts      sort name -> constants declared directly under it
    parents    child sort -> parent sort
    statics    predicate -> argument sorts
    fluents    predicate -> argument sorts
    inertial   fluent predicate -> whether values persist by default
    derived_tags  fluent predicate -> first-argument constants whose
               instances are derived each step instead of persisting
               (used for relation families like above/below)
    actions    action name -> argument sorts
    """

    sorts: Dict[str, Tuple[str, ...]]
    parents: Dict[str, str] = field(default_factory=dict)
    statics: Dict[str, Tuple[str, ...]] = field(default_factory=dict)
    fluents: Dict[str, Tuple[str, ...]] = field(default_factory=dict)
    inertial: Dict[str, bool] = field(default_factory=dict)
    derived_tags: Dict[str, Tuple[str, ...]] = field(default_factory=dict)
    actions: Dict[str, Tuple[str, ...]] = field(default_factory=dict)
    max_step: int = 12

    def __post_init__(self):
        for child, parent in self.parents.items():
            if child not in self.sorts or parent not in self.sorts:
                raise UndeclaredSort(f"hierarchy references unknown sort "
                                     f"{child!r} or {parent!r}")
        # A constant may belong to several sorts (an attribute vocabulary
        # and an object id can share a name); argument positions always
        # pick the intended reading.
        seen: Dict[str, Tuple[str, ...]] = {}
        for sort in self.sorts:
            for c in self.sorts[sort]:
                if sort not in seen.get(c, ()):
                    seen[c] = seen.get(c, ()) + (sort,)
        self._direct_sort = seen
        for pred, args in list(self.statics.items()) + list(self.fluents.items()):
            for s in args:
                if s not in self.sorts:
                    raise UndeclaredSort(f"{pred} argument sort {s!r} unknown")
        for name, args in self.actions.items():
            for s in args:
                if s not in self.sorts:
                    raise UndeclaredSort(f"action {name} argument sort {s!r} unknown")

    def constants_of(self, sort: str) -> Tuple[str, ...]:
        """All constants of a sort, including those of its subsorts."""
        if sort not in self.sorts:
            raise UndeclaredSort(f"unknown sort {sort!r}")
        out = list(self.sorts[sort])
        for child, parent in self.parents.items():
            if parent == sort:
                out.extend(self.constants_of(child))
        return tuple(sorted(set(out)))

    def sort_of(self, constant: str) -> str:
        """First declaring sort of a constant (declaration order)."""
        try:
            return self._direct_sort[constant][0]
        except KeyError:
            raise SortError(f"constant {constant!r} not declared in any sort")

    def fits(self, constant: str, sort: str) -> bool:
        for s in self._direct_sort.get(constant, ()):
            while s is not None:
                if s == sort:
                    return True
                s = self.parents.get(s)
        return False

    def schema(self, pred: str) -> Tuple[str, ...]:
        for table in (self.fluents, self.statics, self.actions):
            if pred in table:
                return table[pred]
        raise KrError(f"unknown predicate {pred!r}")

    def kind_of(self, pred: str) -> str:
        if pred in self.fluents:
            return FLUENT
        if pred in self.statics:
            return STATIC
        if pred in self.actions:
            return ACTION
        raise KrError(f"unknown predicate {pred!r}")

    def is_inertial(self, lit: Literal) -> bool:
        """Whether the literal persists between steps unless overridden.

        For a relation family with derived tags, the tagged relations are
        derived both ways and the untagged ones keep only their positive
        facts by inertia: negative relation literals are closure products
        (uniqueness, emptied hands) and are recomputed at every step."""
        if lit.kind != FLUENT:
            return False
        if not self.inertial.get(lit.pred, True):
            return False
        tags = self.derived_tags.get(lit.pred)
        if tags is not None:
            if not lit.positive:
                return False
            if lit.args and lit.args[0] in tags:
                return False
        return True

    def check_literal(self, lit: Literal) -> None:
        schema = self.schema(lit.pred)
        if len(schema) != len(lit.args):
            raise SortError(f"{lit.pred} expects {len(schema)} arguments, "
                            f"got {len(lit.args)}")
        for arg, sort in zip(lit.args, schema):
            if isinstance(arg, str):
                if not self.fits(arg, sort):
                    raise SortError(f"{arg!r} does not fit sort {sort!r} "
                                    f"in {lit}")


@dataclass(frozen=True)
class State:
    """A consistent, constraint-closed set of ground literals at one step."""

    step: int
    literals: frozenset

    def holds(self, lit: Literal) -> bool:
        return lit in self.literals

    def value(self, lit: Literal) -> Optional[bool]:
        """Three-valued membership: True, False (complement held) or None."""
        if lit in self.literals:
            return lit.positive
        if lit.negate() in self.literals:
            return not lit.positive
        return None

    def sorted_literals(self) -> List[Literal]:
        return sorted(self.literals, key=lambda l: l.key())


@dataclass(frozen=True)
class History:
    """Observations, action occurrences and the initial-state defaults."""

    observations: Tuple[Tuple[Literal, int], ...] = ()
    happened: Tuple[Tuple[Literal, int], ...] = ()
    defaults: Tuple[Axiom, ...] = ()
    retracted_defaults: frozenset = frozenset()

    def observed_at(self, step: int) -> List[Literal]:
        return [l for (l, s) in self.observations if s == step]

    def action_at(self, step: int) -> Optional[Literal]:
        for (a, s) in self.happened:
            if s == step:
                return a
        return None


@dataclass
class LearnedAxiom:
    """An induced axiom plus the bookkeeping the revision loop needs."""

    axiom: Axiom
    strength: float = 1.0
    support: int = 0
    cycles_seen: int = 0
    provenance: str = ""


Bindings = Dict[Variable, str]


def unify(pattern: Literal, ground: Literal,
          sig: Optional[SortedSignature] = None) -> Optional[Bindings]:
    """Match a possibly-variable literal against a ground one.

    Returns the variable bindings on success, None on mismatch. Repeated
    variables must bind to the same constant; when a signature is given,
    bindings must respect the variables' sorts.
    """
    if (pattern.pred != ground.pred or pattern.positive != ground.positive
            or pattern.kind != ground.kind
            or len(pattern.args) != len(ground.args)):
        return None
    bindings: Bindings = {}
    for p, g in zip(pattern.args, ground.args):
        if not isinstance(g, str):
            return None
        if isinstance(p, str):
            if p != g:
                return None
            continue
        if p in bindings:
            if bindings[p] != g:
                return None
            continue
        if sig is not None and not sig.fits(g, p.sort):
            return None
        bindings[p] = g
    return bindings


def substitute(lit: Literal, bindings: Bindings) -> Literal:
    args = tuple(bindings.get(a, a) if isinstance(a, Variable) else a
                 for a in lit.args)
    return replace(lit, args=args)


def substitute_item(item: BodyItem, bindings: Bindings) -> BodyItem:
    if isinstance(item, Guard):
        a = bindings.get(item.a, item.a) if isinstance(item.a, Variable) else item.a
        b = bindings.get(item.b, item.b) if isinstance(item.b, Variable) else item.b
        return Guard(a, b)
    return Condition(substitute(item.lit, bindings), item.naf)


def variables_of(axiom: Axiom) -> List[Variable]:
    """Variables in first-occurrence order across head then body."""
    seen: List[Variable] = []

    def visit(terms: Iterable[Term]):
        for t in terms:
            if isinstance(t, Variable) and t not in seen:
                seen.append(t)

    visit(axiom.head.args)
    for item in axiom.body:
        if isinstance(item, Guard):
            visit([item.a, item.b])
        else:
            visit(item.lit.args)
    return seen


def ground_axiom(axiom: Axiom, sig: SortedSignature) -> List[Axiom]:
    """All sort-respecting ground instances of an axiom.

    Instances whose inequality guards fail are dropped, and guards are
    stripped from the surviving instances. Raises UndeclaredSort when a
    variable mentions a sort the signature does not declare.
    """
    variables = variables_of(axiom)
    domains = []
    for v in variables:
        domains.append(sig.constants_of(v.sort))
    out: List[Axiom] = []
    for combo in itertools.product(*domains):
        bindings = dict(zip(variables, combo))
        items = tuple(substitute_item(it, bindings) for it in axiom.body)
        ok = True
        for it in items:
            if isinstance(it, Guard) and it.a == it.b:
                ok = False
                break
        if not ok:
            continue
        body = tuple(it for it in items if isinstance(it, Condition))
        out.append(Axiom(axiom.id, axiom.kind,
                         substitute(axiom.head, bindings), body))
    return out


def complement(lit: Literal) -> Literal:
    return lit.negate()


def canonical_form(axiom: Axiom) -> Tuple:
    """Hashable shape of an axiom, invariant under variable renaming and
    body reordering. Used for strict syntactic comparison of axioms."""
    mapping: Dict[Variable, str] = {}

    def canon_term(t: Term) -> str:
        if isinstance(t, str):
            return "c:" + t
        if t not in mapping:
            mapping[t] = f"V{len(mapping)}:{t.sort}"
        return mapping[t]

    def canon_lit(lit: Literal) -> Tuple:
        return (lit.pred, tuple(canon_term(a) for a in lit.args),
                lit.positive, lit.kind)

    # Name variables by first occurrence over head + body in a
    # renaming-independent order: sort body items by their variable-free
    # skeleton first, then assign names.
    def skeleton(item: BodyItem) -> Tuple:
        if isinstance(item, Guard):
            return ("guard",
                    item.a if isinstance(item.a, str) else "?",
                    item.b if isinstance(item.b, str) else "?")
        l = item.lit
        return (l.kind, l.pred,
                tuple(a if isinstance(a, str) else "?" for a in l.args),
                l.positive, item.naf)

    ordered = sorted(axiom.body, key=skeleton)
    head = canon_lit(axiom.head)
    body = []
    for item in ordered:
        if isinstance(item, Guard):
            body.append(("guard", canon_term(item.a), canon_term(item.b)))
        else:
            body.append(("cond", canon_lit(item.lit), item.naf))
    return (axiom.kind, head, tuple(sorted(body, key=repr)))


def subsumes(general: Axiom, specific: Axiom) -> bool:
    """Whether some variable substitution maps the general axiom's head onto
    the specific one's and its conditions into a subset of the specific
    body.  Inequality guards are bookkeeping and ignored here: the relaxed
    comparison of a learned axiom against its target tolerates both extra
    body literals and extra guards."""
    if general.kind != specific.kind:
        return False

    def match(pat: Literal, tgt: Literal, theta: Dict[Variable, Term]) \
            -> Optional[Dict[Variable, Term]]:
        if (pat.pred != tgt.pred or pat.positive != tgt.positive
                or pat.kind != tgt.kind or len(pat.args) != len(tgt.args)):
            return None
        out = dict(theta)
        for p, t in zip(pat.args, tgt.args):
            if isinstance(p, Variable):
                if p in out:
                    if out[p] != t:
                        return None
                else:
                    out[p] = t
            elif p != t:
                return None
        return out

    theta0 = match(general.head, specific.head, {})
    if theta0 is None:
        return False
    pats = list(general.conditions())
    tgts = list(specific.conditions())

    def go(i: int, theta: Dict[Variable, Term]) -> bool:
        if i == len(pats):
            return True
        pat = pats[i]
        for tgt in tgts:
            if tgt.naf != pat.naf:
                continue
            nxt = match(pat.lit, tgt.lit, theta)
            if nxt is not None and go(i + 1, nxt):
                return True
        return False

    return go(0, theta0)


def make_action(sig: SortedSignature, name: str, *args: str,
                positive: bool = True) -> Literal:
    lit = Literal(name, tuple(args), positive, ACTION)
    sig.check_literal(lit)
    return lit
