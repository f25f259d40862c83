"""Belief tracing: proof trees over a belief trajectory.

Each node records one belief at one step together with every way the
trajectory supports it: an observation, an executed action, an initial
default, an axiom whose grounded body held at the right step, or plain
inertia. Maximal inertia chains collapse into a single edge back to the
step where the belief was first established.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

from .kr import (ACTION, CAUSAL, CONSTRAINT, DEFAULT, FLUENT, IMPOSSIBLE,
                 STATIC, Axiom, Condition, Guard, History, Literal,
                 SortedSignature, State, substitute, substitute_item, unify,
                 variables_of)


class StepOutOfRange(Exception):
    pass


class UnknownBelief(Exception):
    def __init__(self, belief: Literal, step: Optional[int] = None):
        where = f" at step {step}" if step is not None else ""
        super().__init__(f"no belief {belief}{where}")
        self.belief = belief
        self.step = step


# --------------------------------------------------------------------------
# justifications

@dataclass(frozen=True)
class Observed:
    step: int

    tier = 0

    def label(self) -> str:
        return f"observed@{self.step}"


@dataclass(frozen=True)
class Happened:
    step: int

    tier = 1

    def label(self) -> str:
        return f"happened@{self.step}"


@dataclass(frozen=True)
class DefaultJust:
    axiom_id: str

    tier = 2

    def label(self) -> str:
        return f"default {self.axiom_id}"


@dataclass(frozen=True)
class AxiomJust:
    axiom_id: str
    kind: str  # causal | constraint | impossible

    @property
    def tier(self) -> int:
        return 3 if self.kind == CAUSAL else 4

    def label(self) -> str:
        return self.axiom_id


@dataclass(frozen=True)
class Persisted:
    from_step: int

    tier = 5

    def label(self) -> str:
        return f"persisted@{self.from_step}"


@dataclass(frozen=True)
class Unsupported:
    tier = 6

    def label(self) -> str:
        return "unsupported"


Justification = object


@dataclass(frozen=True)
class Branch:
    justification: Justification
    children: Tuple["ProofNode", ...] = ()


@dataclass(frozen=True)
class ProofNode:
    belief: Literal
    step: int
    branches: Tuple[Branch, ...]

    @property
    def justification(self) -> Justification:
        """The preferred (first) justification."""
        return self.branches[0].justification

    @property
    def children(self) -> Tuple["ProofNode", ...]:
        return self.branches[0].children

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass(frozen=True)
class ProofTree:
    root: ProofNode


# --------------------------------------------------------------------------
# trace context

@dataclass
class TraceContext:
    """Everything a trace consults: the belief trajectory, the executed
    occurrences, the axiom set, the scene statics and the history."""

    sig: SortedSignature
    states: Sequence[State]
    actions: Sequence[Literal]
    axioms: Sequence[Axiom]
    statics: FrozenSet[Literal]
    history: History

    def state(self, step: int) -> State:
        if step < 0 or step >= len(self.states):
            raise StepOutOfRange(f"step {step} outside 0..{len(self.states) - 1}")
        return self.states[step]

    def holds(self, lit: Literal, step: int) -> bool:
        if lit.kind == STATIC:
            return lit in self.statics if lit.positive \
                else lit.negate() not in self.statics
        if lit.kind == ACTION:
            if step >= len(self.actions):
                return False
            return (self.actions[step] == lit) == lit.positive
        return lit in self.state(step).literals

    def observed(self, lit: Literal, step: int) -> bool:
        return (lit, step) in set(self.history.observations)


def groundings(axiom: Axiom, belief: Literal,
                ctx: TraceContext) -> List[Tuple[Literal, Tuple]]:
    """All full groundings of an axiom whose head matches the belief.
    Returns (head, ground body items) pairs; guards already satisfied."""
    import itertools
    base = unify(axiom.head, belief, ctx.sig)
    if base is None:
        return []
    free = [v for v in variables_of(axiom) if v not in base]
    out = []
    pools = [ctx.sig.constants_of(v.sort) for v in free]
    for combo in itertools.product(*pools):
        bindings = dict(base)
        bindings.update(zip(free, combo))
        items = tuple(substitute_item(it, bindings) for it in axiom.body)
        if any(isinstance(it, Guard) and it.a == it.b for it in items):
            continue
        body = tuple(it for it in items if isinstance(it, Condition))
        out.append((substitute(axiom.head, bindings), body))
    return out


def body_supported(body: Iterable[Condition], step: int,
                    ctx: TraceContext) -> bool:
    for cond in body:
        if cond.lit.kind == ACTION:
            continue
        if cond.naf:
            if cond.lit.kind == STATIC:
                if ctx.holds(cond.lit, step):
                    return False
            elif cond.lit in ctx.state(step).literals:
                return False
        elif not ctx.holds(cond.lit, step):
            return False
    return True


def _branch_key(branch: Branch) -> Tuple:
    j = branch.justification
    aid = getattr(j, "axiom_id", "")
    return (j.tier, aid, tuple(c.belief.key() for c in branch.children))


def trace(belief: Literal, step: int, ctx: TraceContext) -> ProofTree:
    """Proof tree for a ground belief at a step of the trajectory.

    A belief the trajectory does not contain yields a single Unsupported
    node. Repeated (belief, step) pairs along a path are cut.
    """
    ctx.state(step)  # StepOutOfRange before any work
    return ProofTree(_node(belief, step, ctx, frozenset(), True))


def _node(belief: Literal, step: int, ctx: TraceContext,
          path: FrozenSet[Tuple[Literal, int]], allow_persist: bool) -> ProofNode:
    key = (belief, step)
    if key in path or not ctx.holds(belief, step):
        return ProofNode(belief, step, (Branch(Unsupported()),))
    path = path | {key}
    branches: List[Branch] = []

    if belief.kind == STATIC:
        return ProofNode(belief, step, (Branch(Observed(0)),))

    if belief.kind == ACTION:
        if belief.positive:
            return ProofNode(belief, step, (Branch(Happened(step)),))
        for axiom in ctx.axioms:
            if axiom.kind != IMPOSSIBLE:
                continue
            for head, body in groundings(axiom, belief, ctx):
                if not body_supported(body, step, ctx):
                    continue
                children = _children(body, step, ctx, path)
                branches.append(Branch(AxiomJust(axiom.id, IMPOSSIBLE), children))
        if not branches:
            branches.append(Branch(Unsupported()))
        branches.sort(key=_branch_key)
        return ProofNode(belief, step, tuple(branches))

    if ctx.observed(belief, step):
        branches.append(Branch(Observed(step)))

    if step == 0:
        for axiom in ctx.history.defaults:
            for head, body in groundings(axiom, belief, ctx):
                if body_supported(body, 0, ctx):
                    branches.append(Branch(DefaultJust(axiom.id)))

    if step > 0:
        occurred = ctx.actions[step - 1] if step - 1 < len(ctx.actions) else None
        for axiom in ctx.axioms:
            if axiom.kind != CAUSAL:
                continue
            for head, body in groundings(axiom, belief, ctx):
                occ = next(c.lit for c in body if c.lit.kind == ACTION)
                if occ != occurred:
                    continue
                if not body_supported(body, step - 1, ctx):
                    continue
                children = (_node(occ, step - 1, ctx, path, True),) + \
                    _children(body, step - 1, ctx, path)
                branches.append(Branch(AxiomJust(axiom.id, CAUSAL), children))

    for axiom in ctx.axioms:
        if axiom.kind != CONSTRAINT:
            continue
        for head, body in groundings(axiom, belief, ctx):
            if not body_supported(body, step, ctx):
                continue
            children = _children(body, step, ctx, path)
            branches.append(Branch(AxiomJust(axiom.id, CONSTRAINT), children))

    if (allow_persist and step > 0 and ctx.sig.is_inertial(belief)
            and belief in ctx.state(step - 1).literals):
        origin = step - 1
        while origin > 0 and belief in ctx.state(origin - 1).literals:
            origin -= 1
        child = _node(belief, origin, ctx, path, False)
        branches.append(Branch(Persisted(origin), (child,)))

    if not branches:
        branches.append(Branch(Unsupported()))
    branches.sort(key=_branch_key)
    return ProofNode(belief, step, tuple(branches))


def _children(body: Iterable[Condition], step: int, ctx: TraceContext,
              path: FrozenSet[Tuple[Literal, int]]) -> Tuple[ProofNode, ...]:
    """Child nodes for the positive conditions of a grounded body. Default
    negation contributes support checks but no child beliefs; the action
    occurrence is handled by the caller."""
    kids = []
    for cond in body:
        if cond.naf or cond.lit.kind == ACTION:
            continue
        kids.append(_node(cond.lit, step, ctx, path, True))
    return tuple(kids)


# --------------------------------------------------------------------------
# paths and serialization

PathEntry = Tuple[Literal, int, str]


def paths(tree: ProofTree) -> List[List[PathEntry]]:
    """Root-to-leaf chains across every branch, each entry carrying the
    belief, its step and the justification label, ordered by (depth,
    justification labels, literal keys)."""
    out: List[List[PathEntry]] = []

    def walk(node: ProofNode, prefix: List[PathEntry]):
        for branch in node.branches:
            entry = (node.belief, node.step, branch.justification.label())
            if branch.children:
                for child in branch.children:
                    walk(child, prefix + [entry])
            else:
                out.append(prefix + [entry])

    walk(tree.root, [])
    out.sort(key=lambda p: (len(p), tuple(e[2] for e in p),
                            tuple(e[0].key() for e in p)))
    return out


def to_text(tree: ProofTree) -> str:
    lines: List[str] = []

    def walk(node: ProofNode, depth: int):
        pad = "  " * depth
        for i, branch in enumerate(node.branches):
            marker = "" if len(node.branches) == 1 else f" [alt {i + 1}]"
            lines.append(f"{pad}{node.belief}@{node.step} "
                         f"<- {branch.justification.label()}{marker}")
            for child in branch.children:
                walk(child, depth + 1)

    walk(tree.root, 0)
    return "\n".join(lines)


def to_graph(tree: ProofTree) -> str:
    """Node-and-edge text dump: one `node` line per belief, one `edge` line
    per support link, suitable for external graph viewers."""
    nodes: Dict[Tuple[Literal, int], str] = {}
    lines: List[str] = []

    def name(node: ProofNode) -> str:
        key = (node.belief, node.step)
        if key not in nodes:
            nodes[key] = f"n{len(nodes)}"
            lines.append(f"node {nodes[key]} \"{node.belief}@{node.step}\"")
        return nodes[key]

    def walk(node: ProofNode):
        src = name(node)
        for branch in node.branches:
            for child in branch.children:
                dst = name(child)
                lines.append(f"edge {src} -> {dst} "
                             f"[{branch.justification.label()}]")
                walk(child)

    walk(tree.root)
    return "\n".join(lines)


def first_path(tree: ProofTree) -> List[PathEntry]:
    """The path the preferred branches select at every node."""
    out: List[PathEntry] = []
    node = tree.root
    while True:
        out.append((node.belief, node.step, node.branches[0].justification.label()))
        kids = node.branches[0].children
        if not kids:
            return out
        node = kids[0]
