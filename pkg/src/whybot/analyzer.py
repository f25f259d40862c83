"""Explanatory question answering over a finished plan.

Four query kinds: describe the plan, justify an executed action by the
later actions it unblocked, explain why a hypothetical action was not
taken, and trace why a belief was held. Answers carry the relevant ground
literals and axiom ids alongside the rendered sentence, so they can be
scored against an oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import FrozenSet, List, Optional, Sequence, Set, Tuple

from .kr import (ACTION, CONSTRAINT, FLUENT, IMPOSSIBLE, STATIC, Axiom,
                 History, Literal, State)
from .parsing import (DESCRIBE, WHY_ACTION, WHY_BELIEF, WHY_NOT, Domain,
                      Query, VocabTable, action_phrase, attribute_clause,
                      head_noun, in_hand_clause, literal_clause, np,
                      observed_clause, happened_clause, render)
from .tracer import (AxiomJust, DefaultJust, Happened, Observed, Persisted,
                     ProofNode, TraceContext, Unsupported, UnknownBelief,
                     body_supported, groundings, trace)


class NotInPlan(Exception):
    def __init__(self, action: Literal, step: Optional[int] = None):
        super().__init__(f"{action} did not occur"
                         + (f" at step {step}" if step is not None else ""))
        self.action = action
        self.step = step


class ActionWasExecuted(Exception):
    def __init__(self, action: Literal, step: int):
        super().__init__(f"{action} was executed at step {step}")
        self.action = action
        self.step = step


@dataclass(frozen=True)
class Answer:
    kind: str
    literals: Tuple[Literal, ...]
    axioms_used: Tuple[str, ...]
    text: str


@dataclass
class Session:
    """A finished planning episode ready for questioning."""

    domain: Domain
    vocab: VocabTable
    states: Sequence[State]
    plan: Tuple[Literal, ...]
    history: History
    statics: FrozenSet[Literal]

    def __post_init__(self):
        self.ctx = TraceContext(sig=self.domain.signature, states=self.states,
                                actions=self.plan,
                                axioms=tuple(self.domain.axioms),
                                statics=frozenset(self.statics),
                                history=self.history)

    @property
    def sig(self):
        return self.domain.signature

    def moved_object(self, action: Literal) -> Optional[str]:
        for arg, sort in zip(action.args, self.sig.actions[action.pred]):
            if sort != "robot":
                return arg
        return None

    def object_args(self, action: Literal) -> Tuple[str, ...]:
        return tuple(a for a, s in zip(action.args, self.sig.actions[action.pred])
                     if s != "robot")


# ---------------------------------------------------------------------------
# plan description

def describe_plan(session: Session) -> Answer:
    if not session.plan:
        text = render(session.vocab, "describe_plan_empty", [])
        return Answer(DESCRIBE, (), (), text)
    clauses = ["I " + action_phrase(session.vocab, session.sig, a, "past")
               for a in session.plan]
    text = render(session.vocab, DESCRIBE, clauses)
    return Answer(DESCRIBE, tuple(session.plan), (), text)


# ---------------------------------------------------------------------------
# why was this action taken

def _blocking_groundings(session: Session, action: Literal, step: int):
    """(axiom id, fired body literals) for every executability condition of
    the action whose full body holds at the step. Default negation reports
    the complement literal; static conditions are kept."""
    out = []
    target = action.negate()
    for axiom in session.domain.axioms:
        if axiom.kind != IMPOSSIBLE:
            continue
        for head, body in groundings(axiom, target, session.ctx):
            if not body_supported(body, step, session.ctx):
                continue
            fired = tuple(c.lit.negate() if c.naf else c.lit
                          for c in body if c.lit.kind != ACTION)
            out.append((axiom.id, fired))
    out.sort(key=lambda b: (b[0], tuple(l.key() for l in b[1])))
    return out


def _destroyed(session: Session, lit: Literal, step: int) -> bool:
    """True when the literal held at step but no longer at step + 1."""
    if lit.kind == STATIC:
        return False
    if step + 1 >= len(session.states):
        return False
    return lit not in session.states[step + 1].literals


def why_action(session: Session, action: Literal, step: Optional[int],
               tense: str = "past") -> Answer:
    if step is None:
        try:
            step = session.plan.index(action)
        except ValueError:
            raise NotInPlan(action)
    if step >= len(session.plan) or session.plan[step] != action:
        raise NotInPlan(action, step)
    queried_obj = session.moved_object(action)
    pairs = []  # (later step, later action, axiom id, literal)
    for later in range(step + 1, len(session.plan)):
        later_action = session.plan[later]
        if session.moved_object(later_action) == queried_obj:
            continue
        for aid, fired in _blocking_groundings(session, later_action, step):
            for lit in fired:
                if lit in session.states[step].literals or lit.kind == STATIC:
                    if _destroyed(session, lit, step):
                        pairs.append((later, later_action, aid, lit))
    if not pairs:
        goal_np = _goal_phrase(session)
        text = render(session.vocab, "why_action_goal", [], np=goal_np)
        return Answer(WHY_ACTION, tuple(session.plan[step:step + 1]), (), text)
    clauses: List[str] = []
    literals: List[Literal] = []
    axioms: List[str] = []
    seen_steps: List[int] = []
    have = "I have to " if tense == "present" else "I had to "
    for later, later_action, aid, lit in pairs:
        if later not in seen_steps:
            seen_steps.append(later)
            clauses.append(have + action_phrase(session.vocab, session.sig,
                                                later_action, "infinitive"))
            literals.append(later_action)
        clauses.append(_why_literal_clause(session, lit, later_action, tense))
        literals.append(lit)
        axioms.append(aid)
    kind = "why_action_present" if tense == "present" else WHY_ACTION
    text = render(session.vocab, kind, clauses)
    return Answer(WHY_ACTION, tuple(literals), tuple(dict.fromkeys(axioms)), text)


def _why_literal_clause(session: Session, lit: Literal, later_action: Literal,
                        tense: str) -> str:
    if lit.pred == "obj_rel":
        _, a, b = lit.args
        pronoun = (a == session.moved_object(later_action)
                   and head_noun(session.vocab, a) != head_noun(session.vocab, b))
        return literal_clause(session.vocab, lit, tense, pronoun=pronoun)
    return literal_clause(session.vocab, lit, tense)


def _goal_phrase(session: Session) -> str:
    goals = session.domain.goal
    if not goals:
        return "the goal"
    g = goals[0]
    if g.pred == "obj_rel":
        rel, a, b = g.args
        from .parsing import _REL_PHRASES
        return (f"{np(session.vocab, a)} being {_REL_PHRASES.get(rel, rel)} "
                f"{np(session.vocab, b)}")
    if g.pred == "in_hand":
        return f"holding {np(session.vocab, g.args[1])}"
    return "the goal"


# ---------------------------------------------------------------------------
# why was this action not taken

def why_not_action(session: Session, action: Literal, step: Optional[int],
                   tense: str = "past") -> Answer:
    resolved = step
    if resolved is None:
        resolved = _matching_plan_step(session, action)
    if resolved is not None and resolved < len(session.plan) \
            and session.plan[resolved] == action:
        raise ActionWasExecuted(action, resolved)
    if resolved is None:
        return _goal_relevance_answer(session, action)
    if resolved >= len(session.states):
        resolved = len(session.states) - 1
    obj_args = set(session.object_args(action))
    blockers = []
    for aid, fired in _blocking_groundings(session, action, resolved):
        if not fired:
            continue  # unconditional impossibility carries nothing to cite
        kept = [l for l in fired if obj_args.intersection(l.args)]
        if kept:
            blockers.append((aid, kept))
    if not blockers:
        return _goal_relevance_answer(session, action)
    clauses: List[str] = []
    literals: List[Literal] = []
    axioms: List[str] = []
    for aid, kept in blockers:
        axioms.append(aid)
        for lit in kept:
            canon, hop = _canonical_relation(session, lit, resolved)
            if hop:
                axioms.append(hop)
            literals.append(canon)
            clauses.append(_blocker_clause(session, canon, resolved, tense))
    text = render(session.vocab, WHY_NOT, clauses)
    return Answer(WHY_NOT, tuple(literals), tuple(dict.fromkeys(axioms)), text)


def _matching_plan_step(session: Session, action: Literal) -> Optional[int]:
    for i, a in enumerate(session.plan):
        if a.pred == action.pred and \
                session.moved_object(a) == session.moved_object(action):
            return i
    return None


def _canonical_relation(session: Session, lit: Literal, step: int) \
        -> Tuple[Literal, Optional[str]]:
    """Swap a derived vertical relation for the base on-literal supporting
    it (one constraint hop in its proof tree)."""
    tags = session.sig.derived_tags.get(lit.pred, ())
    if not (lit.kind == FLUENT and lit.args and lit.args[0] in tags):
        return lit, None
    tree = trace(lit, step, session.ctx)
    for branch in tree.root.branches:
        just = branch.justification
        if isinstance(just, AxiomJust) and just.kind == CONSTRAINT \
                and len(branch.children) == 1:
            child = branch.children[0].belief
            if child.pred == lit.pred and child.args[0] == "on":
                return child, just.axiom_id
    return lit, None


def _blocker_clause(session: Session, lit: Literal, step: int,
                    tense: str) -> str:
    if lit.kind == STATIC:
        return attribute_clause(session.vocab, lit, tense)
    if lit.pred == "in_hand":
        return in_hand_clause(session.vocab, lit, tense)
    if session.ctx.observed(lit, step):
        return observed_clause(session.vocab, lit, step, "digit")
    return literal_clause(session.vocab, lit, tense, subject_form="bare")


def _goal_relevance_answer(session: Session, action: Literal) -> Answer:
    obj = session.moved_object(action)
    if obj is not None and obj not in _relevant_constants(session):
        text = render(session.vocab, "why_not_unrelated", [],
                      np=np(session.vocab, obj))
        return Answer(WHY_NOT, (), (), text)
    text = render(session.vocab, "why_not_unneeded", [],
                  phrase=action_phrase(session.vocab, session.sig, action,
                                       "infinitive"))
    return Answer(WHY_NOT, (), (), text)


def _relevant_constants(session: Session) -> Set[str]:
    """Constants touched by the episode: mentioned by an occurrence or the
    goal, or appearing in a literal whose truth changes along the
    trajectory."""
    out: Set[str] = set()
    for a in session.plan:
        out.update(session.object_args(a))
    for g in session.domain.goal:
        out.update(x for x in g.args if isinstance(x, str))
    for prev, cur in zip(session.states, session.states[1:]):
        for lit in prev.literals.symmetric_difference(cur.literals):
            if lit.kind == FLUENT:
                out.update(x for x in lit.args if isinstance(x, str))
    return out


# ---------------------------------------------------------------------------
# why was this believed

def why_belief(session: Session, belief: Literal, step: Optional[int],
               tense: str = "past") -> Answer:
    if step is None:
        step = _earliest_holding(session, belief)
    if step is None or not session.ctx.holds(belief, step):
        text = render(session.vocab, "why_belief_unknown", [])
        return Answer(WHY_BELIEF, (), (), text)
    tree = trace(belief, step, session.ctx)
    node = tree.root
    axioms: List[str] = []
    # follow inertia back to where the belief was established
    while isinstance(node.justification, Persisted):
        node = node.children[0]
    just = node.justification
    if isinstance(just, Observed):
        clause = observed_clause(session.vocab, node.belief, just.step, "word")
        text = render(session.vocab, WHY_BELIEF, [clause])
        return Answer(WHY_BELIEF, (node.belief,), (), text)
    if isinstance(just, DefaultJust):
        clause = "I assumed that " + literal_clause(session.vocab, node.belief,
                                                    tense)
        text = render(session.vocab, WHY_BELIEF, [clause])
        return Answer(WHY_BELIEF, (node.belief,), (just.axiom_id,), text)
    if isinstance(just, AxiomJust) and just.kind == "causal":
        occurrence = next(c for c in node.children if c.belief.kind == ACTION)
        clause = happened_clause(session.vocab, session.sig,
                                 occurrence.belief, node.step)
        text = render(session.vocab, WHY_BELIEF, [clause])
        return Answer(WHY_BELIEF, (occurrence.belief,), (just.axiom_id,), text)
    if isinstance(just, AxiomJust):
        axioms.append(just.axiom_id)
        # step through single defined-fluent links (derived labels) to the
        # facts underneath them
        while (len(node.children) == 1
               and node.children[0].belief.kind == FLUENT
               and session.sig.inertial.get(node.children[0].belief.pred, True)
               is False
               and isinstance(node.children[0].justification, AxiomJust)):
            node = node.children[0]
            axioms.append(node.justification.axiom_id)
        frontier = node.children
        clauses = [literal_clause(session.vocab, c.belief, tense)
                   for c in frontier]
        text = render(session.vocab, WHY_BELIEF, clauses)
        return Answer(WHY_BELIEF, tuple(c.belief for c in frontier),
                      tuple(dict.fromkeys(axioms)), text)
    text = render(session.vocab, "why_belief_unknown", [])
    return Answer(WHY_BELIEF, (), (), text)


def _earliest_holding(session: Session, belief: Literal) -> Optional[int]:
    for i in range(len(session.states)):
        if session.ctx.holds(belief, i):
            return i
    return None


# ---------------------------------------------------------------------------
# dispatch, oracle, transcripts

def answer_query(session: Session, query: Query) -> Answer:
    if query.kind == DESCRIBE:
        return describe_plan(session)
    if query.kind == WHY_ACTION:
        return why_action(session, query.action, query.step, query.tense)
    if query.kind == WHY_NOT:
        return why_not_action(session, query.action, query.step, query.tense)
    if query.kind == WHY_BELIEF:
        return why_belief(session, query.belief, query.step, query.tense)
    raise ValueError(f"unknown query kind {query.kind!r}")


def oracle_answer(oracle_session: Session, query: Query) -> Answer:
    """Reference answer: the same procedures over the complete axiom set."""
    return answer_query(oracle_session, query)


def transcript_lines(question: str, answer: Answer) -> List[str]:
    return [f"Q: {question}", f"A: {answer.text}"]


def build_session(base_domain: Domain, scene, vocab: VocabTable,
                  hidden_ids: Sequence[str] = (),
                  learned: Sequence[Axiom] = (),
                  actions: Optional[Sequence[Literal]] = None,
                  max_steps: Optional[int] = None) -> Session:
    """Plan (or adopt a given action sequence) in a scene and package the
    episode for questioning. hidden_ids removes axioms from the agent's
    theory; learned appends induced ones."""
    from . import reasoner, world

    dom = world.scene_domain(base_domain, scene)
    if hidden_ids:
        dom = dom.without(hidden_ids)
    if learned:
        dom = Domain(dom.signature, tuple(dom.axioms) + tuple(learned),
                     dom.defaults, dom.goal)
    statics = frozenset(world.scene_statics(scene))
    kb = reasoner.build_kb(dom, statics)
    obs = world.scene_observations(scene)
    s0, retracted, dropped = reasoner.initial_state(kb, obs)
    if actions is None:
        actions = reasoner.plan(kb, s0.literals, dom.goal, max_steps)[0]
    actions = tuple(actions)
    states = reasoner.trajectory(kb, s0, actions)
    kept = [l for l in obs if l not in dropped]
    history = History(observations=tuple((l, 0) for l in kept),
                      happened=tuple((a, i) for i, a in enumerate(actions)),
                      defaults=tuple(dom.defaults),
                      retracted_defaults=frozenset(retracted))
    return Session(domain=dom, vocab=vocab, states=states, plan=actions,
                   history=history, statics=statics)
