"""Deterministic transition reasoning and planning over a ground theory.

The transition semantics: direct effects of matching causal laws, inertia
for inertial fluent literals, then constraint closure to a fixpoint.
Constraints override inertia — a persisted literal contradicted by a
derived one is withdrawn, while a contradiction rooted in direct effects
or observations is a hard inconsistency.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

from .kr import (ACTION, CAUSAL, CONSTRAINT, DEFAULT, IMPOSSIBLE, STATIC,
                 Axiom, Condition, Literal, SortedSignature, State,
                 complement, ground_axiom)
from .parsing import Domain

Lits = FrozenSet[Literal]


class InconsistentError(Exception):
    def __init__(self, lit: Literal, other: Literal, context: str = ""):
        super().__init__(f"contradictory literals {lit} / {other} {context}".strip())
        self.lit = lit
        self.other = other


class NotExecutableError(Exception):
    def __init__(self, action: Literal, blockers):
        ids = ", ".join(b[0] for b in blockers)
        super().__init__(f"{action} blocked by {ids}")
        self.action = action
        self.blockers = blockers


class NoPlanError(Exception):
    pass


class SearchExhausted(Exception):
    pass


# A ground rule instance: static conditions already checked and stripped.
# conds: tuple of (Literal, naf) evaluated against a literal set.
GroundRule = Tuple[str, Literal, Tuple[Tuple[Literal, bool], ...]]


@dataclass
class GroundKB:
    """Axioms grounded against one scene's signature and statics."""

    sig: SortedSignature
    statics: Lits
    causal_by_action: Dict[Literal, List[GroundRule]]
    imposs_by_action: Dict[Literal, List[GroundRule]]
    constraints: List[GroundRule]
    defaults: List[GroundRule]
    ground_actions: Tuple[Literal, ...]
    # constraint instances indexed by each positive body literal
    _index: Dict[Literal, List[GroundRule]] = field(default_factory=dict)
    _always: List[GroundRule] = field(default_factory=list)

    def __post_init__(self):
        for rule in self.constraints:
            positives = [lit for lit, naf in rule[2] if not naf]
            if positives:
                for lit in positives:
                    self._index.setdefault(lit, []).append(rule)
            else:
                self._always.append(rule)


def _static_value(lit: Literal, statics: Lits) -> bool:
    if lit.positive:
        return lit in statics
    return lit.negate() not in statics


def _compile(axiom: Axiom, sig: SortedSignature, statics: Lits) -> List[GroundRule]:
    """Ground one axiom, resolve static conditions, keep fluent conditions."""
    out = []
    for inst in ground_axiom(axiom, sig):
        conds: List[Tuple[Literal, bool]] = []
        action: Optional[Literal] = None
        ok = True
        for item in inst.body:
            lit, naf = item.lit, item.naf
            if lit.kind == ACTION:
                action = lit
                continue
            if lit.kind == STATIC:
                value = _static_value(lit, statics)
                if naf:
                    value = not value
                if not value:
                    ok = False
                    break
                continue
            conds.append((lit, naf))
        if not ok:
            continue
        out.append((inst.id, inst.head, tuple(conds), action))
    return out


def build_kb(domain: Domain, statics: Iterable[Literal],
             extra_axioms: Sequence[Axiom] = ()) -> GroundKB:
    sig = domain.signature
    statics = frozenset(statics)
    causal: Dict[Literal, List[GroundRule]] = {}
    imposs: Dict[Literal, List[GroundRule]] = {}
    constraints: List[GroundRule] = []
    defaults: List[GroundRule] = []
    for axiom in list(domain.axioms) + list(extra_axioms):
        for aid, head, conds, action in _compile(axiom, sig, statics):
            if axiom.kind == CAUSAL:
                causal.setdefault(action, []).append((aid, head, conds))
            elif axiom.kind == IMPOSSIBLE:
                imposs.setdefault(head.negate(), []).append((aid, head, conds))
            else:
                constraints.append((aid, head, conds))
    for axiom in domain.defaults:
        instances = [(aid, head, conds)
                     for aid, head, conds, _ in _compile(axiom, sig, statics)]
        instances.sort(key=lambda r: r[1].key())
        defaults.extend(instances)
    actions: List[Literal] = []
    for name, schema in sorted(sig.actions.items()):
        actions.extend(_ground_actions(sig, name, schema))
    return GroundKB(sig=sig, statics=statics, causal_by_action=causal,
                    imposs_by_action=imposs, constraints=constraints,
                    defaults=defaults, ground_actions=tuple(actions))


def _ground_actions(sig: SortedSignature, name: str,
                    schema: Tuple[str, ...]) -> List[Literal]:
    import itertools
    pools = [sig.constants_of(s) for s in schema]
    out = [Literal(name, args, True, ACTION)
           for args in itertools.product(*pools)]
    out.sort(key=lambda a: a.key())
    return out


def _holds(conds, cur: Set[Literal], naf_base: Set[Literal]) -> bool:
    for lit, naf in conds:
        if naf:
            if lit in naf_base:
                return False
        elif lit not in cur:
            return False
    return True


def _close(kb: GroundKB, cur: Set[Literal]) -> Optional[Tuple[Literal, Literal]]:
    """Constraint closure in place. Returns a clashing (derived, present)
    pair instead of completing, or None on success."""
    naf_base = set(cur)
    for aid, head, conds in kb._always:
        if _holds(conds, cur, naf_base) and head not in cur:
            if head.negate() in cur:
                return head, head.negate()
            cur.add(head)
    delta = list(cur)
    while delta:
        fresh: List[Literal] = []
        for lit in delta:
            for aid, head, conds in kb._index.get(lit, ()):
                if head in cur:
                    continue
                if _holds(conds, cur, naf_base):
                    if head.negate() in cur:
                        return head, head.negate()
                    cur.add(head)
                    fresh.append(head)
        delta = fresh
    return None


def closure(kb: GroundKB, base: Iterable[Literal]) -> Lits:
    cur = set(base)
    clash = _close(kb, cur)
    if clash:
        raise InconsistentError(*clash, context="in closure")
    return frozenset(cur)


def legal(kb: GroundKB, lits: Lits, action: Literal) -> List[Tuple[str, Tuple[Literal, ...]]]:
    """Blocking executability conditions for an action in a state. Each
    blocker is (axiom id, fired ground body literals); naf conditions are
    reported as the complement literal. Empty list means executable."""
    blockers = []
    for aid, head, conds in kb.imposs_by_action.get(action, ()):
        if _holds(conds, lits, lits):
            fired = tuple(lit.negate() if naf else lit for lit, naf in conds)
            blockers.append((aid, fired))
    blockers.sort(key=lambda b: b[0])
    return blockers


def successor(kb: GroundKB, lits: Lits, action: Literal) -> Lits:
    """Transition function. Assumes the action is executable; call legal()
    first when that is not established."""
    direct: Set[Literal] = set()
    for aid, eff, conds in kb.causal_by_action.get(action, ()):
        if _holds(conds, lits, lits):
            if eff.negate() in direct:
                raise InconsistentError(eff, eff.negate(),
                                        context=f"direct effects of {action}")
            direct.add(eff)
    frame = {l for l in lits
             if kb.sig.is_inertial(l) and l.negate() not in direct}
    banned: Set[Literal] = set()
    while True:
        cur = set(direct)
        cur.update(frame - banned)
        clash = _close(kb, cur)
        if clash is None:
            return frozenset(cur)
        derived, present = clash
        # constraints override inertia: retract a persisted literal, retry
        if present in frame and present not in direct and present not in banned:
            banned.add(present)
            continue
        if derived in frame and derived not in direct and derived not in banned:
            banned.add(derived)
            continue
        raise InconsistentError(derived, present,
                                context=f"after {action}")


def step(kb: GroundKB, state: State, action: Literal) -> State:
    blockers = legal(kb, state.literals, action)
    if blockers:
        raise NotExecutableError(action, blockers)
    return State(state.step + 1, successor(kb, state.literals, action))


def initial_state(kb: GroundKB, observations: Iterable[Literal]) \
        -> Tuple[State, Tuple[Tuple[str, Literal], ...], Tuple[Literal, ...]]:
    """Belief state at step 0: observations first (contradictory ones are
    dropped, noisy sensors), then initial defaults, weakest last — a default
    instance whose head clashes with what is already believed is retracted.

    Returns (state, retracted default instances, dropped observations)."""
    base: Set[Literal] = set()
    dropped: List[Literal] = []
    for obs in sorted(set(observations), key=lambda l: l.key()):
        trial = set(base)
        trial.add(obs)
        if obs.negate() in base or _close(kb, trial) is not None:
            dropped.append(obs)
            continue
        base.add(obs)
    retracted: List[Tuple[str, Literal]] = []
    for aid, head, conds in kb.defaults:
        if not _holds(conds, base, base):
            continue
        trial = set(base)
        trial.add(head)
        if head.negate() in base or head in base or _close(kb, trial) is not None:
            if head not in base:
                retracted.append((aid, head))
            continue
        base.add(head)
    closed = closure(kb, base)
    return State(0, closed), tuple(retracted), tuple(dropped)


def goal_holds(lits: Lits, goals: Sequence[Literal]) -> bool:
    return all(g in lits for g in goals)


def trajectory(kb: GroundKB, start: State, actions: Sequence[Literal]) -> List[State]:
    states = [start]
    for action in actions:
        states.append(step(kb, states[-1], action))
    return states


def core_key(kb: GroundKB, lits: Lits) -> FrozenSet[Literal]:
    return frozenset(l for l in lits if l.positive and kb.sig.is_inertial(l))


Plan = Tuple[Literal, ...]


def plan(kb: GroundKB, init: Lits, goals: Sequence[Literal],
         max_steps: Optional[int] = None, max_plans: int = 2000,
         node_cap: int = 200000) -> List[Plan]:
    """All minimal plans, lexicographically ordered. Breadth-first over
    deduplicated states; two prefixes reaching the same state at the same
    depth both survive, since either may extend to a distinct minimal plan.

    Raises NoPlanError when no plan exists within max_steps, and
    SearchExhausted past node_cap expansions."""
    horizon = kb.sig.max_step if max_steps is None else max_steps
    if goal_holds(init, goals):
        return [()]
    frontier: List[Tuple[Lits, Plan]] = [(init, ())]
    seen: Dict[FrozenSet[Literal], int] = {core_key(kb, init): 0}
    expanded = 0
    for depth in range(1, horizon + 1):
        next_frontier: List[Tuple[Lits, Plan]] = []
        found: List[Plan] = []
        for lits, prefix in frontier:
            expanded += 1
            if expanded > node_cap:
                raise SearchExhausted(f"planning exceeded {node_cap} expansions")
            for action in kb.ground_actions:
                if legal(kb, lits, action):
                    continue
                succ = successor(kb, lits, action)
                if goal_holds(succ, goals):
                    found.append(prefix + (action,))
                    if len(found) >= max_plans:
                        break
                    continue
                key = core_key(kb, succ)
                prior = seen.get(key)
                if prior is not None and prior < depth:
                    continue
                seen[key] = depth
                next_frontier.append((succ, prefix + (action,)))
            if len(found) >= max_plans:
                break
        if found:
            found.sort(key=lambda p: tuple(a.key() for a in p))
            return found
        frontier = next_frontier
        if not frontier:
            break
    raise NoPlanError(f"no plan within {horizon} steps")


def count_plans(kb: GroundKB, init: Lits, goals: Sequence[Literal],
                horizon: int, state_cap: int = 20000) -> Tuple[int, int]:
    """Number of action sequences of length ≤ horizon whose final state
    satisfies the goal, and the number of state expansions performed.
    Counting is exact up to state_cap distinct states per level; beyond
    that, levels are truncated deterministically."""
    level: Dict[FrozenSet[Literal], Tuple[Lits, int]] = {
        core_key(kb, init): (init, 1)}
    total = 1 if goal_holds(init, goals) else 0
    expansions = 0
    for _ in range(horizon):
        nxt: Dict[FrozenSet[Literal], Tuple[Lits, int]] = {}
        for key in sorted(level, key=lambda k: tuple(sorted(l.key() for l in k))):
            lits, count = level[key]
            expansions += 1
            for action in kb.ground_actions:
                if legal(kb, lits, action):
                    continue
                succ = successor(kb, lits, action)
                if goal_holds(succ, goals):
                    total += count
                skey = core_key(kb, succ)
                if skey in nxt:
                    slits, scount = nxt[skey]
                    nxt[skey] = (slits, scount + count)
                elif len(nxt) < state_cap:
                    nxt[skey] = (succ, count)
        level = nxt
        if not level:
            break
    return total, expansions
