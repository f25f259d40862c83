"""Inconsistency-driven axiom learning.

The agent explores randomly generated scenes with a deliberately incomplete
knowledge base, predicts the outcome of each action, and compares the
prediction against (noisy) observations of the true world.  Mismatches become
lifted training samples; decision trees over literal-presence features turn
those samples into candidate executability conditions and causal laws, which
are validated on held-out data, merged to remove over-specification, and
promoted once they reappear over enough collection cycles.
"""

import math
import random
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Set, Tuple, Union

from .kr import (ACTION, CAUSAL, CONSTRAINT, FLUENT, IMPOSSIBLE, STATIC,
                 Axiom, Condition, Guard, Literal, LearnedAxiom, SortedSignature,
                 Term, Variable, canonical_form)
from .parsing import Domain
from . import reasoner
from . import world as sim

EXEC_EVIDENCE = "missing-executability"
CAUSAL_EVIDENCE = "missing-causal-law"

# Spatial relations the simulated sensors can report.
_OBSERVABLE_PREDS = ("obj_rel", "in_hand")


class WorldExhausted(Exception):
    """Scene generation could not produce the requested samples."""


class DegenerateDataset(Exception):
    """No features or a single label: tree induction collapses to one leaf."""


# ---------------------------------------------------------------------------
# configuration


@dataclass
class LearnConfig:
    """Knobs for sample collection, induction and the revision loop."""

    seed: int = 0
    cycles: int = 5
    samples_per_cycle: int = 100
    episode_len: int = 6
    n_objects: Tuple[int, int] = (5, 7)
    n_stacked: Tuple[int, int] = (2, 3)
    relation_error_rate: float = 0.15
    manipulation_failure_rate: float = 0.05
    obs_votes: int = 5
    purity_min: float = 0.95
    support_min: int = 5
    validation_min: float = 0.9
    holdout_frac: float = 0.3
    depth_max: int = 4
    cycles_required: int = 3
    decay: float = 0.9
    prune_threshold: float = 0.5
    max_trees: int = 25
    max_causal_labels: int = 3
    quiescence_window: int = 50


@dataclass(frozen=True)
class SimWorld:
    """Bundle handed to the collectors: base knowledge, what is hidden from
    the agent, and the noise profile of the simulated sensors/actuators."""

    domain: Domain
    hidden_ids: Tuple[str, ...] = ()
    relation_error_rate: float = 0.15
    manipulation_failure_rate: float = 0.05
    n_objects: Tuple[int, int] = (5, 7)
    n_stacked: Tuple[int, int] = (2, 3)

    def noise(self) -> sim.NoiseModel:
        return sim.NoiseModel(relation_error_rate=self.relation_error_rate,
                              manipulation_failure_rate=self.manipulation_failure_rate)


# ---------------------------------------------------------------------------
# lifting

def action_variable_map(action: Literal, sig: SortedSignature) -> Dict[str, Variable]:
    """Map the action's argument constants to role variables: the robot to R,
    every other argument to O1, O2, ... in position order."""
    out: Dict[str, Variable] = {}
    n = 0
    for arg, sort in zip(action.args, sig.actions[action.pred]):
        if not isinstance(arg, str) or arg in out:
            continue
        if sort == "robot":
            out[arg] = Variable("R", sort)
        else:
            n += 1
            out[arg] = Variable(f"O{n}", sort)
    return out


def lift_action(action: Literal, amap: Mapping[str, Variable]) -> Literal:
    return replace(action, args=tuple(amap.get(a, a) for a in action.args))


def lift_literal(lit: Literal, amap: Mapping[str, Variable],
                 sig: SortedSignature) -> Literal:
    """Lift one literal: action-argument constants become the shared role
    variables; any other object constant becomes V1, V2, ... numbered by
    first occurrence inside this literal.  Constants of attribute sorts and
    the table stay ground, so features like obj_size(V1, small) or
    obj_rel(on, O1, table) keep their distinguishing power."""
    fresh: Dict[str, Variable] = {}
    args: List[Term] = []
    for a in lit.args:
        if not isinstance(a, str):
            args.append(a)
        elif a in amap:
            args.append(amap[a])
        elif sig.fits(a, "object"):
            if a not in fresh:
                fresh[a] = Variable(f"V{len(fresh) + 1}", "object")
            args.append(fresh[a])
        else:
            args.append(a)
    return replace(lit, args=tuple(args))


def relevant_literals(state_literals: Iterable[Literal], action: Literal,
                      sig: SortedSignature) -> List[Tuple[Literal, Literal]]:
    """(lifted, ground) pairs for every positive fluent/static literal that
    shares at least one constant with the action's arguments."""
    amap = action_variable_map(action, sig)
    shared = set(amap)
    out = []
    for lit in state_literals:
        if not lit.positive or lit.kind == ACTION:
            continue
        if shared.intersection(a for a in lit.args if isinstance(a, str)):
            out.append((lift_literal(lit, amap, sig), lit))
    out.sort(key=lambda p: _fkey(p[0]))
    return out


def _fkey(lit: Literal) -> Tuple:
    """Total order over possibly-lifted literals."""
    return (lit.kind, lit.pred, tuple(str(a) for a in lit.args), not lit.positive)


def equality_features(action: Literal, sig: SortedSignature) -> List[Tuple[Literal, bool]]:
    """Pseudo-features testing whether a location-sort argument of the action
    is the table.  They let a tree separate 'putdown onto an occupied object'
    from 'putdown onto the (shared) table'."""
    amap = action_variable_map(action, sig)
    out = []
    for arg, sort in zip(action.args, sig.actions[action.pred]):
        if isinstance(arg, str) and arg in amap and sort != "robot":
            if sig.fits(sim.TABLE, sort):
                feat = Literal("eq", (amap[arg], sim.TABLE), True, "test")
                out.append((feat, arg == sim.TABLE))
    return out


# ---------------------------------------------------------------------------
# samples

@dataclass(frozen=True)
class TrainingSample:
    """One action attempt, lifted.  ``features`` holds the present lifted
    literals (plus true equality pseudo-features); ``witnesses`` remembers
    which ground literal produced each lifted feature so lifting can be
    checked by substitution round-trip."""

    action: Literal
    ground_action: Literal
    features: FrozenSet[Literal]
    witnesses: Tuple[Tuple[Literal, Literal], ...]
    inconsistent: bool
    effect_labels: FrozenSet[Literal]


def classify_discrepancy(expected: Iterable[Literal],
                         observed: Iterable[Literal]) -> List[Tuple[str, Literal]]:
    """Compare an expected state against an observation, both as literal sets.

    Expected-but-unobserved literals (without a contradicting observation)
    point at a missing executability condition: the action probably never
    ran.  Observed-but-unexpected literals point at a missing causal law and
    become its candidate effect.  Consistent pairs yield an empty list."""
    exp = {l for l in expected if l.pred in _OBSERVABLE_PREDS}
    obs = {l for l in observed if l.pred in _OBSERVABLE_PREDS}
    out: List[Tuple[str, Literal]] = []
    for lit in sorted(exp - obs, key=_fkey):
        if lit.negate() not in obs:
            out.append((EXEC_EVIDENCE, lit))
    for lit in sorted(obs - exp, key=_fkey):
        out.append((CAUSAL_EVIDENCE, lit))
    return out


def _predicted_observables(lits: Iterable[Literal]) -> Set[Literal]:
    return {l for l in lits if l.positive and l.pred in _OBSERVABLE_PREDS}


def _fused_observation(phys: sim.Physics, noise: sim.NoiseModel,
                       rng: random.Random, votes: int) -> List[Literal]:
    """Majority vote over repeated sensor sweeps; the paper's robot promotes
    high-probability observations to certainty, this is the desk equivalent."""
    if votes <= 1 or noise.relation_error_rate == 0:
        return sim.observe(phys, noise, rng)
    counts: Counter = Counter()
    for _ in range(votes):
        counts.update(sim.observe(phys, noise, rng))
    return sorted((l for l, c in counts.items() if c * 2 > votes),
                  key=lambda l: l.key())


def make_sample(action: Literal, belief: Iterable[Literal],
                statics: Iterable[Literal], predicted: Iterable[Literal],
                observed: Iterable[Literal], executed: bool,
                sig: SortedSignature) -> TrainingSample:
    """Lift one action attempt into a training sample.

    ``executed`` is the gripper's own success feedback: a failed attempt is
    executability evidence regardless of what the (noisy) relation sensors
    say; for an executed action every surviving expected/observed mismatch
    becomes a candidate causal-law effect."""
    amap = action_variable_map(action, sig)
    pairs = relevant_literals(list(belief) + list(statics), action, sig)
    feats = {l for l, _ in pairs}
    for feat, val in equality_features(action, sig):
        if val:
            feats.add(feat)
    labels: Set[Literal] = set()
    if executed:
        exp = _predicted_observables(predicted)
        obs = set(observed)
        obs.update(l.negate() for l in exp - obs)  # sensed absences
        for kind, lit in classify_discrepancy(exp, obs):
            if kind != CAUSAL_EVIDENCE:
                continue
            base = lit if lit.positive else lit.negate()
            if not sig.is_inertial(base):
                continue  # derived relations are closure products, not effects
            if not set(amap).intersection(a for a in lit.args if isinstance(a, str)):
                continue  # not attributable to this action
            labels.add(lift_literal(lit, amap, sig))
    return TrainingSample(action=lift_action(action, amap),
                          ground_action=action,
                          features=frozenset(feats),
                          witnesses=tuple(pairs),
                          inconsistent=not executed,
                          effect_labels=frozenset(labels))


# ---------------------------------------------------------------------------
# episode simulation

def _believe(kb: reasoner.GroundKB, observations: Iterable[Literal]) -> FrozenSet[Literal]:
    state, _, _ = reasoner.initial_state(kb, observations)
    return state.literals


def _explore_scene(world: SimWorld, scene: sim.Scene, cfg: LearnConfig,
                   rng: random.Random,
                   agent_axioms: Sequence[Axiom] = ()) -> List[TrainingSample]:
    """Run one episode of random exploration in a scene, returning the lifted
    samples.  The agent replaces its belief with the fused observation after
    every attempt, so feature noise does not accumulate."""
    dom = sim.scene_domain(world.domain.without(world.hidden_ids), scene)
    statics = sim.scene_statics(scene)
    kb = reasoner.build_kb(dom, statics, extra_axioms=tuple(agent_axioms))
    noise = world.noise()
    phys = sim.Physics.from_scene(scene)
    belief = _believe(kb, _fused_observation(phys, noise, rng, cfg.obs_votes))
    out: List[TrainingSample] = []
    for _ in range(cfg.episode_len):
        candidates = [a for a in kb.ground_actions
                      if not reasoner.legal(kb, belief, a)]
        if not candidates:
            break
        action = candidates[rng.randrange(len(candidates))]
        try:
            predicted = reasoner.successor(kb, belief, action)
        except reasoner.InconsistentError:
            # The KB cannot even build a successor: the direct effects clash
            # with the state constraints. Strong evidence for a missing
            # executability condition; the attempt is still made.
            predicted = belief
        phys, executed = sim.execute_true(phys, action, noise, rng)
        observation = _fused_observation(phys, noise, rng, cfg.obs_votes)
        out.append(make_sample(action, belief, statics, predicted,
                               observation, executed, dom.signature))
        belief = _believe(kb, observation)
    return out


def _collect_cycle(world: SimWorld, cfg: LearnConfig, rng: random.Random,
                   agent_axioms: Sequence[Axiom] = (),
                   n: Optional[int] = None) -> List[TrainingSample]:
    want = cfg.samples_per_cycle if n is None else n
    samples: List[TrainingSample] = []
    attempts = 0
    while len(samples) < want:
        attempts += 1
        if attempts > max(40, 6 * want):
            raise WorldExhausted(f"collected {len(samples)} of {want} samples")
        try:
            scene = sim.gen_scene(rng.randrange(1 << 30),
                                  rng.randint(*world.n_objects),
                                  rng.randint(*world.n_stacked))
        except sim.InvalidCounts:
            continue
        samples.extend(_explore_scene(world, scene, cfg, rng, agent_axioms))
    return samples[:want]


def collect_samples(action: Union[str, Literal], world: SimWorld, n: int,
                    mode: str, cfg: Optional[LearnConfig] = None,
                    seed: int = 0) -> List[TrainingSample]:
    """Samples for one action schema.  ``mode`` is 'exec' or 'causal': exec
    keeps every attempt (label = inconsistency flag), causal keeps only the
    attempts that actually executed (labels = unexpected lifted effects)."""
    cfg = cfg or LearnConfig()
    name = action if isinstance(action, str) else action.pred
    rng = random.Random(seed)
    out: List[TrainingSample] = []
    rounds = 0
    while len(out) < n:
        rounds += 1
        if rounds > 50:
            raise WorldExhausted(f"collected {len(out)} of {n} {mode} samples "
                                 f"for {name}")
        for s in _collect_cycle(world, cfg, rng, n=max(n, 40)):
            if s.ground_action.pred != name:
                continue
            if mode == "causal" and s.inconsistent:
                continue
            out.append(s)
    return out[:n]


# ---------------------------------------------------------------------------
# decision trees

@dataclass
class TreeLeaf:
    pos: int
    neg: int

    @property
    def support(self) -> int:
        return self.pos + self.neg

    @property
    def purity(self) -> float:
        return max(self.pos, self.neg) / self.support if self.support else 0.0


@dataclass
class TreeNode:
    feature: Literal
    present: "Tree"
    absent: "Tree"


Tree = Union[TreeLeaf, TreeNode]


@dataclass
class DecisionTree:
    """A per-action tree: the root records the lifted action, internal nodes
    test feature presence, leaves hold label counts."""

    action: Literal
    mode: str
    label: Optional[Literal]
    root: Tree
    size: int


def _entropy(pos: int, neg: int) -> float:
    total = pos + neg
    if not total or not pos or not neg:
        return 0.0
    p = pos / total
    return -(p * math.log2(p) + (1 - p) * math.log2(1 - p))


def _feature_preference(lit: Literal, sig: Optional[SortedSignature]) -> Tuple:
    """Iteration order for equal-gain features.  Closure makes on/above/below
    co-occur, so gains tie; prefer features whose arguments lead with an
    action role variable, and base relations over derived ones."""
    role_pos = len(lit.args)
    for i, a in enumerate(lit.args):
        if isinstance(a, Variable) and not a.name.startswith("V"):
            role_pos = i
            break
    derived = 0
    if sig is not None and lit.args:
        tags = sig.derived_tags.get(lit.pred, ())
        if lit.args[0] in tags:
            derived = 1
    return (role_pos, derived, _fkey(lit))


def _grow(rows: List[Tuple[FrozenSet[Literal], bool]], used: FrozenSet[Literal],
          depth: int, depth_max: int,
          sig: Optional[SortedSignature] = None) -> Tree:
    pos = sum(1 for _, y in rows if y)
    neg = len(rows) - pos
    if not rows or not pos or not neg or depth >= depth_max:
        return TreeLeaf(pos, neg)
    features = sorted({f for feats, _ in rows for f in feats if f not in used},
                      key=lambda f: _feature_preference(f, sig))
    base = _entropy(pos, neg)
    best, best_gain = None, 1e-9
    for f in features:
        p_pos = p_neg = a_pos = a_neg = 0
        for feats, y in rows:
            if f in feats:
                p_pos, p_neg = p_pos + y, p_neg + (not y)
            else:
                a_pos, a_neg = a_pos + y, a_neg + (not y)
        n_p, n_a = p_pos + p_neg, a_pos + a_neg
        if not n_p or not n_a:
            continue
        gain = base - (n_p * _entropy(p_pos, p_neg)
                       + n_a * _entropy(a_pos, a_neg)) / len(rows)
        if gain > best_gain:
            best, best_gain = f, gain
    if best is None:
        return TreeLeaf(pos, neg)
    there = [(feats, y) for feats, y in rows if best in feats]
    other = [(feats, y) for feats, y in rows if best not in feats]
    used = used | {best}
    return TreeNode(best, _grow(there, used, depth + 1, depth_max, sig),
                    _grow(other, used, depth + 1, depth_max, sig))


def induce_tree(samples: Sequence[TrainingSample], mode: str,
                label: Optional[Literal] = None,
                depth_max: int = 4,
                sig: Optional[SortedSignature] = None) -> DecisionTree:
    """Greedy information-gain tree over literal-presence features.  Exec
    mode predicts the inconsistency flag; causal mode predicts whether the
    given lifted effect was observed."""
    if not samples:
        raise DegenerateDataset("no samples")
    if mode == "exec":
        rows = [(s.features, s.inconsistent) for s in samples]
    else:
        rows = [(s.features, label in s.effect_labels) for s in samples]
    root = _grow(rows, frozenset(), 0, depth_max, sig)
    return DecisionTree(action=samples[0].action, mode=mode, label=label,
                        root=root, size=_tree_size(root))


def _tree_size(t: Tree) -> int:
    if isinstance(t, TreeLeaf):
        return 1
    return 1 + _tree_size(t.present) + _tree_size(t.absent)


# ---------------------------------------------------------------------------
# candidate extraction

@dataclass
class CandidateAxiom:
    axiom: Axiom
    purity: float
    support: int
    validation: float = 0.0
    label: Optional[Literal] = None


def extract_candidates(tree: DecisionTree, purity_min: float = 0.95,
                       support_min: int = 5) -> List[CandidateAxiom]:
    """Each root-to-leaf path whose leaf is (almost) purely the target class
    and sufficiently supported becomes a candidate axiom.  Positive feature
    tests form the body; equality pseudo-features turn into a substitution
    (taken branch) or an inequality guard (refused branch)."""
    out: List[CandidateAxiom] = []

    def walk(node: Tree, present: List[Literal], eq_true: List[Tuple[Variable, str]],
             eq_false: List[Tuple[Variable, str]]):
        if isinstance(node, TreeNode):
            f = node.feature
            if f.pred == "eq":
                var, const = f.args
                walk(node.present, present, eq_true + [(var, const)], eq_false)
                walk(node.absent, present, eq_true, eq_false + [(var, const)])
            else:
                walk(node.present, present + [f], eq_true, eq_false)
                walk(node.absent, present, eq_true, eq_false)
            return
        if not node.pos or node.support < support_min:
            return
        purity = node.pos / node.support
        if purity < purity_min:
            return
        subs = dict(eq_true)

        def ground(lit: Literal) -> Literal:
            return replace(lit, args=tuple(
                subs.get(a, a) if isinstance(a, Variable) else a
                for a in lit.args))

        conds = [Condition(ground(l)) for l in sorted(present, key=_fkey)]
        guards = [Guard(v, c) for v, c in sorted(eq_false, key=str)
                  if v not in subs]
        body: Tuple = tuple(conds) + tuple(guards)
        if tree.mode == "exec":
            axiom = Axiom("cand", IMPOSSIBLE, ground(tree.action).negate(), body)
        else:
            head = ground(tree.label)
            occ = Condition(ground(tree.action))
            axiom = Axiom("cand", CAUSAL, head, (occ,) + body)
        out.append(CandidateAxiom(axiom=axiom, purity=purity,
                                  support=node.pos, label=tree.label))

    walk(tree.root, [], [], [])
    out.sort(key=lambda c: (-c.support, str(c.axiom)))
    return out


# ---------------------------------------------------------------------------
# validation and merging

def _fires(candidate: CandidateAxiom, sample: TrainingSample,
           sig: SortedSignature) -> bool:
    """Whether the candidate's body is satisfied by the sample's features.
    Guards are evaluated against the sample's ground action arguments."""
    amap = action_variable_map(sample.ground_action, sig)
    binding = {v: c for c, v in amap.items()}
    for item in candidate.axiom.body:
        if isinstance(item, Guard):
            a = binding.get(item.a, item.a) if isinstance(item.a, Variable) else item.a
            b = binding.get(item.b, item.b) if isinstance(item.b, Variable) else item.b
            if isinstance(a, str) and isinstance(b, str) and a == b:
                return False
        else:
            if item.lit.kind == ACTION:
                continue
            if item.lit not in sample.features:
                return False
    return True


def _accuracy(candidate: CandidateAxiom, samples: Sequence[TrainingSample],
              mode: str, sig: SortedSignature) -> Tuple[float, int]:
    fired = correct = 0
    for s in samples:
        if s.ground_action.pred != candidate.axiom.head.pred and mode == "exec":
            continue
        if mode == "causal":
            occ = candidate.axiom.occurrence()
            if occ is None or s.ground_action.pred != occ.pred:
                continue
            if s.inconsistent:
                continue
        if not _fires(candidate, s, sig):
            continue
        fired += 1
        if mode == "exec":
            correct += s.inconsistent
        else:
            correct += candidate.label in s.effect_labels
    return (correct / fired if fired else 0.0), fired


def validate_and_merge(candidates: List[CandidateAxiom],
                       holdout: Sequence[TrainingSample],
                       sig: SortedSignature,
                       validation_min: float = 0.9) -> List[CandidateAxiom]:
    """Score candidates on held-out samples, drop the unreliable ones, then
    generalize: remove any body literal whose removal does not lower holdout
    accuracy, and drop candidates subsumed by a retained more-general one."""
    kept: List[CandidateAxiom] = []
    for cand in candidates:
        mode = "exec" if cand.axiom.kind == IMPOSSIBLE else "causal"
        acc, fired = _accuracy(cand, holdout, mode, sig)
        if fired < 2 or acc < validation_min:
            continue
        # Greedy drop-literal merge.
        axiom = cand.axiom
        improved = True
        while improved:
            improved = False
            for item in list(axiom.body):
                if isinstance(item, Condition) and item.lit.kind == ACTION:
                    continue
                trimmed = replace(axiom, body=tuple(
                    b for b in axiom.body if b is not item))
                probe = CandidateAxiom(trimmed, cand.purity, cand.support,
                                       label=cand.label)
                nacc, nfired = _accuracy(probe, holdout, mode, sig)
                if nfired >= fired and nacc >= acc:
                    axiom, acc, fired = trimmed, nacc, nfired
                    improved = True
                    break
        kept.append(CandidateAxiom(axiom, cand.purity, cand.support,
                                   validation=acc, label=cand.label))
    # Subsumption: same head, general body contained in specific body.
    kept.sort(key=lambda c: (len(c.axiom.body), str(c.axiom)))
    final: List[CandidateAxiom] = []
    for cand in kept:
        body = set(cand.axiom.body)
        if any(g.axiom.head == cand.axiom.head
               and set(g.axiom.body) <= body for g in final):
            continue
        final.append(cand)
    return final


def decay_strengths(axioms: List[LearnedAxiom], used: Set[str], *,
                    decay: float = 0.9,
                    prune_threshold: float = 0.5) -> List[LearnedAxiom]:
    """Exponential forgetting: axioms used or re-learned this cycle return to
    full strength, the rest fade and are pruned below the threshold."""
    out = []
    for la in axioms:
        if la.axiom.id in used:
            la = replace(la, strength=1.0)
        else:
            la = replace(la, strength=la.strength * decay)
        if la.strength >= prune_threshold:
            out.append(la)
    return out


# ---------------------------------------------------------------------------
# constraint learning from labeled scenes

def learn_constraints(labeled_scenes: Sequence[Tuple[Sequence[Literal],
                                                     Mapping[str, Mapping[str, bool]]]],
                      sig: SortedSignature,
                      cfg: Optional[LearnConfig] = None) -> List[LearnedAxiom]:
    """Induce state constraints from scenes labeled with per-object fluent
    values (e.g. stability).  The minority class becomes the rule head: being
    unstable has causes, being stable is the default."""
    cfg = cfg or LearnConfig()
    out: List[LearnedAxiom] = []
    preds = sorted({p for _, labels in labeled_scenes for p in labels})
    seq = 0
    for pred in preds:
        rows: List[Tuple[FrozenSet[Literal], bool]] = []
        row_objs: List[Tuple[Literal, bool]] = []
        values = []
        for lits, labels in labeled_scenes:
            for obj, val in sorted(labels.get(pred, {}).items()):
                probe = Literal(pred, (obj,), True, FLUENT)
                amap = {obj: Variable("O1", "object")}
                feats = {lift_literal(l, amap, sig)
                         for l in lits
                         if l.positive and obj in l.args}
                rows.append((frozenset(feats), val))
                values.append(val)
        if not rows or len(set(values)) < 2:
            continue
        minority = sum(values) * 2 <= len(values)
        flipped = [(f, y == minority) for f, y in rows]
        root = _grow(flipped, frozenset(), 0, cfg.depth_max)
        tree = DecisionTree(Literal(pred, (Variable("O1", "object"),),
                                    minority, FLUENT),
                            "constraint", None, root, _tree_size(root))
        for cand in _constraint_paths(tree, cfg):
            seq += 1
            axiom = replace(cand.axiom, id=f"lc{seq}")
            out.append(LearnedAxiom(axiom=axiom, strength=1.0,
                                    support=cand.support, cycles_seen=1,
                                    provenance="labeled-scenes"))
    return out


def _constraint_paths(tree: DecisionTree, cfg: LearnConfig) -> List[CandidateAxiom]:
    out: List[CandidateAxiom] = []

    def walk(node: Tree, present: List[Literal]):
        if isinstance(node, TreeNode):
            walk(node.present, present + [node.feature])
            walk(node.absent, present)
            return
        if not node.pos or node.support < cfg.support_min or not present:
            return
        if node.pos / node.support < cfg.purity_min:
            return
        body = tuple(Condition(l) for l in sorted(present, key=_fkey))
        out.append(CandidateAxiom(Axiom("cand", CONSTRAINT, tree.action, body),
                                  node.pos / node.support, node.pos))

    walk(tree.root, [])
    out.sort(key=lambda c: (-c.support, str(c.axiom)))
    return out


# ---------------------------------------------------------------------------
# the revision loop

@dataclass
class LearnResult:
    promoted: List[LearnedAxiom]
    pool: List[LearnedAxiom]
    trees_built: int
    cycles_run: int
    quiescent_cycle: Optional[int]
    samples_seen: int

    def axioms(self) -> List[Axiom]:
        return [la.axiom for la in self.promoted]


def run_learning(domain: Domain, hidden_ids: Iterable[str],
                 cfg: Optional[LearnConfig] = None) -> LearnResult:
    """The full loop: explore, lift, induce, extract, validate, merge, track
    across cycles, and promote what keeps being re-identified."""
    cfg = cfg or LearnConfig()
    world = SimWorld(domain=domain, hidden_ids=tuple(hidden_ids),
                     relation_error_rate=cfg.relation_error_rate,
                     manipulation_failure_rate=cfg.manipulation_failure_rate,
                     n_objects=cfg.n_objects, n_stacked=cfg.n_stacked)
    rng = random.Random(cfg.seed)
    sig = domain.signature
    ensemble: Dict[Tuple, LearnedAxiom] = {}
    trees_built = 0
    samples_seen = 0
    quiescent_cycle: Optional[int] = None
    cycles_run = 0
    for cycle in range(cfg.cycles):
        cycles_run = cycle + 1
        samples = _collect_cycle(world, cfg, rng)
        samples_seen += len(samples)
        order = list(range(len(samples)))
        rng.shuffle(order)
        cut = int(len(order) * (1 - cfg.holdout_frac))
        train = [samples[i] for i in order[:cut]]
        holdout = [samples[i] for i in order[cut:]]
        candidates: List[CandidateAxiom] = []
        for schema, group in _by_action(train):
            if trees_built >= cfg.max_trees:
                break
            tree = induce_tree(group, "exec", depth_max=cfg.depth_max)
            trees_built += 1
            candidates.extend(extract_candidates(tree, cfg.purity_min,
                                                 cfg.support_min))
            labels = Counter()
            for s in group:
                if not s.inconsistent:
                    labels.update(s.effect_labels)
            ranked = sorted(labels.items(), key=lambda kv: (-kv[1], _fkey(kv[0])))
            executed = [s for s in group if not s.inconsistent]
            for label, count in ranked[:cfg.max_causal_labels]:
                if trees_built >= cfg.max_trees:
                    break
                if count < cfg.support_min or not executed:
                    continue
                tree = induce_tree(executed, "causal", label,
                                   depth_max=cfg.depth_max)
                trees_built += 1
                candidates.extend(extract_candidates(tree, cfg.purity_min,
                                                     cfg.support_min))
        hold_by_action = dict(_by_action(holdout))
        surviving: List[CandidateAxiom] = []
        for schema, group in _group_candidates(candidates):
            surviving.extend(validate_and_merge(
                group, hold_by_action.get(schema, []), sig,
                cfg.validation_min))
        relearned: Set[Tuple] = set()
        for cand in surviving:
            key = canonical_form(replace(cand.axiom, id=""))
            relearned.add(key)
            if key in ensemble:
                prev = ensemble[key]
                ensemble[key] = replace(prev, strength=1.0,
                                        support=max(prev.support, cand.support),
                                        cycles_seen=prev.cycles_seen + 1)
            else:
                ensemble[key] = LearnedAxiom(axiom=cand.axiom, strength=1.0,
                                             support=cand.support, cycles_seen=1,
                                             provenance=f"cycle {cycle + 1}")
        for key in list(ensemble):
            if key in relearned:
                continue
            la = replace(ensemble[key], strength=ensemble[key].strength * cfg.decay)
            if la.strength < cfg.prune_threshold:
                del ensemble[key]
            else:
                ensemble[key] = la
        if cycle + 1 >= cfg.cycles_required:
            promoted = _promote(ensemble, cfg, sig)
            if promoted and _quiescent(world, cfg, rng,
                                       [la.axiom for la in promoted]):
                quiescent_cycle = cycle + 1
                break
        if trees_built >= cfg.max_trees:
            break
    promoted = _promote(ensemble, cfg, sig)
    pool = sorted(ensemble.values(), key=lambda la: str(la.axiom))
    return LearnResult(promoted=promoted, pool=pool, trees_built=trees_built,
                       cycles_run=cycles_run, quiescent_cycle=quiescent_cycle,
                       samples_seen=samples_seen)


def _by_action(samples: Sequence[TrainingSample]) -> List[Tuple[str, List[TrainingSample]]]:
    groups: Dict[str, List[TrainingSample]] = {}
    for s in samples:
        groups.setdefault(s.ground_action.pred, []).append(s)
    return sorted(groups.items())


def _group_candidates(candidates: Sequence[CandidateAxiom]) \
        -> List[Tuple[str, List[CandidateAxiom]]]:
    groups: Dict[str, List[CandidateAxiom]] = {}
    for c in candidates:
        if c.axiom.kind == IMPOSSIBLE:
            schema = c.axiom.head.pred
        else:
            occ = c.axiom.occurrence()
            schema = occ.pred if occ else ""
        groups.setdefault(schema, []).append(c)
    return sorted(groups.items())


def _promote(ensemble: Dict[Tuple, LearnedAxiom],
             cfg: LearnConfig, sig: SortedSignature) -> List[LearnedAxiom]:
    chosen = [la for la in ensemble.values()
              if la.cycles_seen >= cfg.cycles_required]
    chosen.sort(key=lambda la: (la.axiom.kind, str(la.axiom)))
    out = []
    for i, la in enumerate(chosen, start=1):
        out.append(replace(la, axiom=replace(la.axiom, id=f"l{i}")))
    return out


def _quiescent(world: SimWorld, cfg: LearnConfig, rng: random.Random,
               learned: Sequence[Axiom]) -> bool:
    """Noise-free probe: with the learned axioms active, does the agent run a
    window of actions without a single prediction/observation mismatch?"""
    probe_world = replace(world, relation_error_rate=0.0,
                          manipulation_failure_rate=0.0)
    probe_cfg = replace(cfg, relation_error_rate=0.0,
                        manipulation_failure_rate=0.0, obs_votes=1)
    try:
        samples = _collect_cycle(probe_world, probe_cfg, rng,
                                 agent_axioms=learned,
                                 n=cfg.quiescence_window)
    except WorldExhausted:
        return False
    for s in samples:
        if s.inconsistent or s.effect_labels:
            return False
    return True


# ---------------------------------------------------------------------------
# serialization

def serialize_learned(axioms: Sequence[LearnedAxiom]) -> str:
    from .parsing import serialize_axiom
    lines = []
    for la in axioms:
        note = f"learned strength={la.strength:g} support={la.support}"
        lines.append(serialize_axiom(la.axiom, annotation=note))
    return "\n".join(lines) + ("\n" if lines else "")


def load_learned(path: str, base_domain_text: str) -> List[Axiom]:
    """Parse a learned-axioms file against the base domain's signature by
    appending its statements to the base text."""
    from .parsing import parse_domain
    with open(path, "r", encoding="utf-8") as fh:
        extra = fh.read()
    base = parse_domain(base_domain_text)
    known = {a.id for a in base.axioms} | {d.id for d in base.defaults}
    merged = parse_domain(base_domain_text.rstrip() + "\n" + extra)
    return [a for a in merged.axioms if a.id not in known]
