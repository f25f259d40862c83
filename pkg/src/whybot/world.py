"""Ground-truth tabletop simulator.

Stands in for the physical robot, cameras, and manipulation stack: scene
generation, true-physics action execution under the complete axiom set,
noisy observation, and stability/occlusion labeling. The physics here is
implemented procedurally and independently of the reasoner so the two can
be cross-checked.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Sequence, Set, Tuple

from .kr import FLUENT, STATIC, Literal, SortedSignature
from .parsing import Domain, parse_literal

TABLE = "table"
PLANAR = ("left", "right", "front", "behind")


class InvalidCounts(Exception):
    pass


@dataclass(frozen=True)
class ObjectSpec:
    id: str
    shape: str
    size: str
    surface: str
    color: str


@dataclass
class NoiseModel:
    """Error rates for perception, manipulation, and labeling."""

    relation_error_rate: float = 0.0
    manipulation_failure_rate: float = 0.0
    constraint_label_error: float = 0.0

    def __post_init__(self):
        for name in ("relation_error_rate", "manipulation_failure_rate",
                     "constraint_label_error"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be within [0, 1], got {v}")


@dataclass
class Scene:
    name: str
    seed: int
    objects: Tuple[ObjectSpec, ...]
    relations: Tuple[Tuple[str, str, str], ...]
    in_hand: Optional[str] = None
    goal: Tuple[str, ...] = ()

    def object_ids(self) -> Tuple[str, ...]:
        return tuple(o.id for o in self.objects)

    def spec(self, oid: str) -> ObjectSpec:
        for o in self.objects:
            if o.id == oid:
                return o
        raise KeyError(oid)


def load_scene(path: str) -> Scene:
    with open(path) as fh:
        data = json.load(fh)
    return scene_from_dict(data)


def scene_from_dict(data: dict) -> Scene:
    objects = tuple(ObjectSpec(o["id"], o["shape"], o["size"], o["surface"],
                               o["color"]) for o in data["objects"])
    relations = tuple((r[0], r[1], r[2]) for r in data.get("relations", ()))
    return Scene(name=data.get("name", "scene"), seed=data.get("seed", 0),
                 objects=objects, relations=relations,
                 in_hand=data.get("in_hand"), goal=tuple(data.get("goal", ())))


def save_scene(scene: Scene, path: str) -> None:
    data = {
        "name": scene.name,
        "seed": scene.seed,
        "objects": [vars(o) for o in scene.objects],
        "relations": [list(r) for r in scene.relations],
        "in_hand": scene.in_hand,
        "goal": list(scene.goal),
    }
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2)
        fh.write("\n")


def scene_signature(base: SortedSignature, scene: Scene) -> SortedSignature:
    """Extend the object sort with the scene's constants."""
    sorts = dict(base.sorts)
    sorts["object"] = tuple(scene.object_ids())
    return SortedSignature(sorts=sorts, parents=dict(base.parents),
                           statics=dict(base.statics),
                           fluents=dict(base.fluents),
                           inertial=dict(base.inertial),
                           derived_tags=dict(base.derived_tags),
                           actions=dict(base.actions), max_step=base.max_step)


def scene_domain(base: Domain, scene: Scene) -> Domain:
    sig = scene_signature(base.signature, scene)
    goal = tuple(parse_literal(g, sig) for g in scene.goal)
    return Domain(sig, base.axioms, base.defaults, goal)


def scene_statics(scene: Scene) -> List[Literal]:
    out = []
    for o in scene.objects:
        out.append(Literal("obj_size", (o.id, o.size), True, STATIC))
        out.append(Literal("obj_surface", (o.id, o.surface), True, STATIC))
        out.append(Literal("obj_shape", (o.id, o.shape), True, STATIC))
        out.append(Literal("obj_color", (o.id, o.color), True, STATIC))
    return out


def scene_observations(scene: Scene) -> List[Literal]:
    """Spatial-relation literals the cameras report for the initial scene:
    every stored relation, plus the above/below readings implied by each
    direct support."""
    out = []
    for rel, a, b in scene.relations:
        out.append(Literal("obj_rel", (rel, a, b), True, FLUENT))
        if rel == "on":
            out.append(Literal("obj_rel", ("above", a, b), True, FLUENT))
            if b != TABLE:
                out.append(Literal("obj_rel", ("below", b, a), True, FLUENT))
    if scene.in_hand:
        out.append(Literal("in_hand", ("rob1", scene.in_hand), True, FLUENT))
    return out


# ---------------------------------------------------------------------------
# procedural physics

@dataclass
class Physics:
    """Mutable true-world state: a support map plus the held object."""

    objects: Dict[str, ObjectSpec]
    support: Dict[str, Optional[str]]
    held: Optional[str] = None
    planar: FrozenSet[Tuple[str, str, str]] = frozenset()

    @classmethod
    def from_scene(cls, scene: Scene) -> "Physics":
        support: Dict[str, Optional[str]] = {o.id: TABLE for o in scene.objects}
        planar = set()
        for rel, a, b in scene.relations:
            if rel == "on":
                support[a] = b
            elif rel in PLANAR:
                planar.add((rel, a, b))
        held = scene.in_hand
        if held:
            support[held] = None
        return cls(objects={o.id: o for o in scene.objects}, support=support,
                   held=held, planar=frozenset(planar))

    def copy(self) -> "Physics":
        return Physics(objects=self.objects, support=dict(self.support),
                       held=self.held, planar=self.planar)

    def on_top_of(self, loc: str) -> List[str]:
        return sorted(o for o, s in self.support.items() if s == loc)

    def clear(self, obj: str) -> bool:
        return not self.on_top_of(obj)

    def legal(self, action: Literal) -> bool:
        """The complete physical executability test, hidden axioms included."""
        if action.pred == "pickup":
            _, obj = action.args
            return self.held is None and self.clear(obj)
        if action.pred == "putdown":
            _, obj, loc = action.args
            if self.held != obj or obj == loc:
                return False
            if loc != TABLE:
                if loc not in self.objects:
                    return False
                if self.objects[loc].surface == "irregular":
                    return False
                if not self.clear(loc):
                    return False
            return True
        raise ValueError(f"unknown action {action.pred}")

    def apply(self, action: Literal) -> bool:
        """Execute if physically possible; returns success. No effect on
        failure, matching an arm that aborts a doomed motion."""
        if not self.legal(action):
            return False
        if action.pred == "pickup":
            _, obj = action.args
            self.support[obj] = None
            self.held = obj
        else:
            _, obj, loc = action.args
            self.support[obj] = loc
            self.held = None
        return True

    # -- labels ------------------------------------------------------------

    def small_base(self, obj: str) -> bool:
        below = self.support.get(obj)
        if below in (None, TABLE):
            return False
        return (self.objects[below].size == "small"
                and self.objects[obj].size == "big")

    def unstable(self, obj: str) -> bool:
        below = self.support.get(obj)
        on_irregular = (below not in (None, TABLE)
                        and self.objects[below].surface == "irregular")
        return on_irregular or self.small_base(obj)

    def occluded(self, obj: str) -> bool:
        return any(rel == "front" and b == obj for rel, a, b in self.planar)

    # -- state literal sets --------------------------------------------------

    def true_literals(self, sig: SortedSignature) -> FrozenSet[Literal]:
        """The closed ground-truth state: base relations, derived relations,
        uniqueness complements, hand state, and label fluents. Mirrors what
        the reasoner's closure produces under the full axiom set."""
        lits: Set[Literal] = set()
        objs = sorted(self.objects)
        for obj, loc in sorted(self.support.items()):
            if loc is None:
                continue
            lits.add(Literal("obj_rel", ("on", obj, loc), True, FLUENT))
            lits.add(Literal("obj_rel", ("above", obj, loc), True, FLUENT))
            if loc != TABLE:
                lits.add(Literal("obj_rel", ("below", loc, obj), True, FLUENT))
            for other in [TABLE] + objs:
                if other != loc and other != obj:
                    lits.add(Literal("obj_rel", ("on", obj, other), False, FLUENT))
            if loc != TABLE:
                for other in objs:
                    if other != obj and other != loc:
                        lits.add(Literal("obj_rel", ("on", other, loc), False, FLUENT))
        if self.held is not None:
            for other in [TABLE] + objs:
                if other != self.held:
                    lits.add(Literal("obj_rel", ("on", self.held, other),
                                     False, FLUENT))
        for rel, a, b in sorted(self.planar):
            lits.add(Literal("obj_rel", (rel, a, b), True, FLUENT))
        for obj in objs:
            if obj == self.held:
                lits.add(Literal("in_hand", ("rob1", obj), True, FLUENT))
            else:
                lits.add(Literal("in_hand", ("rob1", obj), False, FLUENT))
            if self.unstable(obj):
                lits.add(Literal("stable", (obj,), False, FLUENT))
            if self.small_base(obj):
                lits.add(Literal("small_base", (obj,), True, FLUENT))
            if self.occluded(obj):
                lits.add(Literal("occluded", (obj,), True, FLUENT))
        return frozenset(lits)

    def observable_literals(self) -> List[Literal]:
        """Positive spatial relations plus the hand state: what the sensors
        can report."""
        out = []
        for obj, loc in sorted(self.support.items()):
            if loc is None:
                continue
            out.append(Literal("obj_rel", ("on", obj, loc), True, FLUENT))
            out.append(Literal("obj_rel", ("above", obj, loc), True, FLUENT))
            if loc != TABLE:
                out.append(Literal("obj_rel", ("below", loc, obj), True, FLUENT))
        for rel, a, b in sorted(self.planar):
            out.append(Literal("obj_rel", (rel, a, b), True, FLUENT))
        if self.held is not None:
            out.append(Literal("in_hand", ("rob1", self.held), True, FLUENT))
        return out


def execute_true(physics: Physics, action: Literal, noise: NoiseModel,
                 rng: random.Random) -> Tuple[Physics, bool]:
    """One true-world action attempt. Returns (new physics, success). The
    failure draw models a fumbled grasp; an impossible action never succeeds."""
    if noise.manipulation_failure_rate and rng.random() < noise.manipulation_failure_rate:
        return physics.copy(), False
    out = physics.copy()
    ok = out.apply(action)
    return out, ok


_SWAP = {"on": "above", "above": "on", "below": "above",
         "left": "right", "right": "left", "front": "behind",
         "behind": "front", "in": "on"}


def observe(physics: Physics, noise: NoiseModel,
            rng: random.Random) -> List[Literal]:
    """Sensor sweep: each spatial relation literal is independently dropped
    or mis-read with probability relation_error_rate; the hand state is
    exact."""
    out = []
    for lit in physics.observable_literals():
        if lit.pred == "obj_rel" and noise.relation_error_rate:
            if rng.random() < noise.relation_error_rate:
                if rng.random() < 0.5:
                    continue
                rel, a, b = lit.args
                out.append(Literal("obj_rel", (_SWAP.get(rel, "on"), a, b),
                                   True, FLUENT))
                continue
        out.append(lit)
    return out


def label_scene(physics: Physics, stacks: Sequence[Sequence[str]] = ()) \
        -> Tuple[Dict[Tuple[str, ...], bool], Dict[str, bool]]:
    """(per-stack stability, per-object occlusion) labels. A stack is stable
    when every member is."""
    if not stacks:
        stacks = current_stacks(physics)
    stability = {tuple(chain): not any(physics.unstable(o) for o in chain)
                 for chain in stacks}
    occlusion = {o: physics.occluded(o) for o in sorted(physics.objects)}
    return stability, occlusion


def current_stacks(physics: Physics) -> List[List[str]]:
    """Bottom-to-top chains of stacked objects (length ≥ 2)."""
    stacks = []
    for obj, loc in sorted(physics.support.items()):
        if loc == TABLE and not physics.clear(obj):
            chain = [obj]
            top = physics.on_top_of(obj)
            while top:
                chain.append(top[0])
                top = physics.on_top_of(top[0])
            stacks.append(chain)
    return stacks


# ---------------------------------------------------------------------------
# scene generation

CATALOG: Tuple[Tuple[str, str, str, str], ...] = (
    # (id stem, shape, surface, size)
    ("red_cube", "cube", "flat", "small"),
    ("green_cube", "cube", "flat", "medium"),
    ("blue_cube", "cube", "flat", "medium"),
    ("yellow_cube", "cube", "flat", "small"),
    ("orange_cube", "cube", "flat", "medium"),
    ("purple_cube", "cube", "flat", "medium"),
    ("white_cylinder", "cylinder", "flat", "medium"),
    ("grey_cylinder", "cylinder", "flat", "big"),
    ("red_sphere", "sphere", "irregular", "small"),
    ("green_sphere", "sphere", "irregular", "small"),
    ("pig", "pig", "irregular", "small"),
    ("duck", "duck", "irregular", "small"),
    ("apple", "apple", "irregular", "small"),
    ("orange_fruit", "apple", "irregular", "small"),
    ("capsicum", "apple", "irregular", "small"),
    ("tennis_ball", "sphere", "irregular", "small"),
    ("pot", "cylinder", "flat", "big"),
    ("pitcher", "pitcher", "flat", "big"),
    ("mustard_bottle", "bottle", "irregular", "medium"),
    ("mug", "mug", "irregular", "small"),
    ("crackers_box", "box", "flat", "big"),
)

_COLORS = ("red", "green", "blue", "yellow", "white", "orange", "purple",
           "pink", "brown", "black", "grey")


def gen_scene(seed: int, n_objects: int, n_stacked: int) -> Scene:
    """Deterministic random scene: n_objects drawn from the catalog, the
    first n_stacked arranged into one stack (flat-surface objects below,
    any object may top it), the rest spread on the table with a few planar
    relations."""
    if n_objects < 1 or n_stacked > n_objects or n_stacked == 1:
        raise InvalidCounts(f"n_objects={n_objects}, n_stacked={n_stacked}")
    rng = random.Random(seed)
    picks = rng.sample(list(CATALOG), n_objects)
    objects = tuple(ObjectSpec(stem, shape, _size_jitter(rng, size), surface,
                               rng.choice(_COLORS))
                    for stem, shape, surface, size in picks)
    by_id = {o.id: o for o in objects}
    ids = [o.id for o in objects]
    relations: List[Tuple[str, str, str]] = []
    stacked: List[str] = []
    if n_stacked >= 2:
        flats = [i for i in ids if by_id[i].surface == "flat"]
        others = [i for i in ids if by_id[i].surface != "flat"]
        rng.shuffle(flats)
        rng.shuffle(others)
        base = flats[:n_stacked - 1]
        if len(base) < n_stacked - 1:
            raise InvalidCounts("not enough flat objects to build the stack")
        top_pool = [i for i in ids if i not in base]
        top = rng.choice(sorted(top_pool))
        stacked = base + [top]
        for below, above in zip(stacked, stacked[1:]):
            relations.append(("on", above, below))
    loose = [i for i in ids if i not in stacked[1:]]
    for _ in range(rng.randint(0, min(3, max(0, len(loose) - 1)))):
        rel = rng.choice(PLANAR)
        a, b = rng.sample(loose, 2)
        if not any(x == (rel, a, b) for x in relations):
            relations.append((rel, a, b))
    return Scene(name=f"gen_{seed}", seed=seed, objects=objects,
                 relations=tuple(relations), in_hand=None, goal=())


def _size_jitter(rng: random.Random, size: str) -> str:
    order = ("small", "medium", "big")
    i = order.index(size)
    if rng.random() < 0.25:
        i = min(2, max(0, i + rng.choice((-1, 1))))
    return order[i]


def gen_goal(scene: Scene, rng: random.Random) -> str:
    """A random achievable-looking goal: either stacking one object onto a
    flat one, or holding an object."""
    ids = list(scene.object_ids())
    if len(ids) >= 2 and rng.random() < 0.7:
        flats = [o.id for o in scene.objects if o.surface == "flat"]
        if flats:
            target = rng.choice(sorted(flats))
            movers = [i for i in ids if i != target]
            mover = rng.choice(sorted(movers))
            return f"obj_rel(on, {mover}, {target})"
    return f"in_hand(rob1, {rng.choice(sorted(ids))})"


# ---------------------------------------------------------------------------
# episode logs

def log_event(fh, event: str, **fields) -> None:
    record = {"event": event}
    record.update(fields)
    fh.write(json.dumps(record, sort_keys=True) + "\n")
