"""Domain files, vocabulary tables, question parsing and answer rendering.

The domain grammar is line oriented. Questions and answers go through a
controlled vocabulary: a lemma map normalizes surface forms, a synonym map
resolves canonical words to domain tokens, and per-kind templates shape the
final answer strings.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .kr import (ACTION, CAUSAL, CONSTRAINT, DEFAULT, FLUENT, IMPOSSIBLE,
                 STATIC, Axiom, Condition, Guard, Literal, SortedSignature,
                 SortError, Variable)


class ParseError(Exception):
    """Syntax error in a domain, vocabulary or scene file."""

    def __init__(self, line: int, col: int, message: str):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col
        self.message = message


class EmptySignature(Exception):
    pass


class UnrecognizedQuery(Exception):
    pass


class UnknownObject(Exception):
    pass


class MissingTemplate(Exception):
    pass


@dataclass
class Domain:
    """A parsed domain: signature, axioms, initial defaults and optional goal."""

    signature: SortedSignature
    axioms: Tuple[Axiom, ...]
    defaults: Tuple[Axiom, ...]
    goal: Tuple[Literal, ...] = ()

    def axioms_by_id(self) -> Dict[str, Axiom]:
        out = {a.id: a for a in self.axioms}
        out.update({a.id: a for a in self.defaults})
        return out

    def without(self, hidden_ids) -> "Domain":
        hidden = set(hidden_ids)
        return Domain(self.signature,
                      tuple(a for a in self.axioms if a.id not in hidden),
                      tuple(d for d in self.defaults if d.id not in hidden),
                      self.goal)


# ---------------------------------------------------------------------------
# domain files

_ATOM_RE = re.compile(r"^(-?)(\w+)\((.*)\)$")


def _split_args(s: str) -> List[str]:
    return [p.strip() for p in s.split(",")] if s.strip() else []


def _is_variable(tok: str) -> bool:
    return tok[0].isupper()


class _DomainBuilder:
    def __init__(self):
        self.sorts: Dict[str, Tuple[str, ...]] = {}
        self.parents: Dict[str, str] = {}
        self.statics: Dict[str, Tuple[str, ...]] = {}
        self.fluents: Dict[str, Tuple[str, ...]] = {}
        self.inertial: Dict[str, bool] = {}
        self.derived_tags: Dict[str, Tuple[str, ...]] = {}
        self.actions: Dict[str, Tuple[str, ...]] = {}
        self.max_step = 12
        self.axioms: List[Axiom] = []
        self.defaults: List[Axiom] = []
        self.goal: List[Literal] = []
        self.counters = {"causal": 0, "constraint": 0, "impossible": 0,
                         "default": 0}

    def schema(self, pred: str) -> Optional[Tuple[str, ...]]:
        for table in (self.fluents, self.statics, self.actions):
            if pred in table:
                return table[pred]
        return None

    def kind(self, pred: str) -> Optional[str]:
        if pred in self.fluents:
            return FLUENT
        if pred in self.statics:
            return STATIC
        if pred in self.actions:
            return ACTION
        return None


def _parse_atom(builder: _DomainBuilder, text: str, lineno: int,
                var_sorts: Dict[str, str]) -> Literal:
    m = _ATOM_RE.match(text.strip())
    if not m:
        raise ParseError(lineno, 1, f"malformed atom {text.strip()!r}")
    neg, pred, argstr = m.groups()
    schema = builder.schema(pred)
    if schema is None:
        raise ParseError(lineno, 1, f"undeclared predicate {pred!r}")
    args = _split_args(argstr)
    if len(args) != len(schema):
        raise ParseError(lineno, 1,
                         f"{pred} expects {len(schema)} arguments, got {len(args)}")
    terms = []
    for tok, sort in zip(args, schema):
        if _is_variable(tok):
            prev = var_sorts.get(tok)
            if prev is None or _more_specific(builder, sort, prev):
                var_sorts[tok] = sort
            elif not (_more_specific(builder, prev, sort) or prev == sort):
                raise SortError(f"line {lineno}: variable {tok} used at "
                                f"incompatible sorts {prev!r} and {sort!r}")
            terms.append(tok)
        else:
            terms.append(tok)
    kind = builder.kind(pred)
    return Literal(pred, tuple(terms), positive=(neg != "-"), kind=kind), var_sorts


def _more_specific(builder: _DomainBuilder, s1: str, s2: str) -> bool:
    """True when s1 is a strict descendant of s2 in the sort hierarchy."""
    s = builder.parents.get(s1)
    while s is not None:
        if s == s2:
            return True
        s = builder.parents.get(s)
    return False


def _finish_variables(lit: Literal, var_sorts: Dict[str, str]) -> Literal:
    terms = tuple(Variable(t, var_sorts[t]) if isinstance(t, str) and _is_variable(t)
                  else t for t in lit.args)
    return Literal(lit.pred, terms, lit.positive, lit.kind)


def _parse_body(builder: _DomainBuilder, text: str, lineno: int,
                var_sorts: Dict[str, str]) -> List:
    items = []
    depth = 0
    parts, cur = [], ""
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append(cur)
            cur = ""
        else:
            cur += ch
    if cur.strip():
        parts.append(cur)
    for part in parts:
        part = part.strip()
        if "!=" in part and "(" not in part:
            a, b = [p.strip() for p in part.split("!=")]
            items.append(("guard", a, b))
            continue
        naf = False
        if part.startswith("not "):
            naf = True
            part = part[4:].strip()
        lit, var_sorts = _parse_atom(builder, part, lineno, var_sorts)
        items.append(("cond", lit, naf))
    return items


def parse_domain(text: str) -> Domain:
    """Parse a line-oriented domain description.

    Raises ParseError with line/column information on malformed input,
    SortError on inconsistent sort usage and EmptySignature if no sorts or
    actions were declared.
    """
    b = _DomainBuilder()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            _parse_line(b, line, lineno)
        except ParseError:
            raise
        except SortError:
            raise
        except Exception as exc:  # keep location information
            raise ParseError(lineno, 1, str(exc))
    if not b.sorts or not b.actions:
        raise EmptySignature("domain declares no sorts or no actions")
    sig = SortedSignature(sorts=b.sorts, parents=b.parents, statics=b.statics,
                          fluents=b.fluents, inertial=b.inertial,
                          derived_tags=b.derived_tags, actions=b.actions,
                          max_step=b.max_step)
    return Domain(sig, tuple(b.axioms), tuple(b.defaults), tuple(b.goal))


def _parse_line(b: _DomainBuilder, line: str, lineno: int) -> None:
    head, _, rest = line.partition(" ")
    rest = rest.strip()
    if head == "sort":
        name, _, members = rest.partition(":")
        name = name.strip()
        parent = None
        if " extends " in name:
            name, parent = [p.strip() for p in name.split(" extends ")]
        b.sorts[name] = tuple(members.split())
        if parent:
            b.parents[name] = parent
        return
    if head in ("static", "fluent", "action"):
        tail = rest
        flag = None
        for f in (" inertial", " defined"):
            if tail.endswith(f):
                flag = f.strip()
                tail = tail[: -len(f)]
        m = _ATOM_RE.match(tail.strip())
        if not m or m.group(1):
            raise ParseError(lineno, 1, f"malformed declaration {line!r}")
        pred, argstr = m.group(2), m.group(3)
        schema = tuple(_split_args(argstr))
        if head == "static":
            b.statics[pred] = schema
        elif head == "action":
            b.actions[pred] = schema
        else:
            b.fluents[pred] = schema
            b.inertial[pred] = (flag != "defined")
        return
    if head == "noninertial":
        pred, _, tags = rest.partition(":")
        b.derived_tags[pred.strip()] = tuple(tags.split())
        return
    if head == "max_step":
        b.max_step = int(rest)
        return
    if head == "goal":
        body = rest
        m = re.match(r"^holds\((.*),\s*I\)$", body)
        if m:
            body = m.group(1)
        var_sorts: Dict[str, str] = {}
        lit, _ = _parse_atom(b, body, lineno, var_sorts)
        if var_sorts:
            raise ParseError(lineno, 1, "goal literals must be ground")
        b.goal.append(lit)
        return
    if head in ("causal", "constraint", "impossible", "default"):
        axiom_id = None
        m = re.match(r"^(\w+)\s*:\s*(.*)$", rest)
        if m and "(" not in m.group(1):
            axiom_id, rest = m.group(1), m.group(2)
        if axiom_id is None:
            b.counters[head] += 1
            axiom_id = {"causal": "c", "constraint": "k", "impossible": "x",
                        "default": "d"}[head] + str(b.counters[head])
        var_sorts: Dict[str, str] = {}
        if head == "causal":
            m = re.match(r"^(.*?)\s+causes\s+(.*)$", rest)
            if not m:
                raise ParseError(lineno, 1, "causal law needs 'causes'")
            occ_text, tail = m.groups()
            eff_text, _, body_text = tail.partition(" if ")
            occ, var_sorts = _parse_atom(b, occ_text, lineno, var_sorts)
            if occ.kind != ACTION:
                raise ParseError(lineno, 1, "causal law must start with an action")
            eff, var_sorts = _parse_atom(b, eff_text, lineno, var_sorts)
            items = _parse_body(b, body_text, lineno, var_sorts) if body_text else []
            body = [("cond", occ, False)] + items
            b.axioms.append(_build_axiom(axiom_id, CAUSAL, eff, body, var_sorts))
            return
        if head == "impossible":
            act_text, _, body_text = rest.partition(" if ")
            act, var_sorts = _parse_atom(b, act_text, lineno, var_sorts)
            if act.kind != ACTION:
                raise ParseError(lineno, 1,
                                 "executability condition must name an action")
            items = _parse_body(b, body_text, lineno, var_sorts)
            b.axioms.append(_build_axiom(axiom_id, IMPOSSIBLE, act.negate(),
                                         items, var_sorts))
            return
        if head == "constraint":
            head_text, _, body_text = rest.partition(" if ")
            lit, var_sorts = _parse_atom(b, head_text, lineno, var_sorts)
            items = _parse_body(b, body_text, lineno, var_sorts)
            if not items:
                raise ParseError(lineno, 1, "state constraint needs a body")
            b.axioms.append(_build_axiom(axiom_id, CONSTRAINT, lit, items,
                                         var_sorts))
            return
        head_text, _, body_text = rest.partition(" if ")
        lit, var_sorts = _parse_atom(b, head_text, lineno, var_sorts)
        items = _parse_body(b, body_text, lineno, var_sorts) if body_text else []
        b.defaults.append(_build_axiom(axiom_id, DEFAULT, lit, items, var_sorts))
        return
    raise ParseError(lineno, 1, f"unknown directive {head!r}")


def _build_axiom(axiom_id: str, kind: str, head: Literal, items: List,
                 var_sorts: Dict[str, str]) -> Axiom:
    body = []
    for item in items:
        if item[0] == "guard":
            a, b_ = item[1], item[2]
            if _is_variable(a) and a not in var_sorts:
                raise SortError(f"variable {a} appears only in a guard")
            if _is_variable(b_) and b_ not in var_sorts:
                raise SortError(f"variable {b_} appears only in a guard")
            body.append(Guard(Variable(a, var_sorts[a]) if _is_variable(a) else a,
                              Variable(b_, var_sorts[b_]) if _is_variable(b_) else b_))
        else:
            body.append(Condition(_finish_variables(item[1], var_sorts), item[2]))
    return Axiom(axiom_id, kind, _finish_variables(head, var_sorts), tuple(body))


def serialize_domain(domain: Domain) -> str:
    """Canonical text form; parse_domain(serialize_domain(d)) rebuilds d."""
    sig = domain.signature
    lines: List[str] = []
    children = {c: p for c, p in sig.parents.items()}
    for name, members in sig.sorts.items():
        ext = f" extends {children[name]}" if name in children else ""
        lines.append(f"sort {name}{ext}: {' '.join(members)}".rstrip())
    for pred, schema in sig.statics.items():
        lines.append(f"static {pred}({', '.join(schema)})")
    for pred, schema in sig.fluents.items():
        flag = " inertial" if sig.inertial.get(pred, True) else " defined"
        lines.append(f"fluent {pred}({', '.join(schema)}){flag}")
    for pred, tags in sig.derived_tags.items():
        lines.append(f"noninertial {pred}: {' '.join(tags)}")
    for name, schema in sig.actions.items():
        lines.append(f"action {name}({', '.join(schema)})")
    lines.append(f"max_step {sig.max_step}")
    for ax in domain.axioms:
        lines.append(serialize_axiom(ax))
    for ax in domain.defaults:
        lines.append(serialize_axiom(ax))
    for g in domain.goal:
        lines.append(f"goal holds({_fmt_lit(g)}, I)")
    return "\n".join(lines) + "\n"


def _fmt_term(t) -> str:
    return t.name if isinstance(t, Variable) else t


def _fmt_lit(lit: Literal) -> str:
    body = f"{lit.pred}({', '.join(_fmt_term(a) for a in lit.args)})"
    return body if lit.positive else "-" + body


def _fmt_body(axiom: Axiom, skip_action: bool = False) -> str:
    parts = []
    for item in axiom.body:
        if isinstance(item, Guard):
            parts.append(f"{_fmt_term(item.a)} != {_fmt_term(item.b)}")
        else:
            if skip_action and item.lit.kind == ACTION:
                continue
            parts.append(("not " if item.naf else "") + _fmt_lit(item.lit))
    return ", ".join(parts)


def serialize_axiom(axiom: Axiom, annotation: str = "") -> str:
    note = f"  # {annotation}" if annotation else ""
    if axiom.kind == CAUSAL:
        occ = axiom.occurrence()
        rest = _fmt_body(axiom, skip_action=True)
        s = f"causal {axiom.id}: {_fmt_lit(occ)} causes {_fmt_lit(axiom.head)}"
        return s + (f" if {rest}" if rest else "") + note
    if axiom.kind == IMPOSSIBLE:
        return (f"impossible {axiom.id}: {_fmt_lit(axiom.head.negate())} "
                f"if {_fmt_body(axiom)}") + note
    if axiom.kind == DEFAULT:
        body = _fmt_body(axiom)
        s = f"default {axiom.id}: {_fmt_lit(axiom.head)}"
        return s + (f" if {body}" if body else "") + note
    return (f"constraint {axiom.id}: {_fmt_lit(axiom.head)} "
            f"if {_fmt_body(axiom)}") + note


def parse_literal(text: str, sig: SortedSignature) -> Literal:
    """Parse a ground literal like '-obj_rel(on, a, b)' against a signature."""
    m = _ATOM_RE.match(text.strip())
    if not m:
        raise ParseError(1, 1, f"malformed literal {text.strip()!r}")
    neg, pred, argstr = m.groups()
    kind = sig.kind_of(pred)
    if kind is None:
        raise ParseError(1, 1, f"undeclared predicate {pred!r}")
    lit = Literal(pred, tuple(_split_args(argstr)), positive=(neg != "-"),
                  kind=kind)
    sig.check_literal(lit)
    return lit


# ---------------------------------------------------------------------------
# vocabulary

DEFAULT_TEMPLATES = {
    "describe_plan": "{clauses}.",
    "describe_plan_empty": "The goal was already satisfied.",
    "why_action": "Because {clauses}.",
    "why_action_present": "{clauses}.",
    "why_action_goal": "Because it helped to achieve the goal.",
    "why_not_action": "Because {clauses}.",
    "why_not_unrelated": "Because {np} is not related to the goal.",
    "why_not_unneeded": "Because it was not needed to achieve the goal.",
    "why_belief": "Because {clauses}.",
    "why_belief_unknown": "I did not have that belief.",
    "fallback": "I cannot explain that.",
}


@dataclass
class VocabTable:
    """Lemma map, synonym map, answer templates and rendering overrides."""

    lemmas: Dict[str, str] = field(default_factory=dict)
    synonyms: Dict[str, str] = field(default_factory=dict)
    templates: Dict[str, str] = field(default_factory=lambda: dict(DEFAULT_TEMPLATES))
    np_overrides: Dict[str, str] = field(default_factory=dict)
    np_short_overrides: Dict[str, str] = field(default_factory=dict)
    phrase_overrides: Dict[Tuple[str, str], str] = field(default_factory=dict)
    verbs: Dict[str, Tuple[str, str]] = field(default_factory=dict)

    def template(self, kind: str) -> str:
        try:
            return self.templates[kind]
        except KeyError:
            raise MissingTemplate(kind)


def parse_vocab(text: str) -> VocabTable:
    """Parse a vocabulary file.

    Line kinds:
      surface -> canonical          lemma normalization
      canonical => token            synonym resolution (token may be !negated)
      template <kind>: <text>       answer skeleton with {slots}
      np <constant>: <text>         noun phrase override
      np_short <constant>: <text>   short noun phrase override
      phrase <constant> <value>: <text>   attribute phrase override
      verb <action>: <infinitive> | <past>   action verb forms with {i} slots
    """
    vocab = VocabTable()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("template "):
            kind, _, tpl = line[len("template "):].partition(":")
            vocab.templates[kind.strip()] = tpl.strip()
            continue
        if line.startswith("np_short "):
            const, _, txt = line[len("np_short "):].partition(":")
            vocab.np_short_overrides[const.strip()] = txt.strip()
            continue
        if line.startswith("np "):
            const, _, txt = line[len("np "):].partition(":")
            vocab.np_overrides[const.strip()] = txt.strip()
            continue
        if line.startswith("phrase "):
            key, _, txt = line[len("phrase "):].partition(":")
            parts = key.split()
            if len(parts) != 2:
                raise ParseError(lineno, 1, "phrase line needs object and value")
            vocab.phrase_overrides[(parts[0], parts[1])] = txt.strip()
            continue
        if line.startswith("verb "):
            name, _, forms = line[len("verb "):].partition(":")
            inf, _, past = forms.partition("|")
            vocab.verbs[name.strip()] = (inf.strip(), past.strip())
            continue
        if "=>" in line:
            surface, _, token = line.partition("=>")
            vocab.synonyms[surface.strip()] = token.strip()
            continue
        if "->" in line:
            surface, _, canonical = line.partition("->")
            vocab.lemmas[surface.strip()] = canonical.strip()
            continue
        raise ParseError(lineno, 1, f"unrecognized vocabulary line {line!r}")
    return vocab


# ---------------------------------------------------------------------------
# questions

DESCRIBE = "describe_plan"
WHY_ACTION = "why_action"
WHY_NOT = "why_not_action"
WHY_BELIEF = "why_belief"

_NUMBER_WORDS = {w: i for i, w in enumerate(
    "zero one two three four five six seven eight nine ten eleven twelve".split())}


@dataclass(frozen=True)
class Query:
    kind: str
    action: Optional[Literal] = None
    belief: Optional[Literal] = None
    step: Optional[int] = None
    tense: str = "past"


def _normalize(text: str, vocab: VocabTable) -> List[str]:
    text = text.lower()
    text = re.sub(r"[?.!,;:]", " ", text)
    tokens = text.split()
    return [vocab.lemmas.get(t, t) for t in tokens]


def _extract_step(tokens: List[str]) -> Tuple[List[str], Optional[int]]:
    toks = list(tokens)
    for i in range(len(toks)):
        if toks[i] == "step" and i + 1 < len(toks):
            nxt = toks[i + 1]
            step = None
            if nxt.isdigit():
                step = int(nxt)
            elif nxt in _NUMBER_WORDS:
                step = _NUMBER_WORDS[nxt]
            if step is not None:
                j = i
                if j > 0 and toks[j - 1] == "time":
                    j -= 1
                if j > 0 and toks[j - 1] == "at":
                    j -= 1
                return toks[:j] + toks[i + 2:], step
    for phrase, value in (("in the initial state", 0), ("at the beginning", 0),
                          ("initially", 0), ("first", 0)):
        words = phrase.split()
        for i in range(len(toks) - len(words) + 1):
            if toks[i:i + len(words)] == words:
                return toks[:i] + toks[i + len(words):], value
    return toks, None


def _resolve_constant(tokens: List[str], start: int, sig: SortedSignature,
                      vocab: VocabTable) -> Tuple[Optional[str], int]:
    """Greedy longest match of a constant (by name words or synonym) at a
    token position. Skips a leading article. Returns (constant, next index)."""
    i = start
    while i < len(tokens) and tokens[i] in ("the", "a", "an", "object"):
        i += 1
    names = set(sig._direct_sort)
    for width in range(min(4, len(tokens) - i), 0, -1):
        phrase = " ".join(tokens[i:i + width])
        mapped = vocab.synonyms.get(phrase, phrase)
        candidate = mapped.replace(" ", "_")
        if candidate in names:
            return candidate, i + width
    return None, start


def parse_query(text: str, sig: SortedSignature, vocab: VocabTable) -> Query:
    """Parse one of the four supported question forms.

    Raises UnrecognizedQuery for text outside the controlled grammar and
    UnknownObject when a mentioned object is not in the signature.
    """
    tokens = _normalize(text, vocab)
    if not tokens:
        raise UnrecognizedQuery(text)
    if "describe" in tokens and "plan" in tokens:
        return Query(DESCRIBE)
    if tokens[0] != "why":
        raise UnrecognizedQuery(text)
    tense = "past"
    if "do" in tokens[:3] or "does" in tokens[:3]:
        tense = "present"
    tokens, step = _extract_step(tokens)
    body = [t for t in tokens[1:] if t not in ("did", "do", "does", "you",
                                               "want", "to", "that")]
    if not body:
        raise UnrecognizedQuery(text)
    if body[0] == "believe" or (body[0] == "not" and "believe" in body[:2]):
        return _parse_belief(text, body[1:], step, tense, sig, vocab)
    negated = False
    if body[0] == "not":
        negated = True
        body = body[1:]
    action = _parse_action_phrase(text, body, sig, vocab)
    if negated:
        return Query(WHY_NOT, action=action, step=step, tense=tense)
    return Query(WHY_ACTION, action=action, step=step, tense=tense)


def _verb_to_action(verb: str, sig: SortedSignature, vocab: VocabTable) -> Optional[str]:
    mapped = vocab.synonyms.get(verb, verb)
    if mapped in sig.actions:
        return mapped
    return None


def _parse_action_phrase(text: str, body: List[str], sig: SortedSignature,
                         vocab: VocabTable) -> Literal:
    if not body:
        raise UnrecognizedQuery(text)
    name = _verb_to_action(body[0], sig, vocab)
    i = 1
    if name is None and len(body) > 1:
        name = _verb_to_action(" ".join(body[:2]), sig, vocab)
        i = 2
    if name is None:
        raise UnrecognizedQuery(text)
    if i < len(body) and body[i] in ("up", "down"):
        i += 1
    schema = sig.actions[name]
    args: List[str] = []
    for sort in schema:
        consts = sig.constants_of(sort)
        if sort == "robot" or len(consts) == 1 and not _mentions(body, i, sig, vocab):
            args.append(consts[0])
            continue
        if sort == "robot":
            args.append(consts[0])
            continue
        const, j = _resolve_constant(body, i, sig, vocab)
        if const is None:
            raise UnknownObject(" ".join(body[i:i + 3]) or text)
        if not sig.fits(const, sort):
            raise UnknownObject(const)
        args.append(const)
        i = j
        while i < len(body) and body[i] in ("on", "onto", "in", "into"):
            i += 1
    return Literal(name, tuple(args), True, ACTION)


def _mentions(body: List[str], i: int, sig, vocab) -> bool:
    const, j = _resolve_constant(body, i, sig, vocab)
    return const is not None


def _parse_belief(text: str, body: List[str], step: Optional[int], tense: str,
                  sig: SortedSignature, vocab: VocabTable) -> Query:
    # split on the copula: "<np> is/was [not] <predicate phrase>"
    pivot = None
    for i, t in enumerate(body):
        if t in ("is", "was", "are", "were"):
            pivot = i
            break
    if pivot is None:
        raise UnrecognizedQuery(text)
    subj, j = _resolve_constant(body[:pivot], 0, sig, vocab)
    if subj is None:
        raise UnknownObject(" ".join(body[:pivot]) or text)
    rest = body[pivot + 1:]
    positive = True
    if rest and rest[0] == "not":
        positive = False
        rest = rest[1:]
    if not rest:
        raise UnrecognizedQuery(text)
    token = vocab.synonyms.get(rest[0], rest[0])
    if token.startswith("!"):
        positive = not positive
        token = token[1:]
    if token in sig.fluents and len(sig.fluents[token]) == 1:
        return Query(WHY_BELIEF, belief=Literal(token, (subj,), positive, FLUENT),
                     step=step, tense=tense)
    relations = set(sig.sorts.get("relation", ()))
    if token in relations:
        skip = 1
        while skip < len(rest) and rest[skip] in ("of", "to"):
            skip += 1
        obj, _ = _resolve_constant(rest, skip, sig, vocab)
        if obj is None:
            raise UnknownObject(" ".join(rest[1:]) or text)
        lit = Literal("obj_rel", (token, subj, obj), positive, FLUENT)
        return Query(WHY_BELIEF, belief=lit, step=step, tense=tense)
    if token in sig.statics:
        raise UnrecognizedQuery(text)
    raise UnrecognizedQuery(text)


# ---------------------------------------------------------------------------
# rendering

def np(vocab: VocabTable, const: str, form: str = "full") -> str:
    """Noun phrase for a constant. Forms: full, short, bare."""
    if form == "short" and const in vocab.np_short_overrides:
        return vocab.np_short_overrides[const]
    full = vocab.np_overrides.get(const, "the " + const.replace("_", " "))
    if form == "bare" and full.startswith("the "):
        return full[4:]
    if form == "short":
        return full
    return full


def head_noun(vocab: VocabTable, const: str) -> str:
    return np(vocab, const).split()[-1]


def action_phrase(vocab: VocabTable, sig: SortedSignature, action: Literal,
                  form: str = "infinitive") -> str:
    """Verb phrase for an action occurrence; robot arguments are implicit."""
    objects = [a for a, s in zip(action.args, sig.actions[action.pred])
               if s != "robot"]
    nps = [np(vocab, o) for o in objects]
    if action.pred in vocab.verbs:
        inf, past = vocab.verbs[action.pred]
        tpl = inf if form == "infinitive" else past
        return tpl.format(*nps)
    verb = action.pred.replace("_", " ")
    return verb + " " + ", ".join(nps)


_REL_PHRASES = {
    "on": "on", "above": "above", "below": "below", "in": "in",
    "left": "to the left of", "right": "to the right of",
    "front": "in front of", "behind": "behind",
}


def relation_clause(vocab: VocabTable, lit: Literal, tense: str = "past",
                    subject_form: str = "full", pronoun: bool = False) -> str:
    rel, a, b = lit.args
    be = "is" if tense == "present" else "was"
    subject = "it" if pronoun else np(vocab, a, subject_form)
    neg = "" if lit.positive else " not"
    return f"{subject} {be}{neg} {_REL_PHRASES.get(rel, rel)} {np(vocab, b)}"


def attribute_clause(vocab: VocabTable, lit: Literal, tense: str = "past") -> str:
    if lit.pred == "obj_surface":
        obj, value = lit.args
        phrase = vocab.phrase_overrides.get((obj, value),
                                            f"an {value} surface" if value[0] in "aeiou"
                                            else f"a {value} surface")
        have = "has" if tense == "present" else "has"
        neg = "" if lit.positive else " not"
        if neg:
            return f"{np(vocab, obj)} does not have {phrase}"
        return f"{np(vocab, obj)} {have} {phrase}"
    if lit.pred == "obj_size":
        obj, value = lit.args
        be = "is" if tense == "present" else "is"
        neg = "" if lit.positive else " not"
        return f"{np(vocab, obj, 'short')} {be}{neg} {value}"
    obj = lit.args[0]
    be = "is" if tense == "present" else "was"
    if lit.pred == "stable":
        word = "stable" if lit.positive else "unstable"
        return f"{np(vocab, obj)} {be} {word}"
    state = lit.pred.replace("_", " ")
    neg = "" if lit.positive else " not"
    return f"{np(vocab, obj)} {be}{neg} {state}"


def in_hand_clause(vocab: VocabTable, lit: Literal, tense: str = "past") -> str:
    _, obj = lit.args
    be = "am" if tense == "present" else "was"
    neg = "" if lit.positive else " not"
    return f"I {be}{neg} holding {np(vocab, obj)}"


def literal_clause(vocab: VocabTable, lit: Literal, tense: str = "past",
                   subject_form: str = "full", pronoun: bool = False) -> str:
    if lit.pred == "obj_rel":
        return relation_clause(vocab, lit, tense, subject_form, pronoun)
    if lit.pred == "in_hand":
        return in_hand_clause(vocab, lit, tense)
    return attribute_clause(vocab, lit, tense)


def observed_clause(vocab: VocabTable, lit: Literal, step: int,
                    step_style: str = "digit") -> str:
    word = "zero" if (step == 0 and step_style == "word") else str(step)
    if lit.pred == "obj_rel":
        rel, a, b = lit.args
        return (f"I observed {np(vocab, a)} {_REL_PHRASES.get(rel, rel)} "
                f"{np(vocab, b)} at step {word}")
    if lit.pred == "in_hand":
        _, obj = lit.args
        neg = "" if lit.positive else " not"
        return f"I observed that I was{neg} holding {np(vocab, obj)} at step {word}"
    return f"I observed that {literal_clause(vocab, lit)} at step {word}"


def happened_clause(vocab: VocabTable, sig: SortedSignature, action: Literal,
                    step: int) -> str:
    return f"I {action_phrase(vocab, sig, action, 'past')} at step {step}"


def join_clauses(clauses: List[str]) -> str:
    if not clauses:
        return ""
    if len(clauses) == 1:
        return clauses[0]
    return ", ".join(clauses[:-1]) + ", and " + clauses[-1]


def render(vocab: VocabTable, kind: str, clauses: List[str], **slots) -> str:
    """Fill the template for an answer kind. Unknown content degrades to the
    fallback template instead of raising."""
    try:
        tpl = vocab.template(kind)
    except MissingTemplate:
        if kind == "fallback":
            raise
        return vocab.template("fallback")
    joiner = ". " if kind == DESCRIBE else ", and "
    if kind == DESCRIBE:
        text = joiner.join(clauses)
    else:
        text = join_clauses(clauses)
    return tpl.format(clauses=text, **slots)
