"""Rule grammar: parsing, validation and canonical serialization.

Rule files are YAML lists in the Odin style::

    - name: all-generic-entity-dep
      label: GenericEntity
      example: "the capacity of those barns"
      type: "dependency"
      pattern: |
        trigger = [word=/^(capacity|number|usage)$/]
        variable: NounPhrase = nmod_of

Dependency patterns have one ``trigger`` line and any number of capture
lines ``name[: Label] = path``; a path is a whitespace-separated list of
relation steps, ``>rel`` (to a dependent), ``<rel`` (to the governor) or a
bare ``rel`` meaning ``>rel``.  Token patterns are sequences of token
constraints ``[field=value & ...]`` with ``?``, ``*``, ``+`` quantifiers,
plain groups ``( ... )`` and named captures ``(?<name> ... )``.
"""

from __future__ import annotations

import functools
import json
import re
from dataclasses import dataclass
from typing import Optional, Union

import yaml

RULE_KEYS = ("name", "label", "example", "type", "pattern", "priority", "fragment")
REQUIRED_KEYS = ("name", "label", "type", "pattern")
RULE_TYPES = ("token", "dependency")
FRAGMENT_KINDS = ("identifier", "quantitative_value", "categorical_value",
                  "boolean_value", "compound_value")
TOKEN_FIELDS = ("word", "tag", "entity")

# Universal Dependencies relations plus the collapsed ``nmod_of`` style
# (preposition folded into the label) used by the annotations.
RELATIONS = frozenset("""
acl acl:relcl advcl advmod amod appos aux aux:pass case cc cc:preconj ccomp clf
compound compound:prt conj cop csubj csubj:pass dep det det:predet discourse
dislocated dobj expl fixed flat goeswith iobj list mark neg nmod nmod:poss
nmod:tmod nmod:npmod nsubj nsubj:pass nummod obj obl obl:tmod obl:npmod orphan
parataxis punct reparandum root vocative xcomp
""".split())
_COLLAPSED_RE = re.compile(r"^(nmod|obl|acl|advcl|conj)_[a-z]+$")

# Capture label -> predicate on the target token's POS tag.
LABEL_CLASSES = {
    "Any": lambda tag: True,
    "NounPhrase": lambda tag: tag.startswith("NN"),
    "Noun": lambda tag: tag.startswith("NN"),
    "Number": lambda tag: tag == "CD",
    "Verb": lambda tag: tag.startswith("VB"),
    "Adjective": lambda tag: tag.startswith("JJ"),
}


def is_relation(label: str) -> bool:
    return label in RELATIONS or bool(_COLLAPSED_RE.match(label))


class RuleError(ValueError):
    def __init__(self, message: str, rule: Optional[str] = None, line: Optional[int] = None):
        where = []
        if rule:
            where.append(f"rule {rule!r}")
        if line:
            where.append(f"line {line}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.rule = rule
        self.line = line


@functools.lru_cache(maxsize=None)
def _compiled(regex: str, flags: str) -> re.Pattern:
    return re.compile(regex, re.IGNORECASE if "i" in flags else 0)


@dataclass(frozen=True)
class FieldTest:
    field: str
    negated: bool = False
    regex: Optional[str] = None
    flags: str = ""
    literal: Optional[str] = None

    def test(self, value: str) -> bool:
        if self.regex is not None:
            hit = _compiled(self.regex, self.flags).search(value) is not None
        else:
            hit = value == self.literal
        return hit != self.negated

    def render(self) -> str:
        op = "!=" if self.negated else "="
        if self.regex is not None:
            return f"{self.field}{op}/{self.regex.replace('/', chr(92) + '/')}/{self.flags}"
        return f"{self.field}{op}{json.dumps(self.literal)}"


@dataclass(frozen=True)
class TokenConstraint:
    tests: tuple[FieldTest, ...] = ()

    def matches(self, word: str, tag: str, entity: str) -> bool:
        values = {"word": word, "tag": tag, "entity": entity}
        return all(t.test(values[t.field]) for t in self.tests)

    def render(self) -> str:
        return "[" + " & ".join(t.render() for t in self.tests) + "]"


@dataclass(frozen=True)
class Group:
    body: tuple["Element", ...]
    name: Optional[str] = None


@dataclass(frozen=True)
class Element:
    node: Union[TokenConstraint, Group]
    quant: str = ""


@dataclass(frozen=True)
class PathStep:
    direction: str  # ">" dependent, "<" governor
    relation: str

    def render(self) -> str:
        return self.direction + self.relation


@dataclass(frozen=True)
class Capture:
    name: str
    path: tuple[PathStep, ...]
    label: Optional[str] = None

    def label_ok(self, tag: str) -> bool:
        return self.label is None or LABEL_CLASSES[self.label](tag)


@dataclass(frozen=True)
class Rule:
    name: str
    label: str
    kind: str
    priority: int = 1
    fragment_kind: str = "identifier"
    example: Optional[str] = None
    trigger: Optional[TokenConstraint] = None
    captures: tuple[Capture, ...] = ()
    token_pattern: tuple[Element, ...] = ()


@dataclass(frozen=True)
class RuleSet:
    rules: tuple[Rule, ...] = ()

    def __len__(self):
        return len(self.rules)

    def __iter__(self):
        return iter(self.rules)

    def __getitem__(self, name: str) -> Rule:
        for r in self.rules:
            if r.name == name:
                return r
        raise KeyError(name)

    def names(self) -> list[str]:
        return [r.name for r in self.rules]

    def __add__(self, other: "RuleSet") -> "RuleSet":
        return RuleSet(self.rules + other.rules)


# -- pattern parsing ---------------------------------------------------------

class _Scanner:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch: str):
        if self.peek() != ch:
            got = self.text[self.pos:self.pos + 10] or "end of pattern"
            raise RuleError(f"expected {ch!r} near {got!r}")
        self.pos += 1

    def at_end(self) -> bool:
        return self.peek() == ""


def _read_regex(sc: _Scanner) -> tuple[str, str]:
    sc.expect("/")
    chars = []
    while True:
        if sc.pos >= len(sc.text):
            raise RuleError("unterminated regex")
        ch = sc.text[sc.pos]
        if ch == "\\" and sc.pos + 1 < len(sc.text) and sc.text[sc.pos + 1] == "/":
            chars.append("/")
            sc.pos += 2
            continue
        sc.pos += 1
        if ch == "/":
            break
        chars.append(ch)
    flags = ""
    while sc.pos < len(sc.text) and sc.text[sc.pos] in "i":
        flags += sc.text[sc.pos]
        sc.pos += 1
    # Regexes may be wrapped across lines for readability; tokens never
    # contain whitespace, so it is dropped.
    regex = re.sub(r"\s+", "", "".join(chars))
    try:
        re.compile(regex)
    except re.error as exc:
        raise RuleError(f"invalid regex /{regex}/: {exc}") from None
    return regex, flags


def _parse_constraint(sc: _Scanner) -> TokenConstraint:
    sc.expect("[")
    tests = []
    if sc.peek() == "]":
        sc.pos += 1
        return TokenConstraint(())
    while True:
        sc.skip_ws()
        m = re.compile(r"([A-Za-z_]+)\s*(!=|=)\s*").match(sc.text, sc.pos)
        if not m:
            raise RuleError(f"bad token constraint near {sc.text[sc.pos:sc.pos + 15]!r}")
        fname, op = m.group(1), m.group(2)
        if fname not in TOKEN_FIELDS:
            raise RuleError(f"unknown token field {fname!r}")
        sc.pos = m.end()
        negated = op == "!="
        if sc.peek() == "/":
            regex, flags = _read_regex(sc)
            tests.append(FieldTest(fname, negated, regex=regex, flags=flags))
        elif sc.peek() == '"':
            m2 = re.compile(r'"(?:[^"\\]|\\.)*"').match(sc.text, sc.pos)
            if not m2:
                raise RuleError("unterminated string")
            tests.append(FieldTest(fname, negated, literal=json.loads(m2.group())))
            sc.pos = m2.end()
        else:
            m2 = re.compile(r"[^\s&\]]+").match(sc.text, sc.pos)
            if not m2:
                raise RuleError(f"missing value for {fname}")
            tests.append(FieldTest(fname, negated, literal=m2.group()))
            sc.pos = m2.end()
        nxt = sc.peek()
        if nxt == "&":
            sc.pos += 1
            continue
        sc.expect("]")
        return TokenConstraint(tuple(tests))


def _parse_sequence(sc: _Scanner, closing: str = "") -> tuple[Element, ...]:
    elements = []
    while True:
        ch = sc.peek()
        if ch == closing:
            break
        if ch == "[":
            node: Union[TokenConstraint, Group] = _parse_constraint(sc)
        elif ch == "(":
            sc.pos += 1
            name = None
            m = re.compile(r"\s*\?<([A-Za-z_]\w*)>").match(sc.text, sc.pos)
            if m:
                name = m.group(1)
                sc.pos = m.end()
            body = _parse_sequence(sc, ")")
            sc.expect(")")
            if not body:
                raise RuleError("empty group")
            node = Group(body, name)
        else:
            raise RuleError(f"unexpected {sc.text[sc.pos:sc.pos + 10]!r} in token pattern")
        quant = ""
        if sc.pos < len(sc.text) and sc.text[sc.pos] in "?*+":
            quant = sc.text[sc.pos]
            sc.pos += 1
        elements.append(Element(node, quant))
    return tuple(elements)


def parse_token_pattern(text: str) -> tuple[Element, ...]:
    sc = _Scanner(text)
    seq = _parse_sequence(sc)
    if not seq:
        raise RuleError("empty token pattern")
    _check_capture_names(seq, set())
    return seq


def _check_capture_names(seq, seen):
    for el in seq:
        if isinstance(el.node, Group):
            if el.node.name:
                if el.node.name in seen:
                    raise RuleError(f"duplicate capture name {el.node.name!r}")
                seen.add(el.node.name)
            _check_capture_names(el.node.body, seen)


def parse_path(text: str) -> tuple[PathStep, ...]:
    steps = []
    for raw in text.split():
        direction = ">"
        rel = raw
        if raw[0] in "<>":
            direction, rel = raw[0], raw[1:]
        if not is_relation(rel):
            raise RuleError(f"unknown dependency relation {rel!r}")
        steps.append(PathStep(direction, rel))
    if not steps:
        raise RuleError("empty dependency path")
    return tuple(steps)


_CAPTURE_LINE = re.compile(r"^([A-Za-z_]\w*)\s*(?::\s*([A-Za-z_]\w*))?\s*=\s*(.+)$")


def parse_dependency_pattern(text: str) -> tuple[TokenConstraint, tuple[Capture, ...]]:
    # Join continuation lines: a line that does not start a new statement
    # belongs to the previous one (multi-line trigger regexes).
    statements: list[str] = []
    for line in text.splitlines():
        stripped = line
        if not stripped.strip():
            continue
        if re.match(r"^\s*[A-Za-z_]\w*\s*(:\s*[A-Za-z_]\w*\s*)?=", stripped) or not statements:
            statements.append(stripped.strip())
        else:
            statements[-1] += " " + stripped.strip()
    trigger = None
    captures = []
    names = set()
    for stmt in statements:
        if re.match(r"^trigger\s*=", stmt):
            if trigger is not None:
                raise RuleError("more than one trigger")
            sc = _Scanner(stmt.split("=", 1)[1])
            trigger = _parse_constraint(sc)
            if not sc.at_end():
                raise RuleError(f"trailing text after trigger: {sc.text[sc.pos:].strip()!r}")
            continue
        m = _CAPTURE_LINE.match(stmt)
        if not m:
            raise RuleError(f"cannot parse pattern line {stmt!r}")
        name, label, path = m.groups()
        if name in names:
            raise RuleError(f"duplicate capture name {name!r}")
        if label is not None and label not in LABEL_CLASSES:
            raise RuleError(f"unknown capture label {label!r}")
        names.add(name)
        captures.append(Capture(name, parse_path(path), label))
    if trigger is None:
        raise RuleError("dependency pattern needs a trigger")
    return trigger, tuple(captures)


# -- rule files --------------------------------------------------------------

def _build_rule(data: dict, line: Optional[int]) -> Rule:
    name = data.get("name")
    rname = name if isinstance(name, str) else None
    unknown = set(data) - set(RULE_KEYS)
    if unknown:
        raise RuleError(f"unknown field key(s) {sorted(unknown)}", rname, line)
    missing = [k for k in REQUIRED_KEYS if k not in data]
    if missing:
        raise RuleError(f"missing field(s) {missing}", rname, line)
    for key in ("name", "label", "type", "pattern"):
        if not isinstance(data[key], str) or not data[key].strip():
            raise RuleError(f"{key} must be a non-empty string", rname, line)
    kind = data["type"]
    if kind not in RULE_TYPES:
        raise RuleError(f"type must be one of {RULE_TYPES}, got {kind!r}", rname, line)
    priority = data.get("priority", 1)
    if isinstance(priority, bool) or not isinstance(priority, int):
        raise RuleError("priority must be an integer", rname, line)
    frag = data.get("fragment", "identifier")
    if frag not in FRAGMENT_KINDS:
        raise RuleError(f"fragment must be one of {FRAGMENT_KINDS}", rname, line)
    example = data.get("example")
    if example is not None and not isinstance(example, str):
        raise RuleError("example must be a string", rname, line)
    try:
        if kind == "dependency":
            trigger, captures = parse_dependency_pattern(data["pattern"])
            return Rule(name, data["label"], kind, priority, frag, example, trigger, captures)
        return Rule(name, data["label"], kind, priority, frag, example,
                    token_pattern=parse_token_pattern(data["pattern"]))
    except RuleError as exc:
        raise RuleError(str(exc), rname, line) from None


def compile_rules(source: str) -> RuleSet:
    if not source.strip():
        return RuleSet(())
    try:
        root = yaml.compose(source, Loader=yaml.SafeLoader)
        data = yaml.safe_load(source)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise RuleError(f"YAML syntax error: {getattr(exc, 'problem', exc)}",
                        line=mark.line + 1 if mark else None) from None
    if data is None:
        return RuleSet(())
    if not isinstance(data, list):
        raise RuleError("rule file must be a list of rules", line=1)
    rules = []
    seen: dict[str, int] = {}
    for node, item in zip(root.value, data):
        line = node.start_mark.line + 1
        if not isinstance(item, dict):
            raise RuleError("each rule must be a mapping", line=line)
        rule = _build_rule(item, line)
        if rule.name in seen:
            raise RuleError(f"duplicate rule name (first defined on line {seen[rule.name]})",
                            rule.name, line)
        seen[rule.name] = line
        rules.append(rule)
    return RuleSet(tuple(rules))


def rule_problems(source: str) -> list[str]:
    """Every problem in a rule file, not just the first one."""
    try:
        root = yaml.compose(source, Loader=yaml.SafeLoader)
        data = yaml.safe_load(source)
    except yaml.YAMLError as exc:
        return [f"YAML syntax error: {exc}"]
    if data is None:
        return []
    if not isinstance(data, list):
        return ["rule file must be a list of rules"]
    problems = []
    seen: dict[str, int] = {}
    for node, item in zip(root.value, data):
        line = node.start_mark.line + 1
        if not isinstance(item, dict):
            problems.append(f"line {line}: each rule must be a mapping")
            continue
        try:
            rule = _build_rule(item, line)
        except RuleError as exc:
            problems.append(str(exc))
            continue
        if rule.name in seen:
            problems.append(str(RuleError(f"duplicate rule name (first defined on line {seen[rule.name]})",
                                          rule.name, line)))
        else:
            seen[rule.name] = line
    return problems


def _render_sequence(seq: tuple[Element, ...]) -> str:
    parts = []
    for el in seq:
        if isinstance(el.node, TokenConstraint):
            s = el.node.render()
        else:
            inner = _render_sequence(el.node.body)
            s = f"(?<{el.node.name}> {inner})" if el.node.name else f"({inner})"
        parts.append(s + el.quant)
    return " ".join(parts)


def render_pattern(rule: Rule) -> str:
    if rule.kind == "token":
        return _render_sequence(rule.token_pattern)
    lines = [f"trigger = {rule.trigger.render()}"]
    for c in rule.captures:
        head = f"{c.name}: {c.label}" if c.label else c.name
        lines.append(f"{head} = {' '.join(s.render() for s in c.path)}")
    return "\n".join(lines)


def serialize_rules(rules: RuleSet) -> str:
    out = []
    for r in rules:
        out.append(f"- name: {json.dumps(r.name)}")
        out.append(f"  label: {json.dumps(r.label)}")
        if r.example is not None:
            out.append(f"  example: {json.dumps(r.example)}")
        out.append(f"  type: {r.kind}")
        out.append(f"  priority: {r.priority}")
        out.append(f"  fragment: {r.fragment_kind}")
        out.append("  pattern: |")
        out.extend("    " + line for line in render_pattern(r).splitlines())
    return "\n".join(out) + ("\n" if out else "")
