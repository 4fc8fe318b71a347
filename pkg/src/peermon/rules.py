"""Plan phase: a small textual rule language plus the engine that evaluates
parsed rules against the knowledge base once per control tick.

Grammar (case-sensitive keywords, ``#`` starts a line comment):

    document  := rule* ;
    rule      := "rule" IDENT "salience" INT "{" when then "}" ;
    when      := "when" cond ("and" cond)* ;
    cond      := "indicator" STRING ("not")? "in" "state" STATE
               | "streak" "(" STRING "," STATE ")" CMP INT
               | "param" PNAME "(" STRING ")" CMP NUM ;
    then      := "then" act (";" act)* ;
    act       := "change_rate" STRING ("proportional" | "to" NUM)
               | "select_indicators" ("keep" STRING ("," STRING)*
                                     | "drop" STRING ("," STRING)*
                                     | "all") ;
    STATE     := "stable"|"unstable"|"too_high"|"high"|"normal"|"low"|"too_low"
    CMP       := ">=" | "<=" | "=="      PNAME := "rate" | "enabled"

Conditions over unknown indicators evaluate to false (with a warning); during
an indicator's warm-up both a state check and its negation are false.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Tuple, Union

from .core import KnowledgeBase, LogicalState
from .states import streak

logger = logging.getLogger(__name__)

_STATE_NAMES = {s.value: s for s in LogicalState}
_COMPARATORS = (">=", "<=", "==")
_PARAM_NAMES = ("rate", "enabled")


class RuleError(ValueError):
    """Base class for rule-document problems."""


class RuleSyntaxError(RuleError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StateCheck:
    indicator: str
    state: LogicalState
    negated: bool = False


@dataclass(frozen=True)
class StreakCheck:
    indicator: str
    state: LogicalState
    op: str
    count: int


@dataclass(frozen=True)
class ParamCheck:
    param: str  # "rate" or "enabled"
    indicator: str
    op: str
    value: float


Condition = Union[StateCheck, StreakCheck, ParamCheck]


@dataclass(frozen=True)
class ChangeRateProportional:
    indicator: str


@dataclass(frozen=True)
class ChangeRateTo:
    indicator: str
    seconds: float


@dataclass(frozen=True)
class SelectKeep:
    indicators: Tuple[str, ...]


@dataclass(frozen=True)
class SelectDrop:
    indicators: Tuple[str, ...]


@dataclass(frozen=True)
class SelectAll:
    pass


Action = Union[ChangeRateProportional, ChangeRateTo, SelectKeep, SelectDrop, SelectAll]


@dataclass(frozen=True)
class Rule:
    name: str
    salience: int
    conditions: Tuple[Condition, ...]
    actions: Tuple[Action, ...]
    # source position, for error messages only
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class RuleSet:
    rules: Tuple[Rule, ...] = ()

    def __post_init__(self) -> None:
        seen = {}
        for rule in self.rules:
            if rule.name in seen:
                raise RuleError(
                    f"duplicate rule name '{rule.name}' "
                    f"(lines {seen[rule.name]} and {rule.line})"
                )
            seen[rule.name] = rule.line

    def __len__(self) -> int:
        return len(self.rules)


@dataclass(frozen=True)
class PlannedAction:
    """One queued countermeasure: ordered by salience descending, then rule
    name ascending, then declaration order; ``seq`` is the final position."""

    action: Action
    salience: int
    rule: str
    seq: int


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Token:
    kind: str  # ident | number | string | punct | cmp | eof
    text: str
    line: int
    col: int
    is_int: bool = False

    def describe(self) -> str:
        if self.kind == "eof":
            return "end of input"
        if self.kind == "string":
            return f'"{self.text}"'
        return f"'{self.text}'"


def _tokenize(text: str) -> Iterator[_Token]:
    line, col = 1, 1
    i, n = 0, len(text)

    def err(message: str) -> RuleSyntaxError:
        return RuleSyntaxError(message, line, col)

    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_line, start_col = line, col
        if ch == '"':
            j = i + 1
            while j < n and text[j] not in '"\n':
                j += 1
            if j >= n or text[j] == "\n":
                raise RuleSyntaxError("unterminated string", start_line, start_col)
            value = text[i + 1 : j]
            yield _Token("string", value, start_line, start_col)
            col += j + 1 - i
            i = j + 1
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            yield _Token("ident", text[i:j], start_line, start_col)
            col += j - i
            i = j
            continue
        if ch.isdigit() or (ch == "-" and i + 1 < n and text[i + 1].isdigit()):
            j = i + 1
            while j < n and text[j].isdigit():
                j += 1
            is_int = True
            if j < n and text[j] == "." and j + 1 < n and text[j + 1].isdigit():
                is_int = False
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            yield _Token("number", text[i:j], start_line, start_col, is_int=is_int)
            col += j - i
            i = j
            continue
        if ch in "><=":
            if i + 1 < n and text[i + 1] == "=" and ch + "=" in _COMPARATORS:
                yield _Token("cmp", ch + "=", start_line, start_col)
                i += 2
                col += 2
                continue
            raise err(f"expected one of {', '.join(_COMPARATORS)}, found '{ch}'")
        if ch in "{}(),;":
            yield _Token("punct", ch, start_line, start_col)
            i += 1
            col += 1
            continue
        raise err(f"unexpected character '{ch}'")
    yield _Token("eof", "", line, col)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


class _Parser:
    def __init__(self, text: str):
        self._tokens = list(_tokenize(text))
        self._pos = 0

    def _peek(self) -> _Token:
        return self._tokens[self._pos]

    def _advance(self) -> _Token:
        token = self._tokens[self._pos]
        if token.kind != "eof":
            self._pos += 1
        return token

    def _fail(self, expected: str, token: Optional[_Token] = None) -> RuleSyntaxError:
        token = token or self._peek()
        return RuleSyntaxError(
            f"expected {expected}, found {token.describe()}", token.line, token.col
        )

    def _expect_keyword(self, word: str) -> _Token:
        token = self._peek()
        if token.kind != "ident" or token.text != word:
            raise self._fail(f"'{word}'")
        return self._advance()

    def _expect_punct(self, symbol: str) -> _Token:
        token = self._peek()
        if token.kind != "punct" or token.text != symbol:
            raise self._fail(f"'{symbol}'")
        return self._advance()

    def _expect_ident(self, what: str) -> _Token:
        token = self._peek()
        if token.kind != "ident":
            raise self._fail(what)
        return self._advance()

    def _expect_string(self, what: str = "a quoted indicator name") -> str:
        token = self._peek()
        if token.kind != "string":
            raise self._fail(what)
        return self._advance().text

    def _expect_int(self, what: str) -> int:
        token = self._peek()
        if token.kind != "number" or not token.is_int:
            raise self._fail(what)
        return int(self._advance().text)

    def _expect_num(self, what: str) -> float:
        token = self._peek()
        if token.kind != "number":
            raise self._fail(what)
        return float(self._advance().text)

    def _expect_cmp(self) -> str:
        token = self._peek()
        if token.kind != "cmp":
            raise self._fail("a comparator (>=, <= or ==)")
        return self._advance().text

    def _expect_state(self) -> LogicalState:
        token = self._peek()
        if token.kind != "ident" or token.text not in _STATE_NAMES:
            raise RuleSyntaxError(
                f"unknown state {token.describe()} "
                f"(expected one of {', '.join(sorted(_STATE_NAMES))})",
                token.line,
                token.col,
            )
        return _STATE_NAMES[self._advance().text]

    def parse_document(self) -> RuleSet:
        rules: List[Rule] = []
        while True:
            token = self._peek()
            if token.kind == "eof":
                break
            if token.kind != "ident" or token.text != "rule":
                raise self._fail("'rule'")
            rules.append(self._parse_rule())
        return RuleSet(tuple(rules))

    def _parse_rule(self) -> Rule:
        start = self._expect_keyword("rule")
        name = self._expect_ident("a rule name").text
        self._expect_keyword("salience")
        salience = self._expect_int("an integer salience")
        self._expect_punct("{")
        self._expect_keyword("when")
        conditions = [self._parse_condition()]
        while self._peek().kind == "ident" and self._peek().text == "and":
            self._advance()
            conditions.append(self._parse_condition())
        self._expect_keyword("then")
        actions = [self._parse_action()]
        while self._peek().kind == "punct" and self._peek().text == ";":
            self._advance()
            actions.append(self._parse_action())
        self._expect_punct("}")
        return Rule(
            name=name,
            salience=salience,
            conditions=tuple(conditions),
            actions=tuple(actions),
            line=start.line,
        )

    def _parse_condition(self) -> Condition:
        token = self._peek()
        if token.kind != "ident":
            raise self._fail("a condition ('indicator', 'streak' or 'param')")
        if token.text == "indicator":
            self._advance()
            indicator = self._expect_string()
            negated = False
            if self._peek().kind == "ident" and self._peek().text == "not":
                self._advance()
                negated = True
            self._expect_keyword("in")
            self._expect_keyword("state")
            state = self._expect_state()
            return StateCheck(indicator=indicator, state=state, negated=negated)
        if token.text == "streak":
            self._advance()
            self._expect_punct("(")
            indicator = self._expect_string()
            self._expect_punct(",")
            state = self._expect_state()
            self._expect_punct(")")
            op = self._expect_cmp()
            count = self._expect_int("an integer streak length")
            return StreakCheck(indicator=indicator, state=state, op=op, count=count)
        if token.text == "param":
            self._advance()
            pname = self._peek()
            if pname.kind != "ident" or pname.text not in _PARAM_NAMES:
                raise self._fail(f"a parameter name ({' or '.join(_PARAM_NAMES)})")
            self._advance()
            self._expect_punct("(")
            indicator = self._expect_string()
            self._expect_punct(")")
            op = self._expect_cmp()
            value = self._expect_num("a number")
            return ParamCheck(param=pname.text, indicator=indicator, op=op, value=value)
        raise self._fail("a condition ('indicator', 'streak' or 'param')")

    def _parse_action(self) -> Action:
        token = self._peek()
        if token.kind != "ident":
            raise self._fail("an action ('change_rate' or 'select_indicators')")
        if token.text == "change_rate":
            self._advance()
            indicator = self._expect_string()
            mode = self._peek()
            if mode.kind == "ident" and mode.text == "proportional":
                self._advance()
                return ChangeRateProportional(indicator=indicator)
            if mode.kind == "ident" and mode.text == "to":
                self._advance()
                seconds_token = self._peek()
                seconds = self._expect_num("a number of seconds")
                if seconds <= 0:
                    raise RuleSyntaxError(
                        f"change_rate seconds must be > 0, got {seconds_token.text}",
                        seconds_token.line,
                        seconds_token.col,
                    )
                return ChangeRateTo(indicator=indicator, seconds=seconds)
            raise self._fail("'proportional' or 'to'")
        if token.text == "select_indicators":
            self._advance()
            mode = self._peek()
            if mode.kind == "ident" and mode.text == "all":
                self._advance()
                return SelectAll()
            if mode.kind == "ident" and mode.text in ("keep", "drop"):
                self._advance()
                names = [self._expect_string()]
                while self._peek().kind == "punct" and self._peek().text == ",":
                    self._advance()
                    names.append(self._expect_string())
                if mode.text == "keep":
                    return SelectKeep(indicators=tuple(names))
                return SelectDrop(indicators=tuple(names))
            raise self._fail("'keep', 'drop' or 'all'")
        raise self._fail("an action ('change_rate' or 'select_indicators')")


def parse_rules(text: str) -> RuleSet:
    """Parse a rule document; raises RuleSyntaxError with line/column on bad
    input and RuleError on duplicate rule names."""
    return _Parser(text).parse_document()


# ---------------------------------------------------------------------------
# Pretty printer (canonical form; parse -> print -> parse is a fixed point)
# ---------------------------------------------------------------------------


def _fmt_num(value: float) -> str:
    if value == int(value):
        return str(int(value))
    return repr(value)


def format_condition(cond: Condition) -> str:
    if isinstance(cond, StateCheck):
        negation = "not " if cond.negated else ""
        return f'indicator "{cond.indicator}" {negation}in state {cond.state.value}'
    if isinstance(cond, StreakCheck):
        return f'streak("{cond.indicator}", {cond.state.value}) {cond.op} {cond.count}'
    return f'param {cond.param}("{cond.indicator}") {cond.op} {_fmt_num(cond.value)}'


def format_action(action: Action) -> str:
    if isinstance(action, ChangeRateProportional):
        return f'change_rate "{action.indicator}" proportional'
    if isinstance(action, ChangeRateTo):
        return f'change_rate "{action.indicator}" to {_fmt_num(action.seconds)}'
    if isinstance(action, SelectKeep):
        return "select_indicators keep " + ", ".join(f'"{n}"' for n in action.indicators)
    if isinstance(action, SelectDrop):
        return "select_indicators drop " + ", ".join(f'"{n}"' for n in action.indicators)
    return "select_indicators all"


def pretty_print(rules: RuleSet) -> str:
    blocks = []
    for rule in rules.rules:
        when = " and ".join(format_condition(c) for c in rule.conditions)
        then = "; ".join(format_action(a) for a in rule.actions)
        blocks.append(
            f"rule {rule.name} salience {rule.salience} {{\n"
            f"  when {when}\n"
            f"  then {then}\n"
            f"}}"
        )
    return "\n\n".join(blocks) + ("\n" if blocks else "")


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def _compare(left: float, op: str, right: float) -> bool:
    if op == ">=":
        return left >= right
    if op == "<=":
        return left <= right
    return left == right


def evaluate_condition(cond: Condition, kb: KnowledgeBase) -> bool:
    """Evaluate one condition against the current knowledge.

    Unknown indicators make the condition false (warning logged). A state
    check over an indicator still in warm-up is false, and so is its
    negation: no knowledge, no inference.
    """
    if not kb.is_registered(cond.indicator):
        logger.warning("condition references unknown indicator '%s'", cond.indicator)
        return False
    if isinstance(cond, StateCheck):
        latest = kb.latest_states(cond.indicator)
        if latest is None:
            return False
        present = cond.state in latest
        return not present if cond.negated else present
    if isinstance(cond, StreakCheck):
        run = streak(kb.state_history(cond.indicator), cond.state)
        return _compare(run, cond.op, cond.count)
    if cond.param == "rate":
        value: float = kb.config.intervals[cond.indicator]
    else:
        value = 1.0 if cond.indicator in kb.config.enabled else 0.0
    return _compare(value, cond.op, cond.value)


def plan_tick(rules: RuleSet, kb: KnowledgeBase) -> List[PlannedAction]:
    """Evaluate every rule once against the knowledge base.

    Each rule whose conjunction holds fires exactly once; its actions enter
    the queue with the rule's salience. The queue is totally ordered:
    salience descending, rule name ascending, then declaration order.
    """
    entries: List[Tuple[int, str, int, Action]] = []
    for rule in rules.rules:
        if all(evaluate_condition(c, kb) for c in rule.conditions):
            kb.fired_rules.append((kb.tick, rule.name, rule.salience))
            logger.debug("tick %d: rule '%s' fired (salience %d)",
                         kb.tick, rule.name, rule.salience)
            for index, action in enumerate(rule.actions):
                entries.append((rule.salience, rule.name, index, action))
    entries.sort(key=lambda e: (-e[0], e[1], e[2]))
    return [
        PlannedAction(action=action, salience=salience, rule=name, seq=seq)
        for seq, (salience, name, _, action) in enumerate(entries)
    ]
