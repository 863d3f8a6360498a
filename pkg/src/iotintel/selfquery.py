"""Self-querying retrieval: the LLM writes a structured query, we execute it.

Given a user query, a query-constructor prompt asks the LLM to rewrite it as
a semantic search string plus a metadata filter in a small comparator
language::

    expr := comp | and(expr, expr, ...) | or(expr, expr, ...) | not(expr)
    comp := op("field", value)            op in {eq, ne, contain, in,
                                                 gt, gte, lt, lte}

Field names are always quoted; values are quoted strings, bare numbers, or
true/false. ``in`` takes one or more values. The literal ``NO_FILTER`` means
no filtering. If the LLM's output cannot be parsed, retrieval falls back to
an unfiltered search and flags it in the trace.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Sequence

from iotintel.corpus.types import DatasetDescriptor, MetadataFieldInfo
from iotintel.index import (
    And,
    Contain,
    Eq,
    FilterExpr,
    Gt,
    Gte,
    Hit,
    In,
    Lt,
    Lte,
    MatchAll,
    Neq,
    Not,
    Or,
    SearchParams,
    VectorIndex,
)
from iotintel.llmgateway import ChatProvider, GatewayError, ask, extract_json_object

NO_FILTER = "NO_FILTER"

COMPARATORS = ("eq", "ne", "contain", "in", "gt", "gte", "lt", "lte")
COMBINATORS = ("and", "or", "not")


class ConstructorParseError(Exception):
    """The LLM's structured-query output violates the expected shape."""


class FilterSyntaxError(ConstructorParseError):
    """The filter text violates the comparator grammar."""


class RetrieverError(Exception):
    """Retrieval failed for reasons other than a parseable-output problem."""


# --- filter text <-> FilterExpr --------------------------------------------

_TOKEN_RE = re.compile(
    r'\s*('
    r'"(?:[^"\\]|\\.)*"'            # quoted string
    r'|[A-Za-z_][A-Za-z0-9_]*'      # bare word
    r'|-?\d+\.\d+|-?\d+'            # number
    r'|[(),\[\]]'
    r')')


def _tokenize(text: str) -> list[str]:
    tokens = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            if text[pos:].strip() == "":
                break
            raise FilterSyntaxError(
                f"unexpected character {text[pos:].strip()[0]!r} at position {pos}")
        tokens.append(match.group(1))
        pos = match.end()
    return tokens


class _Parser:
    def __init__(self, tokens: list[str]):
        self._tokens = tokens
        self._pos = 0

    def peek(self) -> str | None:
        return self._tokens[self._pos] if self._pos < len(self._tokens) else None

    def take(self, expected: str | None = None) -> str:
        token = self.peek()
        if token is None:
            raise FilterSyntaxError("unexpected end of filter")
        if expected is not None and token != expected:
            raise FilterSyntaxError(f"expected {expected!r}, found {token!r}")
        self._pos += 1
        return token

    def parse(self) -> FilterExpr:
        expr = self.expr()
        if self.peek() is not None:
            raise FilterSyntaxError(f"trailing content: {self.peek()!r}")
        return expr

    def expr(self) -> FilterExpr:
        word = self.take()
        if word in ("and", "or"):
            self.take("(")
            operands = [self.expr()]
            while self.peek() == ",":
                self.take(",")
                operands.append(self.expr())
            self.take(")")
            return And(*operands) if word == "and" else Or(*operands)
        if word == "not":
            self.take("(")
            inner = self.expr()
            self.take(")")
            return Not(inner)
        if word in COMPARATORS:
            return self.comparison(word)
        raise FilterSyntaxError(f"unknown operator {word!r}")

    def comparison(self, op: str) -> FilterExpr:
        self.take("(")
        field_token = self.take()
        if not field_token.startswith('"'):
            raise FilterSyntaxError(f"field name must be quoted, found {field_token!r}")
        field = json.loads(field_token)
        self.take(",")
        values = [self.value()]
        while self.peek() == ",":
            self.take(",")
            values.append(self.value())
        self.take(")")
        if op != "in" and len(values) != 1:
            raise FilterSyntaxError(f"{op} takes exactly one value")
        return _build_comparison(op, field, values)

    def value(self) -> object:
        token = self.take()
        if token == "[":
            items = []
            if self.peek() != "]":
                items.append(self.scalar(self.take()))
                while self.peek() == ",":
                    self.take(",")
                    items.append(self.scalar(self.take()))
            self.take("]")
            return list(items)
        return self.scalar(token)

    def scalar(self, token: str) -> object:
        if token.startswith('"'):
            try:
                return json.loads(token)
            except json.JSONDecodeError as exc:
                raise FilterSyntaxError(f"bad string literal {token!r}") from exc
        if token == "true":
            return True
        if token == "false":
            return False
        if re.fullmatch(r"-?\d+", token):
            return int(token)
        if re.fullmatch(r"-?\d+\.\d+", token):
            return float(token)
        raise FilterSyntaxError(f"expected a value, found {token!r}")


def _as_number(value: object, op: str) -> float:
    if isinstance(value, bool):
        raise FilterSyntaxError(f"{op} requires a numeric value, got a boolean")
    if isinstance(value, (int, float)):
        return value
    if isinstance(value, str):
        try:
            return int(value)
        except ValueError:
            try:
                return float(value)
            except ValueError:
                pass
    raise FilterSyntaxError(f"{op} requires a numeric value, got {value!r}")


def _build_comparison(op: str, field: str, values: list) -> FilterExpr:
    if op == "in":
        flat: list = []
        for value in values:
            if isinstance(value, list):
                flat.extend(value)
            else:
                flat.append(value)
        if not flat:
            raise FilterSyntaxError("in requires at least one value")
        return In(field, tuple(flat))
    value = values[0]
    if op == "eq":
        return Eq(field, value)
    if op == "ne":
        return Neq(field, value)
    if op == "contain":
        if not isinstance(value, str):
            raise FilterSyntaxError("contain requires a quoted string value")
        return Contain(field, value)
    number = _as_number(value, op)
    return {"gt": Gt, "gte": Gte, "lt": Lt, "lte": Lte}[op](field, number)


def parse_filter(text: str) -> FilterExpr:
    """Parse comparator-language text; the literal NO_FILTER means match-all."""
    stripped = text.strip()
    if stripped == NO_FILTER or stripped == "":
        return MatchAll()
    return _Parser(_tokenize(stripped)).parse()


def _format_value(value: object) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    return json.dumps(value)


def format_filter(expr: FilterExpr) -> str:
    """Print a FilterExpr in the comparator language; inverse of parse_filter."""
    if isinstance(expr, MatchAll):
        return NO_FILTER
    return _format_nested(expr)


def _format_nested(expr: FilterExpr) -> str:
    # The grammar has no nested match-all; only the top level may say NO_FILTER.
    if isinstance(expr, MatchAll):
        raise ValueError("MatchAll cannot appear inside a composite filter")
    if isinstance(expr, And):
        return f"and({', '.join(_format_nested(e) for e in expr.exprs)})"
    if isinstance(expr, Or):
        return f"or({', '.join(_format_nested(e) for e in expr.exprs)})"
    if isinstance(expr, Not):
        return f"not({_format_nested(expr.expr)})"
    if isinstance(expr, Eq):
        return f'eq({json.dumps(expr.field)}, {_format_value(expr.value)})'
    if isinstance(expr, Neq):
        return f'ne({json.dumps(expr.field)}, {_format_value(expr.value)})'
    if isinstance(expr, Contain):
        return f'contain({json.dumps(expr.field)}, {json.dumps(expr.text)})'
    if isinstance(expr, In):
        values = ", ".join(_format_value(v) for v in expr.values)
        return f'in({json.dumps(expr.field)}, {values})'
    ops = {Gt: "gt", Gte: "gte", Lt: "lt", Lte: "lte"}
    for cls, op in ops.items():
        if type(expr) is cls:
            return f'{op}({json.dumps(expr.field)}, {_format_value(expr.value)})'
    raise TypeError(f"cannot format {type(expr).__name__}")


# --- internal and structured queries ---------------------------------------

@dataclass(frozen=True)
class InternalQuery:
    """The LLM's rewrite: semantic query text plus filter text."""

    query_text: str
    filter_text: str = NO_FILTER
    limit: int | None = None

    def __post_init__(self) -> None:
        if self.limit is not None and self.limit < 1:
            raise ValueError("limit must be positive")
        parse_filter(self.filter_text)  # raises FilterSyntaxError when invalid

    def to_dict(self) -> dict:
        return {"query_text": self.query_text, "filter_text": self.filter_text,
                "limit": self.limit}


@dataclass(frozen=True)
class StructuredQuery:
    query_text: str
    filter: FilterExpr
    k: int

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")

    def to_dict(self) -> dict:
        return {"query_text": self.query_text,
                "filter_text": format_filter(self.filter), "k": self.k}


def parse_internal_query(llm_output: str) -> InternalQuery:
    """Parse the constructor's JSON output (fenced code blocks tolerated).

    Requires a "query" key; "filter" defaults to NO_FILTER; "limit" is
    optional. Grammar violations in the filter raise ConstructorParseError.
    """
    try:
        parsed = extract_json_object(llm_output)
    except ValueError as exc:
        raise ConstructorParseError(f"constructor output is not JSON: {exc}") from exc
    if "query" not in parsed:
        raise ConstructorParseError('constructor output lacks a "query" key')
    query_text = parsed["query"]
    if not isinstance(query_text, str) or not query_text.strip():
        raise ConstructorParseError('constructor "query" must be non-empty text')
    filter_text = parsed.get("filter", NO_FILTER)
    if filter_text is None:
        filter_text = NO_FILTER
    if not isinstance(filter_text, str):
        raise ConstructorParseError('constructor "filter" must be text')
    limit = parsed.get("limit")
    if limit is not None:
        if not isinstance(limit, int) or isinstance(limit, bool) or limit < 1:
            raise ConstructorParseError('constructor "limit" must be a positive integer')
    try:
        return InternalQuery(query_text=query_text.strip(),
                             filter_text=filter_text.strip() or NO_FILTER,
                             limit=limit)
    except FilterSyntaxError:
        raise
    except ValueError as exc:
        raise ConstructorParseError(str(exc)) from exc


def translate(iq: InternalQuery, defaults: SearchParams) -> StructuredQuery:
    """Turn an internal query into an executable one against the index."""
    return StructuredQuery(
        query_text=iq.query_text,
        filter=parse_filter(iq.filter_text),
        k=iq.limit if iq.limit is not None else defaults.k,
    )


# --- constructor prompt ------------------------------------------------------

CONSTRUCTOR_PROMPT = """\
Rewrite the user query for a document retriever. Produce two things:

1. "query": a short text capturing what to search for semantically.
2. "filter": a metadata filter in the comparator language below, or the
   literal string "NO_FILTER" if no filtering applies.

Comparator language:
    expr := comp | and(expr, expr, ...) | or(expr, expr, ...) | not(expr)
    comp := op("field", value)     op: eq, ne, contain, in, gt, gte, lt, lte
Field names are quoted. Values are quoted strings, bare numbers, or
true/false. contain matches case-insensitive substrings; in matches any of
several values. Only the metadata fields listed below may be filtered.

Metadata fields:
{fields}
{examples}User query: {query}

Respond with a JSON object: {{"query": "...", "filter": "..."}}"""

EXAMPLES_HEADER = "Examples:\n"


def render_constructor_prompt(query: str, infos: Sequence[MetadataFieldInfo],
                              examples: Sequence[tuple[str, str]] = ()) -> str:
    """The query-constructor prompt for one retriever's metadata schema."""
    field_lines = "\n".join(
        f"- \"{info.name}\" ({info.value_type}): {info.description}"
        for info in infos)
    if examples:
        example_lines = "".join(
            f"  Query: {q}\n  Filter: {f}\n" for q, f in examples)
        examples_block = f"\n{EXAMPLES_HEADER}{example_lines}\n"
    else:
        examples_block = "\n"
    return CONSTRUCTOR_PROMPT.format(fields=field_lines, examples=examples_block,
                                     query=query)


# --- retrieval ---------------------------------------------------------------

@dataclass(frozen=True)
class RetrievalTrace:
    """What one retriever did for one query, for display and debugging."""

    dataset_id: str
    mode: str
    used_constructor: bool
    raw_output: str | None
    internal_query: InternalQuery | None
    structured_query: StructuredQuery | None
    fallback: bool

    def to_dict(self) -> dict:
        return {
            "dataset_id": self.dataset_id,
            "mode": self.mode,
            "used_constructor": self.used_constructor,
            "raw_output": self.raw_output,
            "internal_query": self.internal_query.to_dict() if self.internal_query else None,
            "structured_query": self.structured_query.to_dict() if self.structured_query else None,
            "fallback": self.fallback,
        }


def retrieve(descriptor: DatasetDescriptor, query: str, llm: ChatProvider,
             index: VectorIndex, params: SearchParams | None = None,
             ) -> tuple[list[Hit], RetrievalTrace]:
    """Run one dataset's retriever for a query.

    Semantic datasets with filterable metadata go through the LLM query
    constructor; unparseable constructor output falls back to plain search.
    Datasets without metadata_field_infos skip the constructor entirely.
    Metadata-only datasets return filter matches without ranking. Transport
    failures from the LLM surface as RetrieverError.
    """
    params = params or SearchParams()
    if not descriptor.metadata_field_infos:
        hits = index.search(query, params)
        trace = RetrievalTrace(descriptor.dataset_id, descriptor.retrieval_mode,
                               used_constructor=False, raw_output=None,
                               internal_query=None, structured_query=None,
                               fallback=False)
        return hits, trace

    prompt = render_constructor_prompt(query, descriptor.metadata_field_infos,
                                       descriptor.selfquery_examples)
    try:
        raw = ask(llm, prompt)
    except GatewayError as exc:
        raise RetrieverError(
            f"query constructor failed for {descriptor.dataset_id}: {exc}") from exc

    fallback = False
    internal = None
    structured = None
    try:
        internal = parse_internal_query(raw)
        structured = translate(internal, params)
    except ConstructorParseError:
        fallback = True

    if descriptor.retrieval_mode == "metadata_only":
        if fallback:
            hits = index.filter_search(MatchAll(), limit=params.k)
        else:
            hits = index.filter_search(structured.filter, limit=structured.k)
    else:
        if fallback:
            hits = index.search(query, params)
        else:
            hits = index.search(structured.query_text,
                                SearchParams(k=structured.k, filter=structured.filter,
                                             min_score=params.min_score))
    trace = RetrievalTrace(descriptor.dataset_id, descriptor.retrieval_mode,
                           used_constructor=True, raw_output=raw,
                           internal_query=internal, structured_query=structured,
                           fallback=fallback)
    return hits, trace


class SelfQueryRetriever:
    """One dataset's retriever bound to an index, an LLM, and search params."""

    def __init__(self, descriptor: DatasetDescriptor, index: VectorIndex,
                 llm: ChatProvider, params: SearchParams | None = None):
        self.descriptor = descriptor
        self.index = index
        self.llm = llm
        self.params = params or SearchParams()

    @property
    def dataset_id(self) -> str:
        return self.descriptor.dataset_id

    @property
    def description(self) -> str:
        return self.descriptor.description

    def retrieve(self, query: str) -> tuple[list[Hit], RetrievalTrace]:
        return retrieve(self.descriptor, query, self.llm, self.index, self.params)
