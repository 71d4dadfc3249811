"""Predictive-clause parsing and binding.

A predictive clause names an attribute to impute, optional predictor
attributes, and the relation holding training examples:

    PREDICT(target [, predictor, ...]) GIVEN Relation

Keywords are case-insensitive, dotted attribute names are kept verbatim,
and any SQL around the clause is ignored rather than validated. Binding
resolves the clause against a catalog of named relations and produces a
train/validation/test split ready for the planner; omitted predictors
default to every non-target attribute.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import DataSplit, Dataset, ParseError, split as split_dataset

_ATTR_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z_][A-Za-z0-9_]*)*")


class ClauseSyntaxError(ValueError):
    """Malformed predictive clause; carries the character position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"at position {position}: {message}")
        self.position = position


class ClauseSemanticError(ValueError):
    pass


class BindingError(ValueError):
    pass


@dataclass(frozen=True)
class PaqQuery:
    target: str
    predictors: tuple[str, ...]
    training_relation: str

    def __post_init__(self) -> None:
        if self.target in self.predictors:
            raise ClauseSemanticError(
                f"target {self.target!r} may not appear among the predictors")
        if not self.training_relation:
            raise ClauseSemanticError("training relation must be non-empty")


def parse_predict_clause(text: str) -> PaqQuery:
    """Extract the predictive clause from surrounding query text."""
    m_predict = re.search(r"\bPREDICT\b", text, re.IGNORECASE)
    if m_predict is None:
        raise ClauseSyntaxError("expected PREDICT", 0)
    pos = m_predict.end()
    m_open = re.match(r"\s*\(", text[pos:])
    if m_open is None:
        raise ClauseSyntaxError("PREDICT requires a parenthesized argument list", pos)
    open_at = pos + m_open.end()
    close_at = text.find(")", open_at)
    if close_at < 0:
        raise ClauseSyntaxError("unterminated PREDICT argument list", open_at)
    raw_args = text[open_at:close_at]
    names = [a.strip() for a in raw_args.split(",")]
    if names == [""]:
        raise ClauseSyntaxError("empty PREDICT argument list", open_at)
    for name in names:
        if not name or _ATTR_RE.fullmatch(name) is None:
            raise ClauseSyntaxError(f"bad attribute name {name!r}",
                                    open_at + raw_args.find(name if name else ","))
    m_given = re.search(r"\bGIVEN\b", text[close_at:], re.IGNORECASE)
    if m_given is None:
        raise ClauseSyntaxError("expected GIVEN after PREDICT(...)", close_at + 1)
    rel_at = close_at + m_given.end()
    m_rel = re.match(r"\s*(" + _ATTR_RE.pattern + ")", text[rel_at:])
    if m_rel is None:
        raise ClauseSyntaxError("expected a relation name after GIVEN", rel_at)

    target, *predictors = names
    seen = set()
    for p in predictors:
        if p in seen:
            raise ClauseSemanticError(f"duplicate predictor {p!r}")
        seen.add(p)
    return PaqQuery(target=target, predictors=tuple(predictors),
                    training_relation=m_rel.group(1))


def format_predict_clause(query: PaqQuery) -> str:
    """Canonical text form; parse(format(q)) == q."""
    args = ", ".join((query.target,) + query.predictors)
    return f"PREDICT({args}) GIVEN {query.training_relation}"


@dataclass(eq=False)
class Relation:
    """A named table of numeric attributes with a header of column names."""

    name: str
    columns: list[str]
    table: np.ndarray


def load_relation(path: str | Path, name: str | None = None) -> Relation:
    """Read a headered CSV: first line attribute names, remaining lines doubles."""
    path = Path(path)
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ParseError("relation file is empty", path, 1)
    columns = [c.strip() for c in lines[0].split(",")]
    if len(set(columns)) != len(columns):
        raise ParseError("duplicate attribute names in header", path, 1)
    rows = []
    for line_no, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(columns):
            raise ParseError(
                f"expected {len(columns)} columns, got {len(cells)}", path, line_no)
        try:
            rows.append([float(c) for c in cells])
        except ValueError as exc:
            raise ParseError(str(exc), path, line_no) from exc
    if not rows:
        raise ParseError("relation has no data rows", path, 2)
    return Relation(name=name or path.stem, columns=columns, table=np.array(rows))


def load_catalog(directory: str | Path) -> dict[str, Relation]:
    """Map each ``<Name>.csv`` in the directory to a relation called Name."""
    catalog: dict[str, Relation] = {}
    for path in sorted(Path(directory).glob("*.csv")):
        rel = load_relation(path)
        catalog[rel.name] = rel
    return catalog


@dataclass(eq=False)
class BoundQuery:
    """A clause resolved against a catalog, ready for the planner."""

    query: PaqQuery
    split: DataSplit
    target_index: int
    predictor_indices: tuple[int, ...]


def bind(query: PaqQuery, catalog: dict[str, Relation],
         ratios: tuple[float, float, float] = (0.7, 0.2, 0.1),
         seed: int = 0) -> BoundQuery:
    """Resolve attribute references and build the training split.

    The target column becomes the {0,1} label (-1 maps to 0); predictor
    columns become the feature matrix, defaulting to all non-target
    attributes when the clause lists none.
    """
    relation = catalog.get(query.training_relation)
    if relation is None:
        raise BindingError(f"unknown relation {query.training_relation!r}")
    index = {c: i for i, c in enumerate(relation.columns)}
    if query.target not in index:
        raise BindingError(
            f"attribute {query.target!r} not in relation {relation.name!r}")
    target_index = index[query.target]
    if query.predictors:
        missing = [p for p in query.predictors if p not in index]
        if missing:
            raise BindingError(
                f"attribute {missing[0]!r} not in relation {relation.name!r}")
        predictor_indices = tuple(index[p] for p in query.predictors)
    else:
        predictor_indices = tuple(i for i in range(len(relation.columns))
                                  if i != target_index)
    if not predictor_indices:
        raise BindingError("no predictor attributes available")

    raw_labels = relation.table[:, target_index]
    labels = np.where(raw_labels == -1.0, 0.0, raw_labels)
    if not np.isin(labels, (0.0, 1.0)).all():
        raise BindingError(
            f"target {query.target!r} must hold -1/0/1 labels")
    ds = Dataset(relation.table[:, list(predictor_indices)], labels.astype(np.int64))
    return BoundQuery(query=query, split=split_dataset(ds, ratios, seed),
                      target_index=target_index, predictor_indices=predictor_indices)
