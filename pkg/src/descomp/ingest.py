"""Parsers turning ARFF and CSV text into Dataset values.

Supported ARFF subset: ``@relation``, ``@attribute <name>`` with type
``numeric``/``real``/``integer`` or a nominal ``{a,b,c}`` list, and a dense
``@data`` section of comma-separated rows. Keywords are case-insensitive and
``%`` starts a comment line. Sparse rows, string/date attributes and missing
values (``?``) are rejected.

CSV: ``,`` delimiter, ``.`` decimal point, optional header row. Non-class
columns become numeric when every token parses as a number, otherwise nominal
with categories in first-appearance order. The class column is always treated
as nominal.
"""

from __future__ import annotations

import csv
import io
import os

import numpy as np

from .data import NOMINAL, NUMERIC, AttributeMeta, Dataset, validate_dataset


class IngestError(ValueError):
    """Malformed dataset file; the message carries line/row context."""


_NUMERIC_KINDS = ("numeric", "real", "integer")


def _unquote(token: str) -> str:
    token = token.strip()
    if len(token) >= 2 and token[0] == token[-1] and token[0] in "'\"":
        return token[1:-1]
    return token


def _parse_attribute_line(line: str, lineno: int) -> tuple[str, str, tuple[str, ...]]:
    rest = line[len("@attribute"):].strip()
    if not rest:
        raise IngestError(f"line {lineno}: @attribute without a name")
    if rest[0] in "'\"":
        quote = rest[0]
        end = rest.find(quote, 1)
        if end < 0:
            raise IngestError(f"line {lineno}: unterminated quoted attribute name")
        name = rest[1:end]
        type_part = rest[end + 1:].strip()
    else:
        fields = rest.split(None, 1)
        if len(fields) < 2:
            raise IngestError(f"line {lineno}: @attribute {fields[0]!r} has no type")
        name, type_part = fields[0], fields[1].strip()
    if not type_part:
        raise IngestError(f"line {lineno}: @attribute {name!r} has no type")
    if type_part.startswith("{"):
        if not type_part.endswith("}"):
            raise IngestError(f"line {lineno}: unterminated nominal specification")
        inner = type_part[1:-1]
        categories = tuple(_unquote(tok) for tok in inner.split(","))
        if any(not c for c in categories):
            raise IngestError(f"line {lineno}: empty category in nominal specification")
        if len(set(categories)) != len(categories):
            raise IngestError(f"line {lineno}: duplicate category in nominal specification")
        return name, NOMINAL, categories
    kind = type_part.split()[0].lower()
    if kind in _NUMERIC_KINDS:
        return name, NUMERIC, ()
    raise IngestError(f"line {lineno}: unsupported attribute type {type_part!r}")


def parse_arff(text: str, class_attribute: str = "last") -> Dataset:
    """Parse a dense ARFF document.

    ``class_attribute`` names the (nominal) class attribute, or "last" for
    the final declared attribute.
    """
    attributes: list[tuple[str, str, tuple[str, ...]]] = []
    rows: list[list[str]] = []
    row_lines: list[int] = []
    in_data = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        if not in_data:
            lowered = line.lower()
            if lowered.startswith("@relation"):
                continue
            if lowered.startswith("@attribute"):
                attributes.append(_parse_attribute_line(line, lineno))
            elif lowered.startswith("@data"):
                if not attributes:
                    raise IngestError(f"line {lineno}: @data before any @attribute")
                in_data = True
            else:
                raise IngestError(f"line {lineno}: unrecognized directive {line.split()[0]!r}")
        else:
            if line.startswith("{"):
                raise IngestError(f"line {lineno}: sparse data rows are not supported")
            rows.append([tok.strip() for tok in line.split(",")])
            row_lines.append(lineno)
    if not in_data:
        raise IngestError("missing @data section")

    names = [a[0] for a in attributes]
    if class_attribute == "last":
        class_index = len(attributes) - 1
    else:
        try:
            class_index = names.index(class_attribute)
        except ValueError:
            raise IngestError(f"class attribute {class_attribute!r} not declared") from None
    cname, ckind, ccategories = attributes[class_index]
    if ckind != NOMINAL:
        raise IngestError(f"class attribute {cname!r} must be nominal")

    feature_attrs = [a for i, a in enumerate(attributes) if i != class_index]
    meta = tuple(AttributeMeta(n, k, c) for n, k, c in feature_attrs)
    features = np.zeros((len(rows), len(feature_attrs)), dtype=float)
    labels = np.zeros(len(rows), dtype=int)

    for r, (tokens, lineno) in enumerate(zip(rows, row_lines)):
        if len(tokens) != len(attributes):
            raise IngestError(
                f"line {lineno}: expected {len(attributes)} values, got {len(tokens)}")
        col = 0
        for i, tok in enumerate(tokens):
            tok = _unquote(tok)
            if tok == "?":
                raise IngestError(f"row {r + 1} (line {lineno}): missing value unsupported")
            name, kind, categories = attributes[i]
            if i == class_index:
                if tok not in ccategories:
                    raise IngestError(
                        f"row {r + 1} (line {lineno}): unknown nominal token {tok!r} "
                        f"for class attribute {cname!r}")
                labels[r] = ccategories.index(tok)
                continue
            if kind == NUMERIC:
                try:
                    features[r, col] = float(tok)
                except ValueError:
                    raise IngestError(
                        f"line {lineno}: invalid numeric value {tok!r} "
                        f"for attribute {name!r}") from None
            else:
                if tok not in categories:
                    raise IngestError(
                        f"row {r + 1} (line {lineno}): unknown nominal token {tok!r} "
                        f"for attribute {name!r}")
                features[r, col] = categories.index(tok)
            col += 1

    ds = Dataset(features, labels, meta, n_classes=len(ccategories),
                 class_names=ccategories)
    violation = validate_dataset(ds)
    if violation is not None:
        raise IngestError(violation)
    return ds


def _needs_quoting(name: str) -> bool:
    return any(ch in name for ch in " ,{}%'\"") or name == ""


def _arff_name(name: str) -> str:
    return f"'{name}'" if _needs_quoting(name) else name


def dataset_to_arff(ds: Dataset, relation: str = "dataset") -> str:
    """Serialize a Dataset as dense ARFF; parse_arff inverts it exactly.

    Numeric values are written with repr so they survive the round trip
    bit-for-bit.
    """
    class_names = ds.class_names or tuple(f"c{i}" for i in range(ds.n_classes))
    lines = [f"@relation {_arff_name(relation)}"]
    for meta in ds.attribute_meta:
        if meta.kind == NUMERIC:
            lines.append(f"@attribute {_arff_name(meta.name)} numeric")
        else:
            cats = ",".join(_arff_name(c) for c in meta.categories)
            lines.append(f"@attribute {_arff_name(meta.name)} {{{cats}}}")
    lines.append(f"@attribute class {{{','.join(_arff_name(c) for c in class_names)}}}")
    lines.append("@data")
    for r in range(ds.n_rows):
        tokens = []
        for j, meta in enumerate(ds.attribute_meta):
            v = ds.features[r, j]
            if meta.kind == NUMERIC:
                tokens.append(repr(float(v)))
            else:
                tokens.append(_arff_name(meta.categories[int(v)]))
        tokens.append(_arff_name(class_names[int(ds.labels[r])]))
        lines.append(",".join(tokens))
    return "\n".join(lines) + "\n"


def parse_csv(text: str, header: bool = False, class_column="last") -> Dataset:
    """Parse a CSV table; ``class_column`` is a 0-based index or "last"."""
    physical: list[tuple[int, list[str]]] = []
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if row:
            physical.append((lineno, [tok.strip() for tok in row]))
    if not physical:
        raise IngestError("empty file")
    if header:
        names = physical[0][1]
        body = physical[1:]
        width = len(names)
    else:
        body = physical
        width = len(physical[0][1])
        names = [f"col{i}" for i in range(width)]
    if not body:
        raise IngestError("empty file")
    for lineno, row in body:
        if len(row) != width:
            raise IngestError(f"ragged row {lineno}")
    if class_column == "last":
        class_index = width - 1
    else:
        class_index = int(class_column)
        if not 0 <= class_index < width:
            raise IngestError("class column out of range")

    columns = [[row[j] for _, row in body] for j in range(width)]

    def all_numeric(tokens):
        try:
            for tok in tokens:
                float(tok)
        except ValueError:
            return False
        return True

    feature_cols = [j for j in range(width) if j != class_index]
    meta = []
    features = np.zeros((len(body), len(feature_cols)), dtype=float)
    for out_j, j in enumerate(feature_cols):
        tokens = columns[j]
        if all_numeric(tokens):
            meta.append(AttributeMeta(names[j], NUMERIC))
            features[:, out_j] = [float(tok) for tok in tokens]
        else:
            categories = tuple(dict.fromkeys(tokens))
            meta.append(AttributeMeta(names[j], NOMINAL, categories))
            index = {c: i for i, c in enumerate(categories)}
            features[:, out_j] = [index[tok] for tok in tokens]

    class_tokens = columns[class_index]
    class_names = tuple(dict.fromkeys(class_tokens))
    class_map = {c: i for i, c in enumerate(class_names)}
    labels = np.array([class_map[tok] for tok in class_tokens], dtype=int)

    ds = Dataset(features, labels, tuple(meta), n_classes=len(class_names),
                 class_names=class_names)
    violation = validate_dataset(ds)
    if violation is not None:
        raise IngestError(violation)
    return ds


def parse_feature_rows(text: str, fmt: str, attribute_meta, header: bool = False) -> np.ndarray:
    """Parse unlabeled feature rows against a known column schema.

    ``fmt`` is "csv" or "arff". CSV rows must carry exactly one token per
    feature column. ARFF documents must declare the same feature attributes
    (by count and kind); one extra trailing attribute is tolerated and
    treated as an ignored class column.
    """
    meta = tuple(attribute_meta)
    if fmt == "arff":
        attributes = []
        rows = []
        in_data = False
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("%"):
                continue
            lowered = line.lower()
            if not in_data:
                if lowered.startswith("@relation"):
                    continue
                if lowered.startswith("@attribute"):
                    attributes.append(_parse_attribute_line(line, lineno))
                elif lowered.startswith("@data"):
                    in_data = True
                else:
                    raise IngestError(f"line {lineno}: unrecognized directive")
            else:
                rows.append(([tok.strip() for tok in line.split(",")], lineno))
        if len(attributes) == len(meta) + 1:
            rows = [(tokens[:-1], lineno) for tokens, lineno in rows
                    if len(tokens) == len(meta) + 1]
        elif len(attributes) != len(meta):
            raise IngestError(
                f"dimensionality mismatch: model expects {len(meta)} feature "
                f"attributes, file declares {len(attributes)}")
        token_rows = rows
    elif fmt == "csv":
        token_rows = []
        physical = [(lineno, [tok.strip() for tok in row])
                    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1)
                    if row]
        if header:
            physical = physical[1:]
        for lineno, row in physical:
            token_rows.append((row, lineno))
    else:
        raise IngestError(f"unsupported input format {fmt!r}")

    if not token_rows:
        raise IngestError("empty file")
    features = np.zeros((len(token_rows), len(meta)), dtype=float)
    for r, (tokens, lineno) in enumerate(token_rows):
        if len(tokens) != len(meta):
            raise IngestError(
                f"line {lineno}: dimensionality mismatch: expected {len(meta)} "
                f"values, got {len(tokens)}")
        for j, m in enumerate(meta):
            tok = _unquote(tokens[j])
            if tok == "?":
                raise IngestError(f"row {r + 1} (line {lineno}): missing value unsupported")
            if m.kind == NUMERIC:
                try:
                    features[r, j] = float(tok)
                except ValueError:
                    raise IngestError(
                        f"line {lineno}: invalid numeric value {tok!r} "
                        f"for attribute {m.name!r}") from None
            else:
                if tok not in m.categories:
                    raise IngestError(
                        f"row {r + 1} (line {lineno}): unknown nominal token {tok!r} "
                        f"for attribute {m.name!r}")
                features[r, j] = m.categories.index(tok)
    return features


def load_dataset(path, class_attribute: str = "last", csv_header: bool = False) -> Dataset:
    """Load a dataset file, dispatching on the .arff/.csv extension."""
    ext = os.path.splitext(str(path))[1].lower()
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if ext == ".arff":
        return parse_arff(text, class_attribute=class_attribute)
    if ext == ".csv":
        column = "last" if class_attribute == "last" else class_attribute
        return parse_csv(text, header=csv_header, class_column=column)
    raise IngestError(f"unsupported dataset extension {ext!r} (expected .arff or .csv)")
