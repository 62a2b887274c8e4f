"""CSV schemas and atomic, locale-independent CSV emission."""

import csv
import io
import logging
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional, Sequence

from src.core.exceptions import OutputError, SchemaError

logger = logging.getLogger("qalretrieve")

INT = "int"
FLOAT = "float"
STR = "str"
OPTIONAL_FLOAT = "optional_float"   # empty cell when absent
OPTIONAL_INT = "optional_int"


@dataclass(frozen=True)
class CsvSchema:
    """Fixed column list of one output file."""

    name: str
    filename: str
    columns: tuple[tuple[str, str], ...]   # (column name, value type)

    @property
    def header(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.columns)


LATTICE = CsvSchema("lattice", "lattice.csv", (
    ("row", INT), ("col", INT), ("cos_alpha", FLOAT), ("true_class", INT),
))
WEAK_VALUES = CsvSchema("weak_values", "weak_values.csv", (
    ("row", INT), ("col", INT), ("q0", FLOAT),
))
STRATEGY_SWEEP = CsvSchema("strategy_sweep", "strategy_sweep.csv", (
    ("strategy", STR), ("n", INT), ("sigma", FLOAT), ("labels", INT),
    ("mean_accuracy", FLOAT), ("ci_low", OPTIONAL_FLOAT), ("ci_high", OPTIONAL_FLOAT),
    ("replications", INT),
))
THRESHOLD_SWEEP = CsvSchema("threshold_sweep", "threshold_sweep.csv", (
    ("threshold", FLOAT), ("kind", STR), ("mean_labels", FLOAT), ("mean_accuracy", FLOAT),
    ("ci_low", OPTIONAL_FLOAT), ("ci_high", OPTIONAL_FLOAT), ("replications", INT),
))
THRESHOLD_TRADEOFF = CsvSchema("threshold_tradeoff", "threshold_tradeoff.csv", (
    ("threshold", FLOAT), ("kind", STR), ("n", INT),
    ("mean_labels", FLOAT), ("labels_ci_low", OPTIONAL_FLOAT), ("labels_ci_high", OPTIONAL_FLOAT),
    ("mean_accuracy", FLOAT), ("ci_low", OPTIONAL_FLOAT), ("ci_high", OPTIONAL_FLOAT),
    ("replications", INT),
))
# event: "initial" (oracle-only model, no site), "oracle" (Alice's seed site) or "query"
EPISODE_TRACE = CsvSchema("episode_trace", "episode_trace.csv", (
    ("strategy", STR), ("step", INT), ("event", STR),
    ("site_id", OPTIONAL_INT), ("row", OPTIONAL_INT), ("col", OPTIONAL_INT),
    ("estimated_label", OPTIONAL_INT), ("true_label", OPTIONAL_INT),
    ("min_fidelity", OPTIONAL_FLOAT),
    ("accuracy", FLOAT), ("system_fidelity", FLOAT),
    ("boundary_a", OPTIONAL_FLOAT), ("boundary_b", OPTIONAL_FLOAT), ("boundary_c", OPTIONAL_FLOAT),
))

SCHEMAS = {schema.name: schema for schema in (
    LATTICE, WEAK_VALUES, STRATEGY_SWEEP, THRESHOLD_SWEEP, THRESHOLD_TRADEOFF, EPISODE_TRACE,
)}


def _format_value(value: Any, value_type: str) -> str:
    # repr() of a float is the shortest round-tripping form and never uses the locale.
    if value_type == STR:
        if not isinstance(value, str):
            raise SchemaError(f"Expected str, got {value!r}")
        return value
    if value is None and value_type == OPTIONAL_INT:
        return ""
    if value_type in (INT, OPTIONAL_INT):
        try:
            valid = not isinstance(value, bool) and int(value) == value
        except (TypeError, ValueError):
            valid = False
        if not valid:
            raise SchemaError(f"Expected int, got {value!r}")
        return str(int(value))
    if value is None:
        if value_type == OPTIONAL_FLOAT:
            return ""
        raise SchemaError("Missing value in a required float column")
    try:
        return repr(float(value))
    except (TypeError, ValueError):
        raise SchemaError(f"Expected float, got {value!r}")


def _parse_value(text: str, value_type: str) -> Any:
    if value_type == STR:
        return text
    if value_type in (OPTIONAL_INT, OPTIONAL_FLOAT) and text == "":
        return None
    if value_type in (INT, OPTIONAL_INT):
        return int(text)
    return float(text)


def format_rows(schema: CsvSchema, rows: Sequence[Sequence[Any]]) -> str:
    """Render header plus rows as CSV text with '\\n' line endings.

    Raises:
        SchemaError: a row has the wrong width or a value of the wrong type
    """
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(schema.header)
    for row in rows:
        if len(row) != len(schema.columns):
            raise SchemaError(
                f"{schema.name}: expected {len(schema.columns)} values, got {len(row)}"
            )
        writer.writerow(_format_value(value, value_type)
                        for value, (_, value_type) in zip(row, schema.columns))
    return buffer.getvalue()


def write_atomic(path: Path, text: str) -> None:
    """Write to a temporary file in the target directory, then rename over path."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
                f.write(text)
            os.replace(tmp_name, path)
        except BaseException:
            Path(tmp_name).unlink(missing_ok=True)
            raise
    except OSError as e:
        raise OutputError(f"Failed to write {path}: {e}")


def emit_csv(schema: CsvSchema, rows: Sequence[Sequence[Any]], out_dir: Path,
             filename: Optional[str] = None) -> Path:
    """Write rows under out_dir/schema.filename atomically and return the path.

    Raises:
        SchemaError: rows do not conform to schema
        OutputError: the file cannot be written
    """
    text = format_rows(schema, rows)
    path = Path(out_dir) / (filename or schema.filename)
    write_atomic(path, text)
    logger.info(f"Wrote {len(rows)} rows to {path}")
    return path


def read_csv(path: Path) -> tuple[CsvSchema, list[tuple[Any, ...]]]:
    """Parse a file written by emit_csv, identifying its schema from the header.

    Raises:
        SchemaError: header matches no known schema
        OutputError: the file cannot be read
    """
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            reader = csv.reader(f)
            header = tuple(next(reader, ()))
            body = list(reader)
    except OSError as e:
        raise OutputError(f"Failed to read {path}: {e}")

    schema = next((s for s in SCHEMAS.values() if s.header == header), None)
    if schema is None:
        raise SchemaError(f"Unknown CSV header in {path}: {','.join(header)}")
    rows = [
        tuple(_parse_value(text, value_type) for text, (_, value_type) in zip(line, schema.columns))
        for line in body
    ]
    return schema, rows
