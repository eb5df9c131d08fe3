import csv
import io
import json
import logging
import os
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence

from utils.validation import CsvParseError

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "v1"
RESULTS_FILE = "results.csv"
TRIALS_FILE = "trials.csv"
MANIFEST_FILE = "manifest.json"
PLOT_FILE = "plot.svg"

STATUS_OK = "ok"
STATUS_SKIPPED = "skipped"
STATUS_FAILED = "failed"


@dataclass
class CellStatus:
    cell: int
    status: str
    reason: Optional[str] = None

    @property
    def acceptable(self) -> bool:
        return self.status in (STATUS_OK, STATUS_SKIPPED)


@dataclass
class RunManifest:
    manifest_id: str
    spec_hash: str
    kind: str
    seed: int
    tool_version: str
    rng_algorithm: str
    numpy_version: str
    started_at: str
    finished_at: Optional[str] = None
    cells: List[CellStatus] = field(default_factory=list)
    outputs: List[str] = field(default_factory=list)

    @property
    def all_ok(self) -> bool:
        return all(cell.acceptable for cell in self.cells)

    def status_counts(self) -> Dict[str, int]:
        counts = {STATUS_OK: 0, STATUS_SKIPPED: 0, STATUS_FAILED: 0}
        for cell in self.cells:
            counts[cell.status] = counts.get(cell.status, 0) + 1
        return counts

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


@dataclass
class ResultTable:
    schema: str
    manifest_id: str
    columns: List[str]
    rows: List[Dict[str, str]]


def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_csv(columns: Sequence[str], rows: Sequence[dict], manifest_id: str) -> str:
    """Render rows under a ``# schema=v1 manifest=<id>`` comment line."""
    buffer = io.StringIO()
    buffer.write(f"# schema={SCHEMA_VERSION} manifest={manifest_id}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(row.get(col)) for col in columns])
    return buffer.getvalue()


def parse_csv(text: str) -> ResultTable:
    """
    Parse a results CSV.

    Args:
        text: File contents

    Returns:
        ResultTable with string cells

    Raises:
        CsvParseError: With the 1-based line number of the first problem
    """
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# "):
        raise CsvParseError(1, "missing '# schema=... manifest=...' header line")
    meta = {}
    for token in lines[0][2:].split():
        key, sep, value = token.partition("=")
        if not sep:
            raise CsvParseError(1, f"malformed header token {token!r}")
        meta[key] = value
    if meta.get("schema") != SCHEMA_VERSION:
        raise CsvParseError(1, f"unsupported schema {meta.get('schema')!r}")

    reader = csv.reader(lines[1:])
    try:
        columns = next(reader)
    except StopIteration:
        raise CsvParseError(2, "missing column header")
    except csv.Error as e:
        raise CsvParseError(2, str(e))
    rows = []
    for offset, record in enumerate(reader):
        line = offset + 3
        if len(record) != len(columns):
            raise CsvParseError(line, f"expected {len(columns)} fields, got {len(record)}")
        rows.append(dict(zip(columns, record)))
    return ResultTable(SCHEMA_VERSION, meta.get("manifest", ""), columns, rows)


class ResultStore:
    """Writes and reads the files of one run directory."""

    def __init__(self, out_dir: Optional[str] = None):
        self.out_dir = out_dir or os.getenv("GENSENSE_OUT_DIR", "results")
        os.makedirs(self.out_dir, exist_ok=True)

    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def save_table(self, name: str, columns: Sequence[str], rows: Sequence[dict], manifest_id: str) -> str:
        path = self.path(name)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(render_csv(columns, rows, manifest_id))
        logger.info(f"Wrote {len(rows)} rows to {path}")
        return path

    def save_manifest(self, manifest: RunManifest) -> str:
        path = self.path(MANIFEST_FILE)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(manifest.to_json())
            fh.write("\n")
        logger.info(f"Wrote manifest {manifest.manifest_id} to {path}")
        return path

    def load_table(self, name: str = RESULTS_FILE) -> ResultTable:
        return read_table(self.path(name))

    def load_manifest(self) -> dict:
        with open(self.path(MANIFEST_FILE), encoding="utf-8") as fh:
            return json.load(fh)


def read_table(path: str) -> ResultTable:
    with open(path, encoding="utf-8") as fh:
        return parse_csv(fh.read())
