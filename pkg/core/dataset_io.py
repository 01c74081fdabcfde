"""
File formats: observation datasets, evaluation points, estimate records and
JSON documents. Text is read with encoding detection and every output file is
written atomically.
"""

import csv
import io
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional

import chardet
import numpy as np

from core.errors import ParseError
from core.field_model import Domain, Sheet, SurfaceDataset

logger = logging.getLogger(__name__)

DATASET_HEADER = ("sheet_id", "t1", "t2", "y")
POINTS_HEADER = ("t1", "t2")


def detect_encoding(file_path: str) -> str:
    """Best guess of a file's text encoding, utf-8 when unsure"""
    try:
        with open(file_path, "rb") as f:
            result = chardet.detect(f.read())
        return result.get("encoding") or "utf-8"
    except OSError:
        return "utf-8"


def read_text(file_path: str) -> str:
    if not Path(file_path).exists():
        raise FileNotFoundError(f"File not found: {file_path}")
    encoding = detect_encoding(file_path)
    try:
        with open(file_path, "r", encoding=encoding, newline="") as f:
            return f.read()
    except (UnicodeDecodeError, LookupError):
        with open(file_path, "r", encoding="utf-8", errors="replace", newline="") as f:
            return f.read()


def atomic_write_text(file_path: str, text: str) -> str:
    """Write to a temporary file next to the target, then rename over it."""
    target = Path(file_path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{target.name}.", suffix=".tmp", dir=str(target.parent))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return str(target)


def read_json(file_path: str) -> Any:
    text = read_text(file_path)
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"{file_path}: invalid JSON at line {e.lineno} column {e.colno}: {e.msg}")


def _num(value: float) -> str:
    return format(float(value), ".17g")


def _split_comments(text: str):
    meta: Dict[str, Any] = {}
    body: List[str] = []
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            key, sep, value = stripped[1:].strip().partition("=")
            if sep:
                try:
                    meta[key.strip()] = json.loads(value)
                except json.JSONDecodeError:
                    meta[key.strip()] = value.strip()
            continue
        body.append(line)
    return meta, body


# --- Datasets ---

def dataset_to_csv(dataset: SurfaceDataset) -> str:
    buf = io.StringIO()
    buf.write(f"# domain={json.dumps(dataset.domain.describe(), sort_keys=True)}\n")
    if dataset.noise_known_sigma is not None:
        buf.write(f"# noise_known_sigma={_num(dataset.noise_known_sigma)}\n")
    writer = csv.writer(buf)
    writer.writerow(DATASET_HEADER)
    for sheet in dataset.sheets:
        for (t1, t2), y in zip(sheet.points, sheet.values):
            writer.writerow([sheet.id, _num(t1), _num(t2), _num(y)])
    return buf.getvalue()


def write_dataset(dataset: SurfaceDataset, file_path: str) -> str:
    return atomic_write_text(file_path, dataset_to_csv(dataset))


def _parse_domain(meta: Dict[str, Any], points: np.ndarray, file_path: str) -> Domain:
    raw = meta.get("domain")
    if isinstance(raw, dict):
        try:
            return Domain(float(raw["t1_min"]), float(raw["t1_max"]), float(raw["t2_min"]), float(raw["t2_max"]))
        except (KeyError, TypeError, ValueError) as e:
            raise ParseError(f"{file_path}: malformed domain metadata ({e})")
    if points.size == 0:
        raise ParseError(f"{file_path}: no domain metadata and no observations")
    logger.warning("%s has no domain metadata, using the bounding box of its points", file_path)
    return Domain(float(points[:, 0].min()), float(points[:, 0].max()),
                  float(points[:, 1].min()), float(points[:, 1].max()))


def read_dataset(file_path: str, domain: Optional[Domain] = None) -> SurfaceDataset:
    """Parse a ``sheet_id,t1,t2,y`` file; sheets with identical points share one array."""
    meta, body = _split_comments(read_text(file_path))
    if not body:
        raise ParseError(f"{file_path}: empty dataset file")
    reader = csv.reader(body)
    header = tuple(h.strip() for h in next(reader))
    if header != DATASET_HEADER:
        raise ParseError(f"{file_path}: expected header {','.join(DATASET_HEADER)}, got {','.join(header)}")

    order: List[int] = []
    rows: Dict[int, List[List[float]]] = {}
    for lineno, row in enumerate(reader, start=2):
        if len(row) != 4:
            raise ParseError(f"{file_path}: line {lineno} has {len(row)} fields, expected 4")
        try:
            sid = int(row[0])
            values = [float(row[1]), float(row[2]), float(row[3])]
        except ValueError:
            raise ParseError(f"{file_path}: line {lineno} is not numeric: {','.join(row)}")
        if sid not in rows:
            rows[sid] = []
            order.append(sid)
        rows[sid].append(values)

    shared: Dict[bytes, np.ndarray] = {}
    sheets = []
    all_points = []
    for sid in order:
        arr = np.asarray(rows[sid], dtype=float)
        pts = np.ascontiguousarray(arr[:, :2])
        key = pts.tobytes()
        if key not in shared:
            pts.flags.writeable = False
            shared[key] = pts
        sheets.append(Sheet(sid, shared[key], arr[:, 2]))
        all_points.append(pts)

    if domain is None:
        domain = _parse_domain(meta, np.vstack(all_points) if all_points else np.zeros((0, 2)), file_path)
    sigma = meta.get("noise_known_sigma")
    try:
        sigma = None if sigma is None else float(sigma)
    except (TypeError, ValueError):
        raise ParseError(f"{file_path}: noise_known_sigma is not a number")
    return SurfaceDataset(tuple(sheets), domain, sigma)


# --- Points ---

def read_points(file_path: str) -> np.ndarray:
    """Evaluation points from a ``t1,t2`` CSV file or a JSON list of pairs"""
    if Path(file_path).suffix.lower() == ".json":
        data = read_json(file_path)
        try:
            return np.asarray(data, dtype=float).reshape(-1, 2)
        except (TypeError, ValueError):
            raise ParseError(f"{file_path}: expected a list of [t1, t2] pairs")
    _, body = _split_comments(read_text(file_path))
    if not body:
        raise ParseError(f"{file_path}: no points")
    reader = csv.reader(body)
    header = tuple(h.strip() for h in next(reader))
    if header != POINTS_HEADER:
        raise ParseError(f"{file_path}: expected header t1,t2, got {','.join(header)}")
    try:
        return np.array([[float(a), float(b)] for a, b in reader], dtype=float).reshape(-1, 2)
    except ValueError:
        raise ParseError(f"{file_path}: points must be two numeric columns")


# --- Records ---

def _flat(record: Dict[str, Any]) -> Dict[str, Any]:
    return {k: (";".join(v) if isinstance(v, list) and all(isinstance(x, str) for x in v) else v)
            for k, v in record.items()}


def records_to_jsonl(records: Iterable[Dict[str, Any]]) -> str:
    return "".join(json.dumps(r, sort_keys=False) + "\n" for r in records)


def records_to_csv(records: Iterable[Dict[str, Any]]) -> str:
    records = [_flat(r) for r in records]
    if not records:
        return ""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(records[0].keys()))
    writer.writeheader()
    for r in records:
        writer.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


RECORD_FORMATS = {
    "jsonl": records_to_jsonl,
    "csv": records_to_csv,
}


def write_records(records: Iterable[Dict[str, Any]], file_path: str, fmt: str = "jsonl",
                  header: Optional[Dict[str, Any]] = None) -> str:
    if fmt not in RECORD_FORMATS:
        raise ValueError(f"Unsupported record format: {fmt}")
    text = RECORD_FORMATS[fmt](list(records))
    if header and fmt == "csv":
        text = "".join(f"# {k}={json.dumps(v, sort_keys=True)}\n" for k, v in sorted(header.items())) + text
    return atomic_write_text(file_path, text)
