"""Result persistence: atomic file writes, canonical JSON, CSV, digests.

Writers are atomic (temp file in the destination directory, then
os.replace), so a failed run never leaves a partial result file.
Serialization is canonical: keys sorted, floats in shortest round-trip
form, newline-terminated; two writes of equal data give equal bytes,
which the determinism tests compare directly.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile

__all__ = [
    "canonical_json",
    "write_text_atomic",
    "write_json_atomic",
    "write_csv_atomic",
    "csv_text",
    "sha256_bytes",
    "sha256_file",
]


def canonical_json(obj):
    """Serialize to the canonical JSON text form used by all artifacts."""
    return json.dumps(obj, sort_keys=True, indent=1,
                      separators=(",", ": "), allow_nan=False) + "\n"


def write_text_atomic(path, text):
    """Write text through a same-directory temp file and rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory,
                               prefix=os.path.basename(path) + ".",
                               suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
    return path


def write_json_atomic(path, obj):
    return write_text_atomic(path, canonical_json(obj))


def csv_text(header, rows):
    """Render rows to CSV text, header first, CRLF line endings.

    Floats are written in shortest round-trip form; everything else is
    left to the csv module's quoting rules.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v
                         for v in row])
    return buf.getvalue()


def write_csv_atomic(path, header, rows):
    return write_text_atomic(path, csv_text(header, rows))


def sha256_bytes(data):
    return hashlib.sha256(data).hexdigest()


def sha256_file(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()
