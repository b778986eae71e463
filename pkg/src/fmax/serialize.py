"""File formats: CSV datasets, predictions, reports, and atomic writes.

All writers emit LF line endings and render floats with repr (the
shortest round-tripping form), so identical values always serialize
to identical bytes. Every write goes to a temporary file in the
target directory first and is renamed into place, so readers never
observe partial files.
"""

import csv
import io
import os
import tempfile

import numpy as np

from .errors import DataFormatError
from .synth import Dataset


def atomic_write(path, text):
    """Write text to path via a same-directory temp file and rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def dataset_header(n_features, n_labels):
    return [f"x{i + 1}" for i in range(n_features)] + [
        f"y{i + 1}" for i in range(n_labels)
    ]


def write_dataset_csv(path, dataset):
    """Dataset -> CSV with header x1..xF,y1..yL and 0/1 values."""
    header = dataset_header(dataset.features.shape[1], dataset.labels.shape[1])
    rows = np.hstack([dataset.features, dataset.labels])
    atomic_write(path, _csv_text(header, rows.tolist()))


def read_dataset_csv(path):
    """CSV -> Dataset; the label columns may be absent (features only).

    Raises DataFormatError with a 1-based line number on any malformed
    row.
    """
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError("empty file", line=1) from None
        header = [h.strip() for h in header]
        n_features = sum(1 for h in header if h.startswith("x"))
        n_labels = len(header) - n_features
        expected = dataset_header(n_features, n_labels)
        if header != expected:
            raise DataFormatError(
                f"header must be {','.join(expected)} style (x columns then y columns), "
                f"got {','.join(header)}",
                line=1,
            )
        features = []
        labels = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataFormatError(
                    f"expected {len(header)} fields, got {len(row)}", line=lineno
                )
            try:
                values = [int(v) for v in row]
            except ValueError as exc:
                raise DataFormatError(str(exc), line=lineno) from None
            if any(v not in (0, 1) for v in values):
                raise DataFormatError("values must be 0 or 1", line=lineno)
            features.append(values[:n_features])
            labels.append(values[n_features:])
    n = len(features)
    return Dataset(
        np.asarray(features, dtype=np.uint8).reshape(n, n_features),
        np.asarray(labels, dtype=np.uint8).reshape(n, n_labels),
    )


def write_predictions_csv(path, h):
    """(n, m) 0/1 prediction array -> CSV with header y1..ym."""
    h = np.asarray(h)
    header = [f"y{i + 1}" for i in range(h.shape[1])]
    atomic_write(path, _csv_text(header, h.astype(int).tolist()))


def write_report_csv(path, results):
    """Pairwise test results -> CSV i,j,statistic,p_value,dependent.

    Label indices are written 1-based to match the dataset header.
    """
    rows = [
        (r.i + 1, r.j + 1, r.statistic, r.p_value, r.dependent) for r in results
    ]
    atomic_write(path, _csv_text(["i", "j", "statistic", "p_value", "dependent"], rows))


def write_results_csv(path, rows):
    """Experiment rows -> CSV; wall_time_ms is empty unless timed."""
    atomic_write(
        path,
        _csv_text(
            ["scenario", "method", "train_size", "repetition", "mean_f", "wall_time_ms"],
            [
                (r.scenario, r.method, r.train_size, r.repetition, r.mean_f, r.wall_time_ms)
                for r in rows
            ],
        ),
    )


def write_summary_csv(path, rows):
    atomic_write(
        path,
        _csv_text(
            ["scenario", "method", "train_size", "mean_f", "stderr", "n_reps"],
            [
                (r.scenario, r.method, r.train_size, r.mean_f, r.stderr, r.n_reps)
                for r in rows
            ],
        ),
    )


def write_truth_csv(path, rows):
    """Truth-evaluation rows: expected F under the true conditional."""
    atomic_write(
        path,
        _csv_text(
            ["scenario", "method", "train_size", "repetition", "mean_true_f", "mean_envelope"],
            [
                (
                    r.scenario,
                    r.method,
                    r.train_size,
                    r.repetition,
                    r.mean_true_f,
                    r.mean_envelope,
                )
                for r in rows
            ],
        ),
    )
