"""
Text formats: signal and spectrum CSVs, the linearizer file, key-value configs.

Numbers are written with 17 significant digits so that every float64
round-trips exactly.
"""

from __future__ import annotations

import csv
import io as _io
from pathlib import Path
from typing import Dict, Iterable, Optional, Sequence

import numpy as np

from .linearizers import (
    ActivationKind,
    BranchLinearizer,
    HammersteinLinearizer,
    LinearizerError,
    LutLinearizer,
    build_lut,
)


class FormatError(ValueError):
    pass


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def fmt_list(values: Iterable[float]) -> str:
    return ", ".join(fmt(v) for v in values)


def parse_list(text: str) -> list:
    text = text.strip()
    if not text:
        return []
    return [float(t) for t in text.split(",")]


# -- key-value text ---------------------------------------------------------

def parse_kv(text: str) -> Dict[str, str]:
    """``key = value`` lines; blank lines and ``#`` comments are ignored."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FormatError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if key in out:
            raise FormatError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def dump_kv(items: Dict[str, object], header: Optional[str] = None) -> str:
    lines = [f"# {header}"] if header else []
    lines += [f"{k} = {v}" for k, v in items.items()]
    return "\n".join(lines) + "\n"


# -- linearizer files -------------------------------------------------------

def serialize_linearizer(lin) -> str:
    if isinstance(lin, HammersteinLinearizer):
        items = {"kind": "hammerstein", "K": lin.K, "d": fmt_list(lin.d)}
    elif isinstance(lin, BranchLinearizer):
        items = {
            "kind": "branch",
            "N": lin.N,
            "activation": lin.activation.value,
            "c0": fmt(lin.c0),
            "c1": fmt(lin.c1),
            "biases": fmt_list(lin.biases),
            "weights": fmt_list(lin.weights),
        }
        if lin.activation is ActivationKind.ONEBIT and lin.uses_proposed_biases:
            items["lut_table"] = fmt_list(build_lut(lin).table)
    elif isinstance(lin, LutLinearizer):
        items = {"kind": "lut", "N": lin.N, "c1": fmt(lin.c1), "lut_table": fmt_list(lin.table)}
    else:
        raise TypeError(f"not a linearizer: {type(lin).__name__}")
    return dump_kv(items)


def parse_linearizer(text: str):
    kv = parse_kv(text)
    try:
        kind = kv["kind"]
        if kind == "hammerstein":
            lin = HammersteinLinearizer(tuple(parse_list(kv["d"])))
            if int(kv["K"]) != lin.K:
                raise FormatError("K does not match the number of coefficients")
            return lin
        if kind == "branch":
            lin = BranchLinearizer(
                c0=float(kv["c0"]), c1=float(kv["c1"]),
                biases=tuple(parse_list(kv["biases"])),
                weights=tuple(parse_list(kv["weights"])),
                activation=ActivationKind.parse(kv["activation"]),
            )
            if int(kv["N"]) != lin.N:
                raise FormatError("N does not match the number of weights")
            if "lut_table" in kv and tuple(parse_list(kv["lut_table"])) != build_lut(lin).table:
                raise FormatError("stored lut_table disagrees with the branch coefficients")
            return lin
        if kind == "lut":
            lin = LutLinearizer(float(kv["c1"]), tuple(parse_list(kv["lut_table"])))
            if int(kv["N"]) != lin.N:
                raise FormatError("N does not match the table size")
            return lin
    except KeyError as exc:
        raise FormatError(f"missing field {exc.args[0]!r}") from None
    except LinearizerError as exc:
        raise FormatError(str(exc)) from exc
    raise FormatError(f"unknown linearizer kind {kind!r}")


def save_linearizer(path, lin) -> Path:
    path = Path(path)
    path.write_text(serialize_linearizer(lin))
    return path


def load_linearizer(path):
    return parse_linearizer(Path(path).read_text())


# -- CSV --------------------------------------------------------------------

def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], comment: Optional[str] = None) -> int:
    """Write rows; floats get 17 significant digits. Returns the row count."""
    path = Path(path)
    count = 0
    with path.open("w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(c) if isinstance(c, (float, np.floating)) else c for c in row])
            count += 1
    return count


def read_csv(path) -> tuple:
    """Returns ``(header, rows)`` with ``#`` comment lines skipped."""
    with Path(path).open(newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(_io.StringIO("".join(lines)))
    rows = list(reader)
    if not rows:
        raise FormatError(f"{path}: empty CSV")
    return rows[0], rows[1:]


def write_signal(path, x, comment: Optional[str] = None) -> int:
    x = np.asarray(x, dtype=np.float64)
    return write_csv(path, ["n", "value"], ((n, float(v)) for n, v in enumerate(x, start=1)), comment)


def read_signal(path) -> np.ndarray:
    header, rows = read_csv(path)
    if [h.strip() for h in header] != ["n", "value"]:
        raise FormatError(f"{path}: expected header 'n,value', got {header!r}")
    values = np.empty(len(rows))
    for i, row in enumerate(rows):
        if int(row[0]) != i + 1:
            raise FormatError(f"{path}: sample index {row[0]} out of sequence at row {i + 1}")
        values[i] = float(row[1])
    if values.size == 0:
        raise FormatError(f"{path}: no samples")
    return values


def write_spectrum(path, spectrum, comment: Optional[str] = None) -> int:
    rows = zip(spectrum.omega_over_pi.tolist(), spectrum.power_db.tolist())
    return write_csv(path, ["omega_over_pi", "power_db"], rows, comment)
