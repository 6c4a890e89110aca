"""JSON file formats for spectral data and potentials.

Complex entries are stored as ``[re, im]`` pairs. Floats are written with
``repr`` precision, so parse -> serialize reproduces a file byte for byte.
"""
from __future__ import annotations

import json
import math

import numpy as np

from .core import Potential, UniformGrid
from .errors import DiracInvError
from .spectra import EigenRecord, SpectralData

SCHEMA_VERSION = 1


class FormatError(DiracInvError, ValueError):
    """Malformed input file; ``locator`` points at the offending element."""

    def __init__(self, locator, message):
        self.locator = locator
        super().__init__(f"{locator}: {message}")


def _complex_matrix_to_json(m):
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]


def _number(value, loc):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise FormatError(loc, f"expected a number, got {type(value).__name__}")
    if not math.isfinite(value):
        raise FormatError(loc, "non-finite number")
    return float(value)


def _integer(value, loc, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise FormatError(loc, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise FormatError(loc, f"must be >= {minimum}, got {value}")
    return value


def _complex_matrix(value, r, loc):
    if not isinstance(value, list) or len(value) != r:
        raise FormatError(loc, f"expected {r} rows")
    out = np.empty((r, r), dtype=complex)
    for i, row in enumerate(value):
        if not isinstance(row, list) or len(row) != r:
            raise FormatError(f"{loc}[{i}]", f"expected {r} entries")
        for j, pair in enumerate(row):
            if not isinstance(pair, list) or len(pair) != 2:
                raise FormatError(f"{loc}[{i}][{j}]", "expected a [re, im] pair")
            out[i, j] = complex(_number(pair[0], f"{loc}[{i}][{j}][0]"), _number(pair[1], f"{loc}[{i}][{j}][1]"))
    return out


def _field(obj, key, loc):
    if not isinstance(obj, dict):
        raise FormatError(loc, "expected an object")
    if key not in obj:
        raise FormatError(f"{loc}.{key}" if loc else key, "missing field")
    return obj[key]


def _header(obj, kind):
    version = _field(obj, "schema_version", "")
    if version != SCHEMA_VERSION:
        raise FormatError("schema_version", f"unsupported version {version!r}")
    if obj.get("kind", kind) != kind:
        raise FormatError("kind", f"expected {kind!r}, got {obj.get('kind')!r}")
    return _integer(_field(obj, "r", ""), "r", 1)


def dumps(obj):
    return json.dumps(obj, separators=(",", ":"), allow_nan=False) + "\n"


def spectral_data_to_json(data):
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "spectral_data",
        "r": data.r,
        "n_max": data.n_max,
        "records": [{"lambda": rec.lam, "alpha": _complex_matrix_to_json(rec.alpha)} for rec in data.records],
    }


def spectral_data_from_json(obj):
    r = _header(obj, "spectral_data")
    n_max = _integer(_field(obj, "n_max", ""), "n_max", 0)
    recs_in = _field(obj, "records", "")
    if not isinstance(recs_in, list):
        raise FormatError("records", "expected a list")
    records = []
    for k, rec in enumerate(recs_in):
        loc = f"records[{k}]"
        lam = _number(_field(rec, "lambda", loc), f"{loc}.lambda")
        alpha = _complex_matrix(_field(rec, "alpha", loc), r, f"{loc}.alpha")
        try:
            records.append(EigenRecord(lam, alpha))
        except ValueError as exc:
            raise FormatError(loc, str(exc)) from exc
    try:
        return SpectralData(r, tuple(records), n_max)
    except ValueError as exc:
        raise FormatError("records", str(exc)) from exc


def potential_to_json(q):
    g = q.grid
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "potential",
        "r": q.r,
        "grid": {"a": g.a, "b": g.b, "n": g.n},
        "samples": [_complex_matrix_to_json(m) for m in q.samples],
    }


def potential_from_json(obj):
    r = _header(obj, "potential")
    g = _field(obj, "grid", "")
    a = _number(_field(g, "a", "grid"), "grid.a")
    b = _number(_field(g, "b", "grid"), "grid.b")
    n = _integer(_field(g, "n", "grid"), "grid.n", 1)
    if (a, b) != (0.0, 1.0):
        raise FormatError("grid", f"potential grid must span [0, 1], got [{a}, {b}]")
    samples = _field(obj, "samples", "")
    if not isinstance(samples, list) or len(samples) != n + 1:
        raise FormatError("samples", f"expected {n + 1} samples")
    vals = np.array([_complex_matrix(m, r, f"samples[{k}]") for k, m in enumerate(samples)])
    try:
        return Potential(r, UniformGrid(a, b, n), vals)
    except ValueError as exc:
        raise FormatError("samples", str(exc)) from exc


def _load(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}:{exc.lineno}:{exc.colno}", exc.msg) from exc


def read_spectral_data(path):
    return spectral_data_from_json(_load(path))


def read_potential(path):
    return potential_from_json(_load(path))


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(obj))
