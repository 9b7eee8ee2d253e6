"""File formats: NPY matrices, eigenvalue text files and run manifests.

Only a strict subset of NPY v1.0 is accepted: little-endian ``<f4`` or
``<f8``, C order, two dimensions. Fortran-ordered files are rejected rather
than transposed, since an axis swap would flip the orientation used for the
spectrum.

Manifest JSON::

    {
      "model_label": "T1",
      "matrix_id": "en.0.s.a.v",
      "c_constant": 2.0,          # optional
      "min_tail": 10,             # optional
      "min_tail_fraction": 0.5,   # optional
      "entries": [{"epoch": 1, "path": "epoch_0001.npy", "kind": "matrix"}, ...]
    }

``kind`` is ``"matrix"`` (an NPY file) or ``"eigenvalues"`` (a text file).
"""

import ast
import json
import math
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .criterion import DEFAULT_C, DEFAULT_MIN_TAIL_FRACTION
from .errors import FormatError, InvalidDataError, SchemaError, UnsupportedFormatError
from .powerlaw import DEFAULT_MIN_TAIL
from .spectra import Spectrum, WeightMatrix

NPY_MAGIC = b"\x93NUMPY"
_PREAMBLE = 10
_DTYPES = {"<f4": np.dtype("<f4"), "<f8": np.dtype("<f8")}
KINDS = ("matrix", "eigenvalues")


def _npy_header(descr, shape):
    text = "{'descr': '%s', 'fortran_order': False, 'shape': %r, }" % (descr, tuple(shape))
    total = _PREAMBLE + len(text) + 1
    text += " " * (-total % 64) + "\n"
    return NPY_MAGIC + b"\x01\x00" + struct.pack("<H", len(text)) + text.encode("latin1")


def write_matrix(path, matrix):
    """Write a 2-D float matrix as NPY v1.0 (byte-identical to ``numpy.save``)."""
    arr = matrix.values if isinstance(matrix, WeightMatrix) else np.asarray(matrix)
    if arr.ndim != 2:
        raise UnsupportedFormatError(f"only 2-D matrices can be written, got {arr.ndim}-D")
    descr = "<f4" if arr.dtype == np.float32 else "<f8"
    data = np.ascontiguousarray(arr, dtype=_DTYPES[descr])
    with open(path, "wb") as fh:
        fh.write(_npy_header(descr, data.shape))
        fh.write(data.tobytes(order="C"))


def read_matrix(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 6 or raw[:6] != NPY_MAGIC:
        raise FormatError("bad NPY magic string", offset=0)
    if len(raw) < 8 or raw[6:8] != b"\x01\x00":
        raise FormatError(f"unsupported NPY version {tuple(raw[6:8])}; only 1.0 is read", offset=6)
    if len(raw) < _PREAMBLE:
        raise FormatError("truncated NPY header length", offset=8)
    (header_len,) = struct.unpack("<H", raw[8:10])
    data_start = _PREAMBLE + header_len
    if data_start > len(raw):
        raise FormatError(f"header length {header_len} runs past end of file", offset=8)
    if data_start % 16:
        raise FormatError(f"header is not 16-byte aligned (data starts at {data_start})", offset=8)
    try:
        header = ast.literal_eval(raw[_PREAMBLE:data_start].decode("latin1"))
    except (ValueError, SyntaxError) as exc:
        raise FormatError(f"unparsable NPY header: {exc}", offset=_PREAMBLE) from None
    if not isinstance(header, dict) or set(header) != {"descr", "fortran_order", "shape"}:
        raise FormatError("NPY header must hold exactly descr, fortran_order and shape", offset=_PREAMBLE)

    descr, fortran, shape = header["descr"], header["fortran_order"], header["shape"]
    if descr not in _DTYPES:
        raise UnsupportedFormatError(f"unsupported dtype {descr!r}; expected '<f4' or '<f8'", offset=_PREAMBLE)
    if fortran is not False:
        raise UnsupportedFormatError("Fortran-ordered arrays are not accepted", offset=_PREAMBLE)
    if not isinstance(shape, tuple) or not all(isinstance(s, int) and s >= 0 for s in shape):
        raise FormatError(f"invalid shape {shape!r}", offset=_PREAMBLE)
    if len(shape) != 2:
        raise UnsupportedFormatError(f"expected a 2-D array, got {len(shape)}-D", offset=_PREAMBLE)

    dtype = _DTYPES[descr]
    expected = shape[0] * shape[1] * dtype.itemsize
    if len(raw) - data_start != expected:
        raise FormatError(
            f"expected {expected} data bytes, found {len(raw) - data_start}", offset=data_start
        )
    arr = np.frombuffer(raw, dtype=dtype, offset=data_start).reshape(shape).astype(np.float64)
    bad = np.argwhere(~np.isfinite(arr))
    if bad.size:
        index = tuple(int(i) for i in bad[0])
        raise InvalidDataError(f"non-finite value at index {index}", index=index)
    if arr.size == 0:
        raise InvalidDataError(f"empty matrix of shape {shape}")
    return WeightMatrix(arr)


def read_eigenvalues(path):
    """Eigenvalues, one per line, with an optional ``eigenvalue`` header line."""
    try:
        text = Path(path).read_bytes().decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"file is not UTF-8: {exc}", offset=exc.start) from None
    values = []
    for lineno, line in enumerate(text.split("\n"), start=1):
        token = line.strip().replace("\u2212", "-")
        if not token:
            continue
        if lineno == 1 and token.lower() == "eigenvalue":
            continue
        try:
            v = float(token)
        except ValueError:
            raise FormatError(f"line {lineno}: cannot parse {token!r}", line=lineno) from None
        if not math.isfinite(v):
            raise InvalidDataError(f"line {lineno}: non-finite value", line=lineno)
        if v < 0:
            raise InvalidDataError(f"line {lineno}: negative eigenvalue {v}", line=lineno)
        values.append(v)
    if not values:
        raise InvalidDataError("no eigenvalues in file")
    return Spectrum.from_values(values)


def write_eigenvalues(path, spectrum, header=True):
    ev = spectrum.eigenvalues if isinstance(spectrum, Spectrum) else np.asarray(spectrum)
    lines = (["eigenvalue"] if header else []) + [repr(float(v)) for v in ev]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


@dataclass(frozen=True)
class ManifestEntry:
    epoch: int
    path: Path
    kind: str = "matrix"


@dataclass(frozen=True)
class RunManifest:
    model_label: str
    matrix_id: str
    entries: tuple
    c_constant: float = DEFAULT_C
    min_tail: int = DEFAULT_MIN_TAIL
    min_tail_fraction: float = DEFAULT_MIN_TAIL_FRACTION
    base_dir: Path = field(default=None, compare=False)

    def to_dict(self, relative_to=None):
        def rel(p):
            if relative_to is None:
                return str(p)
            return os.path.relpath(p, relative_to)

        return {
            "model_label": self.model_label,
            "matrix_id": self.matrix_id,
            "c_constant": self.c_constant,
            "min_tail": self.min_tail,
            "min_tail_fraction": self.min_tail_fraction,
            "entries": [{"epoch": e.epoch, "path": rel(e.path), "kind": e.kind} for e in self.entries],
        }


def _require(doc, key, types, where=""):
    name = f"{where}{key}"
    if key not in doc:
        raise SchemaError(f"missing field {name!r}", field=name)
    value = doc[key]
    if isinstance(value, bool) or not isinstance(value, types):
        raise SchemaError(f"field {name!r} has wrong type {type(value).__name__}", field=name)
    return value


def parse_manifest(doc, base_dir="."):
    if not isinstance(doc, dict):
        raise SchemaError("manifest must be a JSON object", field="")
    base = Path(base_dir)
    label = _require(doc, "model_label", str)
    matrix_id = _require(doc, "matrix_id", str)
    c = float(_require(doc, "c_constant", (int, float))) if "c_constant" in doc else DEFAULT_C
    if not c > 0:
        raise SchemaError("c_constant must be positive", field="c_constant")
    min_tail = _require(doc, "min_tail", int) if "min_tail" in doc else DEFAULT_MIN_TAIL
    if min_tail < 2:
        raise SchemaError("min_tail must be at least 2", field="min_tail")
    frac = DEFAULT_MIN_TAIL_FRACTION
    if "min_tail_fraction" in doc:
        frac = float(_require(doc, "min_tail_fraction", (int, float)))
        if not 0 <= frac <= 1:
            raise SchemaError("min_tail_fraction must lie in [0, 1]", field="min_tail_fraction")
    raw_entries = _require(doc, "entries", list)
    if not raw_entries:
        raise SchemaError("entries must not be empty", field="entries")

    entries = []
    for i, item in enumerate(raw_entries):
        where = f"entries[{i}]."
        if not isinstance(item, dict):
            raise SchemaError(f"entries[{i}] must be an object", field=f"entries[{i}]")
        epoch = _require(item, "epoch", int, where)
        if epoch < 0:
            raise SchemaError("epoch must be non-negative", field=f"{where}epoch")
        if entries and epoch == entries[-1].epoch:
            raise SchemaError(f"duplicate epoch {epoch}", field=f"{where}epoch")
        if entries and epoch < entries[-1].epoch:
            raise SchemaError(f"epochs must be ascending ({epoch} after {entries[-1].epoch})", field=f"{where}epoch")
        path = _require(item, "path", str, where)
        if not path:
            raise SchemaError("path must be non-empty", field=f"{where}path")
        kind = _require(item, "kind", str, where) if "kind" in item else "matrix"
        if kind not in KINDS:
            raise SchemaError(f"kind must be one of {KINDS}, got {kind!r}", field=f"{where}kind")
        p = Path(path)
        entries.append(ManifestEntry(epoch=epoch, path=p if p.is_absolute() else base / p, kind=kind))
    return RunManifest(
        model_label=label,
        matrix_id=matrix_id,
        entries=tuple(entries),
        c_constant=c,
        min_tail=min_tail,
        min_tail_fraction=frac,
        base_dir=base,
    )


def load_manifest(path):
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"manifest is not valid JSON: {exc.msg}", offset=exc.pos, line=exc.lineno) from None
    return parse_manifest(doc, path.parent)


def write_manifest(path, manifest):
    path = Path(path)
    doc = manifest.to_dict(relative_to=path.parent)
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_spectrum(entry):
    """Spectrum for a manifest entry, reading whichever file kind it names."""
    from .spectra import esd

    if entry.kind == "eigenvalues":
        return read_eigenvalues(entry.path)
    return esd(read_matrix(entry.path))
