"""Raw tensor files with key/value sidecars, and Tucker bundles.

A tensor ``NAME.bin`` holds its entries as little-endian IEEE-754 values,
mode-1-fastest.  ``NAME.meta`` holds lines such as::

    dims = 7 5 3
    dtype = f64
"""

from __future__ import annotations

import json
from math import prod
from pathlib import Path
from typing import Sequence

import numpy as np

from .algorithms import TuckerDecomposition

DTYPES = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8")}


class FormatError(ValueError):
    """A tensor or bundle file is malformed."""


def meta_path(path) -> Path:
    return Path(path).with_suffix(".meta")


def parse_meta(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FormatError(f"line {lineno}: expected 'key = value'")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def format_meta(entries: dict) -> str:
    return "".join(f"{k} = {v}\n" for k, v in entries.items())


def write_tensor(T: np.ndarray, path, dtype: str = "f64") -> Path:
    """Write ``T`` to ``path`` and its sidecar; returns the payload path."""
    if dtype not in DTYPES:
        raise FormatError(f"dtype must be one of {sorted(DTYPES)}")
    path = Path(path)
    data = np.asarray(T).astype(DTYPES[dtype]).ravel(order="F")
    path.write_bytes(data.tobytes())
    meta = {"dims": " ".join(str(n) for n in np.shape(T)), "dtype": dtype, "byte_order": "little"}
    meta_path(path).write_text(format_meta(meta), encoding="utf-8")
    return path


def read_meta(path) -> tuple[tuple, str]:
    mp = meta_path(path)
    if not mp.exists():
        raise FormatError(f"missing metadata file {mp}")
    meta = parse_meta(mp.read_text(encoding="utf-8"))
    try:
        dims = tuple(int(x) for x in meta["dims"].split())
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{mp}: bad or missing 'dims'") from exc
    dtype = meta.get("dtype", "f64")
    if dtype not in DTYPES:
        raise FormatError(f"{mp}: unsupported dtype {dtype!r}")
    if meta.get("byte_order", "little") != "little":
        raise FormatError(f"{mp}: only little-endian payloads are supported")
    if not dims or any(n < 1 for n in dims):
        raise FormatError(f"{mp}: dims must be positive")
    return dims, dtype


def read_tensor(path, dims: Sequence[int] | None = None, dtype: str | None = None) -> np.ndarray:
    """Read a payload as a float64 Fortran-ordered array.

    ``dims``/``dtype`` default to the sidecar's values.
    """
    path = Path(path)
    if dims is None or dtype is None:
        mdims, mdtype = read_meta(path)
        dims = mdims if dims is None else tuple(dims)
        dtype = mdtype if dtype is None else dtype
    raw = path.read_bytes()
    dt = DTYPES[dtype]
    expected = prod(dims) * dt.itemsize
    if len(raw) != expected:
        raise FormatError(f"{path}: {len(raw)} bytes, dims {tuple(dims)} as {dtype} need {expected}")
    data = np.frombuffer(raw, dtype=dt).astype(np.float64)
    return np.asfortranarray(data.reshape(tuple(dims), order="F"))


def write_bundle(T: TuckerDecomposition, directory, extra: dict | None = None) -> Path:
    """Write core, factors and ``bundle.meta`` (provenance as JSON values)."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_tensor(T.core, d / "core.bin")
    for j, U in enumerate(T.factors):
        write_tensor(U, d / f"factor_{j}.bin")
    meta = {"ndim": len(T.factors), "ranks": list(T.ranks), "dims": list(T.dims)}
    meta.update(T.provenance)
    meta.update(extra or {})
    text = format_meta({k: json.dumps(v, sort_keys=True) for k, v in meta.items()})
    (d / "bundle.meta").write_text(text, encoding="utf-8")
    return d


def read_bundle(directory) -> TuckerDecomposition:
    d = Path(directory)
    mp = d / "bundle.meta"
    if not mp.exists():
        raise FormatError(f"{d} is not a Tucker bundle (no bundle.meta)")
    try:
        meta = {k: json.loads(v) for k, v in parse_meta(mp.read_text(encoding="utf-8")).items()}
    except json.JSONDecodeError as exc:
        raise FormatError(f"{mp}: {exc}") from exc
    ndim = int(meta.pop("ndim"))
    core = read_tensor(d / "core.bin")
    factors = [read_tensor(d / f"factor_{j}.bin") for j in range(ndim)]
    ranks, dims = tuple(meta.pop("ranks")), tuple(meta.pop("dims"))
    if core.shape != ranks or tuple(U.shape for U in factors) != tuple(zip(dims, ranks)):
        raise FormatError(f"{d}: core/factor shapes disagree with bundle.meta")
    return TuckerDecomposition(core, factors, meta)
