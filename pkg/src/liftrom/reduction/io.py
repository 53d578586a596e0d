"""Deterministic JSON artifacts for bases, reduced operators and manifests."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from ..systems import Layout
from ..tensor import matrix_from_json, matrix_to_json
from .deim import DEIMOperator
from .pod import BlockBasis

__all__ = ["dump_json", "config_hash", "basis_to_json", "basis_from_json", "deim_to_json",
           "deim_from_json", "operators_to_json", "write_artifacts", "read_manifest"]


def dump_json(obj, path):
    """Write JSON with sorted keys and shortest round-trip floats."""
    text = json.dumps(obj, sort_keys=True, indent=1, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def config_hash(mapping):
    blob = json.dumps(mapping, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def basis_to_json(basis: BlockBasis):
    return {"blocks": [{"name": name, "full_size": size, "V": matrix_to_json(V)}
                       for name, size, V in zip(basis.names, basis.full_sizes, basis.V)]}


def basis_from_json(data):
    return BlockBasis([(b["name"], b["full_size"], matrix_from_json(b["V"]))
                       for b in data["blocks"]])


def deim_to_json(deim: DEIMOperator):
    return {"U": matrix_to_json(deim.U), "indices": [int(i) for i in deim.indices]}


def deim_from_json(data):
    return DEIMOperator(matrix_from_json(data["U"]), np.asarray(data["indices"], dtype=int))


def _op(A):
    if A is None:
        return None
    if hasattr(A, "to_json"):
        return A.to_json()
    return matrix_to_json(A)


def operators_to_json(rom):
    """Reduced operators of any ROM class in this package."""
    if hasattr(rom, "H2t"):
        out = {"kind": "qbdae", "E11": _op(rom.E11), "A11": _op(rom.A11), "A12": _op(rom.A12),
               "B1": _op(rom.B1), "H1": _op(rom.H1), "H2": _op(rom.H2t),
               "N11": [_op(N) for N in rom.N11], "N12": [_op(N) for N in rom.N12]}
    elif hasattr(rom, "G"):
        out = {"kind": "quartic", "A": _op(rom.A), "B": _op(rom.B),
               "G": {str(k): _op(G) for k, G in rom.G.items()},
               "N1": [_op(N) for N in rom.N1], "N2": [_op(N) for N in rom.N2]}
    elif hasattr(rom, "H"):
        out = {"kind": "qb", "E": _op(rom.E), "A": _op(rom.A), "B": _op(rom.B),
               "H": _op(rom.H), "N": [_op(N) for N in rom.N]}
    else:
        out = {"kind": "pod-deim" if rom.deim is not None else "pod", "A": _op(rom.A),
               "B": _op(rom.B), "F": _op(rom.Fr)}
        if rom.deim is not None:
            out["indices"] = [int(i) for i in rom.deim.indices]
            out["samples"] = [_op(S) for S in rom.samples]
    mass = getattr(rom, "mass", None)
    out["mass"] = None if mass is None else np.asarray(mass, dtype=float).tolist()
    out["layout"] = rom.layout.to_json() if isinstance(rom.layout, Layout) else None
    return out


def write_artifacts(out_dir, manifest, basis=None, rom=None, deim=None, sigma=None):
    """Write ``manifest.json`` plus optional ``basis.json``, ``operators.json``,
    ``deim.json`` and ``sigma.json`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {}
    if basis is not None:
        dump_json(basis_to_json(basis), out / "basis.json")
        files["basis"] = "basis.json"
    if rom is not None:
        dump_json(operators_to_json(rom), out / "operators.json")
        files["operators"] = "operators.json"
    if deim is not None:
        dump_json(deim_to_json(deim), out / "deim.json")
        files["deim"] = "deim.json"
    if sigma is not None:
        dump_json({k: np.asarray(v).tolist() for k, v in sigma.items()}, out / "sigma.json")
        files["sigma"] = "sigma.json"
    manifest = dict(manifest, files=files)
    dump_json(manifest, out / "manifest.json")
    return manifest


def read_manifest(path):
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    return json.loads(path.read_text(encoding="utf-8"))
