"""Versioned checkpoint manifests: JSON with base64 little-endian f32 arrays."""

from __future__ import annotations

import base64
import hashlib
import json

import numpy as np

from .nn import ParamSet

KINDS = ("embedding", "policy", "discriminator")


def _encode_array(arr: np.ndarray):
    arr = np.asarray(arr, dtype="<f4")
    return {
        "shape": list(arr.shape),
        "data": base64.b64encode(arr.tobytes()).decode("ascii"),
    }


def _decode_array(entry):
    arr = np.frombuffer(base64.b64decode(entry["data"]), dtype="<f4")
    return arr.reshape(entry["shape"]).copy()


def _content_hash(arrays_doc):
    blob = json.dumps(arrays_doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def save_checkpoint(path, kind, params: ParamSet, d_z, config=None, extra=None):
    if kind not in KINDS:
        raise ValueError(f"unknown checkpoint kind {kind!r}")
    arrays = {name: _encode_array(arr) for name, arr in params.items()}
    doc = {
        "version": 1,
        "kind": kind,
        "d_z": int(d_z),
        "config": config or {},
        "hash": _content_hash(arrays),
        "arrays": arrays,
    }
    if extra:
        doc.update(extra)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f)


def load_checkpoint(path, expect_kind=None):
    """Returns (params, manifest dict without arrays)."""
    with open(path, "r", encoding="utf-8") as f:
        doc = json.load(f)
    if doc.get("version") != 1:
        raise ValueError("unsupported checkpoint version")
    if doc.get("kind") not in KINDS:
        raise ValueError(f"unknown checkpoint kind {doc.get('kind')!r}")
    if expect_kind and doc["kind"] != expect_kind:
        raise ValueError(f"expected {expect_kind!r} checkpoint, got {doc['kind']!r}")
    if _content_hash(doc["arrays"]) != doc.get("hash"):
        raise ValueError("checkpoint content hash mismatch")
    params = ParamSet({name: _decode_array(e) for name, e in doc["arrays"].items()})
    meta = {k: v for k, v in doc.items() if k != "arrays"}
    return params, meta
