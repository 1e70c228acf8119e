"""Model files: a JSON document with a layer manifest and base64 float arrays.

Layout (``version`` 1)::

    {
      "format": "plnet-model",
      "version": 1,
      "kind": "monlip" | "bilip" | "conditioned" | "plnet",
      "manifest": {...},                  # architecture, bounds, extra metadata
      "arrays": {"<dotted.key>": {"shape": [...], "data": "<base64>"}, ...}
    }

A single monotone layer (``kind`` "monlip") also stores its materialized
weights under ``"weights"`` (dense ``S``, ``V`` and ``psi``); loading checks
that they agree with the free parameters.

Array data is the row-major little-endian float64 byte string of the array.
Dotted keys mirror the nested parameter structure (see :mod:`plnet.params`).
"""

from __future__ import annotations

import base64
import json
from pathlib import Path

import numpy as np

from . import monlip
from .bilip import BiLipModel, ConditionedBiLipModel, _spec_from_dict, _spec_to_dict
from .errors import ConfigError
from .params import flatten, unflatten
from .pl import PLNet

FORMAT = "plnet-model"
VERSION = 1
_DTYPE = np.dtype("<f8")


def encode_array(a) -> dict:
    a = np.ascontiguousarray(np.asarray(a, dtype=_DTYPE))
    return {"shape": list(a.shape), "data": base64.b64encode(a.tobytes()).decode("ascii")}


def decode_array(d: dict) -> np.ndarray:
    raw = base64.b64decode(d["data"])
    return np.frombuffer(raw, dtype=_DTYPE).reshape(d["shape"]).astype(np.float64)


def _encode_tree(tree) -> dict:
    return {k: encode_array(v) for k, v in flatten(tree).items()}


def _decode_tree(arrays: dict, template):
    return unflatten({k: decode_array(v) for k, v in arrays.items()}, template)


def to_document(obj) -> dict:
    if isinstance(obj, monlip.LayerWeights):
        raise ConfigError("save the free parameters (spec + params), not materialized weights")
    if isinstance(obj, tuple) and len(obj) == 2 and isinstance(obj[0], monlip.MonLipSpec):
        spec, params = obj
        kind, manifest, params = "monlip", {"layer": _spec_to_dict(spec)}, params
    elif isinstance(obj, BiLipModel):
        kind, manifest, params = "bilip", obj.manifest(), obj.params
    elif isinstance(obj, ConditionedBiLipModel):
        kind, manifest, params = "conditioned", obj.manifest(), obj.params
    elif isinstance(obj, PLNet):
        kind = "plnet"
        manifest = {
            "g_kind": "conditioned" if obj.conditioned else "bilip",
            "g": obj.g.manifest(),
            "c": obj.c,
            "m": obj.m,
            "domain": None if obj.domain is None else obj.domain.tolist(),
            "cond_domain": None if obj.cond_domain is None else obj.cond_domain.tolist(),
        }
        params = obj.g.params
    else:
        raise ConfigError(f"cannot serialize {type(obj).__name__}")
    doc = {"format": FORMAT, "version": VERSION, "kind": kind, "manifest": manifest, "arrays": _encode_tree(params)}
    if kind == "monlip":
        doc["weights"] = _encode_tree(_dense_weights(monlip.materialize(spec, params)))
    return doc


def _dense_weights(w: monlip.LayerWeights) -> dict:
    return {"S": w.dense_S(), "V": w.dense_V(), "psi": w.psi()}


def _blank_bilip(manifest: dict) -> BiLipModel:
    return BiLipModel([_spec_from_dict(d) for d in manifest["layers"]], seed=0)


def _blank_conditioned(manifest: dict) -> ConditionedBiLipModel:
    return ConditionedBiLipModel(_blank_bilip(manifest["base"]), manifest["cond_dim"], manifest["hidden"], seed=0)


def from_document(doc: dict):
    if doc.get("format") != FORMAT:
        raise ConfigError(f"not a model file (format={doc.get('format')!r})")
    if doc.get("version") != VERSION:
        raise ConfigError(f"unsupported model file version {doc.get('version')!r}")
    kind, manifest, arrays = doc["kind"], doc["manifest"], doc["arrays"]
    if kind == "monlip":
        spec = _spec_from_dict(manifest["layer"])
        params = _decode_tree(arrays, spec.init_params(np.random.default_rng(0)))
        spec.check_params(params)
        if "weights" in doc:
            stored = {k: decode_array(v) for k, v in doc["weights"].items()}
            fresh = _dense_weights(monlip.materialize(spec, params))
            for k, v in fresh.items():
                if k not in stored or stored[k].shape != v.shape or not np.allclose(stored[k], v, rtol=0, atol=1e-10):
                    raise ConfigError(f"stored weights {k!r} do not match the free parameters")
        return spec, params
    if kind == "bilip":
        blank = _blank_bilip(manifest)
        return BiLipModel.from_manifest(manifest, _decode_tree(arrays, blank.params))
    if kind == "conditioned":
        blank = _blank_conditioned(manifest)
        return ConditionedBiLipModel.from_manifest(manifest, _decode_tree(arrays, blank.params))
    if kind == "plnet":
        if manifest["g_kind"] == "conditioned":
            blank = _blank_conditioned(manifest["g"])
            g = ConditionedBiLipModel.from_manifest(manifest["g"], _decode_tree(arrays, blank.params))
        else:
            blank = _blank_bilip(manifest["g"])
            g = BiLipModel.from_manifest(manifest["g"], _decode_tree(arrays, blank.params))
        return PLNet(g, manifest["c"], manifest.get("domain"), manifest.get("cond_domain"))
    raise ConfigError(f"unknown model kind {kind!r}")


def save_model(path, obj) -> None:
    Path(path).write_text(json.dumps(to_document(obj)))


def load_model(path):
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return from_document(doc)
