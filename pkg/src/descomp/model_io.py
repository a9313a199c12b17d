"""Versioned binary container for trained ensembles.

Layout: 8-byte magic, little-endian uint32 format version, uint64 payload
length, 32-byte SHA-256 of the payload, then the payload — a JSON document
in which numpy arrays are embedded as dtype/shape/base64-raw-bytes triples.
Floats therefore survive a save/load cycle bit-for-bit, and identical
ensembles serialize to identical bytes (keys are sorted).
"""

from __future__ import annotations

import base64
import hashlib
import json
import struct

import numpy as np

from .classifiers import ClassifierSpec, classifier_from_state
from .competence import CompetenceSet, MethodParams
from .data import AttributeMeta
from .ensemble import TrainedEnsemble
from .field import CompetenceField
from .preprocess import OneHotMap, PcaProjection, Pipeline, Standardizer

MAGIC = b"DESMODEL"
FORMAT_VERSION = 1


class ModelError(ValueError):
    """Unreadable or corrupted model file."""


def _encode(value):
    if isinstance(value, np.ndarray):
        contiguous = np.ascontiguousarray(value)
        return {"__ndarray__": True,
                "dtype": contiguous.dtype.str,
                "shape": list(contiguous.shape),
                "data": base64.b64encode(contiguous.tobytes()).decode("ascii")}
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, dict):
        return {k: _encode(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_encode(v) for v in value]
    return value


def _decode(value):
    if isinstance(value, dict):
        if value.get("__ndarray__"):
            raw = base64.b64decode(value["data"])
            arr = np.frombuffer(raw, dtype=np.dtype(value["dtype"]))
            return arr.reshape(value["shape"]).copy()
        return {k: _decode(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_decode(v) for v in value]
    return value


def _spec_state(spec: ClassifierSpec) -> dict:
    return {"kind": spec.kind, "k": spec.k, "bandwidth": spec.bandwidth}


def _spec_from_state(state: dict) -> ClassifierSpec:
    return ClassifierSpec(kind=state["kind"], k=int(state["k"]),
                          bandwidth=state["bandwidth"])


def _pipeline_state(pipeline: Pipeline) -> dict:
    return {
        "one_hot": {"widths": list(pipeline.one_hot.widths),
                    "output_dim": pipeline.one_hot.output_dim},
        "standardizer": {"means": pipeline.standardizer.means,
                         "stds": pipeline.standardizer.stds,
                         "kept": pipeline.standardizer.kept,
                         "dropped": list(pipeline.standardizer.dropped)},
        "pca": {"components": pipeline.pca.components,
                "means": pipeline.pca.means,
                "eigenvalues": pipeline.pca.eigenvalues,
                "total_variance": pipeline.pca.total_variance,
                "retained_variance_fraction": pipeline.pca.retained_variance_fraction,
                "variance_threshold": pipeline.pca.variance_threshold},
    }


def _pipeline_from_state(state: dict) -> Pipeline:
    oh = state["one_hot"]
    st = state["standardizer"]
    pc = state["pca"]
    return Pipeline(
        one_hot=OneHotMap(tuple(int(w) for w in oh["widths"]), int(oh["output_dim"])),
        standardizer=Standardizer(
            means=np.asarray(st["means"], dtype=float),
            stds=np.asarray(st["stds"], dtype=float),
            kept=np.asarray(st["kept"], dtype=int),
            dropped=tuple(int(j) for j in st["dropped"])),
        pca=PcaProjection(
            components=np.asarray(pc["components"], dtype=float),
            means=np.asarray(pc["means"], dtype=float),
            eigenvalues=np.asarray(pc["eigenvalues"], dtype=float),
            total_variance=float(pc["total_variance"]),
            retained_variance_fraction=float(pc["retained_variance_fraction"]),
            variance_threshold=float(pc["variance_threshold"])),
    )


def ensemble_state(ensemble: TrainedEnsemble) -> dict:
    """Plain serializable structure holding the whole ensemble."""
    return {
        "pipeline": _pipeline_state(ensemble.pipeline),
        "pool": [{"spec": _spec_state(clf.spec), "state": clf.to_state()}
                 for clf in ensemble.pool],
        "competence_sets": [{"points": f.sources.points,
                             "values": f.sources.values,
                             "classifier_id": f.sources.classifier_id}
                            for f in ensemble.fields],
        "alpha": ensemble.alpha,
        "n_classes": ensemble.n_classes,
        "method": ensemble.method,
        "params": {"k_bootstrap": ensemble.params.k_bootstrap,
                   "mc_samples": ensemble.params.mc_samples,
                   "sigma_scale": ensemble.params.sigma_scale},
        "seed": ensemble.seed,
        "class_names": list(ensemble.class_names) if ensemble.class_names else None,
        "attribute_meta": [{"name": m.name, "kind": m.kind,
                            "categories": list(m.categories)}
                           for m in ensemble.attribute_meta],
    }


def ensemble_from_state(state: dict) -> TrainedEnsemble:
    pool = tuple(
        classifier_from_state(_spec_from_state(entry["spec"]), entry["state"])
        for entry in state["pool"])
    fields = tuple(
        CompetenceField(CompetenceSet(
            points=np.asarray(cs["points"], dtype=float),
            values=np.asarray(cs["values"], dtype=float),
            classifier_id=cs["classifier_id"]))
        for cs in state["competence_sets"])
    params = MethodParams(
        k_bootstrap=int(state["params"]["k_bootstrap"]),
        mc_samples=int(state["params"]["mc_samples"]),
        sigma_scale=float(state["params"]["sigma_scale"]))
    meta = tuple(
        AttributeMeta(m["name"], m["kind"], tuple(m["categories"]))
        for m in state["attribute_meta"])
    class_names = state["class_names"]
    return TrainedEnsemble(
        pool=pool, fields=fields, alpha=float(state["alpha"]),
        n_classes=int(state["n_classes"]),
        pipeline=_pipeline_from_state(state["pipeline"]),
        method=state["method"], params=params, seed=int(state["seed"]),
        class_names=tuple(class_names) if class_names else None,
        attribute_meta=meta)


def serialize_model(ensemble: TrainedEnsemble) -> bytes:
    payload = json.dumps(_encode(ensemble_state(ensemble)),
                         sort_keys=True, separators=(",", ":")).encode("utf-8")
    digest = hashlib.sha256(payload).digest()
    header = MAGIC + struct.pack("<I", FORMAT_VERSION) + struct.pack("<Q", len(payload))
    return header + digest + payload


def deserialize_model(blob: bytes) -> TrainedEnsemble:
    header_len = len(MAGIC) + 4 + 8 + 32
    if len(blob) < header_len or blob[:len(MAGIC)] != MAGIC:
        raise ModelError("not a model file")
    offset = len(MAGIC)
    (version,) = struct.unpack_from("<I", blob, offset)
    offset += 4
    if version != FORMAT_VERSION:
        raise ModelError(f"unsupported version {version} (expected {FORMAT_VERSION})")
    (length,) = struct.unpack_from("<Q", blob, offset)
    offset += 8
    digest = blob[offset:offset + 32]
    payload = blob[offset + 32:]
    if len(payload) != length or hashlib.sha256(payload).digest() != digest:
        raise ModelError("checksum mismatch")
    return ensemble_from_state(_decode(json.loads(payload.decode("utf-8"))))


def save_model(ensemble: TrainedEnsemble, path) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize_model(ensemble))


def load_model(path) -> TrainedEnsemble:
    with open(path, "rb") as fh:
        return deserialize_model(fh.read())
