"""Instance and cut documents: JSON on disk, dataclasses in memory.

An instance bundles a positive definite quadratic Q, an excluded region, and
one query point. Region kinds: "polyhedron", "ellipsoid",
"paraboloid_complement". Arrays are nested lists, row-major; floats keep full
repr precision. The sha256 of the canonical serialization identifies an
instance in reports.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .errors import InstanceFormatError
from .model import (
    Cut,
    Ellipsoid,
    FromBall,
    FromLiftedAnchor,
    FromLinearization,
    FromParaboloidAnchor,
    Ball,
    ParaboloidComplement,
    Polyhedron,
    QuadraticForm,
    Region,
)
from .paraboloid import ParaboloidCut

KIND_POLYHEDRON = "polyhedron"
KIND_ELLIPSOID = "ellipsoid"
KIND_PARABOLOID = "paraboloid_complement"


@dataclass(frozen=True, eq=False)
class Instance:
    quadratic: QuadraticForm
    region: Region
    query_x: np.ndarray
    query_q: float
    query_w: float | None = None

    def __post_init__(self):
        x = np.asarray(self.query_x, dtype=float).copy()
        x.setflags(write=False)
        object.__setattr__(self, "query_x", x)

    @property
    def dim(self) -> int:
        return self.query_x.shape[0]


def _matrix(obj, name: str) -> np.ndarray:
    try:
        arr = np.asarray(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InstanceFormatError(f"{name} is not numeric") from exc
    if arr.ndim != 2:
        raise InstanceFormatError(f"{name} must be a matrix (list of rows)")
    return arr


def _vector(obj, name: str) -> np.ndarray:
    try:
        arr = np.asarray(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InstanceFormatError(f"{name} is not numeric") from exc
    if arr.ndim != 1:
        raise InstanceFormatError(f"{name} must be a flat list of numbers")
    return arr


def _scalar(obj, name: str) -> float:
    if isinstance(obj, bool) or not isinstance(obj, (int, float)):
        raise InstanceFormatError(f"{name} must be a number")
    return float(obj)


def _field(doc: dict, name: str):
    if not isinstance(doc, dict):
        raise InstanceFormatError(f"expected an object around field {name!r}")
    if name not in doc:
        raise InstanceFormatError(f"missing field {name!r}")
    return doc[name]


def region_to_dict(region: Region) -> dict:
    if isinstance(region, Polyhedron):
        out = {
            "kind": KIND_POLYHEDRON,
            "normals": region.normals.tolist(),
            "offsets": region.offsets.tolist(),
        }
        if region.interior_point is not None:
            out["interior_point"] = region.interior_point.tolist()
        return out
    if isinstance(region, Ellipsoid):
        return {
            "kind": KIND_ELLIPSOID,
            "matrix": region.matrix.tolist(),
            "lin": region.lin.tolist(),
            "offset": float(region.offset),
        }
    if isinstance(region, ParaboloidComplement):
        return {
            "kind": KIND_PARABOLOID,
            "normals": region.normals.tolist(),
            "offsets": region.offsets.tolist(),
        }
    raise TypeError(f"unsupported region type {type(region)!r}")


def region_from_dict(doc: dict) -> Region:
    kind = _field(doc, "kind")
    try:
        if kind == KIND_POLYHEDRON:
            interior = doc.get("interior_point")
            return Polyhedron(
                _matrix(_field(doc, "normals"), "region.normals"),
                _vector(_field(doc, "offsets"), "region.offsets"),
                interior_point=(
                    _vector(interior, "region.interior_point")
                    if interior is not None
                    else None
                ),
            )
        if kind == KIND_ELLIPSOID:
            return Ellipsoid(
                _matrix(_field(doc, "matrix"), "region.matrix"),
                _vector(_field(doc, "lin"), "region.lin"),
                _scalar(_field(doc, "offset"), "region.offset"),
            )
        if kind == KIND_PARABOLOID:
            return ParaboloidComplement(
                _matrix(_field(doc, "normals"), "region.normals"),
                _vector(_field(doc, "offsets"), "region.offsets"),
            )
    except (ValueError,) as exc:
        raise InstanceFormatError(str(exc)) from exc
    raise InstanceFormatError(f"unknown region kind {kind!r}")


def instance_to_dict(inst: Instance) -> dict:
    query = {"x_star": inst.query_x.tolist(), "q_star": float(inst.query_q)}
    if inst.query_w is not None:
        query["w_star"] = float(inst.query_w)
    return {
        "dimension": inst.dim,
        "quadratic": {
            "M": inst.quadratic.matrix.tolist(),
            "l": inst.quadratic.linear.tolist(),
            "m0": float(inst.quadratic.constant),
        },
        "region": region_to_dict(inst.region),
        "query": query,
    }


def instance_from_dict(doc: dict) -> Instance:
    if not isinstance(doc, dict):
        raise InstanceFormatError("instance document must be an object")
    dim = _field(doc, "dimension")
    if isinstance(dim, bool) or not isinstance(dim, int) or dim < 1:
        raise InstanceFormatError("dimension must be a positive integer")
    quad_doc = _field(doc, "quadratic")
    try:
        quad = QuadraticForm(
            _matrix(_field(quad_doc, "M"), "quadratic.M"),
            _vector(_field(quad_doc, "l"), "quadratic.l"),
            _scalar(_field(quad_doc, "m0"), "quadratic.m0"),
        )
    except (ValueError,) as exc:
        raise InstanceFormatError(str(exc)) from exc
    region = region_from_dict(_field(doc, "region"))
    query = _field(doc, "query")
    x_star = _vector(_field(query, "x_star"), "query.x_star")
    q_star = _scalar(_field(query, "q_star"), "query.q_star")
    w_star = query.get("w_star")
    if w_star is not None:
        w_star = _scalar(w_star, "query.w_star")
    if quad.dim != dim or region.dim != dim or x_star.shape[0] != dim:
        raise InstanceFormatError("dimension field disagrees with the data")
    if isinstance(region, ParaboloidComplement) and w_star is None:
        raise InstanceFormatError("paraboloid_complement queries need w_star")
    return Instance(quad, region, x_star, q_star, w_star)


def canonical_bytes(doc: dict) -> bytes:
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()


def instance_hash(inst: Instance) -> str:
    return hashlib.sha256(canonical_bytes(instance_to_dict(inst))).hexdigest()


def load_instance(path: str) -> Instance:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InstanceFormatError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"{path} is not valid JSON: {exc}") from exc
    return instance_from_dict(doc)


def save_instance(path: str, inst: Instance) -> None:
    with open(path, "w") as fh:
        json.dump(instance_to_dict(inst), fh)


def _provenance_to_dict(prov) -> dict | None:
    if prov is None:
        return None
    if isinstance(prov, FromLinearization):
        return {"type": "linearization", "anchor": prov.anchor.tolist()}
    if isinstance(prov, FromLiftedAnchor):
        return {
            "type": "lifted_anchor",
            "anchor": prov.anchor.tolist(),
            "facet": int(prov.facet),
            "lift": float(prov.lift),
        }
    if isinstance(prov, FromBall):
        return {
            "type": "ball",
            "center": prov.ball.center.tolist(),
            "sq_radius": float(prov.ball.sq_radius),
        }
    if isinstance(prov, FromParaboloidAnchor):
        return {
            "type": "paraboloid_anchor",
            "anchor": prov.anchor.tolist(),
            "facet": int(prov.facet),
            "lift": float(prov.lift),
        }
    return None


def _provenance_from_dict(doc) -> object | None:
    if doc is None:
        return None
    kind = _field(doc, "type")
    if kind == "linearization":
        return FromLinearization(_vector(_field(doc, "anchor"), "anchor"))
    if kind == "lifted_anchor":
        return FromLiftedAnchor(
            _vector(_field(doc, "anchor"), "anchor"),
            int(_field(doc, "facet")),
            _scalar(_field(doc, "lift"), "lift"),
        )
    if kind == "ball":
        return FromBall(
            Ball(
                _vector(_field(doc, "center"), "center"),
                _scalar(_field(doc, "sq_radius"), "sq_radius"),
            )
        )
    if kind == "paraboloid_anchor":
        return FromParaboloidAnchor(
            _vector(_field(doc, "anchor"), "anchor"),
            int(_field(doc, "facet")),
            _scalar(_field(doc, "lift"), "lift"),
        )
    raise InstanceFormatError(f"unknown provenance type {kind!r}")


def cut_to_dict(cut) -> dict:
    if isinstance(cut, Cut):
        return {
            "kind": "epigraph",
            "q_coeff": float(cut.q_coeff),
            "x_coeff": cut.x_coeff.tolist(),
            "offset": float(cut.offset),
            "provenance": _provenance_to_dict(cut.provenance),
        }
    if isinstance(cut, ParaboloidCut):
        return {
            "kind": "paraboloid",
            "x_lin": cut.x_lin.tolist(),
            "w_coeff": float(cut.w_coeff),
            "constant": float(cut.constant),
            "anchor": cut.anchor.tolist(),
            "anchor_facet": int(cut.anchor_facet),
            "provenance": _provenance_to_dict(cut.provenance),
        }
    raise TypeError(f"unsupported cut type {type(cut)!r}")


def cut_from_dict(doc: dict):
    kind = _field(doc, "kind")
    prov = _provenance_from_dict(doc.get("provenance"))
    if kind == "epigraph":
        return Cut(
            _scalar(_field(doc, "q_coeff"), "q_coeff"),
            _vector(_field(doc, "x_coeff"), "x_coeff"),
            _scalar(_field(doc, "offset"), "offset"),
            prov,
        )
    if kind == "paraboloid":
        return ParaboloidCut(
            x_lin=_vector(_field(doc, "x_lin"), "x_lin"),
            w_coeff=_scalar(_field(doc, "w_coeff"), "w_coeff"),
            constant=_scalar(_field(doc, "constant"), "constant"),
            anchor=_vector(_field(doc, "anchor"), "anchor"),
            anchor_facet=int(_field(doc, "anchor_facet")),
            provenance=prov,
        )
    raise InstanceFormatError(f"unknown cut kind {kind!r}")


def load_cut(path: str):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InstanceFormatError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"{path} is not valid JSON: {exc}") from exc
    return cut_from_dict(doc)


def save_cut(path: str, cut) -> None:
    with open(path, "w") as fh:
        json.dump(cut_to_dict(cut), fh)
