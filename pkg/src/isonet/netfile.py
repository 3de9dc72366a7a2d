"""Reading and writing nets: JSON net files and Wavefront OBJ."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .conserved import ConservedQuantity
from .errors import SchemaError
from .net import QuadNet

SCHEMA_VERSION = 1
FORMAT_TAG = "isonet-net"


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist(), indent, level)
    if isinstance(obj, (list, tuple)):
        if all(not isinstance(v, (list, tuple, dict, np.ndarray)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, indent, level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        # "-0" would be read back as the integer 0
        return "-0.0" if x == 0.0 and math.copysign(1.0, x) < 0 else _fmt_float(x)
    if isinstance(obj, complex):
        return _encode({"re": obj.real, "im": obj.imag}, indent, level)
    if obj is None:
        return "null"
    return json.dumps(str(obj))


def dumps(obj, indent: int = 1) -> str:
    """JSON text with every real written to 17 significant digits."""
    return _encode(obj, indent, 0) + "\n"


@dataclass(eq=False)
class NetFile:
    net: QuadNet
    lifts: np.ndarray | None = None
    cq: ConservedQuantity | None = None
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        n = self.net
        d = {
            "format": FORMAT_TAG,
            "schema_version": SCHEMA_VERSION,
            "kappa": float(n.kappa),
            "origin": [int(n.m0), int(n.n0)],
            "shape": list(n.shape),
            "vertices": n.vertices,
            "a_h": n.a_h,
            "a_v": n.a_v,
            "meta": _plain(n.meta),
            "provenance": _plain(self.provenance),
        }
        if self.lifts is not None:
            d["lifts"] = np.asarray(self.lifts)
        if self.cq is not None:
            d["conserved"] = {"order": self.cq.order, "coeffs": self.cq.coeffs, "meta": _plain(self.cq.meta)}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NetFile":
        if d.get("format") != FORMAT_TAG:
            raise SchemaError("not an isonet net file")
        if d.get("schema_version") != SCHEMA_VERSION:
            raise SchemaError(f"unsupported schema version {d.get('schema_version')!r}")
        try:
            V = np.array(d["vertices"], dtype=float)
            a_h = None if d.get("a_h") is None else np.array(d["a_h"], dtype=float)
            a_v = None if d.get("a_v") is None else np.array(d["a_v"], dtype=float)
            m0, n0 = d.get("origin", [0, 0])
            net = QuadNet(V, a_h=a_h, a_v=a_v, kappa=float(d["kappa"]), m0=int(m0), n0=int(n0),
                          meta=dict(d.get("meta", {})))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"malformed net file: {exc}") from exc
        if list(net.shape) != list(d.get("shape", net.shape)):
            raise SchemaError("shape field does not match the vertex grid")
        lifts = None if d.get("lifts") is None else np.array(d["lifts"], dtype=float)
        cq = None
        if d.get("conserved") is not None:
            c = d["conserved"]
            coeffs = np.array(c["coeffs"], dtype=float)
            if coeffs.shape[0] != int(c["order"]) + 1 or coeffs.shape[1:3] != net.shape:
                raise SchemaError("conserved-quantity block has the wrong shape")
            cq = ConservedQuantity(coeffs, dict(c.get("meta", {})))
        return cls(net, lifts, cq, dict(d.get("provenance", {})))


def _plain(obj):
    """Meta dictionaries with numpy scalars and tuples turned into JSON-friendly values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def write_netfile(path, nf: NetFile) -> Path:
    path = Path(path)
    path.write_text(dumps(nf.to_dict()))
    return path


def read_netfile(path) -> NetFile:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    return NetFile.from_dict(d)


def ball_points(V: np.ndarray, kappa: float) -> np.ndarray:
    """Points of a negatively curved net placed in the unit ball.

    Coordinates of ``M_kappa`` with ``kappa < 0`` are scaled by ``sqrt(-kappa)``;
    points of the second copy (outside the ball) are inverted in the unit sphere.
    """
    if kappa >= 0:
        raise ValueError("ball projection needs kappa < 0")
    X = np.asarray(V, dtype=float) * math.sqrt(-kappa)
    r2 = np.sum(X * X, axis=-1, keepdims=True)
    return np.where(r2 > 1.0, X / np.where(r2 > 0, r2, 1.0), X)


def obj_text(net: QuadNet, poincare: bool = False) -> str:
    """OBJ with vertices in row-major (m, then n) order and faces p, q, r, s."""
    V = net.vertices
    if poincare and net.kappa < 0:
        V = ball_points(V, net.kappa)
    M, N = net.shape
    lines = [f"# isonet net {M} x {N}, kappa {_fmt_float(float(net.kappa))}"]
    for m in range(M):
        for n in range(N):
            lines.append("v " + " ".join(_fmt_float(float(x)) for x in V[m, n]))
    idx = lambda m, n: m * N + n + 1
    for m in range(M - 1):
        for n in range(N - 1):
            lines.append(f"f {idx(m, n)} {idx(m + 1, n)} {idx(m + 1, n + 1)} {idx(m, n + 1)}")
    return "\n".join(lines) + "\n"


def write_obj(path, net: QuadNet, poincare: bool = False) -> Path:
    path = Path(path)
    path.write_text(obj_text(net, poincare))
    return path
