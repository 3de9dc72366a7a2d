"""Command-line driver: ``isonet generate | verify | transform | export``.

Tolerance precedence: ``--tol`` flag, then the ``ISONET_TOL`` environment
variable, then a ``tol`` key in the config file, then ``DEFAULT_TOL``.
Config files hold one ``key = value`` pair per line; ``#`` starts a comment.
"""
from __future__ import annotations

import argparse
import configparser
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import generators as gen
from .conserved import (baecklund_values, calapso_shift_cq, darboux_cq,
                        solve_lcq_5x5, verify_cq)
from .errors import IsonetError, SchemaError
from .mink import lift_array, to_orthonormal
from .net import (QuadNet, concircularity_residuals, factor_residual, factorization_report,
                  moutard_lift)
from .netfile import NetFile, dumps, obj_text, read_netfile, write_netfile, write_obj
from .transforms import calapso, christoffel_report, darboux

DEFAULT_TOL = 1e-9
KINDS = ("minimal-enneper", "minimal-catenoid", "bryant-enneper-cousin", "bryant-catenoid-cousin",
         "revolution", "maximal-sample", "planar-grid")
CHECKS = ("isothermic", "moutard", "christoffel", "cq", "lcq-search", "sphere", "sample")

# accepted config keys per kind, with defaults
DEFAULTS = {
    "minimal-enneper": {"n": 7, "rows": 7, "c": 0.2},
    "minimal-catenoid": {"n": 8, "rows": 20, "closed": False},
    "bryant-enneper-cousin": {"n": 7, "rows": 7, "c": 0.2, "lambda": 0.3},
    "bryant-catenoid-cousin": {"n": 6, "rows": 10, "lambda": 0.3},
    "revolution": {"n": 14, "rows": 12, "kappa": 0.0, "H": 0.35, "r0": 1.0, "h0": 0.0,
                   "eta0": 0.3, "speed": 0.05, "closed": True},
    "maximal-sample": {"n": 9, "rows": 16, "r_in": 0.5, "r_out": 2.0, "refine": 32},
    "planar-grid": {"n": 5, "rows": 5, "dx": 1.0, "dy": 1.0},
}
REVOLUTION_SEEDS = {-1.0: (0.4, -0.3)}


class UsageError(Exception):
    pass


# ----------------------------------------------------------------- config


def _coerce(text: str):
    t = text.strip()
    if t.lower() in ("true", "yes", "on"):
        return True
    if t.lower() in ("false", "no", "off"):
        return False
    for conv in (int, float, complex):
        try:
            return conv(t.replace(" ", ""))
        except ValueError:
            pass
    return t


def read_config(path) -> dict:
    cp = configparser.ConfigParser(delimiters=("=",), comment_prefixes=("#",), inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string("[config]\n" + Path(path).read_text())
    except configparser.Error as exc:
        raise UsageError(f"{path}: {exc}") from exc
    return {k: _coerce(v) for k, v in cp["config"].items()}


def resolve_tol(flag: float | None, config: dict | None = None) -> float:
    if flag is not None:
        return float(flag)
    env = os.environ.get("ISONET_TOL")
    if env:
        try:
            return float(env)
        except ValueError as exc:
            raise UsageError(f"ISONET_TOL is not a number: {env!r}") from exc
    if config and "tol" in config:
        return float(config["tol"])
    return DEFAULT_TOL


def _params(kind: str, config: dict, overrides: dict) -> dict:
    allowed = DEFAULTS[kind]
    p = dict(allowed)
    if kind == "revolution":
        k = float(overrides.get("kappa") if overrides.get("kappa") is not None else config.get("kappa", 0.0))
        if k in REVOLUTION_SEEDS:
            p["r0"], p["h0"] = REVOLUTION_SEEDS[k]
    for src in (config, overrides):
        for key, val in src.items():
            if val is None or key == "tol":
                continue
            if key not in allowed:
                raise UsageError(f"unknown key {key!r} for {kind}; accepted: {', '.join(sorted(allowed))}")
            p[key] = val
    return p


# --------------------------------------------------------------- generate


def _attach_lcq(net: QuadNet, tol: float):
    M, N = net.shape
    if M < 5 or N < 5:
        return None
    try:
        sol = solve_lcq_5x5(net, tol=max(tol, 1e-8))
    except IsonetError:
        return None
    return sol.solutions[0] if sol.ok else None


def cmd_generate(kind: str, config: dict, tol: float = DEFAULT_TOL) -> NetFile:
    if kind not in KINDS:
        raise UsageError(f"unknown kind {kind!r}; choose from {', '.join(KINDS)}")
    p = _params(kind, config, {})
    M, N = int(p["n"]), int(p["rows"])
    cq = None
    prov = {"generator": kind, "parameters": dict(p), "tol": tol}
    if kind == "minimal-enneper":
        net = gen.discrete_enneper(M, N, complex(p["c"]))
        cq = _attach_lcq(net, tol)
    elif kind == "minimal-catenoid":
        net = gen.discrete_catenoid(M, N, closed=bool(p["closed"]))
        cq = _attach_lcq(net, tol)
    elif kind in ("bryant-enneper-cousin", "bryant-catenoid-cousin"):
        if kind == "bryant-enneper-cousin":
            h = gen.dhf_linear(complex(p["c"]), M, N, m0=-(M // 2), n0=-(N // 2))
        else:
            c2 = 2 * math.pi / N
            h = gen.dhf_exp(gen.solve_c1(c2), c2, M, N, m0=-(M // 2))
        res = gen.bryant_net(h, float(p["lambda"]))
        net = res.net
        prov.update(det_imag=res.det_imag, closure_residual=res.closure_residual,
                    sheet=res.sheet.astype(int))
        cq = _attach_lcq(net, tol)
    elif kind == "revolution":
        seed = gen.revolution_seed_for(float(p["r0"]), float(p["h0"]), float(p["eta0"]),
                                       float(p["kappa"]), float(p["H"]), N=N)
        try:
            res = gen.revolution_net(seed, M - 1, float(p["speed"]), N=N, closed=bool(p["closed"]))
        except IsonetError as exc:
            raise type(exc)(f"revolution generator: {exc}") from exc
        net, cq = res.net, res.cq
        prov.update(max_equation_residual=float(np.abs(res.residuals).max()),
                    H_kappa_drift=res.H_kappa_drift, alpha=seed.alpha)
    elif kind == "maximal-sample":
        w, zmap, dzmap = gen.annulus_grid(float(p["r_in"]), float(p["r_out"]), M, N)
        s = gen.kobayashi_sample(lambda z: z, lambda z: z ** -2.0, w, zmap, dzmap,
                                 refine=int(p["refine"]), periodic_n=True)
        net = QuadNet(s.f, meta={"kind": "maximal", "ambient": "R21", "coordinates": "x1 x2 x0"})
        prov.update(path_residual=s.path_residual, loop_residual=s.loop_residual,
                    singular=s.singular.astype(int))
    else:
        net = gen.planar_grid(M, N, float(p["dx"]), float(p["dy"]))
    return NetFile(net, None, cq, prov)


# ----------------------------------------------------------------- verify


def _row(name, residual, tol, worst=None, status=None, detail=""):
    if status is None:
        status = "pass" if residual < tol else "fail"
    return {"check": name, "residual": float(residual), "status": status,
            "worst": None if worst is None else [int(i) for i in np.ravel(worst)], "detail": detail}


def _argmax(a):
    return np.unravel_index(int(np.argmax(a)), a.shape) if a.size else None


def _sphere_check(net: QuadNet, tol: float):
    F = to_orthonormal(lift_array(net.vertices, scale=np.ones(net.shape)))
    F = F.reshape(-1, 5)
    F = F / np.linalg.norm(F, axis=-1, keepdims=True)
    sv = np.linalg.svd(F, compute_uv=False)
    ratio = float(sv[-1] / sv[0]) if sv.size >= 5 else 0.0
    if ratio < tol:
        return _row("sphere", ratio, tol, status="info", detail="vertices lie on one sphere: order-0 conserved quantity")
    return _row("sphere", ratio, tol, status="info", detail="not spherical")


def cmd_verify(nf: NetFile, tol: float = DEFAULT_TOL, checks=None) -> list[dict]:
    net = nf.net
    rows = []
    want = set(checks or CHECKS)
    if net.meta.get("ambient") == "R21":
        if "sample" in want:
            rows.append(_row("sample-path", nf.provenance.get("path_residual", math.inf), 1e-4))
            loop = nf.provenance.get("loop_residual")
            if loop is not None:
                rows.append(_row("sample-loop", loop, max(tol, 1e-8)))
        return rows
    M, N = net.shape
    if "isothermic" in want:
        if net.factorized:
            r = np.maximum(factor_residual(net), concircularity_residuals(net))
            rows.append(_row("isothermic", r.max(initial=0.0), tol, _argmax(r), detail="stored factors"))
        else:
            fr = factorization_report(net)
            rows.append(_row("isothermic", fr.residual, tol, fr.worst, detail="fitted factors"))
            if fr.ok:
                net = net.with_factors(fr.a_h, fr.a_v)
    if not net.factorized:
        return rows
    if "moutard" in want:
        try:
            ml = moutard_lift(net, tol=math.inf)
            eh, ev = ml.edge_residuals(net)
            par = ml.quad_parallel_residuals()
            r = max(float(eh.max(initial=0)), float(ev.max(initial=0)), float(par.max(initial=0)))
            worst = _argmax(par) if par.size and float(par.max()) >= r else None
            rows.append(_row("moutard", r, tol, worst))
        except IsonetError as exc:
            rows.append(_row("moutard", math.inf, tol, detail=str(exc)))
    if "christoffel" in want:
        try:
            rows.append(_row("christoffel", christoffel_report(net, tol=math.inf).closure_residual, tol))
        except IsonetError as exc:
            rows.append(_row("christoffel", math.inf, tol, getattr(exc, "worst", None), detail=str(exc)))
    if nf.cq is not None and "cq" in want:
        rep = verify_cq(net, nf.cq)
        r = max(rep.max_residual, rep.sample_residual)
        rows.append(_row("cq", r, tol, rep.worst_edge()[0] if r >= tol else None,
                         detail=f"order {nf.cq.order}"))
    elif "lcq-search" in want and M >= 5 and N >= 5:
        try:
            sol = solve_lcq_5x5(net, tol=max(tol, 1e-8))
            best = min(sol.residuals) if sol.residuals else math.inf
            rows.append(_row("lcq-search", best, tol, status="info",
                             detail="linear conserved quantity found" if sol.ok else "none found"))
        except IsonetError as exc:
            rows.append(_row("lcq-search", math.inf, tol, status="info", detail=str(exc)))
    if "sphere" in want:
        rows.append(_sphere_check(net, tol))
    return rows


def format_report(rows: list[dict], fmt: str = "text") -> str:
    if fmt == "json":
        return dumps({"checks": rows, "ok": all(r["status"] != "fail" for r in rows)})
    lines = []
    for r in rows:
        w = "" if r["worst"] is None else f"  worst={tuple(r['worst'])}"
        d = f"  ({r['detail']})" if r["detail"] else ""
        lines.append(f"{r['check']:<12} {r['status'].upper():<5} {r['residual']:.3e}{w}{d}")
    return "\n".join(lines) + "\n"


# -------------------------------------------------------------- transform


def _point_of(X: np.ndarray) -> np.ndarray:
    if abs(X[3]) <= 1e-14 * max(1.0, float(np.abs(X).max())):
        raise IsonetError("complementary point lies at infinity")
    return X[:3] / X[3]


def cmd_transform(nf: NetFile, which: str, lam: float | None = None, mu: float | None = None,
                  fhat=None, tol: float = DEFAULT_TOL) -> NetFile:
    net = nf.net
    if not net.factorized:
        fr = factorization_report(net)
        if not fr.ok:
            raise IsonetError(f"net is not isothermic (residual {fr.residual:.3e} at quad {fr.worst})")
        net = net.with_factors(fr.a_h, fr.a_v)
    step = {"transform": which}
    cq = None
    if which == "christoffel":
        out = christoffel_report(net, tol=max(tol, 1e-9)).net
    elif which == "calapso":
        if lam is None:
            raise UsageError("calapso needs --lambda")
        res = calapso(net, lam, tol=max(tol, 1e-9))
        out = res.net
        step["lambda"] = lam
        if nf.cq is not None:
            cq = calapso_shift_cq(nf.cq, lam, res.frame)
    elif which == "darboux":
        if mu is None:
            if nf.cq is None:
                raise UsageError("darboux needs --mu (or a conserved quantity in the file)")
            bv = baecklund_values(nf.cq)
            scale = max(1.0, max((abs(r) for r in bv.roots), default=0.0))
            roots = [r for r in bv.roots if abs(r) > 1e-6 * scale]
            if not roots:
                raise UsageError("no nonzero real root of ||P||^2; pass --mu")
            mu = roots[0]
            if fhat is None:
                fhat = _point_of(bv.lifts[bv.roots.index(mu)][0, 0])
            step["mu_source"] = "baecklund"
        if fhat is None:
            raise UsageError("darboux needs --fhat x,y,z")
        res = darboux(net, mu, np.asarray(fhat, float), tol=max(tol, 1e-9))
        out = res.net
        step.update(mu=mu, fhat=[float(x) for x in fhat], riccati_residual=res.riccati_residual)
        if nf.cq is not None:
            cq = darboux_cq(nf.cq, net, out, mu).P
    else:
        raise UsageError(f"unknown transform {which!r}")
    prov = dict(nf.provenance)
    prov["chain"] = list(prov.get("chain", [])) + [step]
    return NetFile(out, None, cq, prov)


# ------------------------------------------------------------------- main


def _vec3(text: str):
    parts = [float(x) for x in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected x,y,z")
    return parts


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="isonet", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--tol", type=float, default=None, help="verification tolerance")
        p.add_argument("--config", type=Path, default=None, help="plain-text key=value file")

    g = sub.add_parser("generate", help="build a net")
    g.add_argument("kind", choices=KINDS)
    common(g)
    g.add_argument("--n", type=int, dest="n", help="lattice size in the m direction (revolution: profile samples)")
    g.add_argument("--rows", type=int, help="lattice size in the n direction")
    g.add_argument("--kappa", type=float)
    g.add_argument("--H", type=float, dest="H", help="mean curvature in the space form (revolution)")
    g.add_argument("--lambda", type=float, dest="lam", help="spectral parameter (Bryant cousins)")
    g.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="extra generator key")
    g.add_argument("--out", type=Path, required=True, help="output stem; writes STEM.json and STEM.obj")
    g.add_argument("--format", choices=("obj", "json"), default=None, help="write only one format")

    v = sub.add_parser("verify", help="check a net file")
    v.add_argument("file", type=Path)
    common(v)
    v.add_argument("--checks", default=None, help=f"comma list from {','.join(CHECKS)}")
    v.add_argument("--report", choices=("text", "json"), default="text")

    t = sub.add_parser("transform", help="Christoffel, Calapso or Darboux transform")
    t.add_argument("file", type=Path)
    t.add_argument("which", choices=("christoffel", "calapso", "darboux"))
    common(t)
    t.add_argument("--lambda", type=float, dest="lam")
    t.add_argument("--mu", type=float)
    t.add_argument("--fhat", type=_vec3, help="initial point x,y,z of the Darboux transform")
    t.add_argument("--out", type=Path, required=True)

    e = sub.add_parser("export", help="write OBJ or JSON")
    e.add_argument("file", type=Path)
    e.add_argument("--format", choices=("obj", "json"), default="obj")
    e.add_argument("--poincare", action="store_true", help="place nets with kappa < 0 in the unit ball")
    e.add_argument("--out", type=Path, default=None, help="output file (default: stdout)")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        config = read_config(args.config) if getattr(args, "config", None) else {}
        if args.command == "generate":
            tol = resolve_tol(args.tol, config)
            over = {"n": args.n, "rows": args.rows, "kappa": args.kappa, "H": args.H, "lambda": args.lam}
            for item in args.set:
                if "=" not in item:
                    raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
                k, val = item.split("=", 1)
                over[k.strip()] = _coerce(val)
            over = {k: v for k, v in over.items() if v is not None}
            merged = dict(config)
            merged.update(over)
            nf = cmd_generate(args.kind, merged, tol)
            stem = args.out.with_suffix("") if args.out.suffix in (".json", ".obj") else args.out
            if args.format in (None, "json"):
                write_netfile(stem.with_suffix(".json"), nf)
            if args.format in (None, "obj"):
                write_obj(stem.with_suffix(".obj"), nf.net)
            M, N = nf.net.shape
            print(f"{args.kind}: {M} x {N} net written to {stem}"
                  + ("" if nf.cq is None else f" (conserved quantity of order {nf.cq.order})"))
            return 0
        if args.command == "verify":
            tol = resolve_tol(args.tol, config)
            nf = read_netfile(args.file)
            checks = None if args.checks is None else [c.strip() for c in args.checks.split(",")]
            bad = [c for c in (checks or []) if c not in CHECKS]
            if bad:
                raise UsageError(f"unknown checks: {', '.join(bad)}")
            rows = cmd_verify(nf, tol, checks)
            sys.stdout.write(format_report(rows, args.report))
            return 0 if all(r["status"] != "fail" for r in rows) else 1
        if args.command == "transform":
            tol = resolve_tol(args.tol, config)
            nf = cmd_transform(read_netfile(args.file), args.which, args.lam, args.mu, args.fhat, tol)
            write_netfile(args.out, nf)
            print(f"{args.which} transform written to {args.out}")
            return 0
        nf = read_netfile(args.file)
        text = obj_text(nf.net, args.poincare) if args.format == "obj" else dumps(nf.to_dict())
        if args.out is None:
            sys.stdout.write(text)
        else:
            args.out.write_text(text)
        return 0
    except UsageError as exc:
        ap.error(str(exc))
    except (IsonetError, SchemaError, OSError) as exc:
        print(f"isonet: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
