"""Command-line front end: separation runs, cut verification, a cutting-plane
demonstration loop, and a fixture generator.

Exit codes: 0 success, 2 malformed input, 3 solver failure, 4 the verifier
found a counterexample. Reports are JSON on stdout (or --out) and embed the
library version and the sha256 of the instance document.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
import warnings

import numpy as np

from . import __version__
from .errors import (
    EpicutError,
    InstanceFormatError,
    NonconvergenceWarning,
    SolverFailure,
    UnboundedEllipsoid,
)
from .ellipsoidal import ContainmentCertificate, separate_ellipsoid
from .generate import random_instance
from .instances import (
    Instance,
    cut_to_dict,
    instance_hash,
    instance_to_dict,
    load_cut,
    load_instance,
    save_instance,
)
from .model import (
    Ball,
    Cut,
    Ellipsoid,
    FromLiftedAnchor,
    FromParaboloidAnchor,
    ParaboloidComplement,
    Polyhedron,
    normalize,
)
from .oracles import check_cut_validity
from .paraboloid import (
    ParaboloidCut,
    restore_paraboloid_cut,
    separate_paraboloid,
    transform_paraboloid_cut,
)
from .polyhedral import separate_polyhedron
from . import solvers

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_SOLVER = 3
EXIT_COUNTEREXAMPLE = 4


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _certificate_doc(cert):
    if cert is None:
        return None
    if isinstance(cert, Ball):
        return {
            "type": "violating_ball",
            "center": cert.center.tolist(),
            "sq_radius": float(cert.sq_radius),
        }
    if isinstance(cert, ContainmentCertificate):
        return {
            "type": "containment_multiplier",
            "multiplier": cert.multiplier,
            "defect": cert.defect.tolist(),
            "aux_bounds": cert.aux_bounds.tolist(),
            "slack": cert.slack,
        }
    if isinstance(cert, FromParaboloidAnchor):
        return {
            "type": "paraboloid_anchor",
            "anchor": cert.anchor.tolist(),
            "facet": int(cert.facet),
            "lift": float(cert.lift),
        }
    return {"type": type(cert).__name__}


def _kkt_doc(kkt):
    if kkt is None:
        return None
    return {
        "stationarity": float(kkt.stationarity),
        "primal": float(kkt.primal),
        "complementarity": float(kkt.complementarity),
    }


def _emit(doc: dict, out_path: str | None) -> None:
    text = json.dumps(_jsonable(doc), indent=2)
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _load_and_normalize(path: str):
    inst = load_instance(path)
    mapped, record = normalize(inst.quadratic, inst.region)
    return inst, mapped, record


def cmd_separate(args) -> int:
    try:
        inst, mapped, record = _load_and_normalize(args.instance)
    except (EpicutError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    xp, qp = record.apply_query(inst.query_x, inst.query_q)
    t0 = time.perf_counter()
    try:
        if isinstance(mapped, Polyhedron):
            report = separate_polyhedron(mapped, xp, qp, threads=args.threads)
        elif isinstance(mapped, Ellipsoid):
            report = separate_ellipsoid(mapped, xp, qp)
        else:
            report = separate_paraboloid(mapped, xp, inst.query_w, qp)
    except (SolverFailure, UnboundedEllipsoid) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    elapsed = time.perf_counter() - t0

    if report.cut is None:
        skipped = report.diagnostics.get("skipped", {})
        detail = (
            f"facets {sorted(skipped)}: {skipped}"
            if skipped
            else f"squared radius {report.diagnostics.get('sq_radius')}"
        )
        print(f"solver failure: no usable cut ({detail})", file=sys.stderr)
        return EXIT_SOLVER

    if isinstance(report.cut, ParaboloidCut):
        cut_original = restore_paraboloid_cut(record, report.cut)
    else:
        cut_original = record.invert_cut(report.cut)
    doc = {
        "version": __version__,
        "instance_sha256": instance_hash(inst),
        "region_kind": instance_to_dict(inst)["region"]["kind"],
        "query": {
            "x_star": inst.query_x.tolist(),
            "q_star": float(inst.query_q),
            **({"w_star": inst.query_w} if inst.query_w is not None else {}),
        },
        "violation": report.violation,
        "separated": bool(report.violation > args.tol),
        "cut": cut_to_dict(cut_original),
        "certificate": _certificate_doc(report.certificate),
        "diagnostics": {
            "facet": report.diagnostics.get("facet"),
            "skipped": report.diagnostics.get("skipped"),
            "sq_radius": report.diagnostics.get("sq_radius"),
            "rho_max": report.diagnostics.get("rho_max"),
            "iterations": report.diagnostics.get("iterations"),
            "kkt": _kkt_doc(report.diagnostics.get("kkt")),
        },
        "timing_seconds": elapsed,
    }
    _emit(doc, args.out)
    return EXIT_OK


def _inflated_cut(mapped, cut, prov):
    """Same anchor and facet with the lift pushed up by 1e-3 (normalized frame)."""
    bump = 1e-3
    y = np.asarray(prov.anchor, dtype=float)
    i = int(prov.facet)
    t = float(prov.lift) + bump
    if isinstance(cut, ParaboloidCut):
        a_i, b_i = mapped.normals[i], float(mapped.offsets[i])
        return ParaboloidCut(
            x_lin=2.0 * y - t * a_i,
            w_coeff=t,
            constant=float(t * b_i - y @ y),
            anchor=y,
            anchor_facet=i,
        )
    a_i, b_i = mapped.normals[i], float(mapped.offsets[i])
    return Cut(1.0, y + t * a_i, float(-(y @ y) - 2.0 * t * b_i))


def cmd_verify(args) -> int:
    try:
        inst, mapped, record = _load_and_normalize(args.instance)
        cut = load_cut(args.cut)
    except (EpicutError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    is_parab_cut = isinstance(cut, ParaboloidCut)
    if is_parab_cut != isinstance(mapped, ParaboloidComplement):
        print("error: cut kind does not match the region kind", file=sys.stderr)
        return EXIT_PARSE
    mapped_cut = (
        transform_paraboloid_cut(record, cut)
        if is_parab_cut
        else record.apply_cut(cut)
    )
    verdict = check_cut_validity(
        mapped, mapped_cut, budget=args.budget, seed=args.seed
    )

    counterexample = None
    if verdict.counterexample is not None:
        if is_parab_cut:
            xp, w, qp = verdict.counterexample
            x, q = record.invert_query(xp, qp)
            counterexample = {"x": x.tolist(), "w": w, "q": q}
        else:
            xp, qp = verdict.counterexample
            x, q = record.invert_query(xp, qp)
            counterexample = {"x": x.tolist(), "q": q}

    maximality = None
    prov = getattr(cut, "provenance", None)
    if isinstance(prov, (FromLiftedAnchor, FromParaboloidAnchor)) and np.isfinite(
        prov.lift
    ):
        inflated = _inflated_cut(mapped, mapped_cut, prov)
        inflated_verdict = check_cut_validity(
            mapped, inflated, budget=args.budget, seed=args.seed
        )
        maximality = {
            "checked": True,
            "lift": float(prov.lift),
            "inflated_lift": float(prov.lift) + 1e-3,
            "inflated_invalid": not inflated_verdict.valid,
        }

    doc = {
        "version": __version__,
        "instance_sha256": instance_hash(inst),
        "valid": verdict.valid,
        "worst_residual": verdict.worst_residual,
        "samples_used": verdict.samples_used,
        "counterexample": counterexample,
        "maximality": maximality,
    }
    _emit(doc, args.out)
    return EXIT_OK if verdict.valid else EXIT_COUNTEREXAMPLE


def _parse_pair(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected LO,HI")
    lo, hi = float(parts[0]), float(parts[1])
    if not lo < hi:
        raise argparse.ArgumentTypeError("box bounds need LO < HI")
    return lo, hi


def cmd_demo_loop(args) -> int:
    try:
        inst, mapped, record = _load_and_normalize(args.instance)
    except (EpicutError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    if isinstance(mapped, ParaboloidComplement):
        print(
            "error: the demonstration loop covers polyhedral and ellipsoidal "
            "regions only",
            file=sys.stderr,
        )
        return EXIT_PARSE
    d = inst.dim
    lo, hi = args.box
    if args.objective is None:
        obj = np.zeros(d + 1)
        obj[d] = 1.0
    else:
        parts = [p for p in args.objective.split(",") if p != ""]
        if len(parts) != d + 1:
            print(
                f"error: objective needs {d + 1} coefficients (x then q)",
                file=sys.stderr,
            )
            return EXIT_PARSE
        try:
            obj = np.array([float(p) for p in parts])
        except ValueError:
            print("error: objective coefficients must be numbers", file=sys.stderr)
            return EXIT_PARSE

    # box rows +/- e_k and the q floor, in original coordinates
    rows = []
    rhs = []
    for k in range(d):
        e = np.zeros(d + 1)
        e[k] = 1.0
        rows.append(e.copy())
        rhs.append(lo)
        e[k] = -1.0
        rows.append(e)
        rhs.append(-hi)
    e_q = np.zeros(d + 1)
    e_q[d] = 1.0
    rows.append(e_q)
    rhs.append(args.q_min)

    cuts: list[Cut] = []
    rounds = []
    status = "round_cap"
    H = 1e-9 * np.eye(d + 1)
    for rnd in range(args.max_rounds + 1):
        ineq = list(rows)
        bvec = list(rhs)
        for c in cuts:
            row = np.concatenate([-2.0 * c.x_coeff, [c.q_coeff]])
            ineq.append(row)
            bvec.append(c.offset)
        problem = solvers.QpProblem(
            H=H, g=obj, ineq_mat=np.vstack(ineq), ineq_vec=np.array(bvec)
        )
        sol = solvers.solve_qp(problem)
        if sol.status != solvers.SolveStatus.OPTIMAL:
            print(
                f"solver failure: relaxation round {rnd} ended {sol.status.name}",
                file=sys.stderr,
            )
            return EXIT_SOLVER
        x_hat, q_hat = sol.z[:d], float(sol.z[d])
        objective = float(obj @ sol.z)
        xp, qp = record.apply_query(x_hat, q_hat)
        if isinstance(mapped, Polyhedron):
            report = separate_polyhedron(mapped, xp, qp, threads=args.threads)
        else:
            report = separate_ellipsoid(mapped, xp, qp)
        violation = report.violation
        rounds.append(
            {
                "round": rnd,
                "objective": objective,
                "violation": violation,
                "x": x_hat.tolist(),
                "q": q_hat,
            }
        )
        if report.cut is None or violation <= args.tol:
            status = "converged"
            break
        if rnd == args.max_rounds:
            break
        cut_original = record.invert_cut(report.cut)
        duplicate = any(
            abs(c.q_coeff - cut_original.q_coeff) <= 1e-10
            and np.all(np.abs(c.x_coeff - cut_original.x_coeff) <= 1e-10)
            and abs(c.offset - cut_original.offset) <= 1e-10
            for c in cuts
        )
        if duplicate:
            status = "stalled"
            break
        cuts.append(cut_original)
    if status == "round_cap":
        warnings.warn(
            f"demonstration loop hit the round cap ({args.max_rounds})",
            NonconvergenceWarning,
            stacklevel=1,
        )

    objectives = [r["objective"] for r in rounds]
    monotone = all(
        objectives[k + 1] >= objectives[k] - 1e-9 * (1.0 + abs(objectives[k]))
        for k in range(len(objectives) - 1)
    )
    doc = {
        "version": __version__,
        "instance_sha256": instance_hash(inst),
        "status": status,
        "cuts_added": len(cuts),
        "rounds": rounds,
        "final_objective": objectives[-1] if objectives else None,
        "monotone": monotone,
        "cuts": [cut_to_dict(c) for c in cuts],
    }
    _emit(doc, args.out)
    return EXIT_OK


def cmd_gen(args) -> int:
    rng = np.random.default_rng(args.seed)
    import os

    os.makedirs(args.out_dir, exist_ok=True)
    for k in range(args.count):
        inst = random_instance(
            rng,
            args.kind,
            dim=args.dim,
            n_facets=args.n_facets,
            scale=args.scale,
            identity_quadratic=not args.general_quadratic,
        )
        path = os.path.join(args.out_dir, f"{args.kind}_{k:03d}.json")
        save_instance(path, inst)
        print(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epicut",
        description=(
            "Separate and verify linear cuts for the epigraph of a convex "
            "quadratic outside an excluded region."
        ),
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sep = sub.add_parser("separate", help="find the most violated cut")
    p_sep.add_argument("instance", help="instance JSON file")
    p_sep.add_argument("--tol", type=float, default=1e-6)
    p_sep.add_argument("--threads", type=int, default=1)
    p_sep.add_argument("--seed", type=int, default=42)
    p_sep.add_argument("--out", default=None)
    p_sep.set_defaults(func=cmd_separate)

    p_ver = sub.add_parser("verify", help="check a cut against the instance")
    p_ver.add_argument("instance", help="instance JSON file")
    p_ver.add_argument("cut", help="cut JSON file")
    p_ver.add_argument("--budget", type=int, default=10_000)
    p_ver.add_argument("--seed", type=int, default=42)
    p_ver.add_argument("--out", default=None)
    p_ver.set_defaults(func=cmd_verify)

    p_demo = sub.add_parser(
        "demo-loop", help="cutting-plane loop over a box relaxation"
    )
    p_demo.add_argument("instance", help="instance JSON file")
    p_demo.add_argument("--box", type=_parse_pair, default=(-1.0, 2.0))
    p_demo.add_argument("--q-min", type=float, default=-10.0)
    p_demo.add_argument("--objective", default=None)
    p_demo.add_argument("--max-rounds", type=int, default=50)
    p_demo.add_argument("--tol", type=float, default=1e-6)
    p_demo.add_argument("--threads", type=int, default=1)
    p_demo.add_argument("--seed", type=int, default=42)
    p_demo.add_argument("--out", default=None)
    p_demo.set_defaults(func=cmd_demo_loop)

    p_gen = sub.add_parser("gen", help="write random instance fixtures")
    p_gen.add_argument(
        "--kind",
        choices=["polyhedron", "ellipsoid", "paraboloid_complement"],
        default="polyhedron",
    )
    p_gen.add_argument("--dim", type=int, default=2)
    p_gen.add_argument("--n-facets", type=int, default=5)
    p_gen.add_argument("--count", type=int, default=1)
    p_gen.add_argument("--scale", type=float, default=1.0)
    p_gen.add_argument("--general-quadratic", action="store_true")
    p_gen.add_argument("--seed", type=int, default=42)
    p_gen.add_argument("--out-dir", default=".")
    p_gen.set_defaults(func=cmd_gen)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
