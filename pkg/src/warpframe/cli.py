"""Command-line front end.

Commands:
  warpframe validate INPUT            structural invariants only
  warpframe verify INPUT              structure + identity + flatness residuals
  warpframe reconstruct INPUT         integrate the frame field, emit the
                                      immersion, check the conclusions
  warpframe roundtrip --example NAME  induce -> verify -> reconstruct -> align
  warpframe examples                  list or write the fixture library

Exit codes: 0 pass, 1 I/O or schema error, 2 invariant or residual failure,
3 integrator blow-up. Set WARPFRAME_THREADS to cap worker threads.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import io as wio
from . import oracle
from .bundle_data import GeometricData
from .errors import (IntegrationBlowup, SchemaError, WarpframeError)
from .frame_solver import (FrameMatrix, build_base_frame, integrate_frame,
                           path_independence_defect)
from .immersion import congruence_align, extract_immersion, verify_immersion
from .verifier import (ResidualReport, aux_identity_residuals,
                       flatness_residual, structure_residuals)

EXIT_OK = 0
EXIT_IO = 1
EXIT_FAIL = 2
EXIT_BLOWUP = 3


def _positive_float(text):
    val = float(text)
    if val <= 0:
        raise argparse.ArgumentTypeError("tolerance must be positive")
    return val


def _add_common(p):
    p.add_argument("--tol", type=_positive_float, default=None,
                   help="override the pass tolerance for every residual")
    p.add_argument("--report", choices=("json", "text"), default="text",
                   help="stdout report format")
    p.add_argument("--force-fd", action="store_true",
                   help="ignore stored analytic derivatives")
    p.add_argument("-o", "--output-dir", default=None,
                   help="directory for emitted files")


def _build_parser():
    ap = argparse.ArgumentParser(
        prog="warpframe",
        description="verify structure equations and reconstruct immersions "
                    "into warped products over space forms")
    sub = ap.add_subparsers(dest="command", required=True)

    pv = sub.add_parser("validate", help="check structural data invariants")
    pv.add_argument("input", nargs="?", default=None)
    pv.add_argument("--example", default=None)
    pv.add_argument("--params", default=None, help="example parameters, JSON")
    _add_common(pv)

    pf = sub.add_parser("verify", help="evaluate every residual family")
    pf.add_argument("input", nargs="?", default=None)
    pf.add_argument("--example", default=None)
    pf.add_argument("--params", default=None)
    pf.add_argument("--h-refine", type=int, choices=(1, 2, 4), default=1)
    _add_common(pf)

    pr = sub.add_parser("reconstruct",
                        help="integrate the frame field and emit the immersion")
    pr.add_argument("input", nargs="?", default=None)
    pr.add_argument("--example", default=None)
    pr.add_argument("--params", default=None)
    pr.add_argument("--base-frame", default=None,
                    help="JSON file with the base frame matrix B0")
    pr.add_argument("--h-refine", type=int, choices=(1, 2, 4), default=1)
    pr.add_argument("--renorm-interval", type=int, default=16)
    pr.add_argument("--no-renorm", action="store_true")
    pr.add_argument("--force", action="store_true",
                    help="reconstruct even if verification fails")
    _add_common(pr)

    pt = sub.add_parser("roundtrip",
                        help="induce from an example, reconstruct, align")
    pt.add_argument("--example", required=True)
    pt.add_argument("--params", default=None)
    pt.add_argument("--h-refine", type=int, choices=(1, 2, 4), default=1)
    pt.add_argument("--renorm-interval", type=int, default=16)
    pt.add_argument("--no-renorm", action="store_true")
    _add_common(pt)

    pe = sub.add_parser("examples", help="list or write fixture datasets")
    pe.add_argument("--example", default=None,
                    help="write only this example")
    pe.add_argument("--params", default=None)
    pe.add_argument("-o", "--output-dir", default=None,
                    help="write dataset JSON files here")
    return ap


def _load_input(args) -> GeometricData:
    if args.example:
        params = json.loads(args.params) if args.params else {}
        _, data = oracle.canonical_example(args.example, params)
        return data
    if not args.input:
        raise SchemaError("either an input file or --example is required")
    return wio.load_dataset(args.input)


def _refined_data(data: GeometricData, factor: int) -> GeometricData:
    if factor == 1:
        return data
    if not data.generator:
        raise SchemaError(
            "--h-refine needs a dataset with a generator tag (only oracle-"
            "generated datasets can be re-sampled on a finer grid)")
    name = data.generator["name"]
    params = dict(data.generator.get("params", {}))
    grid = data.grid.refine(factor)
    params["grid_extents"] = list(grid.extents)
    params["grid_spacing"] = list(grid.spacing)
    params["grid_origin"] = list(grid.origin)
    params["grid_base"] = list(grid.base_node)
    attach = bool(data.derivs)
    _, fine = oracle.canonical_example(
        name, {**params, "attach_derivatives": attach})
    return fine


def _emit_report(report: ResidualReport, args, name, outdir, meta=None):
    if args.report == "json":
        doc = {"kind": "warpframe.report", "format_version": 1}
        doc.update(report.to_dict())
        if meta:
            doc["meta"] = meta
        print(json.dumps(doc, indent=1))
    else:
        for line in report.summary_lines():
            print(line)
    if outdir is not None:
        wio.save_report(report, Path(outdir) / name, meta=meta)


def _all_residuals(data, tol, force_fd):
    rep = structure_residuals(data, tol=tol, force_fd=force_fd)
    rep.merge(aux_identity_residuals(data, tol=tol, force_fd=force_fd))
    rep.merge(flatness_residual(data, tol=tol, force_fd=force_fd))
    return rep


def _cmd_validate(args):
    if args.example:
        data = _load_input(args)
    else:
        if not args.input:
            raise SchemaError("either an input file or --example is required")
        data = wio.load_dataset(args.input, validate=False)
    problems = data.validate(raise_on_error=False)
    out = {"problems": problems,
           "flagged_nodes": [list(nd) for nd in data.flagged_nodes]}
    if args.report == "json":
        print(json.dumps(out, indent=1))
    else:
        if problems:
            for p in problems:
                print(f"violation: {p}")
        if data.flagged_nodes:
            print(f"flagged nodes (vertical-norm drift): "
                  f"{len(data.flagged_nodes)}")
        if not problems:
            print("all structural invariants hold")
    return EXIT_FAIL if problems else EXIT_OK


def _cmd_verify(args):
    data = _load_input(args)
    outdir = args.output_dir
    rep = _all_residuals(data, args.tol, args.force_fd)
    meta = {"grid_extents": list(data.grid.extents)}
    if args.h_refine > 1:
        fine = _refined_data(data, args.h_refine)
        rep_f = _all_residuals(fine, args.tol, args.force_fd)
        ratios = {}
        for key, e in rep.entries.items():
            fs = rep_f.entries[key].sup
            ratios[key] = (e.sup / fs) if fs > 0 else None
        meta["refinement"] = {"factor": args.h_refine, "sup_ratios": ratios}
        if outdir is not None:
            wio.save_report(rep_f, Path(outdir) / "residuals_refined.json")
    _emit_report(rep, args, "residuals.json", outdir, meta=meta)
    return EXIT_OK if rep.passed else EXIT_FAIL


def _reconstruct_once(data, args, outdir, suffix=""):
    if args.base_frame:
        B0 = FrameMatrix(B=wio.load_frame_matrix(args.base_frame),
                         node=tuple(data.grid.base_node))
    else:
        B0 = build_base_frame(data)
    ff = integrate_frame(data, B0,
                         renorm_interval=args.renorm_interval,
                         renorm=not args.no_renorm)
    imm = extract_immersion(ff, data)
    rep = verify_immersion(imm, data, tol=args.tol)
    pid = path_independence_defect(data, B0) if data.spec.n > 1 else 0.0
    diag = dict(ff.diagnostics)
    diag["path_independence_defect"] = pid
    diag["quadric_defect"] = imm.quadric_defect()
    if outdir is not None:
        outdir = Path(outdir)
        wio.write_immersion_csv(imm, outdir / f"immersion{suffix}.csv")
        wio.save_frames_json(imm, outdir / f"frames{suffix}.json")
        wio.save_diagnostics(diag, outdir / f"bfield{suffix}.json")
        wio.save_report(rep, outdir / f"conclusions{suffix}.json")
    return imm, rep, diag


def _cmd_reconstruct(args):
    data = _load_input(args)
    outdir = args.output_dir
    pre = _all_residuals(data, args.tol, args.force_fd)
    if not pre.passed and not args.force:
        print("verification failed; not reconstructing "
              "(failing: " + ", ".join(pre.failing()) + "; use --force)")
        if outdir is not None:
            wio.save_report(pre, Path(outdir) / "residuals.json")
        return EXIT_FAIL
    imm, rep, diag = _reconstruct_once(data, args, outdir, suffix="")
    meta = {"diagnostics": diag}
    if args.h_refine > 1:
        fine = _refined_data(data, args.h_refine)
        imm2, rep2, diag2 = _reconstruct_once(fine, args, outdir, suffix="_refined")
        ratios = {}
        for key, e in rep.entries.items():
            fs = rep2.entries[key].sup
            ratios[key] = (e.sup / fs) if fs > 0 else None
        for key in ("max_row_defect", "path_independence_defect"):
            if diag2.get(key):
                ratios[key] = diag[key] / diag2[key]
        meta["refinement"] = {"factor": args.h_refine, "sup_ratios": ratios}
    _emit_report(rep, args, "conclusions.json", None, meta=meta)
    if args.report == "text":
        print(f"group defect {diag['max_group_defect']:.3e}  "
              f"row defect {diag['max_row_defect']:.3e}  "
              f"path independence {diag['path_independence_defect']:.3e}")
        if "refinement" in meta:
            print("refinement sup ratios: " + json.dumps(
                {k: (round(v, 3) if v else None)
                 for k, v in meta["refinement"]["sup_ratios"].items()}))
    return EXIT_OK if rep.passed else EXIT_FAIL


def _cmd_roundtrip(args):
    params = json.loads(args.params) if args.params else {}
    defects = []
    imm0 = oracle.make_example(args.example, params)
    for level in range(2 if args.h_refine > 1 else 1):
        factor = args.h_refine ** level if args.h_refine > 1 else 1
        grid = imm0.grid.refine(factor)
        p = dict(imm0.params)
        p.update({"grid_extents": list(grid.extents),
                  "grid_spacing": list(grid.spacing),
                  "grid_origin": list(grid.origin),
                  "grid_base": list(grid.base_node)})
        imm = oracle.make_example(args.example, p)
        data = oracle.induce_data(imm)
        rep = _all_residuals(data, args.tol, args.force_fd)
        if not rep.passed:
            print("induced data failed verification: "
                  + ", ".join(rep.failing()))
            return EXIT_FAIL
        B0 = FrameMatrix(B=oracle.exact_base_frame(imm),
                         node=tuple(grid.base_node))
        ff = integrate_frame(data, B0, renorm_interval=args.renorm_interval,
                             renorm=not args.no_renorm)
        rec = extract_immersion(ff, data)
        crep = verify_immersion(rec, data, tol=args.tol)
        ref = oracle.reference_field(imm)
        tau, defect = congruence_align(rec, ref)
        defects.append(defect)
        h = grid.max_spacing
        ok = crep.passed and defect <= 10.0 * h * h
        print(f"level {level}: h={h:.5f} congruence defect {defect:.3e} "
              f"conclusions {'pass' if crep.passed else 'FAIL'}")
        if args.output_dir is not None:
            wio.write_immersion_csv(
                rec, Path(args.output_dir) / f"roundtrip_l{level}.csv")
        if not ok:
            return EXIT_FAIL
    if len(defects) == 2 and defects[1] > 0:
        import math
        order = math.log(defects[0] / defects[1], args.h_refine)
        print(f"congruence defect order: {order:.2f}")
        if order < 1.8:
            return EXIT_FAIL
    return EXIT_OK


def _cmd_examples(args):
    if args.example is None and args.output_dir is None:
        for name in oracle.example_names():
            print(name)
        return EXIT_OK
    names = [args.example] if args.example else oracle.example_names()
    params = json.loads(args.params) if args.params else {}
    outdir = Path(args.output_dir or ".")
    for name in names:
        _, data = oracle.canonical_example(name, dict(params))
        wio.save_dataset(data, outdir / f"{name}.json")
        print(f"wrote {outdir / (name + '.json')}")
    return EXIT_OK


_COMMANDS = {
    "validate": _cmd_validate,
    "verify": _cmd_verify,
    "reconstruct": _cmd_reconstruct,
    "roundtrip": _cmd_roundtrip,
    "examples": _cmd_examples,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except IntegrationBlowup as exc:
        print(f"integrator blow-up: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except WarpframeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
