"""``mmkit`` command line.

Exit status: 0 when something was computed or found, 1 when an exhaustive
search proved there is nothing to find, 2 on bad input or a size guard.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from typing import Sequence

from mmkit.construct import (
    UniversalSpaceSpec,
    glue_chain,
    product,
    quotient_dominator,
    universal_dominate,
    universal_space,
)
from mmkit.core import MMError, MMSpace, parse_rat
from mmkit.metrics import box, box_oracle, gh, gh_eps_check
from mmkit.order import check_domination, check_eps_domination, regularize
from mmkit.pipeline import PipelineConfig, common_dominator
from mmkit.serialize import (
    doc_measures,
    doc_to_metric,
    doc_to_space,
    dumps,
    glue_certificate,
    pipeline_certificate,
    rat,
    read_json,
    space_name,
    space_to_doc,
    verify_certificate,
    witness_certificate,
    witness_from_doc,
)
from mmkit.transport import prohorov, prohorov_oracle


class InputError(Exception):
    """Bad command line or document; reported with exit status 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(message)


def _rat_arg(text: str) -> Fraction:
    try:
        return parse_rat(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _space(path: str) -> MMSpace:
    return doc_to_space(read_json(path))


def _emit(doc, out) -> None:
    out.write(dumps(doc))


# ---------------------------------------------------------------------------
# subcommands


def cmd_prohorov(args, out) -> int:
    doc = read_json(args.space)
    M = doc_to_metric(doc)
    measures = doc_measures(doc)
    for name in (args.mu, args.nu):
        if name not in measures:
            raise InputError(f"no measure named {name!r}")
    mu, nu = measures[args.mu], measures[args.nu]
    if args.oracle:
        _emit({"command": "prohorov", "method": "oracle", "value": rat(prohorov_oracle(M, mu, nu))}, out)
        return 0
    r = prohorov(M, mu, nu)
    _emit(
        {
            "command": "prohorov",
            "method": "flow",
            "value": rat(r.value),
            "coupling": [[rat(v) for v in row] for row in r.witness.pi],
            "candidates_examined": r.candidates_examined,
        },
        out,
    )
    return 0


def cmd_box(args, out) -> int:
    A, B = _space(args.a), _space(args.b)
    if args.oracle:
        if args.denominator is None:
            raise InputError("--oracle needs --denominator")
        value = box_oracle(A, B, args.denominator)
        _emit({"command": "box", "method": "oracle", "denominator": args.denominator, "value": rat(value)}, out)
        return 0
    r = box(A, B)
    names = (space_name(args.a), space_name(args.b))
    _emit(witness_certificate("box", A, B, r.witness, {"value": rat(r.value)}, names), out)
    return 0


def cmd_gh(args, out) -> int:
    K, L = doc_to_metric(read_json(args.a)), doc_to_metric(read_json(args.b))
    r = gh(K, L)
    names = (space_name(args.a), space_name(args.b))
    _emit(witness_certificate("corr", K, L, r.witness, {"value": rat(r.value)}, names), out)
    return 0


def cmd_gh_eps(args, out) -> int:
    K, L = doc_to_metric(read_json(args.a)), doc_to_metric(read_json(args.b))
    w = gh_eps_check(K, L, args.eps)
    if w is None:
        _emit({"command": "gh-eps", "result": "none", "eps": rat(args.eps)}, out)
        return 1
    _emit(witness_certificate("gh", K, L, w, None, (space_name(args.a), space_name(args.b))), out)
    return 0


def cmd_order(args, out) -> int:
    X, Y = _space(args.x), _space(args.y)
    names = (space_name(args.x), space_name(args.y))
    if args.order_cmd == "check":
        w = check_domination(X, Y)
        if w is None:
            _emit({"command": "order check", "result": "none"}, out)
            return 1
        _emit(witness_certificate("map", X, Y, w, None, names), out)
        return 0
    w = check_eps_domination(X, Y, args.eps)
    if w is None:
        _emit({"command": "order eps", "result": "none", "eps": rat(args.eps)}, out)
        return 1
    _emit(witness_certificate("eps", X, Y, w, None, names), out)
    return 0


def _load_witness(path: str, src, dst):
    doc = read_json(path)
    if doc.get("kind") != "map":
        raise InputError(f"{path} is not a map certificate")
    return witness_from_doc("map", doc["payload"]["witness"], src, dst)


def _find_domination(W, V, path: str | None):
    if path is not None:
        return _load_witness(path, W, V)
    return check_domination(W, V)


def cmd_construct(args, out) -> int:
    what = args.construct_cmd
    if what == "product":
        A, B = _space(args.a), _space(args.b)
        P, px, py = product(A, B)
        _emit(
            {
                "space": space_to_doc(P, "product"),
                "certificates": [
                    witness_certificate("map", P, A, px, None, ("product", space_name(args.a))),
                    witness_certificate("map", P, B, py, None, ("product", space_name(args.b))),
                ],
            },
            out,
        )
        return 0
    if what == "quotient":
        W, Y, Z = _space(args.w), _space(args.y), _space(args.z)
        fY = _find_domination(W, Y, args.fy)
        fZ = _find_domination(W, Z, args.fz)
        if fY is None or fZ is None:
            _emit({"command": "construct quotient", "result": "none"}, out)
            return 1
        X, gY, gZ, proj = quotient_dominator(W, Y, Z, fY, fZ)
        _emit(
            {
                "space": space_to_doc(X, "quotient"),
                "certificates": [
                    witness_certificate("map", X, Y, gY, None, ("quotient", space_name(args.y))),
                    witness_certificate("map", X, Z, gZ, None, ("quotient", space_name(args.z))),
                    witness_certificate("map", W, X, proj, None, (space_name(args.w), "quotient")),
                ],
            },
            out,
        )
        return 0
    if what == "universal":
        spec = UniversalSpaceSpec(args.n, args.d, args.depth)
        U = universal_space(spec)
        doc = {"space": space_to_doc(U, "universal"), "certificates": []}
        if args.target is not None:
            Y = _space(args.target)
            w = universal_dominate(spec, Y)
            doc["certificates"].append(witness_certificate("eps", U, Y, w, None, ("universal", space_name(args.target))))
        _emit(doc, out)
        return 0
    if what == "glue":
        spaces = [_space(p) for p in args.spaces]
        if len(spaces) < 2:
            raise InputError("glue needs at least two spaces")
        couplings, kept, eps_list = [], [], []
        for A, B in zip(spaces, spaces[1:]):
            r = box(A, B)
            couplings.append(r.witness.coupling)
            kept.append(r.witness.kept)
            eps_list.append(r.value)
        result = glue_chain(spaces, couplings, eps_list, kept)
        _emit(glue_certificate(spaces, result, eps_list), out)
        return 0
    # regularize
    X, Y = _space(args.x), _space(args.y)
    w = check_eps_domination(X, Y, args.eps)
    if w is None:
        _emit({"command": "construct regularize", "result": "none", "eps": rat(args.eps)}, out)
        return 1
    Z, zw = regularize(X, Y, w)
    r = box(Y, Z)
    _emit(
        {
            "space": space_to_doc(Z, "regularized"),
            "certificates": [
                witness_certificate("eps", X, Y, w, None, (space_name(args.x), space_name(args.y))),
                witness_certificate("map", X, Z, zw, None, (space_name(args.x), "regularized")),
                witness_certificate("box", Y, Z, r.witness, {"value": rat(r.value)}, (space_name(args.y), "regularized")),
            ],
        },
        out,
    )
    return 0


def cmd_pipeline(args, out) -> int:
    family = [_space(p) for p in args.family]
    schedule = [_rat_arg(s.strip()) for s in args.schedule.split(",") if s.strip()]
    ambient = None
    witnesses = None
    if args.mode == "ambient":
        if args.ambient is None:
            raise InputError("ambient mode needs --ambient")
        ambient = _space(args.ambient)
        given = args.ambient_witness or []
        if given and len(given) != len(family):
            raise InputError("give one --ambient-witness per family member or none")
        witnesses = []
        for k, Y in enumerate(family):
            w = _find_domination(ambient, Y, given[k] if given else None)
            if w is None:
                _emit({"command": "pipeline dominate", "result": "none", "member": k}, out)
                return 1
            witnesses.append(w)
    config = PipelineConfig(tuple(schedule), args.mode, ambient, witnesses)
    _emit(pipeline_certificate(common_dominator(family, config)), out)
    return 0


def cmd_verify(args, out) -> int:
    doc = read_json(args.cert)
    spaces = [_space(p) for p in args.spaces] if args.spaces else None
    docs = doc["certificates"] if "certificates" in doc and "kind" not in doc else [doc]
    if spaces is not None and len(docs) != 1:
        raise InputError("--spaces applies to a single certificate")
    results = [verify_certificate(d, spaces) for d in docs]
    ok = all(r["valid"] and r["reproduced"] for r in results)
    _emit(results[0] if "kind" in doc else {"results": results, "valid": ok}, out)
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mmkit", description="Exact computations on finite metric measure spaces.")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    s = sub.add_parser("prohorov", help="Prohorov distance between two named measures of one space")
    s.add_argument("space")
    s.add_argument("--mu", required=True)
    s.add_argument("--nu", required=True)
    s.add_argument("--oracle", action="store_true")
    s.set_defaults(run=cmd_prohorov)

    s = sub.add_parser("box", help="box distance with an optimal witness")
    s.add_argument("a")
    s.add_argument("b")
    s.add_argument("--oracle", action="store_true")
    s.add_argument("--denominator", type=int)
    s.set_defaults(run=cmd_box)

    s = sub.add_parser("gh", help="Gromov-Hausdorff distance with an optimal correspondence")
    s.add_argument("a")
    s.add_argument("b")
    s.set_defaults(run=cmd_gh)

    s = sub.add_parser("gh-eps", help="search a GH eps-domination map from A to B")
    s.add_argument("a")
    s.add_argument("b")
    s.add_argument("--eps", type=_rat_arg, required=True)
    s.set_defaults(run=cmd_gh_eps)

    s = sub.add_parser("order", help="Lipschitz order: Y below X")
    osub = s.add_subparsers(dest="order_cmd", required=True, parser_class=_Parser)
    o = osub.add_parser("check")
    o.add_argument("x")
    o.add_argument("y")
    o = osub.add_parser("eps")
    o.add_argument("x")
    o.add_argument("y")
    o.add_argument("--eps", type=_rat_arg, required=True)
    s.set_defaults(run=cmd_order)

    s = sub.add_parser("construct", help="build spaces with certificates")
    csub = s.add_subparsers(dest="construct_cmd", required=True, parser_class=_Parser)
    c = csub.add_parser("product")
    c.add_argument("a")
    c.add_argument("b")
    c = csub.add_parser("quotient")
    c.add_argument("w")
    c.add_argument("y")
    c.add_argument("z")
    c.add_argument("--fy", help="map certificate W -> Y (searched when omitted)")
    c.add_argument("--fz", help="map certificate W -> Z (searched when omitted)")
    c = csub.add_parser("universal")
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--d", type=_rat_arg, required=True)
    c.add_argument("--depth", type=int, required=True)
    c.add_argument("--target", help="space to dominate")
    c = csub.add_parser("glue")
    c.add_argument("spaces", nargs="+")
    c = csub.add_parser("regularize")
    c.add_argument("x")
    c.add_argument("y")
    c.add_argument("--eps", type=_rat_arg, required=True)
    s.set_defaults(run=cmd_construct)

    s = sub.add_parser("pipeline", help="common dominator certificates")
    psub = s.add_subparsers(dest="pipeline_cmd", required=True, parser_class=_Parser)
    d = psub.add_parser("dominate")
    d.add_argument("--family", nargs="+", required=True)
    d.add_argument("--schedule", required=True)
    d.add_argument("--mode", choices=("ambient", "free"), default="free")
    d.add_argument("--ambient")
    d.add_argument("--ambient-witness", nargs="+")
    s.set_defaults(run=cmd_pipeline)

    s = sub.add_parser("verify", help="re-run the checks of a certificate")
    s.add_argument("cert")
    s.add_argument("--spaces", nargs="+")
    s.set_defaults(run=cmd_verify)
    return p


def _fail(code: str, detail) -> int:
    sys.stderr.write(json.dumps({"error": code, "detail": detail}, ensure_ascii=False) + "\n")
    return 2


def main(argv: Sequence[str] | None = None, out=None) -> int:
    out = out if out is not None else sys.stdout
    try:
        args = build_parser().parse_args(argv)
        return args.run(args, out)
    except MMError as exc:
        return _fail(exc.code, {"message": str(exc), **exc.detail})
    except InputError as exc:
        return _fail("usage_error", {"message": str(exc)})
    except (OSError, json.JSONDecodeError, ValueError, TypeError, KeyError) as exc:
        return _fail("input_error", {"message": str(exc) or type(exc).__name__})


if __name__ == "__main__":
    sys.exit(main())
