"""JSON documents for spaces and certificates.

Rationals are strings (``"p/q"`` or ``"n"``), witnesses refer to points by
label, and every certificate embeds the spaces it talks about so that it can
be re-checked on its own.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path
from typing import Any

from mmkit.core import (
    BoxWitness,
    CorrWitness,
    Coupling,
    DimensionMismatch,
    EpsWitness,
    FiniteMetric,
    FinitePseudoMetric,
    GHWitness,
    MapWitness,
    MMSpace,
    parse_rat,
    validate_space,
)
from mmkit.transport import prohorov
from mmkit.verify import Check, Report, verify_witness

KINDS = ("map", "eps", "box", "corr", "gh", "chain", "pipeline", "glue")


def rat(x) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def parse_value(v) -> Fraction:
    if isinstance(v, bool) or not isinstance(v, (str, int)):
        raise ValueError(f"expected a rational string, got {v!r}")
    return parse_rat(str(v))


def dumps(doc: Any) -> str:
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def read_json(path) -> Any:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# spaces


def space_to_doc(S, name: str = "space") -> dict:
    metric = S.metric if isinstance(S, MMSpace) else S
    doc = {
        "name": name,
        "points": list(metric.labels),
        "dist": [[rat(v) for v in row] for row in metric.dist],
    }
    if isinstance(S, MMSpace):
        doc["mass"] = [rat(m) for m in S.mass]
    return doc


def _doc_matrix(doc: dict):
    if not isinstance(doc, dict):
        raise ValueError("a space document must be a JSON object")
    for key in ("points", "dist"):
        if key not in doc:
            raise ValueError(f"space document lacks {key!r}")
    points = [str(p) for p in doc["points"]]
    dist = [[parse_value(v) for v in row] for row in doc["dist"]]
    if len(dist) != len(points):
        raise DimensionMismatch(f"{len(points)} points for a {len(dist)}-row matrix")
    return points, dist


def doc_to_space(doc: dict, measure: str | None = None) -> MMSpace:
    """Parse into a validated mm-space; ``measure`` picks an entry of ``measures`` instead of ``mass``."""
    points, dist = _doc_matrix(doc)
    if measure is not None:
        measures = doc.get("measures") or {}
        if measure not in measures:
            raise ValueError(f"no measure named {measure!r}")
        mass = measures[measure]
    elif "mass" in doc:
        mass = doc["mass"]
    else:
        raise ValueError("space document has no mass vector")
    return validate_space(dist, [parse_value(m) for m in mass], points)


def doc_to_metric(doc: dict) -> FiniteMetric:
    points, dist = _doc_matrix(doc)
    return FiniteMetric(tuple(points), dist)


def doc_to_pseudo(doc: dict) -> FinitePseudoMetric:
    points, dist = _doc_matrix(doc)
    return FinitePseudoMetric(tuple(points), dist)


def doc_measures(doc: dict) -> dict[str, list[Fraction]]:
    return {k: [parse_value(v) for v in vec] for k, vec in (doc.get("measures") or {}).items()}


def load_space(path, measure: str | None = None) -> MMSpace:
    return doc_to_space(read_json(path), measure)


def space_name(path) -> str:
    return Path(path).stem


# ---------------------------------------------------------------------------
# witnesses


def _index(labels) -> dict[str, int]:
    return {lab: i for i, lab in enumerate(labels)}


def _lookup(table: dict[str, int], label, side: str) -> int:
    if label not in table:
        raise DimensionMismatch(f"unknown {side} point {label!r}")
    return table[label]


def _map_doc(f, src, dst) -> dict:
    return {src.labels[i]: dst.labels[j] for i, j in enumerate(f)}


def _map_from(doc: dict, src, dst) -> tuple[int, ...]:
    s, t = _index(src.labels), _index(dst.labels)
    f = [None] * src.n
    for a, b in doc.items():
        f[_lookup(s, a, "source")] = _lookup(t, b, "target")
    if any(v is None for v in f):
        raise DimensionMismatch("map does not cover every source point")
    return tuple(f)


def witness_to_doc(w, src, dst) -> dict:
    if isinstance(w, MapWitness):
        return {"map": _map_doc(w.f, src, dst)}
    if isinstance(w, EpsWitness):
        return {
            "map": _map_doc(w.f, src, dst),
            "domain": [src.labels[i] for i in w.domain],
            "eps": rat(w.eps),
        }
    if isinstance(w, BoxWitness):
        return {
            "coupling": [[rat(v) for v in row] for row in w.coupling.pi],
            "kept": [[src.labels[i], dst.labels[j]] for i, j in w.kept],
            "eps": rat(w.eps),
        }
    if isinstance(w, CorrWitness):
        return {
            "pairs": [[src.labels[i], dst.labels[j]] for i, j in w.pairs],
            "distortion": rat(w.distortion),
        }
    if isinstance(w, GHWitness):
        return {"map": _map_doc(w.f, src, dst), "eps": rat(w.eps)}
    raise TypeError(f"cannot serialize {type(w).__name__}")


def witness_from_doc(kind: str, doc: dict, src, dst):
    if kind == "map":
        return MapWitness(_map_from(doc["map"], src, dst))
    if kind == "eps":
        s = _index(src.labels)
        return EpsWitness(
            _map_from(doc["map"], src, dst),
            tuple(_lookup(s, a, "source") for a in doc["domain"]),
            parse_value(doc["eps"]),
        )
    if kind == "box":
        s, t = _index(src.labels), _index(dst.labels)
        pi = [[parse_value(v) for v in row] for row in doc["coupling"]]
        coupling = Coupling(pi, src.mass, dst.mass)
        kept = [(_lookup(s, a, "source"), _lookup(t, b, "target")) for a, b in doc["kept"]]
        return BoxWitness(coupling, kept, parse_value(doc["eps"]))
    if kind == "corr":
        s, t = _index(src.labels), _index(dst.labels)
        pairs = [(_lookup(s, a, "source"), _lookup(t, b, "target")) for a, b in doc["pairs"]]
        return CorrWitness(pairs, parse_value(doc["distortion"]))
    if kind == "gh":
        return GHWitness(_map_from(doc["map"], src, dst), parse_value(doc["eps"]))
    raise ValueError(f"unknown witness kind {kind!r}")


# ---------------------------------------------------------------------------
# certificates


def check_doc(c: Check) -> dict:
    return {"name": c.name, "lhs": rat(c.lhs), "rhs": rat(c.rhs), "relation": c.relation, "holds": c.holds}


def _prefixed(report: Report, prefix: str) -> list[Check]:
    return [Check(f"{prefix}{c.name}", c.lhs, c.rhs, c.relation, c.holds) for c in report.checks]


def _finish(kind: str, payload: dict, checks: list[Check]) -> dict:
    return {
        "kind": kind,
        "payload": payload,
        "checks": [check_doc(c) for c in checks],
        "valid": all(c.holds for c in checks),
    }


_SPACE_KIND = {"corr": "metric", "gh": "metric"}


def _space_doc(S, kind: str, name: str) -> dict:
    if _SPACE_KIND.get(kind) == "metric":
        return space_to_doc(S.metric if isinstance(S, MMSpace) else S, name)
    return space_to_doc(S, name)


def witness_certificate(kind: str, src, dst, w, extra: dict | None = None, names=("source", "target")) -> dict:
    """Certificate for a single witness from ``src`` to ``dst``."""
    payload = {
        "source": _space_doc(src, kind, names[0]),
        "target": _space_doc(dst, kind, names[1]),
        "witness": witness_to_doc(w, src, dst),
    }
    if extra:
        payload.update(extra)
    return _finish(kind, payload, _witness_checks(kind, src, dst, w, payload))


def _witness_checks(kind, src, dst, w, payload) -> list[Check]:
    report = verify_witness(src, dst, w)
    if "value" in payload:
        value = parse_value(payload["value"])
        scale = Fraction(1, 2) if kind == "corr" else Fraction(1)
        bound = w.distortion if kind == "corr" else w.eps
        report.add("value", value, bound * scale, "==")
    return list(report.checks)


def chain_certificate(cert) -> dict:
    spaces = cert.spaces
    steps = []
    checks: list[Check] = []
    for k, w in enumerate(cert.steps):
        steps.append(witness_to_doc(w, spaces[k + 1], spaces[k]))
        checks += _prefixed(verify_witness(spaces[k + 1], spaces[k], w), f"step[{k}].")
    checks += _prefixed(verify_witness(spaces[-1], spaces[0], cert.composed), "composed.")
    r = Report("chain")
    r.add("composed_bound", cert.composed.eps, cert.bound, "<=")
    checks += r.checks
    payload = {
        "spaces": [space_to_doc(S, f"X{k + 1}") for k, S in enumerate(spaces)],
        "steps": steps,
        "composed": witness_to_doc(cert.composed, spaces[-1], spaces[0]),
        "bound": rat(cert.bound),
    }
    return _finish("chain", payload, checks)


def pipeline_certificate(cert) -> dict:
    family = cert.family
    ambient = cert.config.ambient if cert.config.mode == "ambient" else None
    top = cert.chain.top
    checks: list[Check] = []
    levels = []
    for n, lv in enumerate(cert.levels):
        X = lv.space
        entry = {
            "eps": rat(lv.eps),
            "space": space_to_doc(X, f"X{n + 1}"),
            "members": [witness_to_doc(w, X, Y) for w, Y in zip(lv.members, family)],
            "to_level": witness_to_doc(lv.to_level, top, X),
        }
        for k, (w, Y) in enumerate(zip(lv.members, family)):
            checks += _prefixed(verify_witness(X, Y, w), f"level[{n}].member[{k}].")
            r = Report("claim")
            r.add(f"level[{n}].member[{k}].claimed_eps", w.eps, lv.eps, "==")
            checks += r.checks
        checks += _prefixed(verify_witness(top, X, lv.to_level), f"level[{n}].to_level.")
        if lv.from_ambient is not None:
            entry["from_ambient"] = witness_to_doc(lv.from_ambient, ambient, X)
            checks += _prefixed(verify_witness(ambient, X, lv.from_ambient), f"level[{n}].from_ambient.")
        levels.append(entry)
    steps = []
    for n, w in enumerate(cert.steps):
        fine, coarse = cert.levels[n + 1].space, cert.levels[n].space
        steps.append(witness_to_doc(w, fine, coarse))
        checks += _prefixed(verify_witness(fine, coarse, w), f"step[{n}].")
        r = Report("claim")
        r.add(f"step[{n}].claimed_eps", w.eps, 2 * cert.levels[n].eps, "==")
        checks += r.checks
    spaces = [lv.space for lv in cert.levels]
    comp = cert.compressed.composed
    checks += _prefixed(verify_witness(spaces[-1], spaces[0], comp), "compressed.")
    r = Report("claim")
    r.add("cauchy_bound", comp.eps, cert.cauchy_bound, "<=")
    checks += r.checks
    payload = {
        "mode": cert.config.mode,
        "schedule": [rat(e) for e in cert.config.eps_schedule],
        "family": [space_to_doc(Y, f"Y{k + 1}") for k, Y in enumerate(family)],
        "top": space_to_doc(top, "top"),
        "levels": levels,
        "steps": steps,
        "compressed": witness_to_doc(comp, spaces[-1], spaces[0]),
        "cauchy_bound": rat(cert.cauchy_bound),
    }
    if ambient is not None:
        payload["ambient"] = space_to_doc(ambient, "ambient")
    return _finish("pipeline", payload, checks)


def _glue_checks(spaces, glued: FinitePseudoMetric, embeddings, eps_list) -> list[Check]:
    r = Report("glue")
    masses = []
    for k, (S, emb) in enumerate(zip(spaces, embeddings)):
        for i in range(S.n):
            for j in range(i + 1, S.n):
                r.add(f"isometry[{k}][{S.labels[i]},{S.labels[j]}]", glued.d(emb[i], emb[j]), S.d(i, j), "==")
        vec = [Fraction(0)] * glued.n
        for i, p in enumerate(emb):
            vec[p] += S.mass[i]
        masses.append(vec)
    for k, eps in enumerate(eps_list):
        r.add(f"prohorov[{k},{k + 1}]", prohorov(glued, masses[k], masses[k + 1]).value, 2 * eps, "<=")
    return list(r.checks)


def glue_certificate(spaces, result, eps_list) -> dict:
    payload = {
        "spaces": [space_to_doc(S, f"Y{k + 1}") for k, S in enumerate(spaces)],
        "glued": space_to_doc(result.space, "glued"),
        "embeddings": [[result.space.labels[p] for p in emb] for emb in result.embeddings],
        "eps": [rat(e) for e in eps_list],
        "dp_bounds": [rat(v) for v in result.dp_bounds],
    }
    return _finish("glue", payload, _glue_checks(spaces, result.space, result.embeddings, eps_list))


# ---------------------------------------------------------------------------
# re-verification


def recompute_checks(doc: dict, spaces: list | None = None) -> list[Check]:
    """Rebuild every check of a certificate from its payload alone.

    ``spaces`` (source, target) replaces the embedded spaces of a
    single-witness certificate.
    """
    kind = doc.get("kind")
    payload = doc.get("payload")
    if kind not in KINDS or not isinstance(payload, dict):
        raise ValueError(f"not a certificate document (kind {kind!r})")
    if kind in ("map", "eps", "box", "corr", "gh"):
        parse = doc_to_metric if _SPACE_KIND.get(kind) == "metric" else doc_to_space
        if spaces:
            if len(spaces) != 2:
                raise ValueError("a single-witness certificate needs exactly two spaces")
            src, dst = spaces
            if _SPACE_KIND.get(kind) == "metric":
                src = src.metric if isinstance(src, MMSpace) else src
                dst = dst.metric if isinstance(dst, MMSpace) else dst
        else:
            src, dst = parse(payload["source"]), parse(payload["target"])
        w = witness_from_doc(kind, payload["witness"], src, dst)
        return _witness_checks(kind, src, dst, w, payload)
    if kind == "chain":
        S = [doc_to_space(d) for d in payload["spaces"]]
        checks: list[Check] = []
        for k, wd in enumerate(payload["steps"]):
            w = witness_from_doc("eps", wd, S[k + 1], S[k])
            checks += _prefixed(verify_witness(S[k + 1], S[k], w), f"step[{k}].")
        comp = witness_from_doc("eps", payload["composed"], S[-1], S[0])
        checks += _prefixed(verify_witness(S[-1], S[0], comp), "composed.")
        r = Report("chain")
        r.add("composed_bound", comp.eps, parse_value(payload["bound"]), "<=")
        return checks + r.checks
    if kind == "pipeline":
        family = [doc_to_space(d) for d in payload["family"]]
        top = doc_to_space(payload["top"])
        ambient = doc_to_space(payload["ambient"]) if "ambient" in payload else None
        checks = []
        spaces_by_level = []
        for n, entry in enumerate(payload["levels"]):
            X = doc_to_space(entry["space"])
            eps = parse_value(entry["eps"])
            spaces_by_level.append((X, eps))
            for k, (wd, Y) in enumerate(zip(entry["members"], family)):
                w = witness_from_doc("eps", wd, X, Y)
                checks += _prefixed(verify_witness(X, Y, w), f"level[{n}].member[{k}].")
                r = Report("claim")
                r.add(f"level[{n}].member[{k}].claimed_eps", w.eps, eps, "==")
                checks += r.checks
            w = witness_from_doc("eps", entry["to_level"], top, X)
            checks += _prefixed(verify_witness(top, X, w), f"level[{n}].to_level.")
            if "from_ambient" in entry:
                w = witness_from_doc("eps", entry["from_ambient"], ambient, X)
                checks += _prefixed(verify_witness(ambient, X, w), f"level[{n}].from_ambient.")
        for n, wd in enumerate(payload["steps"]):
            (coarse, eps), (fine, _) = spaces_by_level[n], spaces_by_level[n + 1]
            w = witness_from_doc("eps", wd, fine, coarse)
            checks += _prefixed(verify_witness(fine, coarse, w), f"step[{n}].")
            r = Report("claim")
            r.add(f"step[{n}].claimed_eps", w.eps, 2 * eps, "==")
            checks += r.checks
        first, last = spaces_by_level[0][0], spaces_by_level[-1][0]
        comp = witness_from_doc("eps", payload["compressed"], last, first)
        checks += _prefixed(verify_witness(last, first, comp), "compressed.")
        r = Report("claim")
        r.add("cauchy_bound", comp.eps, parse_value(payload["cauchy_bound"]), "<=")
        return checks + r.checks
    # glue
    S = [doc_to_space(d) for d in payload["spaces"]]
    glued = doc_to_pseudo(payload["glued"])
    idx = _index(glued.labels)
    embeddings = [[_lookup(idx, lab, "glued") for lab in emb] for emb in payload["embeddings"]]
    eps_list = [parse_value(e) for e in payload["eps"]]
    return _glue_checks(S, glued, embeddings, eps_list)


def verify_certificate(doc: dict, spaces: list | None = None) -> dict:
    """Re-run a certificate; ``reproduced`` says whether the stored checks match exactly."""
    checks = [check_doc(c) for c in recompute_checks(doc, spaces)]
    valid = all(c["holds"] for c in checks)
    return {
        "kind": doc["kind"],
        "valid": valid,
        "reproduced": checks == doc.get("checks") and valid == doc.get("valid"),
        "failures": [c for c in checks if not c["holds"]],
    }
