"""Command line front end: ``traintrack`` and ``analyze``.

Exit codes: 0 success, 1 other input errors (for example a visibly
non-injective map), 2 schema or usage errors, 3 reducible map without
``--relative-auto``, 4 move budget exhausted.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

import jsonschema

from . import errors
from .dynamics import (
    atoroidal_scan,
    classify_growth,
    enumerate_nielsen_paths,
    flare_certificate,
    resample_flare,
)
from .gates import constants, gate_structure, train_track_report
from .maps import GraphMap, transition_matrix
from .moves import DEFAULT_BUDGET, TrainTrackResult, train_track_algorithm
from .parabolic import (
    ParabolicFamily,
    check_strictly_type_preserving,
    find_invariant_factor_system,
    malnormality,
    parabolic_orbits,
    transversality_constant,
)
from .spectral import DEFAULT_TOL, PerronData, assign_metric, fmt_decimal, metric_perron
from .words import Alphabet, Endomorphism

SCHEMA_VERSION = 1
EXIT_OK, EXIT_ERROR, EXIT_SCHEMA, EXIT_REDUCIBLE, EXIT_BUDGET = 0, 1, 2, 3, 4

ENDO_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "rank", "generators", "images"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "rank": {"type": "integer", "minimum": 1},
        "generators": {"type": "array", "items": {"type": "string", "minLength": 1}, "uniqueItems": True},
        "images": {"type": "object", "additionalProperties": {"type": "string"}},
    },
}

FAMILY_SCHEMA = {
    "type": "object",
    "required": ["subgroups"],
    "properties": {
        "subgroups": {
            "type": "array",
            "items": {"type": "array", "minItems": 1, "items": {"type": "string"}},
        },
    },
}

ARTIFACT_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "kind", "endomorphism"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "kind": {"enum": ["traintrack", "reducible", "budget_exhausted", "analysis"]},
        "endomorphism": ENDO_SCHEMA,
    },
}

log = logging.getLogger("traintrack")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# documents


def load_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc


def parse_endomorphism(doc: dict) -> Endomorphism:
    try:
        jsonschema.validate(doc, ENDO_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise errors.SchemaError(exc.message) from exc
    if len(doc["generators"]) != doc["rank"]:
        raise errors.SchemaError("rank does not match the number of generators")
    if set(doc["images"]) != set(doc["generators"]):
        raise errors.SchemaError("images must be given for exactly the generators")
    try:
        alphabet = Alphabet(doc["rank"], tuple(doc["generators"]))
        return Endomorphism.from_strings(alphabet, doc["images"])
    except (ValueError, errors.UnknownLetter) as exc:
        raise errors.SchemaError(str(exc)) from exc


def endomorphism_doc(phi: Endomorphism) -> dict:
    A = phi.alphabet
    return {"schema_version": SCHEMA_VERSION, "rank": A.rank, "generators": list(A.names),
            "images": phi.to_strings()}


def parse_family(doc: dict, alphabet: Alphabet) -> ParabolicFamily:
    try:
        jsonschema.validate(doc, FAMILY_SCHEMA)
        return ParabolicFamily.from_dict(alphabet, doc)
    except jsonschema.ValidationError as exc:
        raise errors.SchemaError(exc.message) from exc
    except (ValueError, errors.UnknownLetter) as exc:
        raise errors.SchemaError(str(exc)) from exc


def read_input(path: str):
    """An endomorphism document, or a stored artifact carrying one (and maybe a map)."""
    doc = load_json(path)
    if isinstance(doc, dict) and "kind" in doc:
        try:
            jsonschema.validate(doc, ARTIFACT_SCHEMA)
        except jsonschema.ValidationError as exc:
            raise errors.SchemaError(exc.message) from exc
        phi = parse_endomorphism(doc["endomorphism"])
        stored = None
        if doc["kind"] == "traintrack" and "map" in doc:
            try:
                stored = GraphMap.from_dict(doc["map"])
            except (KeyError, TypeError, ValueError) as exc:
                raise errors.SchemaError(f"bad stored map: {exc}") from exc
        return phi, stored
    if not isinstance(doc, dict):
        raise errors.SchemaError("input must be a JSON object")
    return parse_endomorphism(doc), None


# ---------------------------------------------------------------------------
# pipelines


def traintrack_section(result: TrainTrackResult) -> dict:
    f = result.map
    g = f.graph
    out = {
        "lambda": fmt_decimal(result.perron.lambda_),
        "radius": f"{result.perron.radius:.3e}",
        "enclosure": [fmt_decimal(result.perron.lower), fmt_decimal(result.perron.upper)],
        "map": f.to_dict(),
        "transition_matrix": transition_matrix(f).to_dict(),
        "gates": gate_structure(f).to_dict(g),
        "checks": {"marking": f.check_marking(), **{k: len(v) for k, v in train_track_report(f).items()}},
        "moves": len(result.log),
    }
    return out


def run_traintrack(phi: Endomorphism, budget: int, tol: float, relative_auto: bool):
    """Returns ``(exit code, document)``."""
    doc = {"schema_version": SCHEMA_VERSION, "endomorphism": endomorphism_doc(phi)}
    try:
        result = train_track_algorithm(phi, budget=budget, tol=tol)
    except errors.NotIrreducible as exc:
        names = _edge_names(exc)
        doc.update(kind="reducible", witness=names)
        if relative_auto:
            chain = find_invariant_factor_system(phi, depth=3)
            doc["factor_chain"] = chain.to_dict()
            return EXIT_OK, doc
        return EXIT_REDUCIBLE, doc
    except errors.BudgetExhausted as exc:
        doc.update(kind="budget_exhausted", message=str(exc))
        if exc.state is not None:
            doc["state"] = exc.state.to_dict()
        return EXIT_BUDGET, doc
    doc.update(kind="traintrack", **traintrack_section(result))
    doc["log"] = result.log.to_list()
    return EXIT_OK, doc


def _edge_names(exc) -> list:
    wit = sorted(exc.witness or ())
    if exc.state is not None:
        names = exc.state.graph.edge_names
        return [names.get(e, f"e{e}") for e in wit]
    return [f"e{e}" for e in wit]


def _soft(fn):
    try:
        return fn()
    except errors.TrainTrackError as exc:
        return {"error": type(exc).__name__, "message": str(exc)}


def run_analyze(phi: Endomorphism, stored: GraphMap | None, family: ParabolicFamily | None, args):
    A = phi.alphabet
    doc = {"schema_version": SCHEMA_VERSION, "kind": "analysis", "endomorphism": endomorphism_doc(phi)}
    if family is not None:
        doc["family"] = family.to_dict()
    if args.atoroidal:
        k, d, l = args.atoroidal
        wit = atoroidal_scan(phi, k, d, l)
        doc["atoroidal"] = {"bounds": {"k": k, "d": d, "len": l},
                            "witness": None if wit is None else wit.to_dict(A)}
    if stored is not None:
        f = stored
        perron = metric_perron(f, args.tol) if any(len(im) > 1 for im in f.edge_images.values()) else None
        if perron is not None:
            f = assign_metric(f, perron)
    else:
        code, tt = run_traintrack(phi, args.budget, args.tol, args.relative_auto)
        if tt["kind"] != "traintrack":
            doc["traintrack"] = {k: v for k, v in tt.items() if k not in ("schema_version", "endomorphism")}
            return code, doc
        f = GraphMap.from_dict(tt["map"])
        perron = metric_perron(f, args.tol) if any(len(im) > 1 for im in f.edge_images.values()) else None
        if perron is not None:
            f = assign_metric(f, perron)
    lam = PerronData(1.0, 0.0, (), args.tol, 1.0, 1.0) if perron is None else perron
    doc["traintrack"] = {
        "lambda": fmt_decimal(lam.lambda_),
        "radius": f"{lam.radius:.3e}",
        "map": f.to_dict(),
        "gates": gate_structure(f).to_dict(f.graph),
    }
    if family is not None and len(family):
        check = check_strictly_type_preserving(phi, family)
        doc["parabolic"] = {
            "type_preserving": check.to_dict(A),
            "orbits": _soft(lambda: parabolic_orbits(phi, family, check=check).to_dict()),
            "malnormal_violations": [{"i": i, "j": j, "word": A.format(w)} for i, j, w in malnormality(family)],
        }
    c_tr = _soft(lambda: transversality_constant(f, family))
    if isinstance(c_tr, dict):
        doc["transversality"] = c_tr
        c_tr = None
    else:
        doc["transversality"] = fmt_decimal(c_tr)
    consts = None
    if c_tr is not None:
        try:
            consts = constants(f, c_tr)
            doc["constants"] = consts.to_dict()
        except errors.PowerBudgetExhausted as exc:
            consts = exc.fallback
            doc["constants"] = {**consts.to_dict(), "error": "PowerBudgetExhausted", "message": str(exc)}
        except errors.TrainTrackError as exc:
            doc["constants"] = {"error": type(exc).__name__, "message": str(exc)}
    if consts is not None and consts.expanding:
        base = constants(f, 1.0, strict=False) if c_tr != 1.0 else consts
        rep = _soft(lambda: enumerate_nielsen_paths(base.map, base, period_max=4))
        doc["nielsen"] = rep if isinstance(rep, dict) else rep.to_dict(base.map.graph, A)
    elif consts is not None:
        doc["nielsen"] = {"error": "NonExpanding", "message": "stretch factor is 1"}
    if consts is not None:
        words = [A.parse(w) for w in (args.words or [])] or [(i,) for i in range(1, A.rank + 1)]
        growth = {}
        for w in words:
            key = A.format(w)
            res = _soft(lambda: classify_growth(f, w, args.horizon, consts, family))
            growth[key] = res if isinstance(res, dict) else res.to_dict(f.graph)
        doc["growth"] = growth
    if args.flare:
        lam_fl, M_max, L = args.flare
        doc["flare"] = _flare_section(f, family, consts, lam_fl, int(M_max), int(L), args.seed, A)
    return EXIT_OK, doc


def _flare_section(f, family, consts, lam_fl, M_max, L, seed, A):
    if A.rank == 1 and (family is None or len(family) == 0):
        return {"error": "GroupIsZ", "message": "the group is infinite cyclic"}
    if consts is None or consts.critical is None:
        return {"error": "NoCriticalConstant", "message": "stretch factor does not beat the transversality constant"}

    def run():
        cert = flare_certificate(consts.map, family, lam_fl, M_max, L, consts)
        out = cert.to_dict(A)
        if cert.valid:
            bad = resample_flare(consts.map, family, cert, 500, seed)
            out["resample"] = {"count": 500, "seed": seed, "violations": [A.format(w) for w in bad]}
        out["power"] = consts.power
        return out

    return _soft(run)


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="traintrack", description="Train track maps for free group endomorphisms.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("input", help="endomorphism JSON (or a stored artifact for analyze)")
        sp.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="maximum number of moves")
        sp.add_argument("--tol", type=float, default=DEFAULT_TOL, help="eigenvalue tolerance")
        sp.add_argument("--relative-auto", action="store_true",
                        help="on a reducible map, report the invariant subgroup chain instead of failing")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", help="write the JSON here instead of stdout")
        sp.add_argument("-v", "--verbose", action="store_true")

    common(sub.add_parser("traintrack", help="compute a train track representative"))
    an = sub.add_parser("analyze", help="constants, gates, Nielsen paths, growth, scans and flaring")
    common(an)
    an.add_argument("--family", help="subgroup family JSON")
    an.add_argument("--horizon", type=int, default=10)
    an.add_argument("--flare", nargs=3, type=float, metavar=("LAMBDA", "M", "L"))
    an.add_argument("--atoroidal", nargs=3, type=int, metavar=("K", "D", "LEN"))
    an.add_argument("--words", nargs="*", help="elements whose growth to classify (default: generators)")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_SCHEMA if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        phi, stored = read_input(args.input)
        if args.command == "traintrack":
            code, doc = run_traintrack(phi, args.budget, args.tol, args.relative_auto)
        else:
            if args.horizon < 4:
                raise UsageError("--horizon must be at least 4")
            family = parse_family(load_json(args.family), phi.alphabet) if args.family else None
            code, doc = run_analyze(phi, stored, family, args)
    except (UsageError, errors.SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except errors.TrainTrackError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    text = json.dumps(doc, indent=2) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
