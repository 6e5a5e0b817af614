"""Command-line front end.

Every subcommand writes one JSON document (stdout or ``--out``). Failures
print an error document and exit with 1 (bad input), 2 (verification
failure), 3 (resource cap) or 4 (no convergence).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

from . import __version__
from .density import exact_density, heuristic_density, density
from .errors import InputError, LacunaryError
from .experiments import (
    ExperimentConfig,
    certify_lset,
    lpp_inequality_test,
    parse_set,
    thm01_roundtrip,
)
from .gamma2 import SdpSettings, gamma2, matrix_from_json, matrix_to_json, sign_average_gamma2
from .group_core import is_free_set, leinert_check
from .littlewood import min_partition_01, min_partition_weighted, min_split
from .regular_rep import lset_ratio
from .serialization import SCHEMA_VERSION, dumps
from .store import CertificateStore
from .validation import validate_document
from .window_builder import Product, Window, additive_map, build_window

EXIT_VERIFY = 2


def _load_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from None


def _set_arg(text: str):
    """A set spec like ball(F2,2), or a path to a set document."""
    if Path(text).is_file():
        return parse_set(_load_json(text))
    return parse_set(text)


def _window_arg(path: str) -> Window:
    doc = _load_json(path)
    if isinstance(doc, dict) and "window" in doc and doc.get("schema") != "lacunary/window":
        doc = doc["window"]
    if not isinstance(doc, dict):
        raise InputError(f"{path} is not a window document")
    return Window.from_dict(doc)


def _matrix_arg(path: str):
    """A matrix document, nested list, or window document; returns (input, matrix doc)."""
    doc = _load_json(path)
    if isinstance(doc, dict) and doc.get("schema") == "lacunary/window":
        w = Window.from_dict(doc)
        return w, doc
    M = matrix_from_json(doc)
    return M, matrix_to_json(M)


def _emit(doc, args) -> None:
    text = dumps(doc) + "\n"
    if getattr(args, "out", None):
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _store(args, doc, input_doc, config, **kw) -> None:
    if getattr(args, "store", None):
        CertificateStore(args.store).put(doc, input_doc, config, **kw)


def _write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        wr.writerows(rows)


# ------------------------------------------------------------------ commands


def cmd_gen_set(args):
    S = _set_arg(args.set)
    doc = dict(S.to_dict(), schema="lacunary/set", version=SCHEMA_VERSION, size=len(S))
    _store(args, doc, {"spec": args.set}, {})
    return doc


def cmd_window(args):
    E = _set_arg(args.rows)
    F = _set_arg(args.cols or args.rows)
    if args.phi:
        raw = _load_json(args.phi)
        g = E.group
        phi = {g.parse(k): (complex(*v) if isinstance(v, list) else complex(v)) for k, v in raw.items()}
        desc = None
    else:
        lam = _set_arg(args.set)
        phi = {x: 1.0 for x in lam}
        desc = {"indicator": lam.formatted(), "group": lam.group.to_dict()}
    if args.product == "sum":
        p = additive_map(E, F)
    else:
        p = Product(args.product)
    doc = build_window(phi, p, E, F, description=desc).to_dict()
    _store(args, doc, {"rows": E.to_dict(), "cols": F.to_dict()}, {"entries": doc["entries"], "product": args.product})
    return doc


def cmd_density(args):
    w = _window_arg(args.window)
    if args.mode == "exact":
        cert = exact_density(w, max_side=args.max_side)
    elif args.mode == "heuristic":
        cert = heuristic_density(w, restarts=args.restarts, seed=args.seed)
    else:
        cert = density(w, max_side=args.max_side, restarts=args.restarts, seed=args.seed)
    doc = dict(cert.to_dict(), window=w.to_dict())
    _store(args, doc, w.to_dict(), {"mode": args.mode, "restarts": args.restarts, "seed": args.seed})
    return doc


def cmd_decompose(args):
    w = _window_arg(args.window)
    if args.mode == "01":
        cert = min_partition_01(w)
    elif args.mode == "weighted":
        cert = min_partition_weighted(w)
    else:
        cert = min_split(w, tol=args.tol)
    doc = dict(cert.to_dict(), window=w.to_dict())
    _store(args, doc, w.to_dict(), {"mode": args.mode})
    return doc


def _settings(args) -> SdpSettings:
    return SdpSettings(tolerance=args.tolerance, max_iter=args.max_iter, max_side=args.max_side, seed=args.seed)


def cmd_gamma2(args):
    phi, mdoc = _matrix_arg(args.matrix)
    settings = _settings(args)
    cert = gamma2(phi, settings, with_lower=not args.no_lower)
    doc = dict(cert.to_dict(), matrix=mdoc)
    _store(args, doc, mdoc, settings.to_dict())
    return doc


def cmd_repnorm(args):
    lam = _set_arg(args.set)
    c = args.coefficient if args.coefficient is not None else 1.0 / math.sqrt(len(lam))
    try:
        radii = [int(r) for r in args.radius.split(",")]
    except ValueError:
        raise InputError(f"--radius expects comma-separated integers, got {args.radius!r}") from None
    results = [lset_ratio(lam, c, R, tol=args.tol, norm_tol=args.norm_tol, seed=args.seed, route=args.route) for R in radii]
    monotone = all(b.ratio >= a.ratio * (1 - 10 * args.norm_tol) for a, b in zip(results, results[1:]))
    last = results[-1]
    doc = dict(
        last.to_dict(),
        schema="lacunary/lset-ratio",
        version=SCHEMA_VERSION,
        set=lam.to_dict(),
        coefficients=[c, 0.0],
        schedule=[{"radius": r.radius, "ratio": r.ratio, "norm": r.norm, "route": r.route} for r in results],
        monotone=monotone,
    )
    if args.report_dir:
        from .plotting import plot_ratio_schedule

        out = Path(args.report_dir)
        _write_csv(out / "repnorm.csv", ["radius", "ratio", "norm", "rhs"], [[r.radius, repr(r.ratio), repr(r.norm), repr(r.rhs)] for r in results])
        plot_ratio_schedule([r.radius for r in results], [r.ratio for r in results], out / "repnorm.png")
    _store(args, doc, lam.to_dict(), {"coefficient": c, "radii": radii, "route": args.route, "seed": args.seed})
    return doc


def cmd_signs(args):
    settings = _settings(args)
    if args.roundtrip:
        if not (args.set and args.rows):
            raise InputError("--roundtrip needs --set and --rows")
        lam = _set_arg(args.set)
        E = _set_arg(args.rows)
        F = _set_arg(args.cols or args.rows)
        rep = thm01_roundtrip(
            {x: args.scale for x in lam},
            E,
            F,
            args.trials,
            seed=args.seed,
            grouping=args.grouping,
            kind=args.kind,
            slack=args.slack,
            settings=settings,
            threads=args.threads,
        )
        doc = rep.to_dict()
        inputs = {"set": lam.to_dict(), "rows": E.to_dict(), "cols": F.to_dict(), "scale": args.scale}
        _store(args, doc, inputs, dict(settings.to_dict(), trials=args.trials, grouping=args.grouping, kind=args.kind))
        return doc
    if not args.matrix:
        raise InputError("signs needs --matrix, or --roundtrip with --set and --rows")
    phi, mdoc = _matrix_arg(args.matrix)
    avg = sign_average_gamma2(phi, args.trials, seed=args.seed, kind=args.kind, settings=settings, threads=args.threads)
    doc = avg.to_dict()
    _store(args, doc, mdoc, dict(settings.to_dict(), trials=args.trials, kind=args.kind), matrix=phi)
    return doc


def cmd_lpp(args):
    rep = lpp_inequality_test(args.d, args.n, args.trials, args.mc_samples, seed=args.seed, mc_slack=args.slack)
    if args.report_dir:
        from .plotting import plot_lpp_ratios

        out = Path(args.report_dir)
        _write_csv(out / "lpp.csv", ["trial", "ratio"], [[i, repr(r)] for i, r in enumerate(rep.ratios)])
        plot_lpp_ratios(rep.ratios, out / "lpp.png")
    doc = rep.to_dict()
    _store(args, doc, {"d": args.d, "n": args.n}, {"trials": args.trials, "mc_samples": args.mc_samples, "seed": args.seed})
    return doc


def cmd_certify(args):
    fields = {}
    if args.config:
        fields.update(_load_json(args.config))
    for key in ("set", "schedule"):
        if getattr(args, key):
            fields[f"{key}_spec" if key == "set" else key] = getattr(args, key)
    if "set_spec" not in fields or "schedule" not in fields:
        raise InputError("certify needs --set and --schedule (or a config file providing them)")
    for key in ("seed", "trials", "restarts"):
        if getattr(args, key) is not None:
            fields[key] = getattr(args, key)
    fields["threads"] = args.threads
    try:
        config = ExperimentConfig(**fields)
    except TypeError as exc:
        raise InputError(f"bad config: {exc}") from None
    lam = _set_arg(config.set_spec)
    report = certify_lset(lam, config)
    doc = report.to_dict()
    if args.report_dir:
        from .plotting import plot_lset_report

        out = Path(args.report_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "certify.csv").write_text(report.to_csv(), encoding="utf-8")
        (out / "certify.json").write_text(dumps(doc) + "\n", encoding="utf-8")
        plot_lset_report(report, out)
    _store(args, doc, lam.to_dict(), config.to_dict())
    return doc


def cmd_leinert(args):
    S = _set_arg(args.set)
    check = leinert_check if args.test == "leinert" else is_free_set
    res = check(S, args.depth)
    doc = dict(res.to_dict(S.group), schema="lacunary/relation-result", version=SCHEMA_VERSION, test=args.test, set=S.to_dict())
    _store(args, doc, S.to_dict(), {"test": args.test, "depth": args.depth})
    return doc


def cmd_validate(args):
    doc = _load_json(args.file)
    window = _window_arg(args.window) if args.window else None
    matrix = _matrix_arg(args.matrix)[0] if args.matrix else None
    res = validate_document(doc, window=window, matrix=matrix)
    out = res.to_dict()
    if not res.passed:
        _emit(out, args)
        return EXIT_VERIFY
    return out


# -------------------------------------------------------------------- parser


class _Parser(argparse.ArgumentParser):
    """Usage errors become InputError so they exit 1 with an error document."""

    def error(self, message):
        raise InputError(f"{self.prog}: {message}")


def _common(p, seed=True):
    p.add_argument("--out", help="write the JSON document here instead of stdout")
    if seed:
        p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1, help="cap on worker threads (results do not depend on it)")
    p.add_argument("--store", help="also file the result in this certificate store")


def _sdp_flags(p):
    p.add_argument("--tolerance", type=float, default=1e-7)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--max-side", type=int, default=40)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="lacunary", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-set", help="enumerate a named set")
    p.add_argument("--set", required=True, help="gens(F5), ball(F2,2), sphere(F2,2), dyadic(10), interval(0,31)")
    _common(p, seed=False)
    p.set_defaults(func=cmd_gen_set)

    p = sub.add_parser("window", help="build psi(s,t) = phi(p(s,t)) over rows x cols")
    p.add_argument("--rows", required=True, help="row set spec or file")
    p.add_argument("--cols", help="column set spec or file (default: rows)")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--set", help="phi = indicator of this set")
    src.add_argument("--phi", help="JSON object mapping elements to weights")
    p.add_argument("--product", default="product", choices=[x.value for x in Product] + ["sum"])
    _common(p, seed=False)
    p.set_defaults(func=cmd_window)

    p = sub.add_parser("density", help="submatrix density certificate")
    p.add_argument("--window", required=True)
    p.add_argument("--mode", choices=["auto", "exact", "heuristic"], default="auto")
    p.add_argument("--max-side", type=int, default=14)
    p.add_argument("--restarts", type=int, default=32)
    _common(p)
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("decompose", help="Littlewood partition or split")
    p.add_argument("--window", required=True)
    p.add_argument("--mode", choices=["01", "weighted", "split"], default="01")
    p.add_argument("--tol", type=float, default=1e-7)
    _common(p, seed=False)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("gamma2", help="gamma_2 norm with factorization witness")
    p.add_argument("--matrix", required=True, help="matrix document, nested list, or window")
    p.add_argument("--no-lower", action="store_true", help="skip the contraction lower bound")
    _sdp_flags(p)
    _common(p)
    p.set_defaults(func=cmd_gamma2)

    p = sub.add_parser("repnorm", help="truncated regular-representation ratio")
    p.add_argument("--set", required=True)
    p.add_argument("--radius", required=True, help="comma-separated radii, e.g. 4,6,8")
    p.add_argument("--coefficient", type=float, help="scalar weight on every element (default 1/sqrt|set|)")
    p.add_argument("--route", choices=["auto", "sparse", "quotient"], default="auto")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--norm-tol", type=float, default=1e-8)
    p.add_argument("--report-dir", help="write repnorm.csv and repnorm.png here")
    _common(p)
    p.set_defaults(func=cmd_repnorm)

    p = sub.add_parser("signs", help="sign-averaged gamma_2, or the split round trip")
    p.add_argument("--matrix")
    p.add_argument("--roundtrip", action="store_true")
    p.add_argument("--set", help="support of phi for --roundtrip")
    p.add_argument("--scale", type=float, default=1.0, help="value of phi on its support")
    p.add_argument("--rows")
    p.add_argument("--cols")
    p.add_argument("--grouping", choices=["entry", "fiber"], default="entry")
    p.add_argument("--slack", type=float, default=0.1)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--kind", choices=["sign", "phase"], default="sign")
    _sdp_flags(p)
    _common(p)
    p.set_defaults(func=cmd_signs)

    p = sub.add_parser("lpp", help="Monte Carlo check of the trace-duality inequality")
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--mc-samples", type=int, default=2000)
    p.add_argument("--slack", type=float, default=0.05)
    p.add_argument("--report-dir", help="write lpp.csv and lpp.png here")
    _common(p)
    p.set_defaults(func=cmd_lpp)

    p = sub.add_parser("certify", help="L-set certification along a window schedule")
    p.add_argument("--set")
    p.add_argument("--schedule", help="balls:1..3, dyadic:1..10 or gens:1,2,4")
    p.add_argument("--config", help="JSON file with experiment settings")
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--report-dir", help="write certify.json, certify.csv and figures here")
    p.add_argument("--out")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--store")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("leinert", help="bounded-depth Leinert or freeness search")
    p.add_argument("--set", required=True)
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--test", choices=["leinert", "free"], default="leinert")
    _common(p, seed=False)
    p.set_defaults(func=cmd_leinert)

    p = sub.add_parser("validate", help="schema check and recomputation of a document")
    p.add_argument("file")
    p.add_argument("--window", help="window for certificates without an embedded one")
    p.add_argument("--matrix", help="matrix for gamma2 certificates without an embedded one")
    p.add_argument("--out")
    p.set_defaults(func=cmd_validate)
    return ap


def _error(exc: LacunaryError) -> dict:
    d = exc.to_dict()
    d.update(schema="lacunary/error", version=SCHEMA_VERSION, exit_code=exc.exit_code)
    try:
        dumps(d)
    except TypeError:
        d["details"] = {k: str(v) for k, v in d["details"].items()}
    return d


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "threads", 1) < 1:
            raise InputError("--threads must be at least 1")
        result = args.func(args)
    except LacunaryError as exc:
        sys.stderr.write(dumps(_error(exc)) + "\n")
        return exc.exit_code
    if isinstance(result, int):
        return result
    _emit(result, args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
