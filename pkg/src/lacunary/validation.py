"""Schema checks plus independent re-verification of every document type."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import jsonschema
import numpy as np
from referencing import Registry, Resource

from .density import DensityCertificate, verify_density
from .errors import InputError, LacunaryError
from .gamma2 import Gamma2Certificate, matrix_from_json, verify_gamma2
from .group_core import FiniteSet, group_with_inverses, is_free_set, leinert_check, product_of
from .littlewood import PartitionCertificate, SplitCertificate, verify_certificate
from .regular_rep import coefficient_rhs
from .serialization import SCHEMA_VERSION, content_hash
from .window_builder import Window

SUPPORTED_VERSIONS = (SCHEMA_VERSION,)
REL_TOL = 1e-9


@lru_cache(maxsize=1)
def schemas() -> dict:
    """All shipped schemas keyed by their short name (``window``, ``lset-report``, ...)."""
    out = {}
    for entry in resources.files("lacunary").joinpath("schemas").iterdir():
        if entry.name.endswith(".schema.json"):
            doc = json.loads(entry.read_text(encoding="utf-8"))
            out[doc["$id"].split("/", 1)[1]] = doc
    return out


@lru_cache(maxsize=1)
def _registry() -> Registry:
    return Registry().with_resources((doc["$id"], Resource.from_contents(doc)) for doc in schemas().values())


@dataclass
class ValidationResult:
    passed: bool
    schema: str | None
    messages: list = field(default_factory=list)
    recomputed: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema": "lacunary/validation",
            "version": SCHEMA_VERSION,
            "passed": self.passed,
            "document": self.schema,
            "messages": self.messages,
            "recomputed": self.recomputed,
        }


def schema_errors(doc: dict) -> list[str]:
    name = str(doc.get("schema", "")).removeprefix("lacunary/")
    known = schemas()
    if name not in known:
        return [f"unknown document type {doc.get('schema')!r}; known: {sorted('lacunary/' + k for k in known)}"]
    validator = jsonschema.Draft202012Validator(known[name], registry=_registry())
    return [
        f"{'/'.join(str(p) for p in e.absolute_path) or '<root>'}: {e.message}"
        for e in sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    ]


def _close(a, b, tol=REL_TOL) -> bool:
    if a is None or b is None:
        return a is None and b is None
    if isinstance(a, float) and isinstance(b, float) and math.isnan(a) and math.isnan(b):
        return True
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def _window(doc, window):
    if window is not None:
        return window
    if "window" in doc:
        return Window.from_dict(doc["window"])
    raise InputError("certificate has no embedded window; pass the window file")


def _check_partition(doc, window, msgs, rec):
    w = _window(doc, window)
    cert = PartitionCertificate.from_dict(doc)
    rep = verify_certificate(cert, w)
    msgs += rep.messages
    rec.update(rep.recomputed)
    if "C" in doc and not _close(doc["C"], max(rep.recomputed.get("C1", 0), rep.recomputed.get("C2", 0))):
        msgs.append(f"C: stored {doc['C']!r} is not max(C1, C2)")


def _check_split(doc, window, msgs, rec):
    w = _window(doc, window)
    cert = SplitCertificate.from_dict(doc)
    rep = verify_certificate(cert, w)
    msgs += rep.messages
    rec.update(rep.recomputed)
    if "value" in doc and not _close(doc["value"], max(rep.recomputed.get("R1", 0), rep.recomputed.get("R2", 0))):
        msgs.append(f"value: stored {doc['value']!r} is not max(R1, R2)")


def _check_density(doc, window, msgs, rec):
    w = _window(doc, window)
    cert = DensityCertificate.from_dict(doc)
    if cert.window_id != w.id:
        msgs.append("window id mismatch")
    ok, d = verify_density(cert, w)
    rec["D"] = d
    if not ok:
        msgs.append(f"D: stored {cert.D!r}, witness gives {d!r}")


def _check_gamma2(doc, matrix, msgs, rec):
    if matrix is None:
        if "matrix" not in doc:
            raise InputError("certificate has no embedded matrix; pass the matrix file")
        m = doc["matrix"]
        matrix = Window.from_dict(m) if m.get("schema") == "lacunary/window" else matrix_from_json(m)
    cert = Gamma2Certificate.from_dict(doc)
    msgs += verify_gamma2(cert, matrix)
    rec["value_upper"] = cert.max_row_norm * cert.max_col_norm


def _check_window(doc, msgs, rec):
    w = Window.from_dict(doc)
    m, n = w.shape
    if any(not (0 <= i < m and 0 <= j < n) for i, j in w.entries):
        msgs.append("entry index outside the row/column sets")
    if len(w.entries) != len(doc["entries"]):
        msgs.append("duplicate entries")
    rec.update({"id": w.id, "nnz": w.nnz, "shape": [m, n]})


def _check_sign_average(doc, msgs, rec):
    vals = np.array(doc["values"], dtype=float)
    if len(vals) != doc["trials"] - doc["failures"]:
        msgs.append("number of values does not match trials - failures")
    if len(vals):
        mean = float(vals.mean())
        se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
        rec.update({"mean": mean, "stderr": se})
        if not _close(mean, doc["mean"]):
            msgs.append(f"mean: stored {doc['mean']!r}, recomputed {mean!r}")
        if not _close(se, doc["stderr"]):
            msgs.append(f"stderr: stored {doc['stderr']!r}, recomputed {se!r}")


def _check_relation(doc, msgs, rec):
    S = FiniteSet.from_dict(doc["set"])
    g = group_with_inverses(S.group)
    if doc["witness"] is not None:
        factors = [(g.parse(x), e) for x, e in doc["witness"]]
        p = product_of(g, factors)
        rec["witness_product"] = g.format(p)
        if not g.is_identity(p):
            msgs.append("witness does not multiply to the identity")
        if doc["holds"]:
            msgs.append("a witness is attached although the property is claimed to hold")
    else:
        check = leinert_check if doc["test"] == "leinert" else is_free_set
        res = check(S, doc["depth"])
        rec["holds"] = res.holds
        if res.holds != doc["holds"]:
            msgs.append(f"search at depth {doc['depth']} gives holds={res.holds}")


def _check_ratio(doc, msgs, rec):
    if doc["rhs"] > 0 and not _close(doc["ratio"], doc["norm"] / doc["rhs"]):
        msgs.append("ratio is not norm / rhs")
    coeffs = doc.get("coefficients")
    if coeffs is not None:
        S = FiniteSet.from_dict(doc["set"])
        blocks = [np.atleast_2d(np.asarray(complex(*coeffs) if isinstance(coeffs, list) else coeffs))] * len(S)
        rhs = coefficient_rhs(blocks)
        rec["rhs"] = rhs
        if not _close(rhs, doc["rhs"]):
            msgs.append(f"rhs: stored {doc['rhs']!r}, recomputed {rhs!r}")
    if doc.get("supported_in_ball") and doc["ratio"] < 1 - 1e-6:
        msgs.append("ratio below 1 although the support lies in the ball")


def _check_lset_report(doc, msgs, rec):
    from .experiments import ExperimentConfig, parse_schedule, verdict
    from .window_builder import relation_window

    cfg = ExperimentConfig(**doc["config"])
    if cfg.hash != doc["config_hash"]:
        msgs.append("config hash does not match the stored config")
    lam = FiniteSet.from_dict(doc["set"])
    schedule = parse_schedule(cfg.schedule, lam)
    if len(schedule) != len(doc["windows"]):
        msgs.append("window count does not match the schedule")
    D, C = [], []
    for (label, E, F, _), wd in zip(schedule, doc["windows"]):
        w = relation_window(lam, E, F)
        if w.id != wd["window_id"]:
            msgs.append(f"{label}: window id mismatch")
            continue
        sub: list = []
        _check_density(wd["density"], w, sub, {})
        _check_partition(wd["partition"], w, sub, {})
        _check_split(wd["split"], w, sub, {})
        if wd.get("sign_average"):
            _check_sign_average(wd["sign_average"], sub, {})
        msgs += [f"{label}: {m}" for m in sub]
        d, c1, c2 = wd["density"]["D"], wd["partition"]["C1"], wd["partition"]["C2"]
        if d > c1**2 + c2**2 + cfg.bridge_tol:
            msgs.append(f"{label}: D exceeds C1^2 + C2^2")
        D.append(d)
        C.append(max(c1, c2))
    band, _ = verdict(D, C, doc["rule"]["growth_slope"], doc["rule"]["plateau_slope"])
    rec["verdict"] = band
    if band != doc["verdict"]:
        msgs.append(f"verdict: stored {doc['verdict']!r}, recomputed {band!r}")


def _check_roundtrip(doc, msgs, rec):
    bound = 2 * doc["C_hat"] * (1 + doc["slack"])
    rec["bound"] = bound
    if not _close(bound, doc["bound"]):
        msgs.append("bound is not 2 * C_hat * (1 + slack)")
    if doc["holds"] != (doc["split_value"] <= bound):
        msgs.append("holds flag disagrees with split_value <= bound")
    if "split" in doc and not _close(doc["split"]["value"], doc["split_value"]):
        msgs.append("split_value differs from the embedded split certificate")


def _check_lpp(doc, msgs, rec):
    r = np.array(doc["ratios"], dtype=float)
    if len(r) != doc["trials"]:
        msgs.append("number of ratios does not match trials")
    if len(r):
        worst = float(r.max())
        viol = int(np.sum(r > 1 + doc["mc_slack"]))
        rec.update({"worst_ratio": worst, "violations": viol})
        if not _close(worst, doc["worst_ratio"]):
            msgs.append("worst_ratio is not the maximum ratio")
        if viol != doc["violations"] or doc["passed"] != (viol == 0):
            msgs.append("violation count or pass flag is inconsistent with the ratios")


def validate_document(doc, window: Window | None = None, matrix=None) -> ValidationResult:
    """Schema check followed by a recomputation of the stored constants."""
    if not isinstance(doc, dict):
        return ValidationResult(False, None, ["document is not a JSON object"])
    name = doc.get("schema")
    version = doc.get("version")
    if version not in SUPPORTED_VERSIONS:
        return ValidationResult(
            False, name, [f"unknown schema version {version!r}; supported versions: {list(SUPPORTED_VERSIONS)}"]
        )
    errs = schema_errors(doc)
    if errs:
        return ValidationResult(False, name, errs)
    msgs: list = []
    rec: dict = {}
    kind = name.removeprefix("lacunary/")
    try:
        if kind == "partition-certificate":
            _check_partition(doc, window, msgs, rec)
        elif kind == "split-certificate":
            _check_split(doc, window, msgs, rec)
        elif kind == "density-certificate":
            _check_density(doc, window, msgs, rec)
        elif kind == "gamma2-certificate":
            _check_gamma2(doc, matrix, msgs, rec)
        elif kind == "window":
            _check_window(doc, msgs, rec)
        elif kind == "matrix":
            rec["shape"] = list(matrix_from_json(doc).shape)
        elif kind == "set":
            rec["size"] = len(FiniteSet.from_dict(doc))
        elif kind == "sign-average":
            _check_sign_average(doc, msgs, rec)
        elif kind == "relation-result":
            _check_relation(doc, msgs, rec)
        elif kind == "lset-ratio":
            _check_ratio(doc, msgs, rec)
        elif kind == "lset-report":
            _check_lset_report(doc, msgs, rec)
        elif kind == "roundtrip-report":
            _check_roundtrip(doc, msgs, rec)
        elif kind == "lpp-report":
            _check_lpp(doc, msgs, rec)
    except (LacunaryError, KeyError, TypeError, ValueError) as exc:
        msgs.append(f"cannot re-verify: {exc}")
    return ValidationResult(not msgs, name, msgs, rec)


def document_hash(doc) -> str:
    return content_hash(doc)
