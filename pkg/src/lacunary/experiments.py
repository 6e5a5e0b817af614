"""End-to-end experiments: L-set certification, sign-average round trips, LPP checks."""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .density import _carry, density, verify_density
from .errors import InputError, LacunaryError, VerificationError
from .gamma2 import SdpSettings, entry_family, sign_average_gamma2, trial_rng
from .group_core import (
    FiniteSet,
    FreeGroup,
    IntegerGroup,
    NaturalSemigroup,
    ball,
    group_with_inverses,
    sphere,
)
from .littlewood import min_partition_01, min_split, verify_certificate
from .regular_rep import lset_ratio
from .serialization import SCHEMA_VERSION, content_hash
from .window_builder import Product, Window, additive_map, build_window, relation_window

VERDICTS = ("consistent-with-L-set", "not-an-L-set-evidence", "inconclusive")

# ------------------------------------------------------------------ set specs

_GROUP_RE = re.compile(r"F(\d+)$")


def _free(token: str) -> FreeGroup:
    m = _GROUP_RE.match(token.strip())
    if not m:
        raise InputError(f"expected a free group like F2, got {token!r}")
    return FreeGroup(int(m.group(1)))


def parse_set(spec) -> FiniteSet:
    """Named sets: gens(F5), sphere(F2,2), ball(F2,1), dyadic(10), interval(0,31), or a set document.

    ``dyadic(K)`` is {2^k : 0 <= k <= K} in N; ``interval(a,b)`` lies in N
    when a >= 0 and in Z otherwise.
    """
    if isinstance(spec, dict):
        return FiniteSet.from_dict(spec)
    m = re.fullmatch(r"\s*(\w+)\(([^)]*)\)\s*", str(spec))
    if not m:
        raise InputError(f"cannot parse set spec {spec!r}")
    name, args = m.group(1), [a.strip() for a in m.group(2).split(",") if a.strip()]
    try:
        if name == "gens" and len(args) == 1:
            g = _free(args[0])
            return FiniteSet(g, tuple(g.generators()))
        if name == "sphere" and len(args) == 2:
            return sphere(_free(args[0]), int(args[1]))
        if name == "ball" and len(args) == 2:
            return ball(_free(args[0]), int(args[1]))
        if name == "dyadic" and len(args) == 1:
            return FiniteSet(NaturalSemigroup(), tuple(2**k for k in range(int(args[0]) + 1)))
        if name == "interval" and len(args) == 2:
            lo, hi = int(args[0]), int(args[1])
            return FiniteSet.interval(NaturalSemigroup() if lo >= 0 else IntegerGroup(), lo, hi)
    except ValueError as exc:
        raise InputError(f"bad argument in set spec {spec!r}: {exc}") from None
    raise InputError(f"unknown set spec {spec!r}; use gens(Fn), sphere(Fn,k), ball(Fn,k), dyadic(K), interval(a,b)")


def parse_schedule(spec: str, lam: FiniteSet) -> list:
    """Window schedules as (label, E, F, operator radius) tuples.

    balls:a..b     E = F = ball(r) in the free group of Lambda
    dyadic:a..b    E = F = {0, ..., 2^j} in N
    gens:k1,k2,..  E = F = {g_1, ..., g_k}
    """
    m = re.fullmatch(r"\s*(\w+):(.+)", spec or "")
    if not m:
        raise InputError(f"cannot parse schedule {spec!r}")
    kind, body = m.group(1), m.group(2)
    rng = re.fullmatch(r"(\d+)\.\.(\d+)", body.strip())
    if rng:
        values = list(range(int(rng.group(1)), int(rng.group(2)) + 1))
    else:
        try:
            values = [int(v) for v in body.split(",")]
        except ValueError:
            raise InputError(f"cannot parse schedule values {body!r}") from None
    if not values or values != sorted(set(values)):
        raise InputError("schedule values must be increasing and nonempty")
    g = lam.group
    out = []
    if kind in ("balls", "gens"):
        if not isinstance(g, FreeGroup):
            raise InputError(f"{kind} schedules need a set in a free group")
        for r in values:
            if kind == "balls":
                E = ball(g, r)
                radius = 2 * r
            else:
                if r > g.rank:
                    raise InputError(f"F_{g.rank} has only {g.rank} generators")
                E = FiniteSet(g, tuple(g.generators()[:r]))
                radius = 2
            out.append((f"{kind[:-1]}({r})", E, E, radius))
    elif kind == "dyadic":
        if isinstance(g, FreeGroup):
            raise InputError("dyadic schedules need a set in N or Z")
        for j in values:
            E = FiniteSet(g, tuple(range(2**j + 1)))
            out.append((f"interval(0..2^{j})", E, E, 2**j))
    else:
        raise InputError(f"unknown schedule kind {kind!r}; use balls, dyadic or gens")
    return out


# -------------------------------------------------------------------- config


@dataclass
class ExperimentConfig:
    set_spec: str
    schedule: str
    seed: int = 0
    trials: int = 20
    restarts: int = 32
    exact_side: int = 14
    sdp_cap: int = 40
    sdp_tolerance: float = 1e-7
    growth_slope: float = 0.2
    plateau_slope: float = 0.05
    bridge_tol: float = 1e-9
    ratio_tol: float = 1e-6
    threads: int = 1

    def to_dict(self) -> dict:
        # threads do not change results, so they stay out of the hash
        return {k: v for k, v in self.__dict__.items() if k != "threads"}

    @property
    def hash(self) -> str:
        return content_hash(self.to_dict())


def relative_slope(series) -> float:
    """Relative increment over the final schedule step, (x_K - x_{K-1}) / x_{K-1}."""
    if len(series) < 2:
        return math.nan
    a, b = series[-2], series[-1]
    if a == 0:
        return 0.0 if b == 0 else math.inf
    return (b - a) / a


def verdict(D, C, growth_slope: float = 0.2, plateau_slope: float = 0.05) -> tuple[str, dict]:
    """Verdict band from the density and partition series.

    not-an-L-set-evidence when D still grows by more than ``growth_slope``
    (relative) over the last schedule step; consistent-with-L-set when both
    D and C grow by less than ``plateau_slope``; inconclusive otherwise, and
    for schedules with fewer than two windows.
    """
    sD, sC = relative_slope(D), relative_slope(C)
    rule = {
        "slope": "relative increment over the final schedule step",
        "growth_slope": growth_slope,
        "plateau_slope": plateau_slope,
        "slope_D": sD,
        "slope_C": sC,
    }
    if math.isnan(sD):
        return "inconclusive", rule
    if sD > growth_slope:
        return "not-an-L-set-evidence", rule
    if sD < plateau_slope and sC < plateau_slope:
        return "consistent-with-L-set", rule
    return "inconclusive", rule


@dataclass
class WindowResult:
    label: str
    rows: int
    cols: int
    entries: int
    window_id: str
    density: dict
    partition: dict
    split: dict
    bridge_bound: float
    ratio: dict | None
    sign_average: dict | None

    @property
    def D(self) -> float:
        return self.density["D"]

    @property
    def C(self) -> float:
        return self.partition["C"]

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class LSetReport:
    set: dict
    config: dict
    config_hash: str
    windows: list
    verdict: str
    rule: dict
    notes: list = field(default_factory=list)

    def series(self, key: str) -> list:
        getters = {
            "D": lambda w: w.D,
            "C": lambda w: w.C,
            "split": lambda w: w.split["value"],
            "bridge": lambda w: w.bridge_bound,
            "ratio": lambda w: w.ratio["ratio"] if w.ratio else math.nan,
        }
        return [getters[key](w) for w in self.windows]

    def recompute_verdict(self) -> str:
        return verdict(self.series("D"), self.series("C"), self.rule["growth_slope"], self.rule["plateau_slope"])[0]

    def to_dict(self) -> dict:
        return {
            "schema": "lacunary/lset-report",
            "version": SCHEMA_VERSION,
            "set": self.set,
            "config": self.config,
            "config_hash": self.config_hash,
            "windows": [w.to_dict() for w in self.windows],
            "verdict": self.verdict,
            "rule": self.rule,
            "notes": self.notes,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["label", "rows", "entries", "D", "C1", "C2", "C", "bridge", "split", "ratio_radius", "ratio"])
        for w in self.windows:
            r = w.ratio or {}
            wr.writerow(
                [
                    w.label,
                    w.rows,
                    w.entries,
                    repr(w.D),
                    repr(w.partition["C1"]),
                    repr(w.partition["C2"]),
                    repr(w.C),
                    repr(w.bridge_bound),
                    repr(w.split["value"]),
                    r.get("radius", ""),
                    repr(r["ratio"]) if r else "",
                ]
            )
        return buf.getvalue()


def _ratio_for(lam: FiniteSet, radius: int, config: ExperimentConfig):
    coeff = 1.0 / math.sqrt(len(lam))
    try:
        return lset_ratio(lam, coeff, radius, tol=config.ratio_tol, seed=config.seed).to_dict()
    except LacunaryError as exc:
        return {"radius": radius, "skipped": str(exc), "ratio": math.nan}


def _sign_average_for(window: Window, config: ExperimentConfig):
    I, J, _ = window.arrays()
    rows, cols = np.unique(I), np.unique(J)
    if max(len(rows), len(cols), 1) > config.sdp_cap or window.nnz == 0:
        return None
    M = window.matrix()[np.ix_(rows, cols)]
    settings = SdpSettings(tolerance=config.sdp_tolerance, max_side=config.sdp_cap, seed=config.seed)
    return sign_average_gamma2(M, config.trials, seed=config.seed, settings=settings, threads=config.threads).to_dict()


def certify_lset(lam: FiniteSet, config: ExperimentConfig, schedule=None) -> LSetReport:
    """Relation windows, density, partition, split and operator ratio along a schedule.

    Every window is checked against D <= C1^2 + C2^2 (a violation raises
    VerificationError) and every certificate is re-verified. Sign averages
    are estimated on windows whose nonzero part fits the SDP cap.
    """
    if len(lam) == 0:
        raise InputError("Lambda is empty")
    schedule = schedule if schedule is not None else parse_schedule(config.schedule, lam)
    if not schedule:
        raise InputError("window schedule is empty")
    results = []
    prev = None
    for label, E, F, radius in schedule:
        try:
            w = relation_window(lam, E, F)
            dc = density(w, config.exact_side, config.restarts, config.seed, warm_start=_carry(prev, w))
            ok, _ = verify_density(dc, w)
            if not ok:
                raise VerificationError("density witness does not reproduce its value", window=label)
            part = min_partition_01(w)
            split = min_split(w, seed_partition=part)
            for cert in (part, split):
                rep = verify_certificate(cert, w)
                if not rep.passed:
                    raise VerificationError("certificate failed re-verification", window=label, messages=rep.messages)
        except LacunaryError as exc:
            exc.details.setdefault("window", label)
            raise
        bridge = part.C1**2 + part.C2**2
        if dc.D > bridge + config.bridge_tol:
            raise VerificationError(
                f"density {dc.D} exceeds C1^2 + C2^2 = {bridge} on {label}", window=label, D=dc.D, bound=bridge
            )
        results.append(
            WindowResult(
                label=label,
                rows=len(E),
                cols=len(F),
                entries=w.nnz,
                window_id=w.id,
                density=dc.to_dict(),
                partition=part.to_dict(),
                split=split.to_dict(),
                bridge_bound=bridge,
                ratio=_ratio_for(lam, radius, config),
                sign_average=_sign_average_for(w, config),
            )
        )
        prev = (w, dc)
    D = [r.D for r in results]
    C = [r.C for r in results]
    band, rule = verdict(D, C, config.growth_slope, config.plateau_slope)
    notes = [
        "operator ratios are truncated at the listed radius and are lower bounds",
        "density values from the heuristic are lower bounds; C and the bridge bound are upper bounds",
    ]
    return LSetReport(lam.to_dict(), config.to_dict(), config.hash, results, band, rule, notes)


# ------------------------------------------------------- sign-average round trip


def fiber_family(window: Window, phi: dict, p=Product.PRODUCT) -> list:
    """One matrix per group element x: the part of the window where p(s,t) = x."""
    from .window_builder import evaluate

    g = group_with_inverses(window.rows.group)
    M = window.matrix()
    parts: dict = {}
    for (i, j), _ in window.entries.items():
        x = evaluate(p, g, window.rows[i], window.cols[j])
        parts.setdefault(x, []).append((i, j))
    out = []
    for x in sorted(parts, key=g.key):
        P = np.zeros_like(M)
        for i, j in parts[x]:
            P[i, j] = M[i, j]
        out.append(P)
    return out


@dataclass
class RoundTripReport:
    C_hat: float
    stderr: float
    split_value: float
    bound: float
    holds: bool
    trials: int
    failures: int
    grouping: str
    kind: str
    slack: float
    seed: int
    window_id: str
    split: dict

    def to_dict(self) -> dict:
        return dict(self.__dict__, schema="lacunary/roundtrip-report", version=SCHEMA_VERSION)


def thm01_roundtrip(
    phi: dict,
    E: FiniteSet,
    F: FiniteSet,
    trials: int,
    seed: int = 0,
    grouping: str = "entry",
    kind: str = "sign",
    slack: float = 0.1,
    settings: SdpSettings | None = None,
    threads: int = 1,
) -> RoundTripReport:
    """Compare the best split of the window of phi with twice its sign-averaged gamma_2.

    C_hat is the Monte Carlo mean of gamma_2 over random signs (entrywise,
    or one sign per group element with grouping="fiber"). The split value
    must not exceed 2 * C_hat * (1 + slack); a violation raises
    VerificationError.
    """
    w = build_window(phi, Product.PRODUCT, E, F)
    if w.nnz == 0:
        raise InputError("phi vanishes on the window")
    I, J, _ = w.arrays()
    rows, cols = np.unique(I), np.unique(J)
    if grouping == "entry":
        family = entry_family(w.matrix()[np.ix_(rows, cols)])
    elif grouping == "fiber":
        family = [M[np.ix_(rows, cols)] for M in fiber_family(w, phi)]
    else:
        raise InputError(f"unknown grouping {grouping!r}; use 'entry' or 'fiber'")
    avg = sign_average_gamma2(family, trials, seed=seed, kind=kind, settings=settings, threads=threads, grouping=grouping)
    split = min_split(w)
    bound = 2 * avg.mean * (1 + slack)
    holds = split.value <= bound
    report = RoundTripReport(
        avg.mean, avg.stderr, split.value, bound, holds, trials, avg.failures, grouping, kind, slack, seed, w.id, split.to_dict()
    )
    if not holds:
        raise VerificationError(
            f"split value {split.value} exceeds 2 * C_hat * (1 + slack) = {bound}", report=report.to_dict()
        )
    return report


# --------------------------------------------------------------- LPP inequality


def square_function_bracket(a) -> float:
    """||(sum a_j* a_j)^1/2|| + ||(sum a_j a_j*)^1/2|| for a stack of square matrices."""
    a = np.asarray(a)
    S1 = np.einsum("jki,jkl->il", a.conj(), a)
    S2 = np.einsum("jik,jlk->il", a, a.conj())
    return math.sqrt(np.linalg.norm(S1, 2)) + math.sqrt(np.linalg.norm(S2, 2))


def lpp_instance(a, xi, mc_samples: int, rng: np.random.Generator) -> tuple[float, float]:
    """(LHS, RHS) for one instance; RHS uses a Monte Carlo phase average of ||sum z_j xi_j||_tr."""
    a = np.asarray(a, dtype=np.complex128)
    xi = np.asarray(xi, dtype=np.complex128)
    lhs = abs(np.einsum("jki,jki->", xi.conj(), a))  # sum_j tr(xi_j* a_j)
    z = np.exp(2j * np.pi * rng.random((mc_samples, len(a))))
    sums = np.einsum("kj,jab->kab", z, xi)
    avg = np.linalg.svd(sums, compute_uv=False).sum(axis=1).mean()
    return float(lhs), float(avg * square_function_bracket(a))


@dataclass
class LppReport:
    passed: bool
    trials: int
    d: int
    n: int
    mc_samples: int
    mc_slack: float
    worst_ratio: float  # max LHS / RHS
    min_margin: float  # min RHS / LHS
    mean_ratio: float
    violations: int
    variant: str
    seed: int
    note: str
    ratios: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return dict(self.__dict__, schema="lacunary/lpp-report", version=SCHEMA_VERSION)


LPP_NOTE = (
    "the averaged quantity is ||sum z_j xi_j|| in the predual (trace norm); the statement as printed "
    "averages ||sum z_j a_j|| instead, which mixes the algebra and its predual"
)


def lpp_inequality_test(d: int, n: int, trials: int, mc_samples: int, seed: int = 0, mc_slack: float = 0.05) -> LppReport:
    """Random complex Gaussian instances of the trace-duality inequality with phase averages."""
    if min(d, n, trials, mc_samples) < 1:
        raise InputError("d, n, trials and mc_samples must be positive")
    ratios = []
    for t in range(trials):
        rng = trial_rng(seed, t)
        shape = (n, d, d)
        a = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2 * d)
        xi = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2 * d)
        lhs, rhs = lpp_instance(a, xi, mc_samples, rng)
        ratios.append(lhs / rhs)
    r = np.array(ratios)
    violations = int(np.sum(r > 1 + mc_slack))
    worst = float(r.max())
    return LppReport(
        violations == 0,
        trials,
        d,
        n,
        mc_samples,
        mc_slack,
        worst,
        float(1 / worst) if worst > 0 else math.inf,
        float(r.mean()),
        violations,
        "xi-average",
        seed,
        LPP_NOTE,
        [float(x) for x in r],
    )


# ------------------------------------------------------------------ Paley


def paley_window(lam: FiniteSet, interval: FiniteSet) -> Window:
    """0/1 window of {(s, t) : s + t in Lambda} over interval x interval."""
    if isinstance(lam.group, FreeGroup) or isinstance(interval.group, FreeGroup):
        raise InputError("Paley windows live in N or Z")
    phi = {x: 1.0 for x in lam}
    desc = {"indicator": lam.formatted(), "map": "s+t"}
    return build_window(phi, additive_map(interval, interval), interval, interval, description=desc)


__all__ = [
    "ExperimentConfig",
    "LSetReport",
    "LppReport",
    "RoundTripReport",
    "VERDICTS",
    "certify_lset",
    "fiber_family",
    "lpp_inequality_test",
    "lpp_instance",
    "paley_window",
    "parse_schedule",
    "parse_set",
    "relative_slope",
    "square_function_bracket",
    "thm01_roundtrip",
    "verdict",
]
