"""Individual discrimination detection: CST, standard situation testing and
counterfactual fairness, plus the statistics they share."""
from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass, field, asdict
from typing import Mapping, NamedTuple, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy.stats import norm

from .metric import AttributeSchema, DistanceContext
from .neighborhood import ShortGroupWarning, partition_search_spaces, rank_space

VARIANCE_MODES = ("as-written", "standard-sum")
REPORT_COLUMNS = ["complainant_id", "p_c", "p_t", "delta_p", "ci_low", "ci_high",
                  "discriminated", "significant", "flags"]


@dataclass(frozen=True)
class AuditConfig:
    k: int = 15
    alpha: float = 0.05
    tau: float = 0.0
    include_centers: bool = False
    intervention: Mapping[str, float] | None = None
    variance_mode: str = "as-written"
    max_distance: float | None = None
    # attribute -> protected value; defaults to the intervention targets
    protected: Mapping[str, object] | None = None
    normalize: bool = True
    jobs: int = 1

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.tau < 0:
            raise ValueError("tau must be >= 0")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.variance_mode not in VARIANCE_MODES:
            raise ValueError(f"variance_mode must be one of {VARIANCE_MODES}")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")

    def protected_spec(self, schema: AttributeSchema) -> dict[str, object]:
        if self.protected:
            return dict(self.protected)
        declared = schema.protected
        if self.intervention:
            return {name: declared.get(name, 1) for name in self.intervention}
        if not declared:
            raise ValueError("no protected attribute declared")
        return declared

    def snapshot(self) -> dict:
        out = asdict(self)
        out["intervention"] = dict(self.intervention) if self.intervention else None
        out["protected"] = dict(self.protected) if self.protected else None
        return out


class WaldInterval(NamedTuple):
    low: float
    high: float
    clamped: bool


@dataclass
class DiscriminationReport:
    method: str
    k: int | None
    rows: pd.DataFrame
    n_protected: int
    config: dict = field(default_factory=dict)

    @property
    def n_discriminated(self) -> int:
        return int(self.rows["discriminated"].sum())

    @property
    def n_significant(self) -> int:
        return int(self.rows["significant"].sum())

    @property
    def percent(self) -> float:
        return 100.0 * self.n_discriminated / self.n_protected

    @property
    def discriminated_ids(self) -> set:
        return set(self.rows.loc[self.rows["discriminated"], "complainant_id"].tolist())

    def summary(self) -> dict:
        return {"method": self.method, "k": self.k, "discriminated": self.n_discriminated,
                "significant": self.n_significant, "protected": self.n_protected,
                "percent": self.percent}

    def summary_line(self) -> str:
        return f"{self.n_discriminated} ({self.percent:.4g}%)"

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.rows[REPORT_COLUMNS].to_csv(buf, index=False, lineterminator="\n",
                                         float_format="%.17g")
        for key, value in self.summary().items():
            buf.write(f"# {key}={value}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "DiscriminationReport":
        body = [ln for ln in text.splitlines() if not ln.startswith("#")]
        meta = dict(ln[2:].split("=", 1) for ln in text.splitlines() if ln.startswith("# "))
        rows = pd.read_csv(io.StringIO("\n".join(body)), keep_default_na=False,
                           na_values=[""], dtype={"flags": str}, float_precision="round_trip")
        rows["flags"] = rows["flags"].fillna("")
        k = None if meta.get("k") in (None, "None") else int(meta["k"])
        return cls(meta.get("method", ""), k, rows, int(meta.get("protected", len(rows))))


def negative_rate(decisions: Sequence, positive=1, include_center: bool = False,
                  center_decision=None) -> float:
    """Share of negative decisions in a group, optionally counting the search center."""
    decisions = np.asarray(decisions)
    neg = int(np.sum(decisions != positive))
    size = len(decisions)
    if include_center:
        if center_decision is None:
            raise ValueError("include_center needs the center's decision")
        neg += int(center_decision != positive)
        size += 1
    if size == 0:
        raise ValueError("empty group")
    return neg / size


def z_value(alpha: float) -> float:
    return float(norm.ppf(1 - alpha / 2))


def wald_ci(p_c: float, p_t: float, k: int, alpha: float = 0.05,
            variance_mode: str = "as-written", k_t: int | None = None) -> WaldInterval:
    """Wald interval around ``p_c - p_t``.

    ``as-written`` uses the difference of the two binomial variances (a
    negative radicand is clamped to zero and reported); ``standard-sum`` uses
    their sum. ``k_t`` gives the test group size when it differs from ``k``.
    """
    k_t = k if k_t is None else k_t
    if k < 1 or k_t < 1:
        raise ValueError("group sizes must be >= 1")
    vc, vt = p_c * (1 - p_c) / k, p_t * (1 - p_t) / k_t
    if variance_mode == "as-written":
        radicand = vc - vt
    elif variance_mode == "standard-sum":
        radicand = vc + vt
    else:
        raise ValueError(f"unknown variance mode {variance_mode!r}")
    clamped = radicand < 0
    w = z_value(alpha) * math.sqrt(max(radicand, 0.0))
    dp = p_c - p_t
    return WaldInterval(dp - w, dp + w, clamped)


def decide(delta_p: float, ci: tuple[float, float], tau: float = 0.0) -> tuple[bool, bool]:
    """(discriminated, significant); significance needs the interval wholly above tau."""
    discriminated = delta_p > tau
    return discriminated, bool(discriminated and ci[0] > tau)


def _rank_chunk(chunk, ctrl_centers, test_centers, features, ctx, control, test, kmax,
                exclude_self):
    """Top-``kmax`` neighbours of each complainant in ``chunk``."""
    out = []
    for j, c in enumerate(chunk):
        ctr = rank_space((ctrl_centers[0][j], ctrl_centers[1][j]), control, features, ctx,
                         exclude=c if exclude_self else None, limit=kmax)
        tst = rank_space((test_centers[0][j], test_centers[1][j]), test, features, ctx,
                         limit=kmax)
        out.append((ctr, tst))
    return out


def _rank_all(complainants, ctrl_feats, test_feats, features, ctx, spaces, kmax, jobs):
    # chunking depends on jobs only for load balancing; results are reassembled in order
    chunks = [c for c in np.array_split(complainants, max(jobs * 4, 1)) if len(c)]

    def args(ch, s):
        sl = slice(s, s + len(ch))
        return (ch, (ctrl_feats[0][sl], ctrl_feats[1][sl]), (test_feats[0][sl], test_feats[1][sl]),
                features, ctx, spaces.control, spaces.test, kmax, True)

    offsets = np.cumsum([0] + [len(ch) for ch in chunks])[:-1]
    if jobs == 1:
        parts = [_rank_chunk(*args(ch, s)) for ch, s in zip(chunks, offsets)]
    else:
        parts = Parallel(n_jobs=jobs, backend="loky")(
            delayed(_rank_chunk)(*args(ch, s)) for ch, s in zip(chunks, offsets))
    return [item for part in parts for item in part]


def _situation_test(data, test_centers, schema, config, ks, method, include_centers,
                    cf_decisions=None) -> list[DiscriminationReport]:
    protected = config.protected_spec(schema)
    spaces = partition_search_spaces(data, protected)
    ctx = DistanceContext(schema, data, normalize=config.normalize)
    features = ctx.encode(data)
    complainants = spaces.control
    ctrl_feats = (features[0][complainants], features[1][complainants])
    test_feats = ctx.encode(test_centers.iloc[complainants])
    ranked = _rank_all(complainants, ctrl_feats, test_feats, features, ctx, spaces,
                       max(ks), config.jobs)

    positive = schema.positive
    y = data[schema.decision].to_numpy()
    negative = y != positive
    neg_cf = None if cf_decisions is None else np.asarray(cf_decisions) != positive
    ids = data.index.to_numpy()[complainants]
    reports = []
    for k in ks:
        rows = []
        n_short = 0
        for j, c in enumerate(complainants):
            (ci_, cd), (ti, td) = ranked[j]
            ci_, cd, ti, td = ci_[:k], cd[:k], ti[:k], td[:k]
            if config.max_distance is not None:
                ci_ = ci_[cd <= config.max_distance]
                ti = ti[td <= config.max_distance]
            flags = []
            if len(ci_) < k:
                flags.append("short_control")
            if len(ti) < k:
                flags.append("short_test")
            nc_neg, nc = int(negative[ci_].sum()), len(ci_)
            nt_neg, nt = int(negative[ti].sum()), len(ti)
            if include_centers:
                nc_neg += int(negative[c])
                nt_neg += int(neg_cf[c])
                nc += 1
                nt += 1
            if nc == 0 or nt == 0:
                rows.append((ids[j], np.nan, np.nan, np.nan, np.nan, np.nan, False, False,
                             ";".join(flags + ["empty_group"]), nc, nt))
                n_short += 1
                continue
            p_c, p_t = nc_neg / nc, nt_neg / nt
            ci = wald_ci(p_c, p_t, nc, config.alpha, config.variance_mode, k_t=nt)
            if ci.clamped:
                flags.append("clamped")
            disc, sig = decide(p_c - p_t, (ci.low, ci.high), config.tau)
            n_short += bool({"short_control", "short_test"} & set(flags))
            rows.append((ids[j], p_c, p_t, p_c - p_t, ci.low, ci.high, disc, sig,
                         ";".join(flags), nc, nt))
        if n_short:
            warnings.warn(f"{method} k={k}: {n_short} complainant(s) with short groups",
                          ShortGroupWarning, stacklevel=3)
        frame = pd.DataFrame(rows, columns=REPORT_COLUMNS + ["n_ctr", "n_tst"])
        cfg = {**config.snapshot(), "k": k, "include_centers": include_centers}
        reports.append(DiscriminationReport(method, k, frame, len(complainants), cfg))
    return reports


def _check_aligned(data: pd.DataFrame, cf_data: pd.DataFrame):
    if len(data) != len(cf_data) or not data.index.equals(cf_data.index):
        raise ValueError("counterfactual dataset is not aligned with the factual one")


def run_cst_grid(data: pd.DataFrame, cf_data: pd.DataFrame, schema: AttributeSchema,
                 config: AuditConfig, ks: Sequence[int]) -> list[DiscriminationReport]:
    """CST for several group sizes, sharing one neighbour ranking per complainant."""
    _check_aligned(data, cf_data)
    method = "CST" if config.include_centers else "CST (w/o)"
    return _situation_test(data, cf_data, schema, config, list(ks), method,
                           config.include_centers, cf_data[schema.decision].to_numpy())


def run_cst(data: pd.DataFrame, cf_data: pd.DataFrame, schema: AttributeSchema,
            config: AuditConfig) -> DiscriminationReport:
    """Counterfactual situation testing over every protected record.

    The control group is built around each complainant in the protected
    space and the test group around its counterfactual in the non-protected
    space.
    """
    return run_cst_grid(data, cf_data, schema, config, [config.k])[0]


def run_st_grid(data: pd.DataFrame, schema: AttributeSchema, config: AuditConfig,
                ks: Sequence[int]) -> list[DiscriminationReport]:
    return _situation_test(data, data, schema, config, list(ks), "ST", False)


def run_st(data: pd.DataFrame, schema: AttributeSchema,
           config: AuditConfig) -> DiscriminationReport:
    """Standard situation testing: both groups around the factual record, centers excluded."""
    return run_st_grid(data, schema, config, [config.k])[0]


def run_cf(data: pd.DataFrame, cf_data: pd.DataFrame, schema: AttributeSchema,
           config: AuditConfig | None = None) -> DiscriminationReport:
    """Counterfactual fairness check: a protected record with a negative
    factual decision and a positive counterfactual one is flagged."""
    _check_aligned(data, cf_data)
    config = config or AuditConfig()
    spaces = partition_search_spaces(data, config.protected_spec(schema))
    c = spaces.control
    positive = schema.positive
    y = data[schema.decision].to_numpy()[c]
    ycf = cf_data[schema.decision].to_numpy()[c]
    p_c = (y != positive).astype(float)
    p_t = (ycf != positive).astype(float)
    disc = (y != positive) & (ycf == positive)
    frame = pd.DataFrame({
        "complainant_id": data.index.to_numpy()[c], "p_c": p_c, "p_t": p_t,
        "delta_p": p_c - p_t, "ci_low": np.nan, "ci_high": np.nan,
        "discriminated": disc, "significant": np.zeros(len(c), dtype=bool), "flags": "",
        "n_ctr": 1, "n_tst": 1,
    })
    return DiscriminationReport("CF", None, frame, len(c), config.snapshot())
