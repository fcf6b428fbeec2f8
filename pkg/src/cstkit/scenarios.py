"""The two built-in auditing scenarios: a synthetic loan book with a known
gender bias, and law-school admissions."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable

import numpy as np
import pandas as pd

from .metric import Attribute, AttributeSchema
from .scm import (Assignment, LatentRecord, NodeSpec, NoiseSpec, Penalty, Scm,
                  ThresholdClassifier, fit_linear_anm, sample_dataset)

log = logging.getLogger(__name__)

LOAN_THRESHOLD = 225000.0
# weighted median entry requirements, kept unrounded
LAW_PSI = 0.6 * 3.93 + 0.4 * 46.1


def loan_scm(p_female: float = 0.45) -> Scm:
    """A (gender, 1 = female) -> salary X1 -> balance X2, with per-record random
    penalties on women."""
    return Scm((
        NodeSpec("A", "protected", (), Assignment(), NoiseSpec("bernoulli", {"p": p_female})),
        NodeSpec("X1", "covariate", ("A",),
                 Assignment(0.0, {}, penalties=(
                     Penalty("A", -1500.0, NoiseSpec("poisson", {"lam": 10})),)),
                 NoiseSpec("poisson", {"lam": 10}, scale=10000.0)),
        NodeSpec("X2", "covariate", ("A", "X1"),
                 Assignment(0.0, {"X1": 0.3}, penalties=(
                     Penalty("A", -300.0, NoiseSpec("chisquare", {"df": 4})),)),
                 NoiseSpec("normal", {"mu": 0.0, "sigma": 1.0}, scale=2500.0)),
    ))


def loan_classifier(x1, x2=None):
    """Approve (1) iff ``x1 + 5 * x2 > 225000``. Accepts scalars or a frame."""
    if x2 is None:
        return LOAN_CLASSIFIER(x1)
    return (np.asarray(x1, dtype=float) + 5 * np.asarray(x2, dtype=float)
            > LOAN_THRESHOLD).astype(np.int64)


LOAN_CLASSIFIER = ThresholdClassifier({"X1": 1.0, "X2": 5.0}, LOAN_THRESHOLD)
LOAN_SCHEMA = AttributeSchema((
    Attribute("X1", "continuous", "relevant"),
    Attribute("X2", "continuous", "relevant"),
    Attribute("A", "categorical", "protected", 1),
    Attribute("Y", "categorical", "decision", 1),
))


def generate_loan(n: int = 5000, seed: int | None = None
                  ) -> tuple[pd.DataFrame, Scm, LatentRecord]:
    scm = loan_scm()
    data, latents = sample_dataset(scm, n, seed)
    data["Y"] = LOAN_CLASSIFIER(data)
    return data, scm, latents


LAW_CLASSIFIER = ThresholdClassifier({"UGPA": 0.6, "LSAT": 0.4}, LAW_PSI)
LAW_SCHEMA = AttributeSchema((
    Attribute("UGPA", "continuous", "relevant"),
    Attribute("LSAT", "continuous", "relevant"),
    Attribute("R", "categorical", "protected", 1),
    Attribute("G", "categorical", "protected", 1),
    Attribute("Y", "categorical", "decision", 1),
))


def law_classifier(ugpa, lsat=None):
    """Admit (1) iff ``0.6 * ugpa + 0.4 * lsat > psi`` with psi = 20.798."""
    if lsat is None:
        return LAW_CLASSIFIER(ugpa)
    score = 0.6 * np.asarray(ugpa, dtype=float) + 0.4 * np.asarray(lsat, dtype=float)
    return (score > LAW_PSI).astype(np.int64)


def law_skeleton(p_nonwhite: float = 0.161, p_female: float = 0.438) -> Scm:
    """R, G -> UGPA (linear) and R, G -> LSAT (log-linear), coefficients unknown."""
    unknown = {"R": None, "G": None}
    return Scm((
        NodeSpec("R", "protected", (), Assignment(), NoiseSpec("bernoulli", {"p": p_nonwhite})),
        NodeSpec("G", "protected", (), Assignment(), NoiseSpec("bernoulli", {"p": p_female})),
        NodeSpec("UGPA", "covariate", ("R", "G"), Assignment(None, unknown),
                 NoiseSpec("normal", {"sigma": 1.0})),
        NodeSpec("LSAT", "covariate", ("R", "G"), Assignment(None, unknown, link="exp"),
                 NoiseSpec("normal", {"sigma": 1.0})),
    ))


# Ground truth for the synthetic stand-in. Chosen by hand to give the real
# survey's marginals (43.8% female, 16.1% non-white) and admission rates of
# a few percent with a race and gender gap; these are not estimates from the
# real data. About 0.1% of UGPA and 1-2% of LSAT draws exceed the nominal
# 4 / 48 maxima.
SYNTHETIC_LAW_TRUTH = {
    "UGPA": {"intercept": 3.20, "R": -0.10, "G": 0.00, "sigma": 0.25},
    "LSAT": {"intercept": 3.68, "R": -0.03, "G": -0.012, "sigma": 0.09},
}


def synthetic_law_scm() -> Scm:
    skel = law_skeleton()
    nodes = list(skel.nodes)
    for i, node in enumerate(nodes):
        truth = SYNTHETIC_LAW_TRUTH.get(node.name)
        if truth is None:
            continue
        nodes[i] = NodeSpec(node.name, node.kind, node.parents,
                            Assignment(truth["intercept"], {"R": truth["R"], "G": truth["G"]},
                                       link=node.assignment.link),
                            NoiseSpec("normal", {"sigma": truth["sigma"]}))
    return Scm(tuple(nodes))


def generate_law_school_synthetic(n: int = 21790, seed: int | None = None,
                                  valid_only: bool = False
                                  ) -> tuple[pd.DataFrame, LatentRecord]:
    """Law-school-shaped records drawn from :func:`synthetic_law_scm`.

    By default every draw is kept, so the records follow the SCM exactly.
    ``valid_only`` keeps only UGPA in [0, 4] and LSAT in (0, 48], over-sampling
    so ``n`` records still come back; the truncation biases fitted coefficients.
    """
    scm = synthetic_law_scm()
    if not valid_only:
        return sample_dataset(scm, n, seed)
    data, latents = sample_dataset(scm, int(n * 1.2) + 100, seed)
    ok = ((data["UGPA"] >= 0) & (data["UGPA"] <= 4) & (data["LSAT"] > 0)
          & (data["LSAT"] <= 48)).to_numpy()
    keep = np.flatnonzero(ok)[:n]
    if len(keep) < n:
        raise RuntimeError("synthetic generator produced too few valid records")
    data = data.iloc[keep].reset_index(drop=True)
    latents = LatentRecord(latents.noise.iloc[keep].reset_index(drop=True),
                           latents.factors.iloc[keep].reset_index(drop=True))
    return data, latents


@dataclass(frozen=True)
class LawSchoolScenario:
    scm: Scm
    std_errors: dict
    psi: float
    dropped: int


def _find_column(frame: pd.DataFrame, name: str) -> str:
    for col in frame.columns:
        if str(col).strip().lower() == name.lower():
            return col
    raise KeyError(f"column {name!r} not found (have {list(frame.columns)})")


def load_law_school_csv(path, race_column: str = "race", gender_column: str = "gender",
                        white_values: Iterable = ("white",),
                        female_values: Iterable = ("female", "f"),
                        lsat_scale: float = 1.0) -> pd.DataFrame:
    """Read the admissions survey CSV into ``UGPA, LSAT, R, G`` columns.

    Column names are matched case-insensitively; ``R = 1`` for any race value
    not in ``white_values`` and ``G = 1`` for values in ``female_values``
    (string comparisons are case-insensitive). ``lsat_scale`` multiplies LSAT.
    """
    raw = pd.read_csv(path)
    try:
        gcol = _find_column(raw, gender_column)
    except KeyError:
        gcol = _find_column(raw, "sex")
    rcol = _find_column(raw, race_column)

    def norm(values):
        return {str(v).strip().lower() for v in values}

    whites, females = norm(white_values), norm(female_values)
    race = raw[rcol].astype(str).str.strip().str.lower()
    gender = raw[gcol].astype(str).str.strip().str.lower()
    return pd.DataFrame({
        "UGPA": raw[_find_column(raw, "UGPA")].astype(float),
        "LSAT": raw[_find_column(raw, "LSAT")].astype(float) * lsat_scale,
        "R": (~race.isin(whites)).astype(np.int64),
        "G": gender.isin(females).astype(np.int64),
    })


def build_law_school(data: pd.DataFrame) -> tuple[LawSchoolScenario, pd.DataFrame]:
    """Fit the admissions SCM to ``data`` and attach admission decisions.

    Records with LSAT <= 0 cannot enter the log-linear LSAT equation and are
    dropped (the count is kept on the scenario).
    """
    missing = [c for c in ("UGPA", "LSAT", "R", "G") if c not in data.columns]
    if missing:
        raise KeyError(f"law-school data is missing column(s) {missing}")
    bad = data["LSAT"] <= 0
    dropped = int(bad.sum())
    if dropped:
        log.warning("dropping %d record(s) with LSAT <= 0", dropped)
    data = data.loc[~bad].reset_index(drop=True)
    fit = fit_linear_anm(law_skeleton(), data)
    out = data.copy()
    out["Y"] = LAW_CLASSIFIER(out)
    return LawSchoolScenario(fit.scm, fit.std_errors, LAW_PSI, dropped), out
