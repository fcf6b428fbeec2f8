"""Structural causal models with additive noise.

An :class:`Scm` is an ordered collection of :class:`NodeSpec`. Each node has a
linear structural assignment (optionally behind an ``exp`` link, optionally
with scaled random penalty terms) plus a noise distribution. Counterfactuals
are produced by the usual abduction / action / prediction steps:

>>> import pandas as pd
>>> scm = Scm.from_dict({"nodes": [
...     {"name": "A", "kind": "protected", "noise": {"family": "bernoulli", "p": 0.5}},
...     {"name": "X", "parents": ["A"], "assignment": {"coefficients": {"A": 2.0}},
...      "noise": {"family": "normal", "sigma": 1.0}},
... ]})
>>> data = pd.DataFrame({"A": [1, 0], "X": [3.0, 0.5]})
>>> latents = abduct(scm, data)
>>> predict(intervene(scm, {"A": 0}), latents)["X"].tolist()
[1.0, 0.5]
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Sequence

import networkx as nx
import numpy as np
import pandas as pd

NODE_KINDS = ("protected", "covariate")
LINKS = ("identity", "exp")

# family -> (required parameter names, defaults)
_NOISE_FAMILIES = {
    "normal": (("mu", "sigma"), {"mu": 0.0, "sigma": 1.0}),
    "poisson": (("lam",), {}),
    "chisquare": (("df",), {}),
    "bernoulli": (("p",), {}),
    "point_mass": ((), {}),
}
_FAMILY_ALIASES = {
    "gaussian": "normal",
    "poi": "poisson",
    "chi2": "chisquare",
    "chi-squared": "chisquare",
    "chisquared": "chisquare",
    "ber": "bernoulli",
    "point-mass": "point_mass",
    "pointmass": "point_mass",
    "zero": "point_mass",
}


def _factor_key(node: str, parent: str) -> str:
    return f"{node}|{parent}"


@dataclass(frozen=True)
class NoiseSpec:
    """Distribution of an exogenous term: ``scale * family(params)``."""

    family: str = "point_mass"
    params: Mapping[str, float] = field(default_factory=dict)
    scale: float = 1.0

    def __post_init__(self):
        family = _FAMILY_ALIASES.get(self.family.lower(), self.family.lower())
        if family not in _NOISE_FAMILIES:
            raise ValueError(f"unknown noise family {self.family!r}")
        required, defaults = _NOISE_FAMILIES[family]
        params = {**defaults, **{k: float(v) for k, v in dict(self.params).items()}}
        missing = [name for name in required if name not in params]
        if missing:
            raise ValueError(f"{family} noise is missing parameter(s) {missing}")
        if family == "normal" and params["sigma"] < 0:
            raise ValueError("normal noise needs sigma >= 0")
        if family == "poisson" and params["lam"] <= 0:
            raise ValueError("poisson noise needs lam > 0")
        if family == "chisquare" and params["df"] <= 0:
            raise ValueError("chi-squared noise needs df > 0")
        if family == "bernoulli" and not 0.0 <= params["p"] <= 1.0:
            raise ValueError("bernoulli noise needs 0 <= p <= 1")
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "scale", float(self.scale))

    @property
    def mean(self) -> float:
        p = self.params
        base = {
            "normal": lambda: p["mu"],
            "poisson": lambda: p["lam"],
            "chisquare": lambda: p["df"],
            "bernoulli": lambda: p["p"],
            "point_mass": lambda: 0.0,
        }[self.family]()
        return self.scale * base

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        p = self.params
        if self.family == "normal":
            draws = rng.normal(p["mu"], p["sigma"], n)
        elif self.family == "poisson":
            draws = rng.poisson(p["lam"], n).astype(float)
        elif self.family == "chisquare":
            draws = rng.chisquare(p["df"], n)
        elif self.family == "bernoulli":
            draws = rng.binomial(1, p["p"], n).astype(float)
        else:
            draws = np.zeros(n)
        return self.scale * draws

    def to_dict(self) -> dict:
        out = {"family": self.family, **self.params}
        if self.scale != 1.0:
            out["scale"] = self.scale
        return out

    @classmethod
    def from_dict(cls, spec: Mapping | None) -> "NoiseSpec":
        if spec is None:
            return cls()
        spec = dict(spec)
        family = spec.pop("family", "point_mass")
        scale = spec.pop("scale", 1.0)
        return cls(family, spec, scale)


@dataclass(frozen=True)
class Penalty:
    """Random penalty term ``coefficient * factor * parent``.

    ``factor`` is drawn per record from its own distribution, e.g. the
    ``(-1500) * Poi(10) * A`` salary penalty of the loan scenario.
    """

    parent: str
    coefficient: float
    factor: NoiseSpec

    def to_dict(self) -> dict:
        return {"parent": self.parent, "coefficient": self.coefficient,
                "factor": self.factor.to_dict()}


@dataclass(frozen=True)
class Assignment:
    """Structural assignment ``link(intercept + sum(coef * parent) + penalties)``.

    ``None`` coefficients (or intercept) mark values to be estimated with
    :func:`fit_linear_anm`. ``constant`` assignments come from interventions
    and ignore both parents and noise.
    """

    intercept: float | None = 0.0
    coefficients: Mapping[str, float | None] = field(default_factory=dict)
    link: str = "identity"
    penalties: tuple[Penalty, ...] = ()
    constant: float | None = None

    def __post_init__(self):
        if self.link not in LINKS:
            raise ValueError(f"unknown link {self.link!r}; expected one of {LINKS}")
        object.__setattr__(self, "coefficients", dict(self.coefficients))
        object.__setattr__(self, "penalties", tuple(self.penalties))

    @property
    def is_constant(self) -> bool:
        return self.constant is not None

    @property
    def has_unknowns(self) -> bool:
        return self.intercept is None or any(v is None for v in self.coefficients.values())

    def to_dict(self) -> dict:
        if self.is_constant:
            return {"constant": self.constant}
        out: dict = {"intercept": self.intercept, "coefficients": dict(self.coefficients)}
        if self.link != "identity":
            out["link"] = self.link
        if self.penalties:
            out["penalties"] = [p.to_dict() for p in self.penalties]
        return out

    @classmethod
    def from_dict(cls, spec: Mapping | None) -> "Assignment":
        if spec is None:
            return cls()
        if spec.get("constant") is not None:
            return cls(constant=float(spec["constant"]))
        coefs = {k: (None if v is None else float(v))
                 for k, v in (spec.get("coefficients") or {}).items()}
        intercept = spec.get("intercept", 0.0)
        penalties = tuple(
            Penalty(p["parent"], float(p["coefficient"]), NoiseSpec.from_dict(p["factor"]))
            for p in spec.get("penalties") or ()
        )
        return cls(
            intercept=None if intercept is None else float(intercept),
            coefficients=coefs,
            link=spec.get("link", "identity"),
            penalties=penalties,
        )


@dataclass(frozen=True)
class NodeSpec:
    name: str
    kind: str = "covariate"
    parents: tuple[str, ...] = ()
    assignment: Assignment = field(default_factory=Assignment)
    noise: NoiseSpec = field(default_factory=NoiseSpec)

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(self.parents))

    def to_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind, "parents": list(self.parents),
                "assignment": self.assignment.to_dict(), "noise": self.noise.to_dict()}

    @classmethod
    def from_dict(cls, spec: Mapping) -> "NodeSpec":
        return cls(
            name=str(spec["name"]),
            kind=spec.get("kind", "covariate"),
            parents=tuple(spec.get("parents") or ()),
            assignment=Assignment.from_dict(spec.get("assignment")),
            noise=NoiseSpec.from_dict(spec.get("noise")),
        )


@dataclass(frozen=True)
class Scm:
    """Immutable structural causal model; node order is declaration order."""

    nodes: tuple[NodeSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))

    def __getitem__(self, name: str) -> NodeSpec:
        for node in self.nodes:
            if node.name == name:
                return node
        raise KeyError(name)

    def __contains__(self, name: str) -> bool:
        return any(node.name == name for node in self.nodes)

    @property
    def names(self) -> list[str]:
        return [node.name for node in self.nodes]

    @property
    def protected(self) -> list[str]:
        return [node.name for node in self.nodes if node.kind == "protected"]

    def graph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self.names)
        for node in self.nodes:
            g.add_edges_from((p, node.name) for p in node.parents)
        return g

    def descendants(self, names: Iterable[str]) -> set[str]:
        g = self.graph()
        out: set[str] = set()
        for name in names:
            out |= nx.descendants(g, name)
        return out

    def replace_node(self, node: NodeSpec) -> "Scm":
        return Scm(tuple(node if n.name == node.name else n for n in self.nodes))

    def to_dict(self) -> dict:
        return {"nodes": [node.to_dict() for node in self.nodes]}

    @classmethod
    def from_dict(cls, spec: Mapping) -> "Scm":
        return cls(tuple(NodeSpec.from_dict(n) for n in spec["nodes"]))


@dataclass(frozen=True)
class LatentRecord:
    """Per-record latent values: one noise column per node, one factor column
    per random penalty (named ``"node|parent"``)."""

    noise: pd.DataFrame
    factors: pd.DataFrame

    def __len__(self) -> int:
        return len(self.noise)

    def to_frame(self) -> pd.DataFrame:
        return pd.concat([self.noise, self.factors], axis=1)

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> "LatentRecord":
        factor_cols = [c for c in frame.columns if "|" in str(c)]
        noise_cols = [c for c in frame.columns if c not in factor_cols]
        return cls(frame[noise_cols].astype(float), frame[factor_cols].astype(float))


def validate_scm(scm: Scm) -> list[str]:
    """Return the list of invariant violations; empty means the model is valid."""
    problems = []
    names = scm.names
    seen = set()
    for name in names:
        if name in seen:
            problems.append(f"duplicate node {name!r}")
        seen.add(name)
    for node in scm.nodes:
        if node.kind not in NODE_KINDS:
            problems.append(f"node {node.name!r} has unknown kind {node.kind!r}")
        for parent in node.parents:
            if parent not in seen:
                problems.append(f"node {node.name!r} references undeclared parent {parent!r}")
            if parent == node.name:
                problems.append(f"self-loop on {node.name!r}")
        if node.kind == "protected" and node.parents:
            problems.append(f"protected node not a root: {node.name!r} has parents "
                            f"{list(node.parents)}")
        a = node.assignment
        used = set(a.coefficients) | {p.parent for p in a.penalties}
        for parent in sorted(used - set(node.parents)):
            problems.append(f"node {node.name!r} assignment uses {parent!r} "
                            f"which is not among its parents")
    g = scm.graph()
    for component in nx.strongly_connected_components(g):
        if len(component) > 1:
            members = sorted(component, key=names.index)
            problems.append("cycle {" + ",".join(members) + "}")
    return problems


def check_scm(scm: Scm) -> None:
    problems = validate_scm(scm)
    if problems:
        raise ValueError("invalid SCM: " + "; ".join(problems))


def topological_order(scm: Scm) -> list[str]:
    """Parents-first order; ties are broken by declaration order."""
    rank = {name: i for i, name in enumerate(scm.names)}
    g = scm.graph()
    try:
        return list(nx.lexicographical_topological_sort(g, key=rank.__getitem__))
    except nx.NetworkXUnfeasible as exc:
        raise ValueError("SCM graph contains a cycle") from exc


def _evaluate(scm: Scm, noise: Mapping[str, np.ndarray],
              factors: Mapping[str, np.ndarray], n: int) -> pd.DataFrame:
    values: dict[str, np.ndarray] = {}
    for name in topological_order(scm):
        node = scm[name]
        a = node.assignment
        if a.is_constant:
            values[name] = np.full(n, a.constant, dtype=float)
            continue
        if a.has_unknowns:
            raise ValueError(f"node {name!r} has unfitted coefficients")
        try:
            u = np.asarray(noise[name], dtype=float)
        except KeyError:
            raise KeyError(f"missing latent values for node {name!r}") from None
        lp = np.full(n, a.intercept, dtype=float)
        for parent, coef in a.coefficients.items():
            lp = lp + coef * values[parent]
        for pen in a.penalties:
            key = _factor_key(name, pen.parent)
            try:
                f = np.asarray(factors[key], dtype=float)
            except KeyError:
                raise KeyError(f"missing penalty factor {key!r}") from None
            lp = lp + pen.coefficient * f * values[pen.parent]
        if a.link == "exp":
            values[name] = np.exp(lp + u)
        else:
            values[name] = lp + u
    return pd.DataFrame({name: values[name] for name in scm.names})


def _tidy_protected(scm: Scm, frame: pd.DataFrame) -> pd.DataFrame:
    # integral protected columns are stored as ints (0/1 codes)
    for name in scm.protected:
        col = frame[name].to_numpy()
        if np.all(np.isfinite(col)) and np.all(col == np.round(col)):
            frame[name] = col.astype(np.int64)
    return frame


def sample_dataset(scm: Scm, n: int, seed: int | None = None
                   ) -> tuple[pd.DataFrame, LatentRecord]:
    """Draw ``n`` records. Each node gets its own child stream of ``seed``, so
    the draws of one node do not depend on how many values the others used."""
    check_scm(scm)
    if n < 1:
        raise ValueError("n must be >= 1")
    streams = np.random.SeedSequence(seed).spawn(len(scm.nodes))
    noise, factors = {}, {}
    for node, stream in zip(scm.nodes, streams):
        rng = np.random.default_rng(stream)
        noise[node.name] = node.noise.sample(rng, n)
        for pen in node.assignment.penalties:
            factors[_factor_key(node.name, pen.parent)] = pen.factor.sample(rng, n)
    data = _tidy_protected(scm, _evaluate(scm, noise, factors, n))
    index = pd.RangeIndex(n)
    latents = LatentRecord(pd.DataFrame(noise, columns=scm.names, index=index),
                           pd.DataFrame(factors, columns=list(factors), index=index))
    return data, latents


def abduct(scm: Scm, data: pd.DataFrame, mode: str = "residual",
           latents: LatentRecord | None = None) -> LatentRecord:
    """Recover latent values for every record.

    ``oracle`` returns the stored draws (only possible for data sampled by
    :func:`sample_dataset`). ``residual`` computes ``g(x) - f(parents)`` with
    ``g = log`` for exp-link nodes; random penalty factors are replaced by
    their distribution means.
    """
    if mode == "oracle":
        if latents is None:
            raise ValueError("oracle abduction needs the stored latents")
        if len(latents) != len(data):
            raise ValueError("latents and dataset have different lengths")
        return latents
    if mode != "residual":
        raise ValueError(f"unknown abduction mode {mode!r}")
    missing = [name for name in scm.names if name not in data.columns]
    if missing:
        raise KeyError(f"dataset is missing SCM column(s) {missing}")
    n = len(data)
    noise, factors = {}, {}
    for node in scm.nodes:
        a = node.assignment
        x = data[node.name].to_numpy(dtype=float)
        for pen in a.penalties:
            factors[_factor_key(node.name, pen.parent)] = np.full(n, pen.factor.mean)
        if a.is_constant:
            noise[node.name] = np.zeros(n)
            continue
        if a.has_unknowns:
            raise ValueError(f"node {node.name!r} has unfitted coefficients")
        lp = np.full(n, a.intercept, dtype=float)
        for parent, coef in a.coefficients.items():
            lp = lp + coef * data[parent].to_numpy(dtype=float)
        for pen in a.penalties:
            lp = lp + pen.coefficient * pen.factor.mean * data[pen.parent].to_numpy(dtype=float)
        if a.link == "exp":
            if np.any(x <= 0):
                raise ValueError(f"exp-link node {node.name!r} has non-positive values")
            noise[node.name] = np.log(x) - lp
        else:
            noise[node.name] = x - lp
    return LatentRecord(pd.DataFrame(noise, columns=scm.names, index=data.index),
                        pd.DataFrame(factors, columns=list(factors), index=data.index))


def intervene(scm: Scm, intervention: Mapping[str, float]) -> Scm:
    """Return a copy of ``scm`` with each target fixed to a constant."""
    if not intervention:
        raise ValueError("intervention must set at least one node")
    out = scm
    for name, value in intervention.items():
        if name not in scm:
            raise KeyError(f"intervention target {name!r} is not an SCM node")
        node = scm[name]
        if node.kind != "protected" or node.parents:
            raise ValueError(f"intervention target {name!r} is not a protected root node")
        out = out.replace_node(replace(node, assignment=Assignment(constant=float(value)),
                                       noise=NoiseSpec()))
    return out


def predict(scm: Scm, latents: LatentRecord) -> pd.DataFrame:
    """Propagate latents through (typically intervened) structural equations."""
    n = len(latents)
    noise = {c: latents.noise[c].to_numpy() for c in latents.noise.columns}
    factors = {c: latents.factors[c].to_numpy() for c in latents.factors.columns}
    out = _tidy_protected(scm, _evaluate(scm, noise, factors, n))
    out.index = latents.noise.index
    return out


class ThresholdClassifier:
    """``1{sum(w_i * x_i) > threshold}`` with a strict inequality."""

    def __init__(self, weights: Mapping[str, float], threshold: float):
        self.weights = {k: float(v) for k, v in weights.items()}
        self.threshold = float(threshold)

    @property
    def features(self) -> list[str]:
        return list(self.weights)

    def score(self, data: pd.DataFrame) -> np.ndarray:
        total = np.zeros(len(data))
        for name, w in self.weights.items():
            total = total + w * data[name].to_numpy(dtype=float)
        return total

    def __call__(self, data: pd.DataFrame) -> np.ndarray:
        return (self.score(data) > self.threshold).astype(np.int64)

    def to_dict(self) -> dict:
        return {"type": "threshold", "weights": dict(self.weights), "threshold": self.threshold}

    @classmethod
    def from_dict(cls, spec: Mapping) -> "ThresholdClassifier":
        kind = spec.get("type", "threshold")
        if kind != "threshold":
            raise ValueError(f"unsupported classifier type {kind!r}")
        return cls(spec["weights"], spec["threshold"])

    def __repr__(self):
        return f"ThresholdClassifier({self.weights!r}, {self.threshold!r})"


def generate_counterfactual_dataset(
    scm: Scm,
    data: pd.DataFrame,
    intervention: Mapping[str, float],
    classifier: Callable[[pd.DataFrame], np.ndarray],
    mode: str = "residual",
    latents: LatentRecord | None = None,
    decision: str = "Y",
) -> pd.DataFrame:
    """Counterfactual dataset under ``do(intervention)``, index-aligned with
    ``data``, with decisions recomputed by ``classifier``.

    Columns that are not SCM nodes (ids, the old decision) are carried over,
    except ``decision`` which is overwritten.
    """
    u = abduct(scm, data, mode, latents)
    u = LatentRecord(u.noise.set_axis(data.index), u.factors.set_axis(data.index))
    cf_values = predict(intervene(scm, intervention), u)
    out = data.copy()
    for name in scm.names:
        out[name] = cf_values[name].to_numpy()
    out[decision] = np.asarray(classifier(out), dtype=np.int64)
    return out


@dataclass(frozen=True)
class FitResult:
    scm: Scm
    residuals: pd.DataFrame
    std_errors: Mapping[str, Mapping[str, float]]


def fit_linear_anm(skeleton: Scm, data: pd.DataFrame) -> FitResult:
    """Fill unknown (``None``) coefficients by per-node ordinary least squares.

    Exp-link nodes are fitted on ``log(x)``. Known nodes are left untouched.
    ``std_errors[node]`` maps ``"intercept"`` and each parent to the classical
    OLS standard error.
    """
    check_scm(skeleton)
    scm = skeleton
    residuals, std_errors = {}, {}
    for node in skeleton.nodes:
        a = node.assignment
        if a.is_constant or not a.has_unknowns:
            continue
        if a.penalties:
            raise ValueError(f"cannot fit node {node.name!r} with random penalties")
        y = data[node.name].to_numpy(dtype=float)
        if a.link == "exp":
            if np.any(y <= 0):
                raise ValueError(f"exp-link node {node.name!r} has non-positive values")
            y = np.log(y)
        regressors = list(a.coefficients) or []
        design = np.column_stack([np.ones(len(y))] +
                                 [data[p].to_numpy(dtype=float) for p in regressors])
        rank = np.linalg.matrix_rank(design)
        if rank < design.shape[1]:
            raise np.linalg.LinAlgError(
                f"design matrix for node {node.name!r} is rank deficient "
                f"(rank {rank} < {design.shape[1]})")
        beta, *_ = np.linalg.lstsq(design, y, rcond=None)
        resid = y - design @ beta
        dof = max(len(y) - design.shape[1], 1)
        sigma2 = resid @ resid / dof
        cov = sigma2 * np.linalg.inv(design.T @ design)
        se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
        names = ["intercept"] + regressors
        std_errors[node.name] = dict(zip(names, se.tolist()))
        residuals[node.name] = resid
        fitted = Assignment(intercept=float(beta[0]),
                            coefficients={p: float(b) for p, b in zip(regressors, beta[1:])},
                            link=a.link)
        scm = scm.replace_node(replace(node, assignment=fitted))
    return FitResult(scm, pd.DataFrame(residuals, index=data.index), std_errors)


def interventions_from_strings(items: Sequence[str]) -> dict[str, float]:
    """Parse ``["A=0", "B=1"]`` (or a single ``"A=0,B=1"``) into a mapping."""
    out: dict[str, float] = {}
    for item in items:
        for part in str(item).split(","):
            part = part.strip()
            if not part:
                continue
            name, sep, value = part.partition("=")
            if not sep:
                raise ValueError(f"bad intervention {part!r}; expected NAME=VALUE")
            v = float(value)
            out[name.strip()] = int(v) if math.isclose(v, round(v)) else v
    if not out:
        raise ValueError("empty intervention")
    return out
