"""Command-line front end.

    cstkit generate loan --n 5000 --seed 42 --out-dir runs/
    cstkit audit --data runs/loan_data.csv --scm runs/loan_scm.yaml \\
        --schema runs/loan_schema.yaml --method cst --k 15 --intervention A=0 \\
        --out runs/cst_k15.csv
    cstkit compare --data ... --scm ... --schema ... --k 15 30 50 100 --intervention A=0 \\
        --out runs/table.csv
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .detection import (AuditConfig, VARIANCE_MODES, run_cf, run_cst_grid, run_st_grid)
from .io import (InputError, SchemaConfig, read_csv, read_latents, read_schema, read_scm,
                 write_csv, write_latents, write_manifest, write_schema, write_scm)
from .scenarios import (LAW_CLASSIFIER, LAW_SCHEMA, LOAN_CLASSIFIER, LOAN_SCHEMA,
                        build_law_school, generate_law_school_synthetic, generate_loan,
                        load_law_school_csv)
from .scm import (check_scm, fit_linear_anm, generate_counterfactual_dataset,
                  interventions_from_strings)

log = logging.getLogger("cstkit")

DEFAULTS = {"k": 15, "alpha": 0.05, "tau": 0.0, "include_centers": False,
            "variance_mode": "as-written", "max_distance": None, "normalize": True,
            "jobs": 1, "abduction": "residual"}
SCENARIOS = ("loan", "law-school")


class UsageError(Exception):
    pass


def fmt(x) -> str:
    """Four significant digits for console output."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{x:.4g}"


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cstkit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a scenario dataset, its latents and SCM")
    gen.add_argument("scenario", choices=SCENARIOS)
    gen.add_argument("--n", type=_positive_int, default=None,
                     help="record count (loan: 5000, law-school synthetic: 21790)")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out-dir", type=Path, default=Path("."))
    gen.add_argument("--source", type=Path,
                     help="law-school only: admissions survey CSV to ingest instead of "
                          "generating synthetic records")
    gen.add_argument("--race-column", default="race")
    gen.add_argument("--gender-column", default="gender")
    gen.add_argument("--white-values", nargs="+", default=["white"])
    gen.add_argument("--female-values", nargs="+", default=["female", "f"])
    gen.add_argument("--lsat-scale", type=float, default=1.0)

    def audit_flags(p):
        p.add_argument("--data", type=Path, required=True)
        p.add_argument("--scm", type=Path)
        p.add_argument("--schema", type=Path, required=True)
        p.add_argument("--alpha", type=float)
        p.add_argument("--tau", type=float)
        p.add_argument("--intervention", action="append", default=None,
                       help="NAME=VALUE[,NAME=VALUE]; repeatable")
        p.add_argument("--protected", action="append", default=None,
                       help="NAME=VALUE spec of the protected group (default: intervention "
                            "targets with their schema protected values)")
        p.add_argument("--variance-mode", choices=VARIANCE_MODES)
        p.add_argument("--abduction", choices=("oracle", "residual"))
        p.add_argument("--latents", type=Path)
        p.add_argument("--max-distance", type=float)
        p.add_argument("--no-normalize", dest="normalize", action="store_const", const=False)
        p.add_argument("--jobs", type=_positive_int)
        p.add_argument("--out", type=Path, required=True)

    aud = sub.add_parser("audit", help="run one detection method and write its report")
    audit_flags(aud)
    aud.add_argument("--method", choices=("cst", "st", "cf"), required=True)
    aud.add_argument("--k", type=_positive_int)
    aud.add_argument("--include-centers", action="store_const", const=True)

    cmp_ = sub.add_parser("compare", help="CST (w/o), ST, CST and CF over a grid of k")
    audit_flags(cmp_)
    cmp_.add_argument("--k", type=_positive_int, nargs="+", default=[15, 30, 50, 100])
    return parser


# -- generate ---------------------------------------------------------------

def _rates(data: pd.DataFrame, group: str, decision: str = "Y") -> str:
    parts = []
    for value, sub in data.groupby(group):
        parts.append(f"{group}={value}: n={len(sub)}, positive rate {fmt(100 * sub[decision].mean())}%")
    return "; ".join(parts)


def cmd_generate(args) -> int:
    args.out_dir.mkdir(parents=True, exist_ok=True)
    stem = args.out_dir / args.scenario.replace("-", "_")
    paths = {"data": Path(f"{stem}_data.csv"), "scm": Path(f"{stem}_scm.yaml"),
             "schema": Path(f"{stem}_schema.yaml")}
    if args.scenario == "loan":
        data, scm, latents = generate_loan(args.n or 5000, args.seed)
        schema = SchemaConfig(LOAN_SCHEMA, LOAN_CLASSIFIER, {"intervention": "A=0"})
        cf = generate_counterfactual_dataset(scm, data, {"A": 0}, LOAN_CLASSIFIER,
                                             "oracle", latents)
        female = data["A"] == 1
        print(f"records: {len(data)}; females: {int(female.sum())}; males: {int((~female).sum())}")
        print(f"female rejection rate: {fmt(100 * (1 - data.loc[female, 'Y'].mean()))}% "
              f"(counterfactual {fmt(100 * (1 - cf.loc[female, 'Y'].mean()))}%)")
        print(f"male rejection rate: {fmt(100 * (1 - data.loc[~female, 'Y'].mean()))}%")
    else:
        schema = SchemaConfig(LAW_SCHEMA, LAW_CLASSIFIER, {"intervention": "R=0"})
        if args.source is not None:
            raw = load_law_school_csv(args.source, args.race_column, args.gender_column,
                                      args.white_values, args.female_values, args.lsat_scale)
        else:
            raw, _ = generate_law_school_synthetic(args.n or 21790, args.seed)
        # latents are not written: they belong to the generating model, not the fitted one
        latents = None
        scenario, data = build_law_school(raw)
        if scenario.dropped:
            print(f"dropped {scenario.dropped} record(s) with LSAT <= 0", file=sys.stderr)
        scm = scenario.scm
        print(f"records: {len(data)}; female {fmt(100 * data['G'].mean())}%; "
              f"non-white {fmt(100 * data['R'].mean())}%")
        print("success rates: " + _rates(data, "G") + " | " + _rates(data, "R"))
    write_csv(data, paths["data"])
    write_scm(scm, paths["scm"])
    write_schema(schema, paths["schema"])
    if latents is not None:
        paths["latents"] = Path(f"{stem}_latents.csv")
        write_latents(latents, paths["latents"])
    for name, path in paths.items():
        print(f"wrote {name}: {path}")
    return 0


# -- audit / compare --------------------------------------------------------

def _resolve(args, schema_cfg: SchemaConfig, grid: bool) -> tuple[AuditConfig, dict]:
    settings = dict(DEFAULTS)
    file_cfg = dict(schema_cfg.audit)
    settings.update({k.replace("-", "_"): v for k, v in file_cfg.items()})
    for key in ("alpha", "tau", "variance_mode", "abduction", "max_distance", "normalize",
                "jobs", "intervention", "protected"):
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    if not grid:
        for key in ("k", "include_centers"):
            if getattr(args, key, None) is not None:
                settings[key] = getattr(args, key)

    def parse_map(value):
        if value in (None, "", []):
            return None
        if isinstance(value, dict):
            return value
        return interventions_from_strings([value] if isinstance(value, str) else value)

    intervention = parse_map(settings.get("intervention"))
    protected = parse_map(settings.get("protected"))
    config = AuditConfig(
        k=int(settings["k"]), alpha=float(settings["alpha"]), tau=float(settings["tau"]),
        include_centers=bool(settings["include_centers"]), intervention=intervention,
        variance_mode=settings["variance_mode"],
        max_distance=None if settings["max_distance"] is None else float(settings["max_distance"]),
        protected=protected, normalize=bool(settings["normalize"]), jobs=int(settings["jobs"]))
    return config, settings


def _counterfactual(args, data, schema_cfg, config, settings):
    if args.scm is None:
        raise UsageError("SCM required for counterfactual methods (--scm)")
    if not config.intervention:
        raise UsageError("an intervention is required for counterfactual methods "
                         "(--intervention NAME=VALUE)")
    if schema_cfg.classifier is None:
        raise UsageError("the schema config has no 'classifier' section; it is needed to "
                         "score counterfactual records")
    scm = read_scm(args.scm)
    check_scm(scm)
    missing = [n for n in scm.names if n not in data.columns]
    if missing:
        raise InputError(f"{args.data}: missing SCM column(s) {missing}")
    mode = settings["abduction"]
    latents = None
    if mode == "oracle":
        if args.latents is None:
            raise UsageError("oracle abduction needs --latents")
        latents = read_latents(args.latents)
    if any(node.assignment.has_unknowns for node in scm.nodes):
        scm = fit_linear_anm(scm, data).scm
    cf = generate_counterfactual_dataset(scm, data, config.intervention, schema_cfg.classifier,
                                         mode, latents, schema_cfg.schema.decision)
    return cf


def _load_inputs(args):
    schema_cfg = read_schema(args.schema)
    data = schema_cfg.apply_transforms(read_csv(args.data))
    needed = [a.name for a in schema_cfg.schema.attributes if a.role != "ignore"]
    missing = [c for c in needed if c not in data.columns]
    if missing:
        raise InputError(f"{args.data}: missing column(s) {missing}")
    return schema_cfg, data


def _inputs(args) -> dict:
    return {"data": args.data, "scm": args.scm, "schema": args.schema,
            "latents": args.latents}


def _manifest_path(out: Path) -> Path:
    return out.with_name(out.name + ".manifest.json")


def cmd_audit(args) -> int:
    schema_cfg, data = _load_inputs(args)
    config, settings = _resolve(args, schema_cfg, grid=False)
    schema = schema_cfg.schema
    if args.method == "st":
        report = run_st_grid(data, schema, config, [config.k])[0]
    else:
        cf = _counterfactual(args, data, schema_cfg, config, settings)
        if args.method == "cst":
            report = run_cst_grid(data, cf, schema, config, [config.k])[0]
        else:
            report = run_cf(data, cf, schema, config)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(report.to_csv(), encoding="utf-8")
    snapshot = {**config.snapshot(), "abduction": settings["abduction"], "method": args.method}
    write_manifest(_manifest_path(args.out), "audit", snapshot, _inputs(args),
                   {"report": args.out}, __version__)
    label = report.method + ("" if report.k is None else f" k={report.k}")
    print(f"{label}: {report.summary_line()}; significant: {report.n_significant}")
    return 0


def cmd_compare(args) -> int:
    schema_cfg, data = _load_inputs(args)
    config, settings = _resolve(args, schema_cfg, grid=True)
    schema = schema_cfg.schema
    ks = sorted(set(args.k))
    cf = _counterfactual(args, data, schema_cfg, config, settings)
    wo = run_cst_grid(data, cf, schema, _with(config, include_centers=False), ks)
    st = run_st_grid(data, schema, config, ks)
    cst = run_cst_grid(data, cf, schema, _with(config, include_centers=True), ks)
    cf_report = run_cf(data, cf, schema, config)

    rows = []
    for name, reports in (("CST (w/o)", wo), ("ST", st), ("CST", cst)):
        rows.append([name] + [r.summary_line() for r in reports])
    rows.append(["CF"] + [cf_report.summary_line()] * len(ks))
    table = pd.DataFrame(rows, columns=["method"] + [f"k={k}" for k in ks])
    diag = pd.DataFrame({
        "k": ks,
        "ST": [r.n_discriminated for r in st],
        "ST_and_CST": [len(s.discriminated_ids & c.discriminated_ids) for s, c in zip(st, cst)],
        "CF": [cf_report.n_discriminated] * len(ks),
        "CF_and_CST": [len(cf_report.discriminated_ids & c.discriminated_ids) for c in cst],
    })
    print(table.to_string(index=False))
    print()
    print(diag.to_string(index=False))

    counts = pd.DataFrame(
        [[name] + [r.n_discriminated for r in reports] + [r.n_significant for r in reports]
         for name, reports in (("CST (w/o)", wo), ("ST", st), ("CST", cst),
                               ("CF", [cf_report] * len(ks)))],
        columns=["method"] + [f"k={k}" for k in ks] + [f"significant_k={k}" for k in ks])
    counts.insert(1, "protected", cf_report.n_protected)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(counts, args.out)
    diag_path = args.out.with_name(args.out.stem + "_containment.csv")
    write_csv(diag, diag_path)
    snapshot = {**config.snapshot(), "k": ks, "abduction": settings["abduction"]}
    write_manifest(_manifest_path(args.out), "compare", snapshot, _inputs(args),
                   {"table": args.out, "containment": diag_path}, __version__)
    return 0


def _with(config: AuditConfig, **changes) -> AuditConfig:
    return replace(config, **changes)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    logging.captureWarnings(True)
    if args.command == "generate" and args.source is not None and args.scenario != "law-school":
        parser.error("--source only applies to the law-school scenario")
    handler = {"generate": cmd_generate, "audit": cmd_audit, "compare": cmd_compare}
    try:
        return handler[args.command](args)
    except (UsageError, InputError, KeyError, ValueError, np.linalg.LinAlgError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
