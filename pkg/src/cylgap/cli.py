"""Command-line entry point: run experiments from a config file, plot CSV
columns to SVG, and summarize result directories.

Config format: ``[section]`` headers with ``key = value`` lines and ``#``
comments.  Unknown sections or keys are rejected with line numbers.
Exit codes: 0 all assertions passed, 2 assertion failures, 1 errors.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
import time

from . import coeff as coeff_mod
from . import experiments as ex
from ._svg import render_line_plot
from .errors import ConfigError, CylgapError, MissingColumn
from .experiments import CSV_COLUMNS, SweepRecord

ENV_OUTPUT_DIR = "CYLGAP_OUTPUT_DIR"
ENV_PARALLELISM = "CYLGAP_PARALLELISM"

_FLOAT, _INT, _STR, _FLIST, _SLIST = "float", "int", "str", "floatlist", "strlist"

SCHEMA = {
    "run": {"experiments": _SLIST, "output_dir": _STR, "seed": _INT,
            "parallelism": _INT},
    "field": {"kind": _STR, "delta": _FLOAT, "delta0": _FLOAT, "c": _FLOAT,
              "a11": _FLOAT, "n": _INT, "p": _INT, "table": _STR,
              "diag": _FLIST},
    "domain": {"omega": _FLIST},
    "mesh": {"resolution": _FLOAT, "axial_resolution": _FLOAT,
             "grading": _FLOAT, "node_cap": _INT, "res3d_axial": _FLOAT,
             "res3d_cross": _FLOAT},
    "solver": {"tol": _FLOAT},
    "schedules": {"ell_bounds": _FLIST, "ell_zero": _FLIST, "l_half": _FLIST,
                  "l_infinity": _FLIST, "l_gap": _FLIST, "l_second": _FLIST,
                  "l_dirichlet": _FLIST, "ell_decay": _FLIST,
                  "ell_end_profile": _FLIST, "l_multi": _FLIST},
    "tolerances": {"conv_tol": _FLOAT, "tol_inf": _FLOAT},
}

DEFAULT_SCHEDULES = {
    "ell_bounds": [0.1, 0.5, 1.0, 2.0, 4.0, 8.0],
    "ell_zero": [0.4, 0.2, 0.1, 0.05],
    "l_half": [4.0, 8.0, 16.0],
    "l_infinity": [8.0, 12.0, 16.0],
    "l_gap": [8.0, 12.0, 16.0],
    "l_second": [8.0, 12.0, 16.0],
    "l_dirichlet": [4.0, 8.0, 16.0],
    "ell_decay": [12.0],
    "ell_end_profile": [6.0, 10.0, 14.0],
    "l_multi": [2.0, 4.0],
}

EXPERIMENT_NAMES = ["bounds", "limit-zero", "nu-half", "limit-infinity",
                    "gap", "second", "dirichlet", "decay", "end-profile",
                    "multi-direction"]


class RunConfig:
    def __init__(self):
        self.experiments = ["bounds"]
        self.output_dir = "out"
        self.seed = 0
        self.parallelism = 1
        self.field_kind = "model"
        self.field_params = {}
        self.omega = (-1.0, 1.0)
        self.mesh = {}
        self.tol = 1e-9
        self.schedules = dict(DEFAULT_SCHEDULES)
        self.conv_tol = 5e-3
        self.tol_inf = ex.TOL_INF

    def experiment_config(self):
        cfg = ex.ExperimentConfig(tol=self.tol, seed=self.seed,
                                  parallelism=self.parallelism,
                                  conv_tol=self.conv_tol,
                                  omega=tuple(self.omega))
        for key, val in self.mesh.items():
            setattr(cfg, key, val)
        return cfg


def _convert(raw, typ, path, lineno, key):
    try:
        if typ == _FLOAT:
            return float(raw)
        if typ == _INT:
            return int(raw)
        if typ == _FLIST:
            vals = [float(v) for v in raw.replace(",", " ").split()]
            if not vals:
                raise ValueError("empty list")
            return vals
        if typ == _SLIST:
            return [v.strip() for v in raw.replace(",", " ").split() if v.strip()]
        return raw
    except ValueError as exc:
        raise ConfigError(f"{path}:{lineno}: bad value for '{key}': {exc}")


def parse_config(path):
    """Parse and validate a config file into a RunConfig."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    rc = RunConfig()
    section = None
    seen = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if text.startswith("[") and text.endswith("]"):
                section = text[1:-1].strip().lower()
                if section not in SCHEMA:
                    raise ConfigError(f"{path}:{lineno}: unknown section "
                                      f"[{section}]")
                continue
            if "=" not in text:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            if section is None:
                raise ConfigError(f"{path}:{lineno}: key outside any section")
            key, raw = (t.strip() for t in text.split("=", 1))
            key = key.lower()
            if key not in SCHEMA[section]:
                raise ConfigError(f"{path}:{lineno}: unknown key '{key}' in "
                                  f"[{section}]")
            if (section, key) in seen:
                raise ConfigError(f"{path}:{lineno}: duplicate key '{key}' "
                                  f"(first at line {seen[(section, key)]})")
            seen[(section, key)] = lineno
            val = _convert(raw, SCHEMA[section][key], path, lineno, key)
            _apply(rc, section, key, val, path, lineno)
    _validate(rc, path)
    return rc


def _apply(rc, section, key, val, path, lineno):
    if section == "run":
        if key == "experiments":
            names = val
            if names == ["all"]:
                names = list(EXPERIMENT_NAMES)
            for n in names:
                if n not in EXPERIMENT_NAMES:
                    raise ConfigError(f"{path}:{lineno}: unknown experiment "
                                      f"'{n}'")
            rc.experiments = names
        else:
            setattr(rc, key, val)
    elif section == "field":
        if key == "kind":
            rc.field_kind = val
        else:
            rc.field_params[key] = val
    elif section == "domain":
        if len(val) not in (2, 4) or val[0] >= val[1] or \
                (len(val) == 4 and val[2] >= val[3]):
            raise ConfigError(f"{path}:{lineno}: omega must be 'lo hi' "
                              "(or a box 'lo hi lo hi')")
        rc.omega = tuple(val) if len(val) == 2 else \
            ((val[0], val[1]), (val[2], val[3]))
    elif section == "mesh":
        rc.mesh[key] = val
    elif section == "solver":
        rc.tol = val
    elif section == "schedules":
        rc.schedules[key] = val
    elif section == "tolerances":
        setattr(rc, key, val)


def _validate(rc, path):
    if rc.tol <= 0 or rc.conv_tol <= 0 or rc.tol_inf <= 0:
        raise ConfigError(f"{path}: tolerances must be positive")
    for name, sched in rc.schedules.items():
        if not sched:
            raise ConfigError(f"{path}: schedule {name} is empty")
        increasing = all(b > a for a, b in zip(sched, sched[1:]))
        decreasing = all(b < a for a, b in zip(sched, sched[1:]))
        if len(sched) > 1 and not (increasing or decreasing):
            raise ConfigError(f"{path}: schedule {name} must be sorted")
        if any(v <= 0 for v in sched):
            raise ConfigError(f"{path}: schedule {name} must be positive")
    for key, val in rc.mesh.items():
        if val <= 0:
            raise ConfigError(f"{path}: mesh.{key} must be positive")
    if rc.parallelism < 1:
        raise ConfigError(f"{path}: parallelism must be >= 1")


def make_field(rc):
    kind = rc.field_kind
    par = rc.field_params
    if kind == "model":
        return coeff_mod.model_field(par.get("delta", 0.6))
    if kind == "identity":
        return coeff_mod.identity_field(par.get("n", 2), par.get("p", 1))
    if kind == "diagonal":
        diag = par.get("diag", [1.0] * par.get("n", 2))
        return coeff_mod.diagonal_field(diag, p=par.get("p", 1))
    if kind == "asymmetric":
        return coeff_mod.asymmetric_model_field(par.get("delta0", 0.5))
    if kind == "variable-a22":
        return coeff_mod.variable_a22_field(par.get("delta", 0.6))
    if kind == "neg-coupling":
        return coeff_mod.neg_coupling_field(par.get("c", 0.5),
                                            par.get("a11", 2.0))
    if kind == "multi-model":
        return coeff_mod.multi_model_field(par.get("delta", 0.6))
    if kind == "table":
        if "table" not in par:
            raise ConfigError("field kind 'table' needs table = <path>")
        return coeff_mod.field_from_table(par["table"])
    raise ConfigError(f"unknown field kind '{kind}'")


# -- experiment dispatch -----------------------------------------------------


def _ints(sched):
    return [int(round(v)) for v in sched]


def _run_nu_half(field, rc, cfg):
    plus = ex.exp_nu_half(field, "+", rc.schedules["l_half"], cfg,
                          strict=False)
    minus = ex.exp_nu_half(field, "-", rc.schedules["l_half"], cfg,
                           strict=False)
    for est in (plus, minus):
        last = est.records[-1]
        extra = f"bracket=[{est.bracket[0]:.9g},{est.bracket[1]:.9g}]"
        if not est.converged:
            extra += "; truncation sequence not converged"
        last.note = f"{last.note}; {extra}" if last.note else extra
    records = plus.records + minus.records
    L0 = rc.schedules["l_half"][0]
    lm, lp = ex.reflection_check(field, L0, cfg)
    rec = SweepRecord(experiment="nu-half", field_kind=field.kind,
                      n=field.n, p=field.p, ell=L0,
                      lambda_half_minus=lm, lambda_half_plus=lp,
                      gap=abs(lm - lp), passed=abs(lm - lp) <= 1e-8,
                      note="reflection identity lambda-(A) vs lambda+(A~)")
    records.append(rec)
    return records, {}


def _run_decay(field, rc, cfg):
    records = []
    profile_rows = []
    for ell in rc.schedules["ell_decay"]:
        recs, prof = ex.exp_decay(field, ell, cfg)
        records.extend(recs)
        for (r, m), (_, g) in zip(prof.masses, prof.grad_masses):
            profile_rows.append({"ell": ell, "r": r, "mass": m,
                                 "grad_mass": g})
    return records, {"decay_profile.csv": (["ell", "r", "mass", "grad_mass"],
                                           profile_rows)}


def _run_end_profile(field, rc, cfg):
    return ex.exp_end_profile(field, rc.schedules["ell_end_profile"], cfg), {}


EXECUTORS = {
    "bounds": lambda f, rc, cfg: (
        ex.exp_bounds_sweep(f, rc.schedules["ell_bounds"], cfg), {}),
    "limit-zero": lambda f, rc, cfg: (
        ex.exp_limit_zero(f, rc.schedules["ell_zero"], cfg), {}),
    "nu-half": _run_nu_half,
    "limit-infinity": lambda f, rc, cfg: (
        ex.exp_limit_infinity(f, _ints(rc.schedules["l_infinity"]), cfg,
                              tol_inf=rc.tol_inf), {}),
    "gap": lambda f, rc, cfg: (
        ex.exp_gap(f, _ints(rc.schedules["l_gap"]), cfg), {}),
    "second": lambda f, rc, cfg: (
        ex.exp_second_eigenvalue(f, _ints(rc.schedules["l_second"]), cfg), {}),
    "dirichlet": lambda f, rc, cfg: (
        ex.exp_dirichlet_comparison(f, _ints(rc.schedules["l_dirichlet"]),
                                    cfg), {}),
    "decay": _run_decay,
    "end-profile": _run_end_profile,
    "multi-direction": lambda f, rc, cfg: (
        ex.exp_multi_direction(f, _ints(rc.schedules["l_multi"]), cfg), {}),
}


def _fmt_cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def write_records_csv(path, records):
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for rec in records:
            w.writerow([_fmt_cell(getattr(rec, c)) for c in CSV_COLUMNS])


def _write_table_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt_cell(row.get(c)) for c in header])


def run(config_path):
    """Execute the configured experiments; write CSVs and a summary."""
    rc = parse_config(config_path)
    outdir = os.environ.get(ENV_OUTPUT_DIR, rc.output_dir)
    par_env = os.environ.get(ENV_PARALLELISM)
    if par_env is not None:
        try:
            rc.parallelism = int(par_env)
        except ValueError:
            raise ConfigError(f"{ENV_PARALLELISM} must be an integer")
    os.makedirs(outdir, exist_ok=True)
    cfg = rc.experiment_config()
    field = make_field(rc)
    summary_lines = []
    any_fail = False
    t0 = time.perf_counter()
    for name in rc.experiments:
        t_exp = time.perf_counter()
        try:
            records, extras = EXECUTORS[name](field, rc, cfg)
        except CylgapError as exc:
            records = [SweepRecord(experiment=name, field_kind=field.kind,
                                   n=field.n, p=field.p, passed=False,
                                   note=f"{type(exc).__name__}: {exc}")]
            extras = {}
        write_records_csv(os.path.join(outdir, f"{name}.csv"), records)
        for fname, (header, rows) in extras.items():
            _write_table_csv(os.path.join(outdir, fname), header, rows)
        n_pass = sum(1 for r in records if r.passed)
        ok = n_pass == len(records)
        any_fail = any_fail or not ok
        dt = time.perf_counter() - t_exp
        summary_lines.append(
            f"{'PASS' if ok else 'FAIL'}  {name:<16} {n_pass}/{len(records)} "
            f"rows passed  ({dt:.1f}s)")
        for r in records:
            if not r.passed:
                summary_lines.append(f"      row ell={r.ell}: {r.note}")
    total = time.perf_counter() - t0
    summary_lines.append(f"total wall time: {total:.1f}s")
    with open(os.path.join(outdir, "summary.txt"), "w",
              encoding="utf-8") as f:
        f.write("\n".join(summary_lines) + "\n")
    print("\n".join(summary_lines))
    return 2 if any_fail else 0


def _read_csv(path):
    if not os.path.exists(path):
        raise MissingColumn(f"CSV not found: {path}")
    with open(path, "r", encoding="utf-8", newline="") as f:
        rows = list(csv.reader(f))
    if not rows:
        raise MissingColumn(f"{path}: empty CSV")
    return rows[0], rows[1:]


def plot(csv_path, x_column, y_columns, out_svg, logy=False, group=None):
    """Self-contained SVG line plot of CSV columns."""
    header, rows = _read_csv(csv_path)
    for col in [x_column, *y_columns] + ([group] if group else []):
        if col not in header:
            raise MissingColumn(f"{csv_path}: no column '{col}'")
    if not rows:
        raise MissingColumn(f"{csv_path}: no data rows")
    ix = header.index(x_column)
    series = []
    groups = [None]
    if group:
        ig = header.index(group)
        groups = sorted({row[ig] for row in rows if row[ig] != ""})
    for gval in groups:
        for ycol in y_columns:
            iy = header.index(ycol)
            pts = []
            for row in rows:
                if group and row[header.index(group)] != gval:
                    continue
                if row[ix] == "" or row[iy] == "":
                    continue
                pts.append((float(row[ix]), float(row[iy])))
            if not pts:
                continue
            pts.sort(key=lambda p: p[0])
            label = ycol if gval is None else f"{ycol}[{group}={gval}]"
            series.append((label, [p[0] for p in pts], [p[1] for p in pts]))
    if not series:
        raise MissingColumn(f"{csv_path}: no plottable data in "
                            f"{[x_column, *y_columns]}")
    render_line_plot(series, out_svg, logy=logy, x_label=x_column,
                     y_label=",".join(y_columns),
                     title=os.path.basename(csv_path))
    return 0


def report(directory):
    """Summarize pass/fail over every record CSV in a directory."""
    if not os.path.isdir(directory):
        raise ConfigError(f"not a directory: {directory}")
    names = sorted(n for n in os.listdir(directory) if n.endswith(".csv"))
    any_fail = False
    printed = False
    for name in names:
        header, rows = _read_csv(os.path.join(directory, name))
        if "passed" not in header:
            continue
        ip = header.index("passed")
        inote = header.index("note") if "note" in header else None
        n_pass = sum(1 for r in rows if r[ip] == "true")
        ok = n_pass == len(rows)
        any_fail = any_fail or not ok
        printed = True
        print(f"{'PASS' if ok else 'FAIL'}  {name:<24} {n_pass}/{len(rows)}")
        if not ok and inote is not None:
            for r in rows:
                if r[ip] != "true":
                    print(f"      {r[inote]}")
    if not printed:
        print(f"no experiment CSVs found in {directory}")
    return 2 if any_fail else 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="cylgap",
        description="Eigenvalue experiments on elongating cylinders")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run experiments from a config file")
    p_run.add_argument("config")
    p_plot = sub.add_parser("plot", help="plot CSV columns to SVG")
    p_plot.add_argument("csv")
    p_plot.add_argument("--x", required=True)
    p_plot.add_argument("--y", required=True,
                        help="comma-separated y columns")
    p_plot.add_argument("--out", required=True)
    p_plot.add_argument("--logy", action="store_true")
    p_plot.add_argument("--group", default=None,
                        help="one polyline per distinct value of this column")
    p_rep = sub.add_parser("report", help="summarize a results directory")
    p_rep.add_argument("directory")
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return run(args.config)
        if args.command == "plot":
            ycols = [c.strip() for c in args.y.split(",") if c.strip()]
            return plot(args.csv, args.x, ycols, args.out, logy=args.logy,
                        group=args.group)
        if args.command == "report":
            return report(args.directory)
    except CylgapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 1


if __name__ == "__main__":
    sys.exit(main())
