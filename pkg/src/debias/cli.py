"""Command-line frontend: ``debias {run,grid,emergence,rank,export}``.

Exit status is 0 on success, 1 on invalid input and 2 on runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

from . import export as ex
from .engine import Crossover, DEConfig, Mutation
from .experiment import (
    EMERGENCE_RUNS,
    LEDGER_COLUMNS,
    PAPER_BUDGET,
    PAPER_CR_VALUES,
    PAPER_F_VALUES,
    PAPER_P_VALUES,
    PAPER_RUNS,
    RECOMMENDED_CR,
    RECOMMENDED_F,
    RECOMMENDED_P,
    GridRow,
    GridSpec,
    load_grid,
    rank_configs,
    run_config,
    run_emergence,
    run_grid,
)
from .metrics import SBConfig
from .sdis import SdisKind

log = logging.getLogger("debias")

DEFAULT_OUT = "results"
DEFAULT_STRIDE = 100


class ValidationError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def _split(values):
    if values is None:
        return None
    out = []
    for v in values:
        out.extend(s for s in str(v).split(",") if s)
    return out


def parse_variant(text: str) -> tuple[Mutation, Crossover | None]:
    """Parse ``rand/1``, ``DE/rand/1/bin`` or ``DE/curr-to-rand/1`` style names."""
    parts = text.strip().split("/")
    if parts and parts[0].lower() == "de":
        parts = parts[1:]
    crossover = None
    if len(parts) == 3:
        crossover = Crossover.parse(parts[2])
        parts = parts[:2]
    return Mutation.parse("/".join(parts)), crossover


def _add_config_flags(sp: argparse.ArgumentParser, multi: bool) -> None:
    nargs = "+" if multi else None
    sp.add_argument("--mutation", nargs=nargs, help="mutation, e.g. rand/1 or DE/best/1/bin")
    sp.add_argument("--crossover", nargs=nargs, help="bin, exp (none is implied by current-to-rand/1)")
    sp.add_argument("--p", nargs=nargs, help="population size")
    sp.add_argument("--f", nargs=nargs, help="scale factor F")
    sp.add_argument("--cr", nargs=nargs, help="crossover rate Cr")
    sp.add_argument("--sdis", nargs=nargs, help="COTN, dis, mir, sat, tor or uni")
    sp.add_argument("--n", type=int, help="dimension (default 30)")
    sp.add_argument("--budget", type=int, help=f"evaluations per run (default {PAPER_BUDGET})")
    sp.add_argument("--runs", type=int, help="independent runs")
    sp.add_argument("--alpha", type=float, help="significance level (default 0.01)")
    sp.add_argument("--seed", type=int, help="base seed (default 0)")
    sp.add_argument("--jobs", type=int, default=1, help="worker processes")
    sp.add_argument("--out", help=f"results directory (default {DEFAULT_OUT}; env DEBIAS_OUT overrides)")
    sp.add_argument("--stride", type=int, help="emergence checkpoint stride (default 100)")
    sp.add_argument("--config", help="JSON file with resolved settings; flags override it")
    sp.add_argument("--dry-run", action="store_true", help="print the resolved configurations and exit")
    sp.add_argument("--emit-config", metavar="PATH", help="write the resolved settings as JSON")
    sp.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="debias", description="Structural-bias experiments for Differential Evolution on f0.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("run", help="run one configuration and score its final points")
    _add_config_flags(sp, multi=False)

    sp = sub.add_parser("grid", help="sweep a grid of configurations")
    _add_config_flags(sp, multi=True)
    preset = sp.add_mutually_exclusive_group()
    preset.add_argument("--paper", action="store_true", help="the full 10980-configuration grid")
    preset.add_argument("--desk", action="store_true", help="the reduced-budget 12-configuration grid")
    sp.add_argument("--no-points", action="store_true", help="do not store per-configuration final points")

    sp = sub.add_parser("emergence", help="SB of pooled active populations over evaluations")
    _add_config_flags(sp, multi=False)

    sp = sub.add_parser("rank", help="rank configurations of a finished grid")
    sp.add_argument("--out", help="results directory holding ledger.csv")
    sp.add_argument("--sdis", nargs="+")
    sp.add_argument("--f", nargs="+")
    sp.add_argument("--cr", nargs="+")
    sp.add_argument("--p", nargs="+")
    sp.add_argument("--mutation", nargs="+")
    sp.add_argument("--recommended", action="store_true", help="restrict to F, Cr, p closest to common recommendations")
    sp.add_argument("--top", type=int, default=5)
    sp.add_argument("-v", "--verbose", action="store_true")

    sp = sub.add_parser("export", help="write heatmap slices or the grid table from a results directory")
    sp.add_argument("kind", choices=["heatmap", "grid"])
    sp.add_argument("--out", help="results directory holding ledger.csv")
    sp.add_argument("--variant", help="e.g. DE/best/1/bin (heatmap only)")
    sp.add_argument("--p", type=int)
    sp.add_argument("--sdis")
    sp.add_argument("--dest", required=True, help="output CSV path")
    sp.add_argument("-v", "--verbose", action="store_true")
    return parser


def _out_dir(args) -> Path:
    return Path(os.environ.get("DEBIAS_OUT") or args.out or DEFAULT_OUT)


def _config_to_dict(cfg: DEConfig) -> dict:
    return {
        "mutation": cfg.mutation.value,
        "crossover": cfg.crossover.value,
        "F": cfg.F,
        "Cr": cfg.Cr,
        "p": cfg.p,
        "sdis": cfg.sdis.value,
        "n": cfg.n,
        "budget": cfg.budget,
    }


def _config_from_dict(d: dict) -> DEConfig:
    return DEConfig(
        Mutation(d["mutation"]), Crossover(d["crossover"]), float(d["F"]),
        None if d["Cr"] is None else float(d["Cr"]), int(d["p"]), SdisKind(d["sdis"]),
        n=int(d["n"]), budget=int(d["budget"]),
    )


def _num(flag: str, text, kind=float):
    try:
        return kind(text)
    except (TypeError, ValueError):
        raise ValidationError(f"{flag}: invalid value {text!r}") from None


def _load_file(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"--config: cannot read {path}: {exc}") from None


def _pick(args, name: str, file: dict, default):
    value = getattr(args, name, None)
    if value is not None:
        return value
    return file.get(name, default)


def _resolve_single(args, file: dict, default_runs: int) -> dict:
    """Settings of a single-configuration command, validated flag by flag."""
    if "config" in file:
        c = file["config"]
        flat = {"mutation": c["mutation"], "crossover": c["crossover"], "f": c["F"], "cr": c["Cr"],
                "p": c["p"], "sdis": c["sdis"], "n": c["n"], "budget": c["budget"]}
        file = {**{k: v for k, v in file.items() if k != "config"}, **flat}
    mutation_text = _pick(args, "mutation", file, None)
    if mutation_text is None:
        raise ValidationError("--mutation is required")
    try:
        mutation, crossover = parse_variant(mutation_text)
    except ValueError as exc:
        raise ValidationError(f"--mutation: {exc}") from None
    cx_text = _pick(args, "crossover", file, None)
    if cx_text is not None:
        try:
            crossover = Crossover.parse(cx_text)
        except ValueError as exc:
            raise ValidationError(f"--crossover: {exc}") from None
    cr_text = _pick(args, "cr", file, None)
    if mutation is Mutation.CURRENT_TO_RAND_1:
        if cr_text is not None:
            raise ValidationError("--cr: current-to-rand/1 has no crossover, so no crossover rate may be given")
        if crossover not in (None, Crossover.NONE):
            raise ValidationError("--crossover: current-to-rand/1 takes no crossover operator")
        crossover, cr = Crossover.NONE, None
    else:
        if crossover in (None, Crossover.NONE):
            if crossover is Crossover.NONE:
                raise ValidationError(f"--crossover: {mutation.value} needs bin or exp")
            crossover = Crossover.BIN
        if cr_text is None:
            raise ValidationError(f"--cr is required for {mutation.value}")
        cr = _num("--cr", cr_text)
    try:
        sdis = SdisKind.parse(str(_pick(args, "sdis", file, "")))
    except ValueError as exc:
        raise ValidationError(f"--sdis: {exc}") from None
    p = _num("--p", _pick(args, "p", file, None), int)
    F = _num("--f", _pick(args, "f", file, None))
    n = _num("--n", _pick(args, "n", file, 30), int)
    budget = _num("--budget", _pick(args, "budget", file, PAPER_BUDGET), int)
    try:
        cfg = DEConfig(mutation, crossover, F, cr, p, sdis, n=n, budget=budget)
    except ValueError as exc:
        msg = str(exc)
        flag = "--p" if "population" in msg else "--f" if msg.startswith("F ") else "--cr" if "Cr" in msg else "--budget" if "budget" in msg else "--n"
        raise ValidationError(f"{flag}: {msg}") from None
    return {
        "command": args.command,
        "config": _config_to_dict(cfg),
        "runs": _num("--runs", _pick(args, "runs", file, default_runs), int),
        "alpha": _num("--alpha", _pick(args, "alpha", file, 0.01)),
        "seed": _num("--seed", _pick(args, "seed", file, 0), int),
        "stride": _num("--stride", _pick(args, "stride", file, DEFAULT_STRIDE), int),
    }


def _resolve_grid(args, file: dict) -> dict:
    if args.paper or args.desk:
        base = GridSpec.paper() if args.paper else GridSpec.desk()
        file = {
            "mutation": [m.value for m in base.mutations],
            "crossover": [c.value for c in base.crossovers],
            "p": list(base.p_values),
            "f": list(base.F_values),
            "cr": list(base.Cr_values),
            "sdis": [s.value for s in base.sdis_list],
            "budget": base.budget,
            "runs": base.runs,
            "include": [_config_to_dict(c) for c in base.include],
            **file,
        }
    muts, cxs = [], []
    for text in _split(_pick(args, "mutation", file, [])) or []:
        try:
            m, c = parse_variant(text)
        except ValueError as exc:
            raise ValidationError(f"--mutation: {exc}") from None
        if m not in muts:
            muts.append(m)
        if c is not None and c is not Crossover.NONE and c not in cxs:
            cxs.append(c)
    try:
        cx_list = _split(_pick(args, "crossover", file, None))
        if cx_list is not None:
            cxs = [Crossover.parse(c) for c in cx_list if c.lower() != "none"]
        sdis = [SdisKind.parse(s) for s in _split(_pick(args, "sdis", file, [s.value for s in SdisKind]))]
    except ValueError as exc:
        raise ValidationError(f"--crossover/--sdis: {exc}") from None
    p_values = [_num("--p", v, int) for v in _split(_pick(args, "p", file, list(PAPER_P_VALUES)))]
    F_values = [_num("--f", v) for v in _split(_pick(args, "f", file, list(PAPER_F_VALUES)))]
    Cr_values = [_num("--cr", v) for v in _split(_pick(args, "cr", file, list(PAPER_CR_VALUES)))]
    if muts and not cxs and any(m is not Mutation.CURRENT_TO_RAND_1 for m in muts):
        cxs = [Crossover.BIN, Crossover.EXP]
    settings = {
        "command": "grid",
        "mutation": [m.value for m in muts],
        "crossover": [c.value for c in cxs],
        "p": p_values,
        "f": F_values,
        "cr": Cr_values,
        "sdis": [s.value for s in sdis],
        "n": _num("--n", _pick(args, "n", file, 30), int),
        "budget": _num("--budget", _pick(args, "budget", file, PAPER_BUDGET), int),
        "runs": _num("--runs", _pick(args, "runs", file, PAPER_RUNS), int),
        "alpha": _num("--alpha", _pick(args, "alpha", file, 0.01)),
        "seed": _num("--seed", _pick(args, "seed", file, 0), int),
        "include": file.get("include", []),
    }
    _grid_spec(settings)  # validates every configuration
    return settings


def _grid_spec(settings: dict) -> GridSpec:
    include = []
    for d in settings["include"]:
        d = {**d, "budget": settings["budget"], "n": settings["n"]}
        include.append(_config_from_dict(d))
    spec = GridSpec(
        mutations=tuple(Mutation(m) for m in settings["mutation"]),
        crossovers=tuple(Crossover(c) for c in settings["crossover"]),
        sdis_list=tuple(SdisKind(s) for s in settings["sdis"]),
        p_values=tuple(settings["p"]),
        F_values=tuple(settings["f"]),
        Cr_values=tuple(settings["cr"]),
        n=settings["n"],
        budget=settings["budget"],
        runs=settings["runs"],
        base_seed=settings["seed"],
        include=tuple(include),
    )
    try:
        spec.configs()
    except ValueError as exc:
        msg = str(exc)
        flag = "--p" if "population" in msg else "--f" if msg.startswith("F ") else "--cr"
        raise ValidationError(f"{flag}: {msg}") from None
    return spec


def _emit(settings: dict, path: str | None) -> None:
    if path:
        with open(path, "w") as fh:
            json.dump(settings, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _append_ledger(out: Path, row: GridRow) -> None:
    ledger = out / "ledger.csv"
    new = not ledger.exists()
    out.mkdir(parents=True, exist_ok=True)
    with ledger.open("a", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=LEDGER_COLUMNS, lineterminator="\n")
        if new:
            w.writeheader()
        w.writerow(row.to_record())


def _cmd_run(args) -> int:
    settings = _resolve_single(args, _load_file(args.config), PAPER_RUNS)
    _emit(settings, args.emit_config)
    cfg = _config_from_dict(settings["config"])
    if args.dry_run:
        print(cfg.config_id)
        print("1 configurations")
        return 0
    points, report = run_config(cfg, settings["runs"], settings["seed"], SBConfig(settings["alpha"]))
    out = _out_dir(args)
    ex.write_report_json(report, out / "reports" / f"{cfg.file_stem}.json")
    ex.write_points_csv(points, out / "points" / f"{cfg.file_stem}.csv")
    _append_ledger(out, GridRow.from_report(cfg, settings["runs"], report))
    print(f"{cfg.config_id}\tSB={report.sb_score:.4f}\t{report.classification.value}")
    return 0


def _cmd_grid(args) -> int:
    settings = _resolve_grid(args, _load_file(args.config))
    _emit(settings, args.emit_config)
    spec = _grid_spec(settings)
    configs = spec.configs()
    if args.dry_run:
        if args.verbose:
            for cfg in configs:
                print(cfg.config_id)
        print(f"{len(configs)} configurations")
        return 0
    result = run_grid(
        spec, jobs=args.jobs, out=_out_dir(args), sb_cfg=SBConfig(settings["alpha"]), save_points=not args.no_points
    )
    counts = {c: sum(r.classification.value == c for r in result.rows) for c in ("none", "mild", "strong")}
    print(f"{len(result)} configurations: " + ", ".join(f"{k} {v}" for k, v in counts.items()))
    return 0


def _cmd_emergence(args) -> int:
    settings = _resolve_single(args, _load_file(args.config), EMERGENCE_RUNS)
    _emit(settings, args.emit_config)
    cfg = _config_from_dict(settings["config"])
    if args.dry_run:
        print(cfg.config_id)
        print("1 configurations")
        return 0
    trace = run_emergence(cfg, settings["runs"], settings["stride"], settings["seed"], SBConfig(settings["alpha"]))
    path = ex.write_trace_csv(trace, _out_dir(args) / "traces" / f"{cfg.file_stem}.csv")
    print(f"{cfg.config_id}\tSB start={trace.sb[0]:.4f} end={trace.sb[-1]:.4f}\t{path}")
    return 0


def _cmd_rank(args) -> int:
    result = load_grid(_out_dir(args))
    if not len(result):
        raise ValidationError(f"--out: no ledger rows in {_out_dir(args)}")
    F = _split(args.f)
    Cr = _split(args.cr)
    p = _split(args.p)
    if args.recommended:
        F = F or list(RECOMMENDED_F)
        Cr = Cr or list(RECOMMENDED_CR)
        p = p or list(RECOMMENDED_P)
    try:
        ranked = rank_configs(
            result,
            sdis=_split(args.sdis),
            F=None if F is None else [float(v) for v in F],
            Cr=None if Cr is None else [float(v) for v in Cr],
            p=None if p is None else [int(v) for v in p],
            mutations=_split(args.mutation),
        )
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    print("configuration\tp\tF\tCr\tscore")
    for row in ranked[: args.top]:
        cr = "-" if row.Cr is None else f"{row.Cr:.3f}"
        print(f"{row.variant}-{row.sdis}\t{row.p}\t{row.F:.3f}\t{cr}\t{row.sb_score:.2f}")
    return 0


def _cmd_export(args) -> int:
    result = load_grid(_out_dir(args))
    if args.kind == "grid":
        ex.write_grid_csv(result, args.dest)
    else:
        if not (args.variant and args.p and args.sdis):
            raise ValidationError("heatmap export needs --variant, --p and --sdis")
        ex.write_heatmap_csv(result, args.variant, args.p, args.sdis, args.dest)
    print(args.dest)
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "grid": _cmd_grid,
    "emergence": _cmd_emergence,
    "rank": _cmd_rank,
    "export": _cmd_export,
}


def parse_and_dispatch(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING)
    try:
        return _COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(parse_and_dispatch())


if __name__ == "__main__":
    main()
