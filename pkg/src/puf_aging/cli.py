"""``puf-aging`` command line.

Exit codes: 0 success (or verdict "new"), 1 error, 2 usage error,
3 verdict "recycled".
"""
from __future__ import annotations

import argparse
import datetime as _dt
import math
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from . import config as runconfig
from . import dataio, published, streams
from .agingmodel import (PUBLISHED_AF, StressProfile, acceleration_factor, age, celsius, new_device,
                         readout_set)
from .asr import SelectionConfig, characterize, detect_device, enroll
from .bitcore import Role
from .detection import (DEFAULT_TARGETS, DetectionPlan, ErrorModel, InfeasibleError, minimal_n,
                        table_csv, table_text)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_RECYCLED = 3

PRE_RT = "pre_rt.srpf"
PRE_HT = "pre_ht.srpf"
PRE_RT_HOLDOUT = "pre_rt_holdout.srpf"
POST_RT = "post_rt.srpf"
MANIFEST = "manifest.json"
RUN_CONFIG = "run.ini"


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _resolve_config(args) -> runconfig.RunConfig:
    cfg = runconfig.load(args.config) if getattr(args, "config", None) else runconfig.RunConfig()
    overrides = {}
    for flag, key in (("seed", "seed"), ("cells", "cell_count"), ("repeats", "repeats"),
                      ("age_hours", "stress_hours"), ("output", "output"), ("device_id", "device_id"),
                      ("workers", "workers")):
        v = getattr(args, flag, None)
        if v is not None:
            overrides[key] = v
    if getattr(args, "temps", None) is not None:
        overrides["corners_c"] = tuple(args.temps)
    if getattr(args, "n", None) is not None:
        overrides["selection"] = replace(cfg.selection, n_reevals=args.n)
    return replace(cfg, **overrides)


# -- simulate -----------------------------------------------------------------

def simulate_run(cfg: runconfig.RunConfig, out: Path) -> dataio.Manifest:
    """Pre-aging RT/HT/hold-out readouts, stress, post-aging RT readouts."""
    out.mkdir(parents=True, exist_ok=True)
    dev = new_device(cfg.seed, cfg.model, cfg.cell_count)
    sel = cfg.selection
    files = []

    def emit(name, rs):
        dataio.write_readouts(rs, cfg.device_id, out / name)
        files.append(out / name)

    def key(tag):
        return streams.stream_key(cfg.seed, tag)

    emit(PRE_RT, readout_set(dev, sel.rt, cfg.repeats, key("pre_rt"), cfg.workers))
    emit(PRE_HT, readout_set(dev, sel.ht, cfg.repeats, key("pre_ht"), cfg.workers))
    emit(PRE_RT_HOLDOUT, readout_set(dev, sel.rt, cfg.repeats, key("pre_rt_holdout"), cfg.workers))
    for t_c in cfg.corners_c:
        emit(f"pre_c{t_c:g}.srpf", readout_set(dev, celsius(t_c), cfg.repeats, key("corner"), cfg.workers))
    aged = age(dev, cfg.stress_hours, cfg.stress)
    emit(POST_RT, readout_set(aged, sel.rt, cfg.repeats, key("post_rt"), cfg.workers, role=Role.POST_AGING))
    runconfig.save(cfg, out / RUN_CONFIG)
    manifest = dataio.Manifest(tuple(dataio.manifest_entry(f, out) for f in files))
    dataio.write_manifest(manifest, out / MANIFEST)
    return manifest


def cmd_simulate(args) -> int:
    cfg = _resolve_config(args)
    out = Path(cfg.output)
    manifest = simulate_run(cfg, out)
    af = cfg.stress.effective_factor()
    print(f"device {cfg.device_id}: {cfg.cell_count} cells, seed {cfg.seed}")
    print(f"stress {cfg.stress_hours:g} h x AF {af:.4g} = {cfg.stress_hours * af / 24:.2f} effective days")
    for e in manifest.entries:
        print(f"  {e.path}  {e.role.name.lower()}  {e.temperature:.2f} K  {e.checksum:016x}")
    return EXIT_OK


# -- enroll / characterize ------------------------------------------------------

def _timestamp(text: str) -> _dt.datetime:
    if text == "now":
        return _dt.datetime.now(_dt.timezone.utc)
    try:
        return _dt.datetime.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an ISO-8601 timestamp: {text!r}") from None


def cmd_enroll(args) -> int:
    rt, dev_id = dataio.read_readouts(args.rt_file)
    ht, _ = dataio.read_readouts(args.ht_file)
    n = args.n
    for name, rs in (("RT", rt), ("HT", ht)):
        if n > len(rs):
            raise ValueError(f"N={n} exceeds the {len(rs)} {name} readouts available")
    holdout = dataio.read_readouts(args.holdout)[0] if args.holdout else None
    sel = SelectionConfig(n, rt.temperature, ht.temperature)
    profile = enroll(args.device_id or dev_id, rt.head(n), ht.head(n), sel, holdout, args.created_at)
    dataio.write_profile(profile, args.output)
    print(f"asrs: {len(profile.asrs)}")
    print(f"p_intra_est: {profile.p_intra_est:.6f} ({profile.p_intra_source})")
    return EXIT_OK


def cmd_characterize(args) -> int:
    profile = dataio.read_profile(args.profile)
    post, _ = dataio.read_readouts(args.post_file)
    profile = characterize(profile, post)
    dataio.write_profile(profile, args.output or args.profile)
    print(f"p_intra_est: {profile.p_intra_est:.6f}")
    print(f"p_inter_est: {profile.p_inter_est:.6f}")
    return EXIT_OK


# -- plan ---------------------------------------------------------------------

def _plan_cells(models, targets, ceiling) -> list[tuple[str, ErrorModel, float, DetectionPlan | None, str]]:
    cells = []
    for label, model in models:
        for t in targets:
            try:
                cells.append((label, model, t, minimal_n(model, t, ceiling=ceiling, label=label), ""))
            except (InfeasibleError, ValueError) as e:
                cells.append((label, model, t, None, str(e)))
    return cells


def _emit_plans(cells, fmt: str) -> None:
    plans = [c[3] for c in cells if c[3] is not None]
    print(table_csv(plans) if fmt == "csv" else table_text(plans), end="")
    for label, model, t, plan, err in cells:
        if plan is None:
            print(f"infeasible: {label or '-'} target {t:g}: {err}", file=sys.stderr)


def _table1_models():
    return [(f"N={n}", ErrorModel(pi, pe)) for n, (pi, pe, _) in published.TABLE1.items()]


def cmd_plan(args) -> int:
    targets = args.targets or list(DEFAULT_TARGETS)
    if args.paper_table_1:
        models = _table1_models()
    else:
        if args.p_intra is None or args.p_inter is None:
            raise ValueError("give --p-intra and --p-inter, or --paper-table-1")
        model = ErrorModel(args.p_intra, args.p_inter)
        model.require_separable()
        models = [("", model)]
    cells = _plan_cells(models, targets, args.ceiling)
    _emit_plans(cells, args.format)
    return EXIT_OK if all(c[3] is not None for c in cells) else EXIT_ERROR


# -- detect -------------------------------------------------------------------

def cmd_detect(args) -> int:
    profile = dataio.read_profile(args.profile)
    probes, _ = dataio.read_readouts(args.probe_file)
    if not 0 <= args.index < len(probes):
        raise ValueError(f"--index {args.index} out of range for {len(probes)} readouts")
    plan = minimal_n(profile.error_model(), args.target_eer)
    report = detect_device(profile, probes[args.index], plan)
    print(f"verdict: {report.label}")
    print(f"hd: {report.distance}")
    print(f"n: {report.n}")
    print(f"n_eer: {report.n_eer}")
    return EXIT_RECYCLED if report.recycled else EXIT_OK


# -- af -----------------------------------------------------------------------

def cmd_af(args) -> int:
    profile = StressProfile(args.v_stress, args.v_nominal, celsius(args.t_stress), celsius(args.t_nominal),
                            args.alpha, args.m, args.eaa, args.k, args.af_override)
    literal = acceleration_factor(profile)
    print(f"af_computed: {literal:.6g}")
    published_condition = replace(profile, af_override=None) == StressProfile()
    if published_condition and not math.isclose(literal, PUBLISHED_AF, rel_tol=5e-3):
        print(f"note: computed AF differs from the published {PUBLISHED_AF}")
    if args.af_override is not None:
        print(f"af_override: {args.af_override:g} (used)")
    if args.stress_hours is not None:
        hours = args.stress_hours * profile.effective_factor()
        print(f"effective: {hours:.2f} h = {hours / 24:.2f} days")
    return EXIT_OK


# -- tables -------------------------------------------------------------------

def _published_table(table: int, ceiling: int) -> tuple[list, list[str]]:
    if table == 1:
        models = _table1_models()
        published_cells = [cells for _, _, cells in published.TABLE1.values()]
    else:
        models = [(f"{d:g}d", ErrorModel(published.TABLE2_P_INTRA, published.table2_p_inter(d)))
                  for d in published.TABLE2]
        published_cells = [cells for _, _, cells in published.TABLE2.values()]
    cells = _plan_cells(models, published.TARGETS, ceiling)
    notes = []
    flat = [c for row in published_cells for c in row]
    for (label, _, t, plan, _), (n, n_eer, lfar, lfrr) in zip(cells, flat):
        if plan is None:
            notes.append(f"FAIL {label} {t:g}: infeasible")
            continue
        ok = (plan.n == n and plan.n_eer == n_eer and abs(plan.log10_far - lfar) <= 0.02
              and abs(plan.log10_frr - lfrr) <= 0.02)
        notes.append(f"{'PASS' if ok else 'FAIL'} {label} {t:g}: n={plan.n} (published {n}), "
                     f"n_eer={plan.n_eer} (published {n_eer})")
    return cells, notes


def simulate_tables(cfg: runconfig.RunConfig, table: int) -> list[tuple[str, ErrorModel, int]]:
    """Run the pipeline on a simulated device; returns measured
    ``(label, p_intra_est, p_inter_est, asr_count)`` rows."""
    dev = new_device(cfg.seed, cfg.model, cfg.cell_count)
    sel = cfg.selection
    key = lambda tag: streams.stream_key(cfg.seed, tag)  # noqa: E731
    n_max = max(9, sel.n_reevals)
    rt = readout_set(dev, sel.rt, n_max, key("pre_rt"), cfg.workers)
    ht = readout_set(dev, sel.ht, n_max, key("pre_ht"), cfg.workers)
    holdout = readout_set(dev, sel.rt, cfg.repeats, key("pre_rt_holdout"), cfg.workers)
    rows = []
    if table == 1:
        aged = age(dev, cfg.stress_hours, cfg.stress)
        post = readout_set(aged, sel.rt, cfg.repeats, key("post_rt"), cfg.workers, role=Role.POST_AGING)
        for n in range(3, 10):
            s = replace(sel, n_reevals=n)
            prof = characterize(enroll(cfg.device_id, rt.head(n), ht.head(n), s, holdout,
                                       _dt.datetime.fromisoformat(cfg.created_at)), post)
            rows.append((f"N={n}", prof, len(prof.asrs)))
    else:
        s = replace(sel, n_reevals=9)
        prof = enroll(cfg.device_id, rt.head(9), ht.head(9), s, holdout,
                      _dt.datetime.fromisoformat(cfg.created_at))
        for days, (hours, _, _) in published.TABLE2.items():
            aged = age(dev, hours, cfg.stress)
            post = readout_set(aged, sel.rt, cfg.repeats, key("post_rt"), cfg.workers, role=Role.POST_AGING)
            p = characterize(prof, post)
            rows.append((f"{hours}h", p, len(p.asrs)))
    out = []
    for label, prof, count in rows:
        out.append((label, prof.p_intra_est, prof.p_inter_est, count))
    return out


def cmd_tables(args) -> int:
    if args.simulate:
        cfg = _resolve_config(args)
        rows = simulate_tables(cfg, args.table)
        print("label,asr_count,p_intra_est,p_inter_est,diff")
        models = []
        for label, pi, pe, count in rows:
            print(f"{label},{count},{pi:.6f},{pe:.6f},{pe - pi:.6f}")
            try:
                models.append((label, ErrorModel(pi, pe)))
            except ValueError as e:
                print(f"unplannable: {label}: {e}", file=sys.stderr)
        models = [(lab, m) for lab, m in models if m.separable]
        cells = _plan_cells(models, published.TARGETS, args.ceiling)
        _emit_plans(cells, args.format)
        return EXIT_OK
    cells, notes = _published_table(args.table, args.ceiling)
    _emit_plans(cells, args.format)
    for line in notes:
        print(line)
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="puf-aging", description="Recycled-device detection with SRAM PUF aging.")
    sub = p.add_subparsers(dest="command", required=True)

    def run_flags(sp):
        sp.add_argument("--config", help="INI run configuration; flags override its values")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--cells", type=int, help="number of SRAM cells")
        sp.add_argument("--repeats", type=int, help="readouts per condition")
        sp.add_argument("--age-hours", type=float, help="accelerated stress hours")
        sp.add_argument("--device-id")
        sp.add_argument("--workers", type=int, help="threads for power-up evaluation")

    sp = sub.add_parser("simulate", help="simulate readouts before and after accelerated aging")
    run_flags(sp)
    sp.add_argument("--temps", type=_floats, help="extra characterisation corners, Celsius, comma separated")
    sp.add_argument("-o", "--output", help="output directory")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("enroll", help="select aging-sensitive cells and write a profile")
    sp.add_argument("rt_file")
    sp.add_argument("ht_file")
    sp.add_argument("-N", dest="n", type=int, default=9, help="re-evaluations per temperature")
    sp.add_argument("--holdout", help="extra pre-aging RT readouts for the p_intra estimate")
    sp.add_argument("--device-id")
    sp.add_argument("--created-at", type=_timestamp, default=_timestamp(runconfig.DEFAULT_CREATED_AT),
                    help="ISO-8601 timestamp or 'now' (default: fixed, for reproducible output)")
    sp.add_argument("-o", "--output", required=True)
    sp.set_defaults(func=cmd_enroll)

    sp = sub.add_parser("characterize", help="estimate p_inter from post-aging readouts")
    sp.add_argument("profile")
    sp.add_argument("post_file")
    sp.add_argument("-o", "--output", help="defaults to rewriting the profile in place")
    sp.set_defaults(func=cmd_characterize)

    sp = sub.add_parser("plan", help="minimal response length for target error rates")
    sp.add_argument("--p-intra", type=float)
    sp.add_argument("--p-inter", type=float)
    sp.add_argument("--targets", type=_floats)
    sp.add_argument("--paper-table-1", action="store_true", help="plan the seven published estimator pairs")
    sp.add_argument("--format", choices=("text", "csv"), default="text")
    sp.add_argument("--ceiling", type=int, default=10**6)
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("detect", help="classify a probe readout as new or recycled")
    sp.add_argument("profile")
    sp.add_argument("probe_file")
    sp.add_argument("--index", type=int, default=0, help="readout within the probe file")
    sp.add_argument("--target-eer", type=float, default=1e-3)
    sp.set_defaults(func=cmd_detect)

    sp = sub.add_parser("af", help="acceleration factor of a stress condition")
    sp.add_argument("--t-stress", type=float, default=80.0, help="Celsius")
    sp.add_argument("--t-nominal", type=float, default=25.0, help="Celsius")
    sp.add_argument("--v-stress", type=float, default=3250.0, help="millivolts")
    sp.add_argument("--v-nominal", type=float, default=3250.0, help="millivolts")
    sp.add_argument("--alpha", type=float, default=3.5)
    sp.add_argument("--m", type=float, default=0.25)
    sp.add_argument("--eaa", type=float, default=-0.02, help="eV")
    sp.add_argument("--k", type=float, default=8.62e-5, help="eV/K")
    sp.add_argument("--af-override", type=float)
    sp.add_argument("--stress-hours", type=float)
    sp.set_defaults(func=cmd_af)

    sp = sub.add_parser("tables", help="recompute the published planning tables")
    sp.add_argument("--table", type=int, choices=(1, 2), required=True)
    mode = sp.add_mutually_exclusive_group(required=True)
    mode.add_argument("--paper-params", action="store_true", help="use the published estimators")
    mode.add_argument("--simulate", action="store_true", help="measure estimators on a simulated device")
    run_flags(sp)
    sp.add_argument("--format", choices=("text", "csv"), default="text")
    sp.add_argument("--ceiling", type=int, default=10**6)
    sp.set_defaults(func=cmd_tables)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
