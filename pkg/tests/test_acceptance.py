"""Acceptance suite: one test per criterion, each printing a single
``CRITERION k PASS|FAIL`` line (collected again in the terminal summary)."""
import datetime as dt
import math
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings

from conftest import STRESS, build_pipeline
from puf_aging import dataio
from puf_aging.agingmodel import ModelConfig, age, calibrate, measure_p_intra, new_device, power_up_bits
from puf_aging.asr import SelectionConfig, characterize, detect_device, enroll, select_asrs
from puf_aging.bitcore import ReadoutSet
from puf_aging.cli import main
from puf_aging.detection import ErrorModel, log_cdf, log_sf, minimal_n, plan_table
from puf_aging.published import TABLE1, TABLE2, TARGETS, TABLE2_P_INTRA, table2_p_inter
from test_dataio import GOLDEN, GOLDEN_BITS, profiles, readout_sets, rs_equal

EPOCH = dt.datetime(1970, 1, 1, tzinfo=dt.timezone.utc)
LOG_TOL = 0.02


def compare_cells(models, published_rows):
    """Plan every (model, target) cell; return (matches, mismatch notes, elapsed)."""
    t0 = time.perf_counter()
    plans = plan_table(models, TARGETS)
    elapsed = time.perf_counter() - t0
    expected = [c for row in published_rows for c in row]
    hits, misses = 0, []
    for plan, (n, n_eer, lfar, lfrr) in zip(plans, expected):
        ok = (plan.n == n and plan.n_eer == n_eer and abs(plan.log10_far - lfar) <= LOG_TOL
              and abs(plan.log10_frr - lfrr) <= LOG_TOL)
        hits += ok
        if not ok:
            misses.append(f"{plan.label}@{plan.target_eer:g}: {plan.n}/{plan.n_eer} vs {n}/{n_eer}")
    return hits, misses, elapsed


def test_criterion_01_table1_exact(criterion):
    models = [(f"N={N}", ErrorModel(pi, pe)) for N, (pi, pe, _) in TABLE1.items()]
    hits, misses, elapsed = compare_cells(models, [cells for _, _, cells in TABLE1.values()])
    ok = hits == 21 and elapsed < 10
    criterion(ok, f"Table-1 reproduction {hits}/21 cells in {elapsed:.2f} s"
                  + (f"; mismatches: {'; '.join(misses)}" if misses else ""))
    assert ok


# Estimator pairs inside the +-0.00005 box around the 4-digit printed values
# that reproduce the cells the printed centres miss (found by grid search,
# step 2.5e-6, nearest-first).
ROUNDING_WITNESSES = {
    (4, 1e-2): (0.1755, 0.228375),
    (4, 1e-4): (0.1754925, 0.2284),
    (5, 1e-2): (0.1497875, 0.2087),
    (5, 1e-3): (0.1497675, 0.2087),
    (5, 1e-4): (0.14978, 0.2087),
    (6, 1e-3): (0.1306925, 0.1932),
    (8, 1e-4): (0.103005, 0.1673),
}


def test_table1_misses_are_exactly_the_witnessed_cells():
    missed = {(N, t) for N, (pi, pe, cells) in TABLE1.items() for t, c in zip(TARGETS, cells)
              if (lambda p: (p.n, p.n_eer))(minimal_n(ErrorModel(pi, pe), t)) != c[:2]}
    assert missed == set(ROUNDING_WITNESSES)


@pytest.mark.parametrize("cell", sorted(ROUNDING_WITNESSES))
def test_table1_miss_reproducible_within_print_rounding(cell):
    """Diagnostic for criterion 1: each missed cell is hit exactly by an
    estimator pair that prints to the same 4 digits."""
    N, target = cell
    p_intra, p_inter, cells = TABLE1[N]
    w_intra, w_inter = ROUNDING_WITNESSES[cell]
    assert abs(w_intra - p_intra) <= 5e-5 + 1e-12 and abs(w_inter - p_inter) <= 5e-5 + 1e-12
    n, n_eer, lfar, lfrr = cells[TARGETS.index(target)]
    plan = minimal_n(ErrorModel(w_intra, w_inter), target)
    assert (plan.n, plan.n_eer) == (n, n_eer)
    assert abs(plan.log10_far - lfar) <= LOG_TOL and abs(plan.log10_frr - lfrr) <= LOG_TOL


def test_criterion_02_table2(criterion):
    models = [(f"{d:g}d", ErrorModel(TABLE2_P_INTRA, table2_p_inter(d))) for d in TABLE2]
    plans = plan_table(models, TARGETS)
    rows = {}
    for i, days in enumerate(TABLE2):
        ok = all(p.n == c[0] and p.n_eer == c[1] and abs(p.log10_far - c[2]) <= LOG_TOL
                 and abs(p.log10_frr - c[3]) <= LOG_TOL
                 for p, c in zip(plans[3 * i: 3 * i + 3], TABLE2[days][2]))
        rows[days] = (ok, [(p.n, p.n_eer) for p in plans[3 * i: 3 * i + 3]])
    main_ok = rows[22.1][0]
    report = "; ".join(f"{d:g}d {'match' if ok else 'differ'} {cells}" for d, (ok, cells) in rows.items())
    criterion(main_ok, f"22.1-day row {'matches' if main_ok else 'differs'} (asserted); report-only rows: {report}")
    assert rows[22.1][1] == [(551, 68), (974, 120), (1406, 173)]


def test_criterion_03_under_thousand(criterion):
    plan = minimal_n(ErrorModel(0.0926, 0.1578), 1e-3)
    ok = plan.n == 974 and plan.n < 1000 and plan.far <= 1e-3 and plan.frr <= 1e-3
    criterion(ok, f"n={plan.n} (<1000), n_eer={plan.n_eer}, far={plan.far:.3g}, frr={plan.frr:.3g}")
    assert ok


def test_criterion_04_oracle_equivalence(criterion):
    worst = Fraction(0)
    for p in (0.1, 0.25, 0.5, 0.9):
        pf = Fraction(p)
        for n in range(1, 65):
            pmf = [math.comb(n, i) * pf**i * (1 - pf) ** (n - i) for i in range(n + 1)]
            cdf = Fraction(0)
            for k in range(n + 1):
                cdf += pmf[k]
                worst = max(worst, abs(Fraction(math.exp(log_cdf(n, p, k))) / cdf - 1))
                if k < n:
                    worst = max(worst, abs(Fraction(math.exp(log_sf(n, p, k))) / (1 - cdf) - 1))
    ok = worst <= Fraction(1, 10**12)
    criterion(ok, f"max relative error vs rational summation {float(worst):.2e} (bound 1e-12)")
    assert ok


def test_criterion_05_selection_soundness(criterion):
    rng = np.random.default_rng(5)
    cells, n = 10_000, 5
    # per-cell biases spread from stable to coin-flip so every branch occurs
    bias_rt = rng.choice([0.0, 0.02, 0.5, 0.98, 1.0], cells)
    bias_ht = rng.choice([0.0, 0.02, 0.5, 0.98, 1.0], cells)
    rt = (rng.random((n, cells)) < bias_rt).astype(np.uint8)
    ht = (rng.random((n, cells)) < bias_ht).astype(np.uint8)
    rs_rt, rs_ht = ReadoutSet.from_matrix(rt, 298.15), ReadoutSet.from_matrix(ht, 353.15)
    selected = {a.address: a.reference_bit for a in select_asrs(rs_rt, rs_ht, SelectionConfig(n))}
    bad = 0
    for c in range(cells):
        col_rt, col_ht = rt[:, c].tolist(), ht[:, c].tolist()
        keep = len(set(col_rt)) == 1 and len(set(col_ht)) == 1 and col_rt[0] != col_ht[0]
        if keep != (c in selected) or (keep and selected[c] != col_rt[0]):
            bad += 1
    ok = bad == 0 and 0 < len(selected) < cells
    criterion(ok, f"{len(selected)} selected of {cells}; {bad} cells disagree with the re-check")
    assert ok


def test_criterion_06_calibration(criterion):
    t0 = time.perf_counter()
    cfg = calibrate(ModelConfig(), 0.06)
    dev = new_device(606, cfg, 2**16)
    p_intra = measure_p_intra(dev, 8, seed=1)
    aged = age(dev, 48, STRESS)
    rt = cfg.reference_temperature
    ref = power_up_bits(dev, rt, 0)
    p_inter = float(np.mean([np.mean(power_up_bits(aged, rt, s) != ref) for s in range(1, 9)]))
    p_intra_ref = float(np.mean([np.mean(power_up_bits(dev, rt, s) != ref) for s in range(101, 109)]))
    gap = p_inter - p_intra_ref
    elapsed = time.perf_counter() - t0
    ok = abs(p_intra - 0.06) <= 0.01 and abs(gap - 0.01) <= 0.01 and elapsed < 60
    criterion(ok, f"p_intra={p_intra:.4f} (0.06+-0.01), aging gap after {aged.effective_age / 24:.2f} days "
                  f"={gap:.4f} (0.01+-0.01), {elapsed:.1f} s")
    assert ok


def test_criterion_07_trends(criterion, pipeline):
    rt, ht = pipeline.rt, pipeline.ht
    counts, p_intra = [], []
    for n in range(3, 10):
        prof = enroll("sim", rt.head(n), ht.head(n), SelectionConfig(n), pipeline.holdout, EPOCH)
        counts.append(len(prof.asrs))
        p_intra.append(prof.p_intra_est)
    gaps = []
    for hours in (18, 48, 108):
        pl = build_pipeline(stress_hours=hours)
        prof = characterize(enroll("sim", pl.rt, pl.ht, pl.selection, pl.holdout, EPOCH), pl.post)
        gaps.append(prof.p_inter_est - prof.p_intra_est)
    count_ok = all(a >= b for a, b in zip(counts, counts[1:]))
    intra_ok = all(a > b for a, b in zip(p_intra, p_intra[1:]))
    gap_ok = gaps[0] < gaps[1] < gaps[2]
    ok = count_ok and intra_ok and gap_ok
    criterion(ok, f"ASR counts N=3..9 {counts}; p_intra {[round(p, 4) for p in p_intra]}; "
                  f"gap at 18/48/108 h {[round(g, 4) for g in gaps]}")
    assert ok


def test_criterion_08_verdict_quality(criterion, pipeline):
    profile = enroll("sim", pipeline.rt, pipeline.ht, pipeline.selection, pipeline.holdout, EPOCH)
    plan = minimal_n(ErrorModel(0.0926, 0.1578), 1e-3)
    assert (plan.n, plan.n_eer) == (974, 120)
    cells = profile.addresses[: plan.n]
    rt = pipeline.selection.rt
    new = sum(not detect_device(profile, power_up_bits(pipeline.fresh, rt, 10_000 + i, cells), plan).recycled
              for i in range(1000))
    recycled = sum(detect_device(profile, power_up_bits(pipeline.aged, rt, 20_000 + i, cells), plan).recycled
                   for i in range(1000))
    ok = new >= 999 and recycled >= 999
    criterion(ok, f"plan n={plan.n} n_eer={plan.n_eer} over {len(profile.asrs)} ASRs: "
                  f"fresh {new}/1000 new, aged ({pipeline.aged.effective_age / 24:.2f} days) {recycled}/1000 recycled")
    assert ok


def test_criterion_09_determinism(criterion, tmp_path, capsys):
    outputs = []
    for w in (1, 4):
        d = tmp_path / f"w{w}"
        d.mkdir()
        assert main(["simulate", "--cells", "65536", "--seed", "77", "--workers", str(w), "-o", str(d / "run")]) == 0
        assert main(["enroll", str(d / "run" / "pre_rt.srpf"), str(d / "run" / "pre_ht.srpf"), "--holdout",
                     str(d / "run" / "pre_rt_holdout.srpf"), "-N", "5", "-o", str(d / "p.json")]) == 0
        assert main(["characterize", str(d / "p.json"), str(d / "run" / "post_rt.srpf")]) == 0
        capsys.readouterr()
        assert main(["tables", "--table", "1", "--simulate", "--cells", "65536", "--seed", "77",
                     "--workers", str(w), "--format", "csv"]) == 0
        table = capsys.readouterr().out.encode()
        files = {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}
        files["run/run.ini"] = files["run/run.ini"].replace((d / "run").as_posix().encode(), b"OUT")
        outputs.append((files, table))
    (fa, ta), (fb, tb) = outputs
    differing = sorted(k for k in fa if fa[k] != fb.get(k)) + ([] if ta == tb else ["tables"])
    ok = not differing and fa.keys() == fb.keys()
    criterion(ok, f"{len(fa)} files + simulated table compared across 1 vs 4 workers; differing: {differing or 'none'}")
    assert ok


_roundtrip_failures = {"readouts": 0, "profiles": 0}


@settings(max_examples=1000, suppress_health_check=[HealthCheck.too_slow], deadline=None)
@given(readout_sets())
def _readout_roundtrip(rs):
    back, dev = dataio.decode_readouts(dataio.encode_readouts(rs, "dev"))
    if not (rs_equal(rs, back) and dev == "dev"):
        _roundtrip_failures["readouts"] += 1
    assert rs_equal(rs, back)


@settings(max_examples=1000, suppress_health_check=[HealthCheck.too_slow], deadline=None)
@given(profiles())
def _profile_roundtrip(p):
    back = dataio.loads_profile(dataio.dumps_profile(p))
    if back != p:
        _roundtrip_failures["profiles"] += 1
    assert back == p


def test_criterion_10_roundtrips(criterion):
    errors = []
    for fn in (_readout_roundtrip, _profile_roundtrip):
        try:
            fn()
        except Exception as e:  # noqa: BLE001 - reported through the verdict line
            errors.append(f"{fn.__name__}: {type(e).__name__}")
    rs, dev = dataio.read_readouts(GOLDEN / "readouts_v1.srpf")
    golden_ok = dev == "golden-01" and rs.matrix().tolist() == GOLDEN_BITS and rs.effective_age == 529.44
    prof = dataio.read_profile(GOLDEN / "profile_v1.json")
    golden_ok &= dataio.dumps_profile(prof).encode() == Path(GOLDEN / "profile_v1.json").read_bytes()
    ok = not errors and golden_ok
    criterion(ok, f"1000 readout-set and 1000 profile round-trips {'exact' if not errors else errors}; "
                  f"golden files {'parse identically' if golden_ok else 'differ'}")
    assert ok
