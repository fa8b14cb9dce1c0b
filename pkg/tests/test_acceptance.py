"""Acceptance criteria 1-10. Each test records one pass/fail line, printed in
the terminal summary; the tolerances and time limits are the stated ones."""
import time
from contextlib import contextmanager
from fractions import Fraction

import numpy as np

from fejer import harness, selfcheck
from fejer import hilbert as hb
from fejer.framework import FejerInstance, check_approx_point_bound
from fejer.moduli import NatModulus

from conftest import ACCEPTANCE, CONFIGS


@contextmanager
def criterion(n, limit):
    t0 = time.perf_counter()
    state = {"ok": False, "detail": ""}
    try:
        yield state
    finally:
        dt = time.perf_counter() - t0
        in_time = dt < limit
        ACCEPTANCE[n] = (state["ok"] and in_time,
                         f"{state['detail']} [{dt:.2f} s, limit {limit:g} s]".strip())
    assert state["ok"], state["detail"]
    assert in_time, f"criterion {n} took {dt:.2f} s (limit {limit} s)"


def _rows_ok(rows):
    bad = [r for r in rows if r.status != "pass"]
    return not bad, bad


def test_criterion_01_duality_identities():
    with criterion(1, 5.0) as st:
        rep = selfcheck.duality_suite(np.random.default_rng(101), trials=1000, ps=(2, 3, 4), dims=(2, 5))
        st["ok"] = rep.ok and rep.checked == 3 * 2 * 1000
        st["detail"] = f"{rep.checked} points, {len(rep.violations)} violations"


def test_criterion_02_consistency_moduli():
    with criterion(2, 10.0) as st:
        rep = selfcheck.consistency_suite(np.random.default_rng(102), pairs=10_000, p=4, d=2,
                                          eps_list=(0.1, 0.01, 0.001))
        st["ok"] = rep.ok and rep.checked > 0
        st["detail"] = f"{rep.checked} premise hits, {len(rep.violations)} violations"


def test_criterion_03_lemma_suite():
    with criterion(3, 1.0) as st:
        T = hb.rotation_average(np.pi / 2)
        reps = []
        for a in (0, 1):  # no inertia and the largest admissible inertia (1-alpha)/alpha = 1
            run = hb.HilbertRun(T, hb.InertiaSchedule.constant(a), [1.0, 0.0]).extend(500)
            steps = 249  # the checks read x^0 .. x^{2*steps+1} = x^499
            reps += [hb.check_fejer_exact(run, steps, 1e-12), hb.check_summed_residual(run, steps, 1e-9),
                     hb.check_odd_step(run, steps, 1e-12)]
        st["ok"] = all(r.ok and r.checked for r in reps)
        st["detail"] = "; ".join(f"{r.name}: {len(r.violations)} violations" for r in reps[:3])


def test_criterion_04_approx_point_bound():
    with criterion(4, 1.0) as st:
        T = hb.rotation_average()
        run = hb.HilbertRun(T, hb.InertiaSchedule.constant(0), [1.0, 0.0]).extend(500)
        formula = [2 * max(1, (k + 1) ** 2) for k in range(31)]
        Phi = NatModulus(lambda k: hb.phi_bound_hilbert(Fraction(1, 2), 1, k), monotone=True)
        inst = FejerInstance(seq=run, dist=None, family=hb.hilbert_family(T), Phi=Phi)
        rep = check_approx_point_bound(inst, range(31))
        st["ok"] = rep.ok and rep.checked == 31 and [Phi(k) for k in range(31)] == formula
        st["detail"] = f"k=0..30, largest witness n={max(rep.witnesses.values())}"


def test_criterion_05_metastability():
    with criterion(5, 30.0) as st:
        cfg = harness.load_config(CONFIGS / "hilbert_rotation.json")
        cfg.update(checks=["metastability"], k_list=[0, 1, 2], g_list=["const:0", "linear:1,0", "linear:2,10"])
        _, rows = harness.run_experiment(cfg)
        ok, bad = _rows_ok(rows)
        st["ok"] = ok and len(rows) == 9
        st["detail"] = f"{len(rows)} (k,g) pairs, N <= Psi in all" if ok else f"not passing: {bad}"


def test_criterion_06_rate_of_convergence():
    with criterion(6, 5.0) as st:
        cfg = harness.load_config(CONFIGS / "hilbert_rotation.json")
        cfg.update(checks=["rate"], delta_list=[0.1, 0.01], window=1000)
        _, rows = harness.run_experiment(cfg)
        ok, bad = _rows_ok(rows)
        st["ok"] = ok and [r.bound for r in rows] == ["6728", "642978"]
        st["detail"] = "mu(0.1)=%s, mu(0.01)=%s, window 1000" % tuple(r.bound for r in rows)


def test_criterion_07_banach_pipeline():
    with criterion(7, 20.0) as st:
        cfg = harness.load_config(CONFIGS / "banach_cj_p4.json")
        cfg.update(checks=["resolvent_residual", "fejer", "kt", "liminf", "crosscheck_p2"], n_max=500,
                   samples=1000, eps_list=[0.1, 0.01])
        cfg["tolerances"].update(resolvent_residual=1e-10, fejer=1e-10, crosscheck_p2=1e-12)
        _, rows = harness.run_experiment(cfg)
        ok, bad = _rows_ok(rows)
        st["ok"] = ok and len(rows) == 6
        st["detail"] = ", ".join(f"{r.check} {r.status}" for r in rows)


def test_criterion_08_rate_oracle():
    with criterion(8, 10.0) as st:
        rep = selfcheck.rate_oracle_suite(np.random.default_rng(108), instances=50)
        st["ok"] = rep.ok and rep.checked == 200
        st["detail"] = f"50 instances x 4 variants, {len(rep.violations)} mismatches"


def test_criterion_09_conversions():
    with criterion(9, 10.0) as st:
        reps = selfcheck.conversion_suite(np.random.default_rng(109), instances=100)
        st["ok"] = len(reps) == 5 and all(r.ok and r.checked for r in reps.values())
        st["detail"] = ", ".join(f"{k}: {len(r.violations)}" for k, r in reps.items())


def test_criterion_10_determinism(tmp_path):
    with criterion(10, 100.0) as st:
        paths = sorted(CONFIGS.glob("*.json"))
        diffs = []
        for i in (0, 1):
            for p in paths:
                exp, rows = harness.run_experiment(harness.load_config(p))
                harness.emit_csv(exp, rows, tmp_path / str(i))
        files = sorted(f.name for f in (tmp_path / "0").iterdir())
        for name in files:
            if (tmp_path / "0" / name).read_bytes() != (tmp_path / "1" / name).read_bytes():
                diffs.append(name)
        st["ok"] = not diffs and len(files) == 3 * len(paths)
        st["detail"] = f"{len(paths)} configs, {len(files)} files, differing: {diffs or 'none'}"
