"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v -s`` or as a script,
``python3 tests/test_acceptance.py``.  Every line states the measured
quantity, the threshold and the runtime.
"""
import io
import sys
import time

import numpy as np
import pytest

from asyncwr import analysis as an
from asyncwr.cli import ExperimentConfig, run_experiment
from asyncwr.interp import TimeGrid, Waveform
from asyncwr.model import MATERIAL_PAIRS, HeatProblemConfig, MonolithicSystem, _p1_1d, _p1_2d, splitting
from asyncwr.relaxopt import relax_table
from asyncwr.rma import Trace
from asyncwr.timeint import lmm_solve_monolithic, trapezoidal
from asyncwr.wr import WRConfig, WRProblem, compute_reference, run

PAIRS = ("air-steel", "air-water", "water-steel")
SHAPES = ("jacobi", "gs-dn", "gs-nd")


def problem(pair, dx, N):
    cfg = HeatProblemConfig(dx=dx, materials=pair, Nv=N, Nw=N)
    return WRProblem.from_config(cfg, trapezoidal()), relax_table(cfg.materials, cfg.Tf / N, dx)


def line(n, passed, detail, seconds, limit):
    timing_ok = seconds < limit
    ok = passed and timing_ok
    status = "PASS" if ok else "FAIL"
    return ok, f"[{status}] criterion {n}: {detail} (runtime {seconds:.2f} s, limit {limit:g} s)"


# ---------------------------------------------------------------------------

def criterion_1():
    expected = {"air-steel": 0.037, "air-water": 0.059, "water-steel": 0.528}
    t0 = time.perf_counter()
    got = {p: relax_table(MATERIAL_PAIRS[p], 5.0, 1 / 513).rho_jacobi for p in PAIRS}
    dt = time.perf_counter() - t0
    passed = all(abs(got[p] - expected[p]) <= 1e-3 for p in PAIRS)
    detail = "rho_jacobi at dx=1/513, dt=5: " + ", ".join(
        f"{p} {got[p]:.5f} (expected {expected[p]:.3f} +- 0.001)" for p in PAIRS)
    return line(1, passed, detail, dt, 1.0)


def criterion_2():
    t0 = time.perf_counter()
    p, tab = problem("air-steel", 1 / 16, 20)
    mono = lmm_solve_monolithic(p.system, p.method, p.grid_v).values[:, p.partition.gamma_w]
    worst, parts, ok = 0.0, [], True
    runs = [("jacobi", "lockstep", 0), ("gs-dn", "lockstep", 0), ("gs-nd", "lockstep", 0)]
    runs += [("async", "seeded", s) for s in range(5)] + [("async", "lockstep", 0),
                                                         ("async", "p0-ahead", 0), ("async", "p1-ahead", 0)]
    for method, sched, seed in runs:
        res = run(p, WRConfig(method, tab, 1e-12, 50, sched, seed))
        err = float(np.max(np.abs(res.w.values[:, p.sub_w.gamma_local] - mono)))
        ok = ok and res.converged and err <= 1e-10
        worst = max(worst, err)
        if method != "async" or seed == 0:
            parts.append(f"{method}/{sched} {err:.1e}")
    dt = time.perf_counter() - t0
    detail = (f"max |uG - uG_mono| over all WR runs = {worst:.2e} <= 1e-10 "
              f"(air-steel, dx=1/16, N=20, tol=1e-12; {', '.join(parts)}; async seeded seeds 0-4)")
    return line(2, ok, detail, dt, 10.0)


def _same(a, b):
    return (a.iterations == b.iterations and np.array_equal(a.v.values, b.v.values)
            and np.array_equal(a.w.values, b.w.values)
            and [r.update_norm for r in a.records] == [r.update_norm for r in b.records])


def criterion_3():
    t0 = time.perf_counter()
    ok, notes = True, []
    for pair in PAIRS:
        p, tab = problem(pair, 1 / 16, 10)
        jac = run(p, WRConfig("jacobi", tab))
        gsdn = run(p, WRConfig("gs-dn", tab))
        lock = run(p, WRConfig("async", tab, schedule="lockstep"))
        ahead = run(p, WRConfig("async", tab, schedule="p0-ahead"))
        a, b = _same(lock, jac), _same(ahead, gsdn)
        ok = ok and a and b
        notes.append(f"{pair}: lockstep==jacobi {a}, p0-ahead==gs-dn {b}")
    dt = time.perf_counter() - t0
    return line(3, ok, "bitwise degeneration at dx=1/16, N=10; " + "; ".join(notes), dt, 10.0)


def criterion_4():
    t0 = time.perf_counter()
    ok, notes, info = True, [], []
    eps_floor = np.sqrt(np.finfo(float).eps)
    for pair in PAIRS:
        p, tab = problem(pair, 1 / 64, 50)
        dt_ = p.grid_v.dt
        w = an.interface_weights(p.system, p.partition, p.method, dt_)
        norms = {}
        for shape in SHAPES:
            bp = an.blocks_from_splitting(splitting(p.system, p.partition, shape, tab), p.method, dt_, 50)
            rep = an.theorem1_check(bp, weights=w)
            plain = an.theorem1_check(bp)
            ok = ok and rep.passed
            norms[shape] = rep.max_norm
            info.append(f"{pair}/{shape} plain 2-norm {plain.max_norm:.3g}")
        mono = lmm_solve_monolithic(p.system, p.method, p.grid_v).values
        floor = eps_floor * np.linalg.norm(w * mono[1])
        runs = []
        for method, sched in (("jacobi", "lockstep"), ("gs-dn", "lockstep"), ("gs-nd", "lockstep"),
                              ("async", "seeded")):
            res = run(p, WRConfig(method, tab, 1e-10, 50, sched), keep_history=True)
            bound = an.max_realized_block_norm(p.system, p.partition, p.method, dt_, res.sweeps, w)
            e = an.step_error_norms(res.history, mono, 1, w)
            obs = an.observed_contraction(e, floor)
            ok = ok and obs <= bound + 1e-8
            runs.append(f"{method} {obs:.4g}<={bound:.4g}" if obs > 0 else f"{method} below floor at k=1")
        notes.append(f"{pair}: block norms " + "/".join(f"{norms[s]:.3g}" for s in SHAPES)
                     + "; contraction " + ", ".join(runs))
    dt = time.perf_counter() - t0
    detail = ("weighted diagonal-block norms < 1 and first-step contraction <= max realized norm + 1e-8 "
              "(dx=1/64, N=50, optimal relaxation): " + "; ".join(notes)
              + " | info, unweighted: " + ", ".join(info))
    return line(4, ok, detail, dt, 30.0)


def criterion_5():
    t0 = time.perf_counter()
    worst, ok, notes = 0.0, True, []
    for pair in PAIRS:
        p, tab = problem(pair, 1 / 16, 20)
        mono = lmm_solve_monolithic(p.system, p.method, p.grid_v).values
        e0 = np.tile(p.system.u0, (21, 1)) - mono
        e0[0] = 0.0
        scale = np.linalg.norm(e0, axis=1).max()
        for method, sched in (("jacobi", "lockstep"), ("gs-dn", "lockstep"), ("gs-nd", "lockstep"),
                              ("async", "seeded")):
            res = run(p, WRConfig(method, tab, 1e-10, 50, sched, seed=1), keep_history=True)
            blocks = [an.blocks_from_sweep(p.system, p.partition, p.method, p.grid_v.dt, lg)
                      for lg in res.sweeps]
            _, norms = an.error_recursion(blocks, e0)
            direct = np.linalg.norm(np.array([h - mono for h in res.history]), axis=2)
            rel = float(np.max(np.abs(norms[1:] - direct)) / scale)
            worst = max(worst, rel)
            ok = ok and rel <= 1e-12
            if method == "async":
                shapes = "".join(sorted(set("".join(r.shape_log for r in res.records))))
                notes.append(f"{pair} async shapes {{{shapes}}}")
    dt = time.perf_counter() - t0
    detail = (f"max_k,n | ||e_n^k|| recursion - direct | / max_n ||e_n^0|| = {worst:.2e} <= 1e-12 "
              f"(dx=1/16, N=20, 3 pairs x 4 methods; {', '.join(notes)})")
    return line(5, ok, detail, dt, 10.0)


def criterion_6():
    t0 = time.perf_counter()
    ok, notes = True, []
    for pair in PAIRS:
        p, tab = problem(pair, 1 / 64, 50)
        ref = compute_reference(p, tab)
        counts, results = {}, {}
        for method, sched in (("jacobi", "lockstep"), ("gs-dn", "lockstep"), ("gs-nd", "lockstep"),
                              ("async", "seeded")):
            res = run(p, WRConfig(method, tab, 1e-10, 50, sched), reference=ref)
            counts[method], results[method] = res.iterations, res
        gs = min(counts["gs-dn"], counts["gs-nd"])
        order_ok = gs <= counts["async"] <= counts["jacobi"] and all(r.converged for r in results.values())
        # average log slope of the Jacobi interface error from the initial guess
        e_init = p.interface_norm(p.uG0 - ref) / p.interface_norm(p.uG0)
        errs = [r.interface_error for r in results["jacobi"].records]
        K = len(errs)
        slope = (np.log(errs[-1]) - np.log(e_init)) / K
        predicted = np.log(tab.rho_jacobi)
        ratio = slope / predicted
        slope_ok = 0.5 <= ratio <= 2.0
        ok = ok and order_ok and slope_ok
        notes.append(f"{pair}: GS {counts['gs-dn']}/{counts['gs-nd']} <= async {counts['async']} <= "
                     f"Jacobi {counts['jacobi']} {order_ok}; slope {slope:.4f} vs ln(rho) {predicted:.4f} "
                     f"ratio {ratio:.3f}")
    dt = time.perf_counter() - t0
    return line(6, ok, "dx=1/64, N=50, tol=1e-10: " + "; ".join(notes), dt, 60.0)


def criterion_7():
    t0 = time.perf_counter()
    cfg = ExperimentConfig(materials="water-steel", dx=1 / 16, steps=10, methods=["async"],
                           schedule="seeded", seed=11)
    outs, traces, finals = [], [], []
    for _ in range(2):
        buf = io.StringIO()
        _, results = run_experiment(cfg, stream=buf)
        outs.append([r.split(",")[:4] for r in buf.getvalue().splitlines()])
        res = results["async"]
        traces.append(res.trace.dumps())
        finals.append(res)
    csv_same = outs[0] == outs[1]
    trace_same = traces[0] == traces[1]
    p, tab = problem("water-steel", 1 / 16, 10)
    replayed = run(p, WRConfig("async", tab, schedule="seeded", replay=Trace.loads(traces[0])))
    replay_same = (np.array_equal(replayed.v.values, finals[0].v.values)
                   and np.array_equal(replayed.w.values, finals[0].w.values))
    dt = time.perf_counter() - t0
    ok = csv_same and trace_same and replay_same
    detail = (f"seeded CSV identical (wall_time excluded) {csv_same}; traces identical {trace_same} "
              f"({len(finals[0].trace.events)} events); replay bitwise {replay_same}")
    return line(7, ok, detail, dt, 10.0)


def criterion_8():
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    worst = 0.0
    # P1 matrices are exact on affine functions: interior stiffness rows vanish
    # and the mass matrix integrates them exactly
    for mat_name in ("air", "water", "steel"):
        mat = MATERIAL_PAIRS["air-water"][0] if mat_name == "air" else MATERIAL_PAIRS["water-steel"][
            0 if mat_name == "water" else 1]
        for n in (4, 16):
            h = 1.0 / n
            M, K = _p1_1d(n, h, mat)
            x = np.linspace(0.0, 1.0, n + 1)
            a, b = rng.normal(size=2)
            u = a + b * x
            scale = (abs(a) + abs(b)) * (mat.lam / h + mat.alpha)
            worst = max(worst, np.max(np.abs((K @ u)[1:-1])) / scale,
                        abs(np.ones(n + 1) @ (M @ u) - mat.alpha * (a + b / 2)) / scale)
            M2, K2 = _p1_2d(n, h, mat)
            X, Y = np.meshgrid(x, x, indexing="ij")
            a, b, c = rng.normal(size=3)
            u2 = (a + b * X + c * Y).ravel()
            inner = (np.arange(1, n)[:, None] * (n + 1) + np.arange(1, n)[None, :]).ravel()
            scale = (abs(a) + abs(b) + abs(c)) * (mat.lam + mat.alpha)
            worst = max(worst, np.max(np.abs((K2 @ u2)[inner])) / scale,
                        abs(np.ones(u2.size) @ (M2 @ u2) - mat.alpha * (a + b / 2 + c / 2)) / scale)
    # linear time interpolation is exact on affine waveforms
    g = TimeGrid(1.0e4, 50)
    wf = Waveform(g, 3.0 - 2e-3 * g.times)
    ts = rng.uniform(0, 1.0e4, 200)
    worst = max(worst, np.max(np.abs(np.array([wf.eval(t)[0] for t in ts]) - (3.0 - 2e-3 * ts))) / 23.0)
    affine_ok = worst <= 1e-13
    # trapezoidal rule order on u' = -u
    import scipy.sparse as sp
    decay = MonolithicSystem(sp.identity(1), sp.identity(1), np.array([1.0]), 1.0)
    Ns = np.array([20, 40, 80, 160])
    errs = [abs(lmm_solve_monolithic(decay, trapezoidal(), TimeGrid(1.0, N)).values[-1, 0] - np.exp(-1.0))
            for N in Ns]
    order = float(np.polyfit(np.log(1.0 / Ns), np.log(errs), 1)[0])
    order_ok = 1.8 <= order <= 2.2
    # splitting identity
    split_worst = 0.0
    for pair in PAIRS:
        p, tab = problem(pair, 1 / 16, 10)
        B, A = p.system.B.toarray(), p.system.A.toarray()
        for shape in SHAPES:
            s = splitting(p.system, p.partition, shape, tab)
            split_worst = max(split_worst, np.max(np.abs(s.MB - s.NB - B)) / np.abs(B).max(),
                              np.max(np.abs(s.MA - s.NA - A)) / np.abs(A).max())
    split_ok = split_worst <= 4 * np.finfo(float).eps
    dt = time.perf_counter() - t0
    detail = (f"P1/interpolation affine residual {worst:.1e} <= 1e-13 (scaled); trapezoidal order "
              f"{order:.3f} in [1.8, 2.2]; max |MB-NB-B|, |MA-NA-A| relative {split_worst:.1e} "
              f"<= 4 eps")
    return line(8, affine_ok and order_ok and split_ok, detail, dt, 60.0)


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8]


@pytest.mark.parametrize("criterion", CRITERIA, ids=[f"criterion_{i}" for i in range(1, 9)])
def test_acceptance(criterion, capsys):
    ok, text = criterion()
    with capsys.disabled():
        print("\n" + text)
    assert ok, text


if __name__ == "__main__":
    results = [c() for c in CRITERIA]
    for _, text in results:
        print(text)
    sys.exit(0 if all(ok for ok, _ in results) else 1)
