"""Acceptance gate.

Each test runs one criterion at its stated tolerance, prints a single
PASS/FAIL line (collected again in the terminal summary) and then asserts.
Run just this file with ``pytest tests/test_acceptance.py -v``.
"""

import math
import time

import numpy as np
import pytest

from conftest import report
from ngpfbmp.baselines import exhaustive_map, exhaustive_mmse
from ngpfbmp.bench import format_csv, parse_config, run_experiment
from ngpfbmp.datagen import SignalModel, add_noise, gen_matrix, gen_signal, trial_seeds
from ngpfbmp.estimator import map_support, recover
from ngpfbmp.image import haar_forward, haar_inverse, multiscale_recover, synthetic_image
from ngpfbmp.model import ProblemInstance, blue_estimate, metric_direct, nmse
from ngpfbmp.recursive import candidate_metric, commit, empty_state, precompute
from ngpfbmp.search import SearchConfig, selected_sequence

pytestmark = pytest.mark.slow


def draw_trial(master, t, M, N, p, snr_db, model=SignalModel()):
    phi = gen_matrix(M, N, trial_seeds(master, t, 0))
    for attempt in range(1000):
        x = gen_signal(N, p, model, trial_seeds(master, t, 1, attempt))
        if x.support:
            break
    y, s2 = add_noise(phi @ x.values, snr_db, trial_seeds(master, t, 2))
    return phi, x, y, s2


def batched_direct_metrics(phi, y, S, candidates, sigma2, p):
    """nu(S + {i}) for every candidate, each from its own QR of [Phi_S, phi_i]."""
    M, N = phi.shape
    k = len(S)
    blocks = np.empty((len(candidates), M, k + 1), dtype=np.complex128)
    blocks[:, :, :k] = phi[:, S][None]
    blocks[:, :, k] = phi[:, candidates].T
    Q, _ = np.linalg.qr(blocks)
    xi = np.sum(np.abs(np.einsum("cmk,m->ck", Q.conj(), y)) ** 2, axis=1)
    y_energy = np.vdot(y, y).real
    prior = (k + 1) * math.log(p) + (N - k - 1) * math.log1p(-p)
    return (xi - y_energy) / sigma2 + prior


def test_criterion_1_recursive_exactness():
    M, N, P, n_inst = 32, 64, 16, 1000
    worst_nu = worst_e = 0.0
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    for t in range(n_inst):
        phi = gen_matrix(M, N, rng.integers(1 << 62))
        x = np.zeros(N, dtype=complex)
        x[rng.choice(N, 4, replace=False)] = 3 + rng.standard_normal(4)
        y, s2 = add_noise(phi @ x, 15.0, rng.integers(1 << 62))
        inst = ProblemInstance(phi, y, s2, 0.05)
        cache = precompute(phi, y)
        state = empty_state(cache, capacity=P)
        for _ in range(P):
            cands = [i for i in range(N) if i not in state.order]
            fast = np.array([candidate_metric(state, cache, i, s2, 0.05) for i in cands])
            direct = batched_direct_metrics(phi, y, list(state.order), cands, s2, 0.05)
            worst_nu = max(worst_nu, float(np.max(np.abs(fast - direct) / np.abs(direct))))
            if t < 10:
                # the package's own direct path, on a subset
                for i, v in zip(cands, fast):
                    ref = metric_direct(inst, sorted(state.order + [i]))
                    worst_nu = max(worst_nu, abs(v - ref) / abs(ref))
            i_star = int(np.argmax(state.gains()))
            commit(state, cache, i_star)
            ref_e = blue_estimate(phi, y, state.support)
            worst_e = max(worst_e, float(np.linalg.norm(state.coefficients() - ref_e) / np.linalg.norm(ref_e)))
    elapsed = time.perf_counter() - t0
    ok = worst_nu <= 1e-8 and worst_e <= 1e-8 and elapsed <= 60
    report(1, ok, f"{n_inst} instances, max rel err nu {worst_nu:.2e}, e_y {worst_e:.2e}, {elapsed:.1f} s")
    assert ok


def test_criterion_2_oracle_equivalence():
    M, N, p, snr = 8, 12, 0.15, 25.0
    agree = 0
    greedy_pairs, exhaustive_pairs, matched_pairs = [], [], []
    for t in range(200):
        phi, x, y, s2 = draw_trial(202, t, M, N, p, snr)
        inst = ProblemInstance(phi, y, s2, p)
        res = recover(phi, y, p=p, sigma2=s2)
        x_ex, log_post = exhaustive_mmse(inst, 12)
        # same argmax and tie rule as exhaustive_map, without enumerating twice
        agree += res.s_map == map_support(list(log_post.items()))
        greedy_pairs.append((x.values, res.x_ammse))
        exhaustive_pairs.append((x.values, x_ex))
        # diagnostic only: enumeration limited to the search depth
        depth = max(len(s) for s in res.dominant.supports)
        x_lim, _ = exhaustive_mmse(inst, depth)
        matched_pairs.append((x.values, x_lim))
    # spot check that the shortcut matches the public oracle
    assert map_support(list(log_post.items())) == exhaustive_map(inst, 12)
    rate = agree / 200
    g, e, lim = nmse(greedy_pairs), nmse(exhaustive_pairs), nmse(matched_pairs)
    ok = rate >= 0.85 and abs(g - e) <= 1.0
    report(2, ok, f"MAP agreement {rate:.3f} (need >= 0.85); NMSE greedy {g:.2f} dB vs exhaustive "
                  f"{e:.2f} dB (need |diff| <= 1); exhaustive up to search depth {lim:.2f} dB")
    assert ok


def test_criterion_3_selection_invariance():
    cfg = SearchConfig(P=10, D=5)
    identical = 0
    for t in range(100):
        phi, x, y, s2 = draw_trial(303, t, 64, 128, 0.05, 15.0)
        a = selected_sequence(ProblemInstance(phi, y, s2, 0.05), cfg)
        b = selected_sequence(ProblemInstance(phi, y, 7 * s2, 0.05 / 3), cfg)
        identical += a == b
    ok = identical == 100
    report(3, ok, f"{identical}/100 index sequences identical under (7 sigma2, p/3)")
    assert ok


def _nmse_by(rows, method):
    return {r["snr_db"]: r["nmse_db"] for r in rows if r["method"] == method}


def test_criterion_4_snr_trend():
    t0 = time.perf_counter()
    cfg = parse_config(None, {"experiment": "snr_sweep", "M": 256, "N": 1024, "p": [0.005],
                              "snr_db": [0.0, 10.0, 20.0, 30.0], "trials": 100, "seed": 404})
    rows = run_experiment(cfg)
    elapsed = time.perf_counter() - t0
    ours, omp = _nmse_by(rows, "ngpfbmp"), _nmse_by(rows, "omp")
    snrs = sorted(ours)
    monotone = all(ours[b] <= ours[a] + 1.0 for a, b in zip(snrs, snrs[1:]))
    at20 = ours[20.0] <= -20.0
    margins = {s: omp[s] - ours[s] for s in snrs if s >= 10}
    beats = all(m >= 2.0 for m in margins.values())
    ok = monotone and at20 and beats and elapsed <= 1800
    curve = ", ".join(f"{s:g} dB: {ours[s]:.2f}/{omp[s]:.2f}" for s in snrs)
    report(4, ok, f"nGpFBMP/OMP NMSE [{curve}]; monotone={monotone}, <=-20 at 20 dB={at20}, "
                  f"margin over OMP >= 2 dB={beats}; {elapsed:.0f} s")
    assert ok


def test_criterion_5_nmse_anchor():
    anchors = {"gaussian": -31.1, "uniform": -30.0}
    achieved = {}
    for name in anchors:
        cfg = parse_config(None, {"M": 256, "N": 1024, "p": [0.005], "snr_db": [20.0], "trials": 200,
                                  "signal_model": name, "seed": 505})
        achieved[name] = _nmse_by(run_experiment(cfg), "ngpfbmp")[20.0]
    in_band = {n: abs(achieved[n] - anchors[n]) <= 3.0 for n in anchors}
    detail = "; ".join(f"{n} {achieved[n]:.2f} dB vs {anchors[n]} +/- 3" for n in anchors)
    if not all(in_band.values()):
        # locate the SNR at which each missing anchor is met
        for n in anchors:
            if in_band[n]:
                continue
            for snr in np.arange(22.0, 42.0, 2.0):
                cfg = parse_config(None, {"M": 256, "N": 1024, "p": [0.005], "snr_db": [float(snr)],
                                          "trials": 50, "signal_model": n, "seed": 505})
                v = _nmse_by(run_experiment(cfg), "ngpfbmp")[float(snr)]
                if abs(v - anchors[n]) <= 3.0:
                    detail += f"; {n} anchor met at {snr:g} dB ({v:.2f} dB)"
                    break
    ok = all(in_band.values())
    report(5, ok, detail)
    assert ok


def test_criterion_6_bootstrap_accuracy():
    M, N, p = 256, 1024, 0.01
    good, iters = 0, []
    for t in range(200):
        phi, x, y, s2 = draw_trial(606, t, M, N, p, 20.0)
        res = recover(phi, y, p_init=0.003)
        good += 0.5 <= res.p_hat / p <= 2.0 and 0.5 <= res.sigma2_hat / s2 <= 2.0
        iters.append(res.iterations)
    rate = good / 200
    med = float(np.median(iters))
    ok = rate >= 0.9 and med <= 5
    report(6, ok, f"both estimates within 2x in {rate:.3f} of trials (need >= 0.90); median iterations {med:g}")
    assert ok


def test_criterion_7_complexity_scaling():
    cfg = SearchConfig(P=10, D=1)
    means = {}
    for N in (512, 1024):
        problems = [draw_trial(707, t, 128, N, 0.01, 20.0) for t in range(20)]
        for phi, _, y, s2 in problems[:3]:
            recover(phi, y, p=0.01, sigma2=s2, config=cfg)  # warm-up
        rounds = []
        for _ in range(5):
            t0 = time.perf_counter()
            for phi, _, y, s2 in problems:
                recover(phi, y, p=0.01, sigma2=s2, config=cfg)
            rounds.append((time.perf_counter() - t0) / len(problems))
        means[N] = min(rounds)
    ratio = means[1024] / means[512]
    ok = 1.5 <= ratio <= 3.0
    report(7, ok, f"recover time {means[512] * 1e3:.2f} ms (N=512) -> {means[1024] * 1e3:.2f} ms (N=1024), "
                  f"ratio {ratio:.2f} (need 1.5 to 3.0)")
    assert ok


def test_criterion_8_image_pipeline():
    rng = np.random.default_rng(808)
    worst_rt = worst_energy = 0.0
    for _ in range(20):
        img = rng.uniform(0, 255, (32, 32))
        bands = haar_forward(img)
        worst_rt = max(worst_rt, float(np.max(np.abs(haar_inverse(*bands) - img))))
        e = np.sum(img**2)
        worst_energy = max(worst_energy, abs(sum(np.sum(b**2) for b in bands) - e) / e)
    scores = []
    for seed in range(5):
        res = multiscale_recover(synthetic_image(32, seed), M_per_band=64, snr_db=25.0, seed=seed)
        scores.append(res.image_nmse_db)
    ok = worst_rt <= 1e-12 and worst_energy <= 1e-10 and max(scores) <= -15.0
    report(8, ok, f"round trip {worst_rt:.1e}, energy {worst_energy:.1e}, image NMSE over 5 seeds "
                  f"[{', '.join(f'{s:.1f}' for s in scores)}] dB (need <= -15)")
    assert ok


def test_criterion_9_determinism(tmp_path):
    from ngpfbmp.cli import main

    base = {"M": 64, "N": 128, "p": [0.02], "snr_db": [10.0, 25.0], "trials": 8, "seed": 909}
    first = format_csv(run_experiment(parse_config(None, base)))
    second = format_csv(run_experiment(parse_config(None, base)))
    parallel = format_csv(run_experiment(parse_config(None, dict(base, workers=3))))
    outs = []
    for name in ("a.csv", "b.csv"):
        path = tmp_path / name
        main(["bench", "robust", "--M", "64", "--N", "128", "--p", "0.02", "--trials", "4",
              "--seed", "9", "--output", str(path)])
        outs.append(path.read_bytes())
    ok = first == second == parallel and outs[0] == outs[1]
    report(9, ok, "reruns with the same master seed give byte-identical CSV (serial, parallel and CLI)")
    assert ok
