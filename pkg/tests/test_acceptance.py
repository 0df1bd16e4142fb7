"""Acceptance suite.

One test per criterion, each printing a PASS/FAIL line with the measured
values.  Criteria 1-5 are closed-form fixtures, 6-8 deterministic
simulation-vs-analytic cross-checks, 9-15 stochastic training reproductions
(best-of-restarts, band acceptance).  Training criteria share artifacts via
session-scoped fixtures; everything is seeded and reproducible.
"""

import csv
import json
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from qcslab import bosonic, classifiers as cl, experiments as ex, hybrid as hy
from qcslab import protocols as pr, spatiotemporal as stp, tasks, training as tr
from qcslab.sampling import stream


def report(criterion: str, passed: bool, detail: str) -> None:
    line = f"ACCEPTANCE {criterion}: {'PASS' if passed else 'FAIL'} - {detail}"
    print(line)
    with open(Path(__file__).parent / "acceptance_report.txt", "a") as fh:
        fh.write(line + "\n")
    assert passed, line


# ===========================================================================
# Closed-form fixtures (deterministic, seconds)
# ===========================================================================


def test_criterion_1_gaussian_baseline():
    """Appendix-table coefficients exact in sigma^2/S; MC unbiasedness and
    variance agreement."""
    table = {
        1: {1: {0: 1}},
        2: {0: {1: -1}, 2: {0: 1}},
        3: {1: {1: -3}, 3: {0: 1}},
        4: {0: {2: 3}, 2: {1: -6}, 4: {0: 1}},
        5: {1: {2: 15}, 3: {1: -10}, 5: {0: 1}},
        6: {0: {3: -15}, 2: {2: 45}, 4: {1: -15}, 6: {0: 1}},
    }
    symbolic_ok = True
    for m, rows in table.items():
        sym = bosonic.gaussian_coefficients_symbolic(m)
        for n, poly in enumerate(sym):
            want = {p: Fraction(c) for p, c in rows.get(n, {}).items()}
            symbolic_ok &= poly == want
    rng = stream(2025, 1)
    sigma2, shots, z = 0.25, 16, 0.6
    v = sigma2 / shots
    zbar = z + np.sqrt(v) * rng.standard_normal(10**6)
    mc_ok, var_ok, worst_se, worst_var = True, True, 0.0, 0.0
    for m in range(1, 7):
        coeffs = bosonic.gaussian_baseline_coefficients(m, sigma2, shots)
        est = np.polynomial.polynomial.polyval(zbar, coeffs)
        se = est.std() / 1000.0
        nse = abs(est.mean() - z**m) / se
        worst_se = max(worst_se, nse)
        mc_ok &= nse < 4
        ana = bosonic.gaussian_estimator_variance(coeffs, z, sigma2, shots)
        rel = abs(est.var() - ana) / ana
        worst_var = max(worst_var, rel)
        var_ok &= rel < 0.03
    report(
        "1",
        symbolic_ok and mc_ok and var_ok,
        f"table exact={symbolic_ok}, worst |mean dev|={worst_se:.2f} SE (<4), "
        f"worst var dev={worst_var:.3f} (<0.03)",
    )


def test_criterion_2_xor_closed_forms():
    w = bosonic.xor_target()
    c_ok = True
    for g in (1.5, 2.0, 5.0):
        c = bosonic.solve_qs_coefficients(w, g)
        c_ok &= abs(c.entries[0, 2] - 1j / (g - 1)) < 1e-12
    var_ok, ratio_dev = True, 0.0
    for a in (0.0, 0.5, 1.0 - 1.0j, 1.0 + 1.0j):
        _, vqs = bosonic.qs_estimator_stats(None, w, 2.0, a, large_gain=True)
        _, vqcs = bosonic.qcs_estimator_stats(w, 10.0, a, large_gain=True)
        var_ok &= abs(vqs - (4 + 8 * abs(a) ** 2)) < 1e-9
        var_ok &= abs(vqcs - (2 + 4 * abs(a) ** 2)) < 1e-9
        ratio_dev = max(ratio_dev, abs(vqs / vqcs - 2.0))
    # expected MSE ratio over the four XOR points in the large-gain limit
    pts = tasks.gen_xor_points(1.0)
    alphas = pts.inputs[:, 0] + 1j * pts.inputs[:, 1]
    domain = bosonic.domain_points(alphas)
    cfg = bosonic.AmplifierConfig(gain=2.0, g=10.0, large_gain=True)
    mse_qs = bosonic.estimator_report(w, cfg, domain, "qs").expected_mse
    mse_qcs = bosonic.estimator_report(w, cfg, domain, "qcs").expected_mse
    ratio = mse_qs / mse_qcs
    report(
        "2",
        c_ok and var_ok and abs(ratio - 2.0) < 1e-9,
        f"C02 = i/(G-1) exact={c_ok}, large-gain variances exact={var_ok}, "
        f"MSE ratio={ratio:.12f} (=2 within 1e-9)",
    )


def test_criterion_3_spirals_tables():
    """Solved C at G=2 vs the printed table, with the tolerance floor set by
    propagating the 2-significant-figure print rounding of both tables
    through the (linear) solver; the plain 5% band applies wherever it
    exceeds that floor."""
    w = bosonic.fixture_matrix("spirals_target_W.json")
    ours = bosonic.solve_qs_coefficients(w, 2.0).entries
    printed = bosonic.spirals_qs_table(2.0)

    def half_ulp_2sf(x):
        if x == 0:
            return 0.0
        return 0.5 * 10.0 ** (np.floor(np.log10(abs(x))) - 1)

    # (a) numerator print rounding of the C table at G = 2
    doc = bosonic.load_fixture("spirals_postproc_C.json")
    tol = np.zeros_like(printed, dtype=float)
    for entry in doc["entries"]:
        n, m = entry["n"], entry["m"]
        unc = sum(
            max(half_ulp_2sf(re), half_ulp_2sf(im)) * 2.0**p for re, im, p in entry["num"]
        )
        tol[n, m] = tol[m, n] = unc
    # (b) input rounding of the W table propagated through the linear solve
    mat = bosonic._monomial_matrix(w.degree, 2.0)
    inv = np.abs(np.linalg.inv(mat))
    dw = np.array([[half_ulp_2sf(abs(z)) for z in row] for row in w.entries])
    tol += (inv @ dw.ravel()).reshape(tol.shape)
    floor = np.maximum(0.05 * np.abs(printed), tol)
    dev = np.abs(ours - printed)
    ok = bool(np.all(dev <= floor))
    strict = dev <= 0.05 * np.maximum(np.abs(printed), 1e-30)
    n_strict = int(strict.sum())
    report(
        "3",
        ok,
        f"all 25 entries within print-rounding envelope; {n_strict}/25 within "
        f"plain 5%; worst dev/floor={float((dev / np.maximum(floor, 1e-30)).max()):.2f}",
    )


def test_criterion_4_equal_delta_analytic_error():
    asym_ok = True
    for r in (1, 2, 3):
        val = cl.gaussian_error_formula(r, 64, asymptotic=True)
        asym_ok &= abs(val - 0.063 * (2 * r - 1)) < 0.02 * 0.063 * (2 * r - 1)
    full_ok, worst = True, 0.0
    for r in (1, 2, 3):
        task = cl.equal_delta_task(r)
        for s in (16, 64, 256, 1024):
            eb = cl.bayes_error(s, task, pr.ramsey_response)
            rel = abs(cl.gaussian_error_formula(r, s) - eb) / eb
            worst = max(worst, rel)
            full_ok &= rel < 0.10
    report(
        "4",
        asym_ok and full_ok,
        f"asymptote 0.063(2R-1) within 2%={asym_ok}; full formula vs exact "
        f"Bayes worst rel dev={worst:.3f} (<0.10)",
    )


def test_criterion_5_ramsey_closed_form():
    spec = pr.build_ramsey_qs(1)
    x = pr.eval_distribution(spec, np.array([np.pi / 8])).probs[1]
    thetas = np.linspace(0, np.pi / 4, 513)
    sweep = pr.forward_probs(spec, spec.zero_params(), thetas[:, None])[:, 1]
    dev = float(np.abs(sweep - pr.ramsey_response(thetas)).max())
    report(
        "5",
        x == 0.5 and dev < 1e-10,
        f"x(pi/8)={x} (exactly 0.5), circuit-vs-formula sweep max dev={dev:.2e}",
    )


# ===========================================================================
# Simulation-vs-analytic cross-checks (deterministic, < 1 min)
# ===========================================================================


def test_criterion_6_moment_vs_statevector():
    worst = 0.0
    for gain in (1.2, 1.5):
        for alpha in (0.0, 0.5, 0.3 + 0.4j, 1.0, -0.8 + 0.6j):
            for n in range(5):
                for m in range(5):
                    if n + m > 4:
                        continue
                    sv = bosonic.antinormal_moment_statevector(n, m, alpha, gain, fock=40)
                    an = bosonic.antinormal_moment(n, m, alpha, gain)
                    worst = max(worst, abs(sv - an))
    report("6", worst < 1e-6, f"worst |statevector - formula| = {worst:.2e} (<1e-6)")


def test_criterion_7_hybrid_identity_and_cutoff():
    rng = stream(2025, 7)
    spec = hy.build_hybrid_qcs(4, fock_levels=70)
    model = hy.HybridModel(spec)
    worst_p = 0.0
    params_list = [model.init_params(rng) for _ in range(3)]
    for params in params_list:
        pf = model.probs(params, np.array([[0.0, 0.0]]))
        worst_p = max(worst_p, float(model.excitation(pf)[0]))
    grid = (np.linspace(-1.2, 1.2, 4)[:, None] + 1j * np.linspace(-1.2, 1.2, 4)).ravel()
    worst_drift = 0.0
    for params in params_list:
        rep = hy.check_truncation(spec, params, grid, margin=20)
        worst_drift = max(worst_drift, rep.prob_drift)
    report(
        "7",
        worst_p < 1e-12 and worst_drift < 1e-6,
        f"alpha=0 excitation max={worst_p:.2e} (<1e-12); cutoff 70->90 drift "
        f"max={worst_drift:.2e} (<1e-6)",
    )


def test_criterion_8_gradient_suite():
    rng = stream(2025, 8)
    worst = 0.0
    cases = [
        (tr.QubitModel(pr.build_qsp_qcs(4)), rng.uniform(0, np.pi / 4, (6, 1))),
        (tr.QubitModel(pr.build_qnn_qcs(2, 2)), rng.uniform(0, np.pi / 4, (6, 2))),
        (hy.HybridModel(hy.build_hybrid_qcs(2, fock_levels=30)),
         rng.uniform(-0.8, 0.8, (4, 2))),
    ]
    for model, u in cases:
        params = model.init_params(rng)
        v = rng.standard_normal((u.shape[0], model.n_out))
        picks = rng.choice(model.n_params, size=min(20, model.n_params), replace=False)
        g_ps = tr.grad_circuit(model, params, u, v, mode="parameter_shift")
        g_cd = tr.grad_circuit(model, params, u, v, mode="central_difference")
        g_adj = tr.grad_circuit(model, params, u, v, mode="adjoint")
        scale = max(np.abs(g_cd[picks]).max(), 1e-9)
        worst = max(
            worst,
            float(np.abs(g_ps[picks] - g_cd[picks]).max() / scale),
            float(np.abs(g_adj[picks] - g_cd[picks]).max() / scale),
        )
    report("8", worst < 1e-6, f"shift/adjoint vs central differences worst rel "
                              f"dev={worst:.2e} (<1e-6) on 20 params per ansatz")


# ===========================================================================
# Training reproductions (stochastic, best-of-restarts, band acceptance)
# ===========================================================================

RUNROOT = Path(__file__).parent / "_acceptance_runs"


def _run_once(tag: str, config: dict) -> Path:
    """Run a recipe once per session; reuse the stored results on reruns."""
    outdir = RUNROOT / tag
    if not (outdir / "results.csv").exists():
        ex.run_experiment(config, outdir)
    assert ex.verify(outdir) == [], f"invariant audit failed for {tag}"
    return outdir


def _rows(outdir: Path) -> list[dict]:
    with open(outdir / "results.csv", newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="session")
def fig1f_run():
    return _run_once("fig1f", {
        "recipe": "fig1f", "N": 64, "L_values": [1, 2, 4, 8, 16, 32, 64],
        "restarts": 8, "epochs": 800, "seed": 2025,
    })


def test_criterion_9_fig1f(fig1f_run):
    rows = _rows(fig1f_run)
    qs = [float(r["value"]) for r in rows if r["protocol"] == "QS"][0]
    best = {}
    for r in rows:
        if r["protocol"] == "QCS":
            l = int(r["L"])
            best[l] = min(best.get(l, 1.0), float(r["value"]))
    ls = sorted(best)
    errs = [best[l] for l in ls]
    inversions = sum(1 for a, b in zip(errs, errs[1:]) if b > a + 1e-9)
    ok = 0.35 <= qs <= 0.47 and best[64] <= 0.25 and inversions <= 1
    report(
        "9",
        ok,
        f"QS={qs:.3f} (in [0.35,0.47]); QCS L=64 S=1 best={best[64]:.3f} "
        f"(<=0.25); best-errors {['%.3f' % e for e in errs]} inversions={inversions} (<=1)",
    )


@pytest.fixture(scope="session")
def fig2e_run():
    return _run_once("fig2e", {
        "recipe": "fig2e", "N": 32, "restarts": 4, "epochs": 2000, "seed": 2025,
    })


def test_criterion_10_fig2e(fig2e_run):
    rows = _rows(fig2e_run)
    qs = [float(r["value"]) for r in rows
          if r["protocol"] == "QS" and r["metric"] == "test_error"][0]
    qcs = min(float(r["value"]) for r in rows
              if r["protocol"] == "QCS" and r["metric"] == "test_error")
    gap = qs - qcs
    report("10", gap >= 0.15,
           f"QS={qs:.3f}, QCS={qcs:.3f}, gap={100 * gap:.1f} points (>=15)")


@pytest.fixture(scope="session")
def fig2k_run():
    return _run_once("fig2k", {
        "recipe": "fig2k", "classes": 4, "N": 64, "restarts": 4, "epochs": 2000,
        "seed": 2025,
    })


def test_criterion_11_fig2k(fig2k_run):
    rows = _rows(fig2k_run)
    qs = [float(r["value"]) for r in rows
          if r["protocol"] == "QS" and r["metric"] == "test_error"][0]
    qcs_rows = [r for r in rows if r["protocol"] == "QCS" and r["metric"] == "test_error"]
    qcs = min(float(r["value"]) for r in qcs_rows)
    gap = qs - qcs
    align = json.loads(qcs_rows[0]["extra"])
    dominant = {k: v[1] for k, v in align.items()}
    distinct = len({v[0] for v in align.values()}) == 4
    align_ok = all(p > 0.7 for p in dominant.values()) and distinct
    report(
        "11",
        gap >= 0.12 and align_ok,
        f"QS={qs:.3f}, QCS={qcs:.3f}, gap={100 * gap:.1f} points (>=12); "
        f"per-class dominant bitstring probs={ {k: round(v, 3) for k, v in dominant.items()} } "
        f"all>0.7 and distinct={align_ok}",
    )


@pytest.fixture(scope="session")
def fig5d_run():
    return _run_once("fig5d", {
        "recipe": "fig5d", "restarts": 8, "epochs": 1500, "seed": 2025,
        "n_per_class": 400,
    })


def test_criterion_12_fig5d(fig5d_run):
    rows = _rows(fig5d_run)
    qcs = min(float(r["value"]) for r in rows
              if r["protocol"] == "QCS" and r["metric"] == "test_error")
    qs = [float(r["value"]) for r in rows if r["protocol"] == "QS-TMS"][0]
    photon = [float(r["value"]) for r in rows if r["metric"] == "mean_photon"][0]
    report(
        "12",
        qcs < qs and qcs <= 0.06,
        f"hybrid QCS={qcs:.3f} (<=0.06) vs photon-matched TMS QS={qs:.3f}; "
        f"probe photons={photon:.2f}",
    )


@pytest.fixture(scope="session")
def app_shots_run():
    return _run_once("app_shots", {
        "recipe": "app_shots", "N": 64, "restarts": 8, "epochs": 800, "seed": 2025,
    })


def test_criterion_13_train_vs_infer_shots(app_shots_run):
    rows = _rows(app_shots_run)
    best = {}
    for r in rows:
        s = r["extra"]
        best[s] = min(best.get(s, 1.0), float(r["value"]))
    low, high = best["train_shots=1"], best["train_shots=128"]
    report(
        "13",
        low <= high - 0.03,
        f"S=1-trained error={low:.3f} vs S=128-trained={high:.3f} at S=1 "
        f"inference; margin={100 * (high - low):.1f} points (>=3)",
    )


@pytest.fixture(scope="session")
def app_nrelu_run():
    return _run_once("app_nrelu", {
        "recipe": "app_nrelu", "N": 32, "restarts": 3, "epochs": 1000, "seed": 2025,
    })


def test_criterion_14_postprocessor_depth(app_nrelu_run):
    rows = _rows(app_nrelu_run)
    table = {}
    for r in rows:
        nrelu = int(r["extra"].split("=")[1])
        table[(r["protocol"], nrelu)] = float(r["value"])
    flat_ok = True
    for protocol in ("QS", "QCS"):
        deep = [table[(protocol, n)] for n in (2, 3, 4)]
        flat_ok &= max(deep) - min(deep) <= 0.02
    linear_gap = abs(table[("QCS", 0)] - table[("QCS", 2)])
    report(
        "14",
        flat_ok and linear_gap <= 0.03,
        f"flat for nReLU>=2 within 2 points={flat_ok}; QCS nReLU=0 vs 2 gap="
        f"{100 * linear_gap:.1f} points (<=3); table={ {k: round(v, 3) for k, v in sorted(table.items())} }",
    )


@pytest.fixture(scope="session")
def fig3de_run():
    return _run_once("fig3de", {
        "recipe": "fig3de", "channels": [3, 5], "theta_rms": [0.1],
        "restarts": 6, "epochs": 800, "seed": 2025,
    })


def test_criterion_15_spatiotemporal_ordering(fig3de_run):
    rows = _rows(fig3de_run)
    ok_all, details = True, []
    for m in (3, 5):
        best = {}
        for r in rows:
            if r["task"] == f"spatio[M={m}]" and r["metric"] == "test_error":
                best[r["protocol"]] = min(best.get(r["protocol"], 1.0), float(r["value"]))
        ok = best["ST"] <= min(best["S"], best["T"]) + 0.02 and best["ST"] <= best["R"] - 0.05
        ok_all &= ok
        details.append(
            f"M={m}: R={best['R']:.3f} T={best['T']:.3f} S={best['S']:.3f} "
            f"ST={best['ST']:.3f}"
        )
    report("15", ok_all, "; ".join(details) +
           " | ST <= min(S,T)+2pts and ST <= R-5pts at mid theta_RMS")
