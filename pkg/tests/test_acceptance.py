"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s`.  The master seed is fixed
up front; every stochastic check derives its streams from it.

Two checks are known not to hold at these scales and fail honestly rather
than with loosened thresholds:

* Criterion 5's bounded-noise ("promise") sub-claims: with C = 49 and
  eps = 1 the clipped penalty never exceeds n/(16 C) < 1 for n <= 512, so
  the output law is close to uniform on [0,1] and its MSE is flat in n
  (about 0.08) rather than decaying like n^-3.
* Criterion 6's 0.15 median: that threshold matches the brute-force score
  argmax (seed-to-seed median about 0.12), but at eps = 100 the exponential
  mechanism still wobbles a grid step or two per entry (score gaps between
  neighboring candidates are about 0.002 against a coefficient of about 85),
  lifting the 20-trial median to about 0.19 for typical seeds.

Both tests print their measurements alongside the stated targets.
"""

import math
import time

import numpy as np
import pytest
from scipy import stats

from nodedp.audits import (
    audit_block_mechanism,
    audit_density_mechanism,
)
from nodedp.block_estimator import EstimatorConfig, estimate_blocks
from nodedp.density import (
    HomogeneityConfig,
    extended_density_mechanism,
    homogeneity_membership,
    laplace_density_mechanism,
    predicted_baseline_mse,
    graph_space_oracle,
)
from nodedp.experiments import (
    ExperimentConfig,
    exact_rewired_tv,
    homogeneity_probability,
    run_mse_experiment,
    slope_fit,
)
from nodedp.graphs import (
    LabeledGraph,
    all_graphs,
    edge_density,
    graph_from_index,
    node_distance,
    triangular_slots,
)
from nodedp.graphons import (
    BlockMatrix,
    delta2_hat_blocks,
    rewired_model_pmf,
    sample_gnm_rewired_coupled,
    sample_w_random,
    StepGraphon,
)
from nodedp.mechanisms import (
    dp_audit_densities,
    extend_mechanism,
    truncation_rate,
    unit_laplace_density,
)
from nodedp.rng import substream

MASTER_SEED = 20260810
TOL = 1e-9


def _report(criterion: str, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} -- {detail}")


# -- independent BFS oracle over the rewiring graph (bitmask representation) -----


def _slot_masks(n):
    masks = [0] * n
    for t, (u, v) in enumerate(triangular_slots(n)):
        masks[u] |= 1 << t
        masks[v] |= 1 << t
    return masks


def _rewiring_neighbors(n):
    vmasks = _slot_masks(n)
    total = 1 << (n * (n - 1) // 2)
    neighbors = [set() for _ in range(total)]
    for g in range(total):
        for vm in vmasks:
            base = g & ~vm
            sub = vm
            while True:
                h = base | sub
                if h != g:
                    neighbors[g].add(h)
                if sub == 0:
                    break
                sub = (sub - 1) & vm
    return neighbors


def _bfs_all_from(neighbors, source):
    dist = {source: 0}
    frontier = [source]
    d = 0
    while frontier:
        d += 1
        nxt = []
        for g in frontier:
            for h in neighbors[g]:
                if h not in dist:
                    dist[h] = d
                    nxt.append(h)
        frontier = nxt
    return dist


def test_criterion_1_node_distance_oracle_equivalence():
    start = time.perf_counter()
    # all unordered pairs at n = 4
    neighbors4 = _rewiring_neighbors(4)
    graphs4 = [graph_from_index(4, i) for i in range(64)]
    bfs4 = [_bfs_all_from(neighbors4, i) for i in range(64)]
    mismatches = 0
    pairs = 0
    for i in range(64):
        for j in range(i + 1, 64):
            pairs += 1
            if node_distance(graphs4[i], graphs4[j]) != bfs4[i][j]:
                mismatches += 1
    assert pairs == 2016
    # 200 random pairs at n = 5
    neighbors5 = _rewiring_neighbors(5)
    rng = substream(MASTER_SEED, "criterion1")
    for _ in range(200):
        i, j = (int(x) for x in rng.integers(0, 1 << 10, size=2))
        d_lib = node_distance(graph_from_index(5, i), graph_from_index(5, j))
        if d_lib != _bfs_all_from(neighbors5, i).get(j, -1):
            mismatches += 1
    # extreme pair ratio: d_v(K_n, empty) = n - 1
    extremes_ok = all(
        node_distance(LabeledGraph.complete(n), LabeledGraph.empty(n)) == n - 1
        for n in range(3, 8)
    )
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and extremes_ok and elapsed < 60
    _report(
        "1 (node-distance oracle equivalence)",
        ok,
        f"mismatches={mismatches} extremes_ok={extremes_ok} runtime={elapsed:.1f}s",
    )
    assert mismatches == 0
    assert extremes_ok
    assert elapsed < 60


def test_criterion_2_exhaustive_dp_certification():
    start = time.perf_counter()
    eps, n = 1.0, 4
    # (a) Laplace baseline over a 1000-point output grid
    grid = np.linspace(-1.0, 2.0, 1000)
    rep_a = audit_density_mechanism(
        lambda g: laplace_density_mechanism(g, eps), n, eps, grid, name="laplace"
    )
    # (b) block mechanism, audited sensitivity, over released-density values;
    # the selection stage spends eps/2, so auditing there is the sharp check
    worst_b = -math.inf
    for rho_hat in (0.25, 0.5, 1.0):
        cfg = EstimatorConfig(epsilon=eps, lam=2.0, k=2, sensitivity_mode="audited")
        rep = audit_block_mechanism(n, rho_hat, cfg, eps / 2.0)
        worst_b = max(worst_b, rep.max_violation)
    # composition: the density step (scale 4/(n eps)) is itself eps/2-DP
    rep_b2 = audit_density_mechanism(
        lambda g: laplace_density_mechanism(g, eps),
        n,
        eps / 2.0,
        grid,
        name="density-step",
    )
    # (c) exact-extension density estimator at level eps with base budget eps/2
    cfg_h = HomogeneityConfig(rho=0.5, C=49.0, n=n)
    mech = extended_density_mechanism(n, eps, cfg_h)
    unit_grid = np.linspace(0.0, 1.0, 1000)
    rep_c = audit_density_mechanism(mech, n, eps, unit_grid, name="extended")
    elapsed = time.perf_counter() - start
    ok = (
        rep_a.max_violation <= TOL
        and worst_b <= TOL
        and rep_b2.max_violation <= TOL
        and rep_c.max_violation <= TOL
        and elapsed < 600
    )
    _report(
        "2 (exhaustive eps-node-DP certification)",
        ok,
        f"laplace={rep_a.max_violation:.2e} block(audited)={worst_b:.2e} "
        f"density-step={rep_b2.max_violation:.2e} extended={rep_c.max_violation:.2e} "
        f"runtime={elapsed:.1f}s",
    )
    assert rep_a.max_violation <= TOL
    assert worst_b <= TOL
    assert rep_b2.max_violation <= TOL
    assert rep_c.max_violation <= TOL
    assert elapsed < 600


def test_criterion_3_extension_operator_exactness():
    eps, n = 1.0, 4
    scale = 8.0 / (n * eps)  # the unit-interval Laplace base is (eps/2)-DP
    space = graph_space_oracle(n, contains=lambda g: g.max_degree <= 2)
    base = lambda g: unit_laplace_density(edge_density(g), scale)
    extended = extend_mechanism(space, base, eps / 2.0, budget=10**7)
    grid = np.linspace(0.0, 1.0, 1000)
    sup_gap = 0.0
    members = 0
    for g in space.points:
        if space.contains(g):
            members += 1
            gap = np.abs(extended(g).log_pdf(grid) - base(g).log_pdf(grid))
            sup_gap = max(sup_gap, float(gap.max()))
    violation = dp_audit_densities(space, extended, eps, grid)
    ok = sup_gap <= TOL and violation <= TOL and members > 0
    _report(
        "3 (extension-operator exactness)",
        ok,
        f"H-size={members} sup_gap_on_H={sup_gap:.2e} global_violation={violation:.2e}",
    )
    assert members > 0
    assert sup_gap <= TOL
    assert violation <= TOL


def test_criterion_4_restricted_sensitivity_and_clip_subadditivity():
    n, rho, C = 10, 1.0, 49.0
    cfg = HomogeneityConfig(rho=rho, C=C, n=n)
    rate = truncation_rate(n, rho)
    rng = substream(MASTER_SEED, "criterion4")
    violations = 0
    pairs = 0
    while pairs < 500:
        adj = np.zeros((n, n), dtype=bool)
        iu = np.triu_indices(n, 1)
        adj[iu] = rng.random(len(iu[0])) < 0.5
        g1 = LabeledGraph(adj | adj.T)
        adj2 = np.zeros((n, n), dtype=bool)
        adj2[iu] = rng.random(len(iu[0])) < 0.5
        g2 = LabeledGraph(adj2 | adj2.T)
        if not (homogeneity_membership(g1, cfg) and homogeneity_membership(g2, cfg)):
            continue
        pairs += 1
        lhs = (1.0 / (8.0 * C)) * min(
            rate * abs(edge_density(g1) - edge_density(g2)), float(n)
        )
        if lhs > node_distance(g1, g2) + 1e-12:
            violations += 1
    # clipped-penalty subadditivity on 1e5 random parameter draws
    a = rng.random(10**5) * 10
    b = rng.random(10**5) * 10
    x = rng.normal(size=10**5) * 5
    y = rng.normal(size=10**5) * 5
    f = lambda t: np.minimum(a * np.abs(t), b)
    clip_violations = int((f(x + y) > f(x) + f(y) + 1e-12).sum())
    ok = violations == 0 and clip_violations == 0
    _report(
        "4 (restricted sensitivity + clip subadditivity)",
        ok,
        f"pair_violations={violations}/500 clip_violations={clip_violations}/100000",
    )
    assert violations == 0
    assert clip_violations == 0


def _criterion5_records():
    common = dict(
        model="gnm",
        n_grid=(64, 128, 256, 512),
        epsilon_grid=(1.0,),
        trials=5000,
        seed=MASTER_SEED,
        m_fraction=0.5,
        rho=0.5,
        C=49.0,
    )
    baseline = run_mse_experiment(ExperimentConfig(estimator="baseline", **common))
    promise = run_mse_experiment(ExperimentConfig(estimator="promise", **common))
    return baseline, promise


@pytest.fixture(scope="module")
def criterion5_records():
    start = time.perf_counter()
    records = _criterion5_records()
    print(f"criterion-5 simulation: {time.perf_counter() - start:.1f}s "
          f"(budget 1800s)")
    return records


def test_criterion_5_baseline_rate_and_oracle(criterion5_records):
    baseline, _ = criterion5_records
    slope, stderr = slope_fit(baseline)
    oracle_ok = True
    details = []
    for r in baseline:
        want = predicted_baseline_mse(r.n, r.p, r.epsilon)
        rel = abs(r.mse - want) / want
        details.append(f"n={r.n}: mse={r.mse:.3e} oracle={want:.3e} rel={rel:.2%}")
        if rel > 0.15:
            oracle_ok = False
    slope_ok = -2.3 <= slope <= -1.7
    _report(
        "5a (baseline slope and analytic oracle)",
        slope_ok and oracle_ok,
        f"slope={slope:.3f}+-{stderr:.3f}; " + "; ".join(details),
    )
    assert slope_ok
    assert oracle_ok


def test_criterion_5_promise_separation(criterion5_records):
    """Known-infeasible at these sizes; asserted as stated, fails honestly."""
    baseline, promise = criterion5_records
    slope, stderr = slope_fit(promise)
    base_256 = next(r.mse for r in baseline if r.n == 256)
    prom_256 = next(r.mse for r in promise if r.n == 256)
    slope_ok = -3.6 <= slope <= -2.5
    ratio_ok = prom_256 <= base_256 / 10.0
    _report(
        "5b (promise-mode slope and 10x separation at n=256)",
        slope_ok and ratio_ok,
        f"promise_slope={slope:.3f}+-{stderr:.3f} (target [-3.6,-2.5]); "
        f"promise_mse(256)={prom_256:.3e} vs baseline(256)/10={base_256 / 10:.3e}",
    )
    assert slope_ok, (
        "bounded-noise MSE is flat in n at these sizes; see module docstring"
    )
    assert ratio_ok


def test_criterion_6_block_estimator_consistency():
    """The 0.15 median holds for the score argmax the threshold was derived
    from, but not for the eps = 100 mechanism it is asserted against; see
    the module docstring.  Asserted as stated; the argmax, latent-label and
    normalized-domain medians are printed for reference."""
    start = time.perf_counter()
    n, k, lam, eps, trials = 12, 2, 2.0, 100.0, 20
    b_true = np.array([[0.8, 0.2], [0.2, 0.8]])
    target = BlockMatrix(b_true)  # rho = 1, so the edge-probability blocks
    cfg = EstimatorConfig(epsilon=eps, lam=lam, k=k)
    argmax_cfg = EstimatorConfig(epsilon=10**6, lam=lam, k=k)
    w = StepGraphon.equal_blocks(b_true)
    balanced_side = np.repeat([0, 1], n // 2)
    iu = np.triu_indices(n, 1)
    values, values_argmax, values_iid, values_norm = [], [], [], []
    for t in range(trials):
        rng = substream(MASTER_SEED, "criterion6", t)
        # planted balanced assignment (the regime the threshold was set in)
        probs = b_true[np.ix_(balanced_side, balanced_side)]
        adj = np.zeros((n, n), dtype=bool)
        adj[iu] = rng.random(len(iu[0])) < probs[iu]
        g = LabeledGraph(adj | adj.T)
        est = estimate_blocks(g, cfg, rng)
        values.append(delta2_hat_blocks(est.b_hat, target))
        values_norm.append(
            delta2_hat_blocks(est.normalized(), BlockMatrix(b_true / b_true.mean()))
        )
        est_argmax = estimate_blocks(g, argmax_cfg, substream(MASTER_SEED, "c6-am", t))
        values_argmax.append(delta2_hat_blocks(est_argmax.b_hat, target))
        # latent-label variant, recorded for reference
        sample = sample_w_random(w, 1.0, n, substream(MASTER_SEED, "criterion6-iid", t))
        est2 = estimate_blocks(sample.graph, cfg, substream(MASTER_SEED, "c6-run", t))
        values_iid.append(delta2_hat_blocks(est2.b_hat, target))
    med = float(np.median(values))
    elapsed = time.perf_counter() - start
    ok = med <= 0.15 and elapsed < 600
    _report(
        "6 (block-estimator consistency, near-nonprivate)",
        ok,
        f"median d2(b_hat, rho*B)={med:.3f} (threshold 0.15); "
        f"argmax-limit median={float(np.median(values_argmax)):.3f} [reference]; "
        f"iid-label median={float(np.median(values_iid)):.3f} [reference]; "
        f"normalized-domain median={float(np.median(values_norm)):.3f} [reference]; "
        f"runtime={elapsed:.1f}s",
    )
    assert med <= 0.15, "threshold matches the argmax regime; see docstring"
    assert elapsed < 600


def test_criterion_7_homogeneity_sanity():
    n, p, rho, C, samples = 12, 0.25, 0.5, 49.0, 1000
    rate = homogeneity_probability(n, p, rho, C, samples=samples, seed=MASTER_SEED)
    ok = rate <= 0.01
    _report(
        "7 (homogeneity membership sanity)",
        ok,
        f"empirical P[G outside H]={rate:.4f} over {samples} exact scans",
    )
    assert rate <= 0.01


def test_criterion_8_coupling_formula_validation():
    start = time.perf_counter()
    # (b) empirical law of the rewired model matches the exact pmf at n = 5
    n, m, k, trials = 5, 4, 2, 10**5
    counts: dict[bytes, int] = {}
    violations = 0
    for t in range(trials):
        rng = substream(MASTER_SEED, "criterion8", t)
        stage1, final = sample_gnm_rewired_coupled(n, m, k, rng)
        if node_distance(stage1, final) > 1:
            violations += 1
        counts[final.key] = counts.get(final.key, 0) + 1
    observed, expected = [], []
    for g in all_graphs(n):
        if m <= g.edge_count <= m + k:
            observed.append(counts.get(g.key, 0))
            expected.append(rewired_model_pmf(g, m, k) * trials)
        else:
            assert g.key not in counts
    observed = np.array(observed, dtype=float)
    expected = np.array(expected, dtype=float)
    order = np.argsort(expected)
    obs_p, exp_p, acc_o, acc_e = [], [], 0.0, 0.0
    for idx in order:
        acc_o += observed[idx]
        acc_e += expected[idx]
        if acc_e >= 5.0:
            obs_p.append(acc_o)
            exp_p.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0:
        obs_p[-1] += acc_o
        exp_p[-1] += acc_e
    exp_arr = np.array(exp_p) * (sum(obs_p) / sum(exp_p))
    pvalue = float(stats.chisquare(np.array(obs_p), exp_arr).pvalue)
    # (c) pmf total mass on every reachable slice at n = 4, plus exact TV
    mass_ok = True
    for mm, kk in [(0, 1), (2, 1), (2, 2), (3, 1), (4, 2)]:
        tv, mass = exact_rewired_tv(4, mm, kk)
        if abs(mass - 1.0) > 1e-12:
            mass_ok = False
    tv_41, _ = exact_rewired_tv(4, 2, 1)
    elapsed = time.perf_counter() - start
    ok = violations == 0 and pvalue > 0.001 and mass_ok and tv_41 < 1.0
    _report(
        "8 (rewired-coupling formula validation)",
        ok,
        f"structural_violations={violations}/{trials} chi2_p={pvalue:.4f} "
        f"pmf_mass_ok={mass_ok} tv(n=4,m=2,k=1)={tv_41:.3f} runtime={elapsed:.1f}s",
    )
    assert violations == 0
    assert pvalue > 0.001
    assert mass_ok
    assert tv_41 < 1.0
