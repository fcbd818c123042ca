"""Acceptance criteria for the package, one test per criterion.

Each test checks one end-to-end numerical contract -- spectrum endpoints,
factor-estimation accuracy, spectral/spatial filter equivalence, gradient
correctness, metric fidelity, and the fixture experiments for the corrected
propagation -- and emits exactly one PASS/FAIL line through
``acceptance_report.record`` (repeated in the terminal summary).
"""
import math
import os
import time
from collections import defaultdict
from pathlib import Path

import numpy as np
import pytest
from scipy import sparse
from scipy.special import roots_jacobi

from acceptance_report import record
from speccf.data_io import (EdgeList, FeatureMatrix, InteractionDataset,
                            inject_feature_noise, load_interactions,
                            load_social_edges, split_dataset)
from speccf.evaluation import evaluate
from speccf.filters import (FilterSpec, jacobi_coefficients, propagate,
                            spectral_reference_propagate)
from speccf.graph import (KnnConfig, NormalizedAdjacency, assemble_augmented,
                          build_bipartite, build_knn_graph, rescale_social,
                          sym_normalize)
from speccf.spectral import SscFactors, estimate_factors, make_shifted_operator
from speccf.synthetic import random_connected_bipartite, two_community_dataset
from speccf.train import TrainConfig, bpr_loss_and_grad, train_loop


def _bipartite_adjacency(num_users, num_items, extra_edges, rng):
    pairs = random_connected_bipartite(num_users, num_items,
                                       extra_edges=extra_edges, rng=rng)
    return sym_normalize(build_bipartite(pairs, num_users, num_items), num_users)


def test_criterion_01_bipartite_spectrum_endpoints():
    """Connected bipartite: lambda in [-1, 1] with both endpoints attained by
    the sqrt-degree vectors (item half negated for the bottom one)."""
    rng = np.random.default_rng(11)
    start = time.perf_counter()
    worst_end, worst_res = 0.0, 0.0
    for _ in range(50):
        nu = int(rng.integers(10, 251))
        ni = int(rng.integers(10, 251))
        extra = int(rng.integers(0, max(1, min(3 * (nu + ni), nu * ni // 4))))
        adj = _bipartite_adjacency(nu, ni, extra, rng)
        eigs = np.linalg.eigvalsh(adj.matrix.toarray())
        worst_end = max(worst_end, abs(eigs[0] + 1.0), abs(eigs[-1] - 1.0))

        v = np.sqrt(adj.degrees)
        v /= np.linalg.norm(v)
        v_minus = v.copy()
        v_minus[nu:] *= -1.0
        worst_res = max(worst_res,
                        float(np.linalg.norm(adj.matrix @ v - v)),
                        float(np.linalg.norm(adj.matrix @ v_minus + v_minus)))
    elapsed = time.perf_counter() - start
    ok = worst_end < 1e-8 and worst_res < 1e-10 and elapsed < 30.0
    record(1, ok, "50 random connected bipartite graphs: spectrum endpoints "
                  f"off by <= {worst_end:.2e} (tol 1e-8), sqrt-degree "
                  f"eigenvector residual <= {worst_res:.2e} (tol 1e-10), "
                  f"{elapsed:.1f}s (< 30s)")
    assert ok


def test_criterion_02_side_block_spectrum_limits():
    """Dominant side blocks move the spectrum floor: a hugely rescaled social
    block pins lambda_min at the social graph's own floor, and a dominant
    complete neighbor block lifts lambda_min to nearly zero."""
    rng = np.random.default_rng(23)
    start = time.perf_counter()

    # (a) ring + distance-2 chords over all users, rescaled by kappa = 1e6
    nu, ni = 400, 150
    chords = {(i, (i + 1) % nu) for i in range(nu)}
    chords |= {(i, (i + 2) % nu) for i in range(nu)}
    arr = np.array(sorted((min(a, b), max(a, b)) for a, b in chords))
    social = EdgeList(nu, np.concatenate([arr[:, 0], arr[:, 1]]),
                      np.concatenate([arr[:, 1], arr[:, 0]]),
                      np.ones(2 * len(arr)))
    social_floor = float(np.linalg.eigvalsh(
        sym_normalize(rescale_social(social, 1.0)).matrix.toarray())[0])
    bip = build_bipartite(random_connected_bipartite(nu, ni, extra_edges=800, rng=rng),
                          nu, ni)
    aug = sym_normalize(assemble_augmented(
        bip, user_block=rescale_social(social, 1e6)), nu)
    lam_social = float(np.linalg.eigvalsh(aug.matrix.toarray())[0])
    diff = abs(lam_social - min(social_floor, 0.0))

    # (b) complete neighbor graph over the items, weighted to dominate
    nu2, ni2 = 350, 650
    bip2 = build_bipartite(random_connected_bipartite(nu2, ni2, rng=rng), nu2, ni2)
    feats = [FeatureMatrix("any", rng.uniform(0.1, 1.0, size=(ni2, 8)).astype(np.float32))]
    knn = build_knn_graph(feats, KnnConfig(kappa=ni2 - 1, modality_weights={"any": 10.0}))
    aug2 = sym_normalize(assemble_augmented(bip2, item_block=knn), nu2)
    lam_knn = float(np.linalg.eigvalsh(aug2.matrix.toarray())[0])

    elapsed = time.perf_counter() - start
    ok = diff < 1e-3 and lam_knn > -0.05 and elapsed < 60.0
    record(2, ok, f"kappa=1e6 social floor {social_floor:.4f} matched to "
                  f"{diff:.2e} (tol 1e-3); complete-knn lambda_min "
                  f"{lam_knn:.4f} > -0.05; {elapsed:.1f}s (< 60s)")
    assert ok


def test_criterion_03_factor_estimation_accuracy():
    """Power-iteration lambda_min estimate within 1e-4 of the dense oracle on
    prescribed-spectrum fixtures with a clear spectral gap."""
    rng = np.random.default_rng(37)
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(80, 201))
        lam_min = float(rng.uniform(-0.95, -0.3))
        gap = float(rng.uniform(0.2, 0.5))
        eigs = np.concatenate([[lam_min, lam_min + gap],
                               rng.uniform(lam_min + gap, 1.0, size=n - 2)])
        q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        dense = (q * eigs) @ q.T
        dense = (dense + dense.T) / 2.0
        adj = NormalizedAdjacency(sparse.csr_array(dense), np.ones(n))
        est = estimate_factors(adj)
        oracle = float(np.linalg.eigvalsh(dense)[0])
        worst = max(worst, abs(est.lambda_min_est - oracle))
    ok = worst < 1e-4
    record(3, ok, "20 prescribed-spectrum fixtures (gap >= 0.2): estimated "
                  f"lambda_min within {worst:.2e} of dense oracle (tol 1e-4)")
    assert ok


def test_criterion_04_spatial_matches_spectral_oracle():
    """Polynomial propagation through the shifted operator equals the dense
    eigendecomposition oracle for both filter families."""
    rng = np.random.default_rng(41)
    specs = [FilterSpec("lightgcn", 3), FilterSpec("lightgcn", 6),
             FilterSpec("jgcf", 6, a=1.0, b=1.0), FilterSpec("jgcf", 4, a=0.5, b=0.0)]
    worst = 0.0
    for nu, ni, extra in ((120, 160, 400), (90, 210, 700)):
        adj = _bipartite_adjacency(nu, ni, extra, rng)
        eigvals, eigvecs = np.linalg.eigh(adj.matrix.toarray())
        emb = rng.standard_normal((nu + ni, 8))
        for mu, delta in ((0.0, 1.0), (0.2, 0.8), (0.15, 0.4)):
            op = make_shifted_operator(adj, mu, delta)
            factors = SscFactors(mu=mu, delta=delta, lambda_min_est=mu - delta)
            for spec in specs:
                spatial = propagate(op, emb, spec)
                reference = spectral_reference_propagate(
                    eigvecs, eigvals, spec, factors, emb)
                worst = max(worst, float(np.max(np.abs(spatial - reference))))
    ok = worst < 1e-6
    record(4, ok, "lightgcn and jgcf propagation vs dense spectral oracle: "
                  f"max |diff| {worst:.2e} (tol 1e-6) over L in {{3,4,6}} and "
                  "(mu, delta) in {(0,1), (0.2,0.8), (0.15,0.4)}")
    assert ok


def _jacobi_values(a, b, degree, x):
    """Evaluate the degree-``degree`` Jacobi polynomial via the package's
    recurrence coefficients."""
    prev = np.ones_like(x)
    if degree == 0:
        return prev
    current = (a - b) / 2 + (a + b + 2) / 2 * x
    for l in range(2, degree + 1):
        theta, theta_prime, theta_dprime = jacobi_coefficients(a, b, l)
        prev, current = current, (theta * x + theta_prime) * current - theta_dprime * prev
    return current


def test_criterion_05_jacobi_recurrence_and_orthogonality():
    """The three-term recurrence reproduces the Legendre closed forms and the
    family is orthogonal under its own weight, checked by quadrature."""
    x = np.linspace(-1.0, 1.0, 201)
    err_legendre = max(
        float(np.max(np.abs(_jacobi_values(0.0, 0.0, 2, x) - (3 * x**2 - 1) / 2))),
        float(np.max(np.abs(_jacobi_values(0.0, 0.0, 3, x) - (5 * x**3 - 3 * x) / 2))))

    worst_ortho = 0.0
    for a in (0.0, 0.5, 1.0):
        for b in (0.0, 0.5, 1.0):
            nodes, weights = roots_jacobi(64, a, b)
            values = np.stack([_jacobi_values(a, b, l, nodes) for l in range(7)])
            gram = (values * weights) @ values.T
            norm = np.sqrt(np.outer(np.diag(gram), np.diag(gram)))
            off = np.abs(gram / norm)
            np.fill_diagonal(off, 0.0)
            worst_ortho = max(worst_ortho, float(off.max()))
    ok = err_legendre < 1e-12 and worst_ortho < 1e-8
    record(5, ok, f"Legendre degree-2/3 closed forms matched to {err_legendre:.2e} "
                  f"(tol 1e-12); weighted orthogonality off-diagonals <= "
                  f"{worst_ortho:.2e} (tol 1e-8) for degrees <= 6, a,b in {{0,.5,1}}")
    assert ok


def test_criterion_06_bpr_gradient_vs_finite_differences():
    """Analytic gradient of the ranking loss through the propagation equals
    central finite differences on a six-node toy."""
    pairs = np.array([[0, 0], [0, 1], [1, 1], [1, 2], [2, 2], [2, 0]])
    adj = sym_normalize(build_bipartite(pairs, 3, 3), 3)
    rng = np.random.default_rng(53)
    emb = 0.5 * rng.standard_normal((6, 5))
    batch = (np.array([0, 1, 2, 0]), np.array([0, 1, 2, 1]), np.array([2, 0, 1, 2]))
    h = 1e-5
    worst = 0.0
    for mu, delta in ((0.0, 1.0), (0.2, 0.8)):
        op = make_shifted_operator(adj, mu, delta)
        for spec in (FilterSpec("lightgcn", 2), FilterSpec("jgcf", 3, a=1.0, b=1.0)):
            _, grad = bpr_loss_and_grad(emb, op, spec, batch, 3)
            fd = np.zeros_like(emb)
            for r in range(emb.shape[0]):
                for c in range(emb.shape[1]):
                    bumped = emb.copy()
                    bumped[r, c] += h
                    up, _ = bpr_loss_and_grad(bumped, op, spec, batch, 3)
                    bumped[r, c] -= 2 * h
                    down, _ = bpr_loss_and_grad(bumped, op, spec, batch, 3)
                    fd[r, c] = (up - down) / (2 * h)
            worst = max(worst, float(np.linalg.norm(grad - fd) / np.linalg.norm(fd)))
    ok = worst < 1e-3
    record(6, ok, "BPR gradient through both filters, corrected and plain: "
                  f"relative error vs central differences {worst:.2e} (tol 1e-3)")
    assert ok


def _oracle_metrics(final, dataset, split, cutoffs):
    """Brute-force ranking metrics in plain Python, mirroring the evaluation
    contract: train items sunk to -inf, ties by ascending item index,
    macro-average over users with relevant items."""
    num_users = dataset.num_users
    item_vecs = final[num_users:]
    train_items = defaultdict(set)
    for u, i in dataset.train:
        train_items[int(u)].add(int(i))
    relevant_by_user = defaultdict(set)
    for u, i in getattr(dataset, split):
        relevant_by_user[int(u)].add(int(i))
    recalls = {n: [] for n in cutoffs}
    ndcgs = {n: [] for n in cutoffs}
    for u in sorted(relevant_by_user):
        scores = [float(np.dot(final[u], vec)) for vec in item_vecs]
        for i in train_items[u]:
            scores[i] = float("-inf")
        order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
        rel = relevant_by_user[u]
        for n in cutoffs:
            hit_ranks = [r for r, i in enumerate(order[:n]) if i in rel]
            recalls[n].append(len(hit_ranks) / len(rel))
            dcg = sum(1.0 / math.log2(r + 2) for r in hit_ranks)
            idcg = sum(1.0 / math.log2(r + 2) for r in range(min(n, len(rel))))
            ndcgs[n].append(dcg / idcg)
    return ({n: float(np.mean(v)) for n, v in recalls.items()},
            {n: float(np.mean(v)) for n, v in ndcgs.items()})


def test_criterion_07_metrics_match_brute_force():
    """Vectorized Recall/NDCG equal an independent brute-force ranking, and a
    single hit at rank 2 scores exactly 1/log2(3)."""
    rng = np.random.default_rng(61)
    nu, ni = 20, 30
    train, val, test = [], [], []
    for u in range(nu):
        perm = rng.permutation(ni)
        train += [(u, i) for i in perm[:6]]
        val += [(u, i) for i in perm[6:9]]
        test += [(u, i) for i in perm[9:11]]
    ds = InteractionDataset(nu, ni, np.array(train), np.array(val), np.array(test))
    final = rng.standard_normal((nu + ni, 6))
    cutoffs = (1, 3, 5, 10, 30)
    worst = 0.0
    for split in ("val", "test"):
        report = evaluate(final, ds, split, cutoffs=cutoffs)
        oracle_recall, oracle_ndcg = _oracle_metrics(final, ds, split, cutoffs)
        for n in cutoffs:
            worst = max(worst, abs(report.recall[n] - oracle_recall[n]),
                        abs(report.ndcg[n] - oracle_ndcg[n]))

    single = InteractionDataset(1, 3, np.empty((0, 2)), test=np.array([[0, 1]]))
    scored = np.array([[1.0], [0.9], [0.5], [0.1]])  # relevant item ranks 2nd
    rank2 = evaluate(scored, single, "test", cutoffs=(2,)).ndcg[2]
    err_rank2 = abs(rank2 - 1.0 / np.log2(3.0))

    ok = worst < 1e-10 and err_rank2 < 1e-12
    record(7, ok, "Recall/NDCG vs brute-force oracle on 20-user toys: max "
                  f"|diff| {worst:.2e} (tol 1e-10); single-hit-at-rank-2 NDCG "
                  f"off by {err_rank2:.1e} from 1/log2(3)")
    assert ok


def _find_lastfm_dir():
    candidates = []
    env = os.environ.get("SPECCF_LASTFM_DIR")
    if env:
        candidates.append(Path(env))
    candidates.append(Path(__file__).resolve().parent.parent / "data" / "lastfm")
    for cand in candidates:
        if cand.is_dir():
            return cand
    return None


def _strip_header(src: Path, dst: Path, num_fields: int) -> Path:
    """Copy a TSV, dropping any leading header line whose fields are not numeric."""
    lines = src.read_text(encoding="utf-8", errors="replace").splitlines()
    out = []
    for line in lines:
        fields = line.split("\t")
        if out or (len(fields) >= num_fields and fields[0].strip().isdigit()):
            out.append(line)
    dst.write_text("\n".join(out) + "\n", encoding="utf-8")
    return dst


def test_criterion_08_social_benchmark_reproduction(tmp_path):
    """On the public LastFM listening data with its friendship graph, plain
    training reaches Recall@10 near 0.2527, the corrected run (kappa=1.0,
    mu=0.0, delta=0.5) near 0.2588, and the gap is positive over 5 seeds."""
    data_dir = _find_lastfm_dir()
    if data_dir is None:
        reason = ("LastFM dataset not present (offline environment); place "
                  "user_artists.dat/user_friends.dat under data/lastfm or set "
                  "SPECCF_LASTFM_DIR to enable this benchmark")
        record(8, None, reason)
        pytest.skip(reason)

    inter_src = data_dir / "user_artists.dat"
    social_src = data_dir / "user_friends.dat"
    if not inter_src.exists():
        inter_src = data_dir / "interactions.tsv"
        social_src = data_dir / "social.tsv"
    inter_tsv = _strip_header(inter_src, tmp_path / "interactions.tsv", 3)
    social_tsv = _strip_header(social_src, tmp_path / "social.tsv", 2)

    raw = load_interactions(inter_tsv, min_interactions=10, rating_threshold=0.0)
    ds = split_dataset(raw, ratios=(0.8, 0.1, 0.1), seed=0)
    social = load_social_edges(social_tsv, ds.user_id_map)
    bip = build_bipartite(ds.train, ds.num_users, ds.num_items)
    plain = sym_normalize(bip, ds.num_users)
    social_adj = sym_normalize(
        assemble_augmented(bip, user_block=rescale_social(social, 1.0)), ds.num_users)
    spec = FilterSpec("lightgcn", 3)

    def mean_recall10(adj, mu, delta):
        op = make_shifted_operator(adj, mu, delta)
        scores = []
        for seed in range(5):
            config = TrainConfig(learning_rate=1e-3, batch_size=2048, dim=64,
                                 epochs=500, patience=20, seed=seed)
            emb, _ = train_loop(ds, op, spec, config)
            final = propagate(op, emb.values.astype(np.float64), spec)
            scores.append(evaluate(final, ds, "test", cutoffs=(10,)).recall[10])
        return float(np.mean(scores))

    base = mean_recall10(plain, 0.0, 1.0)
    corrected = mean_recall10(social_adj, 0.0, 0.5)
    rel_base = abs(base - 0.2527) / 0.2527
    rel_corr = abs(corrected - 0.2588) / 0.2588
    ok = rel_base < 0.05 and rel_corr < 0.05 and corrected > base
    record(8, ok, f"LastFM ({ds.num_users} users x {ds.num_items} items): "
                  f"baseline R@10 {base:.4f} (ref 0.2527 +-5%), corrected "
                  f"{corrected:.4f} (ref 0.2588 +-5%), gap {corrected - base:+.4f}")
    assert ok


# Shared fixture for the two-community experiments: 600 users x 360 items in
# two equal blocks, 15 interactions per user at 80% within-community, item
# features = community prototype + N(0,1) noise, 60/20/20 split.  The item
# neighbor graph links each item to its 100 nearest by inner product --
# noisy but strongly community-informative.
_COMMUNITY = dict(num_users=600, num_items=360, interactions_per_user=15,
                  within_prob=0.8, feature_noise=1.0, split_ratios=(0.6, 0.2, 0.2))
_KNN_KAPPA = 100
_TRAIN = dict(learning_rate=1e-2, batch_size=512, dim=8, epochs=30, patience=30)
_FILTER = FilterSpec("lightgcn", 3)
# Correction factors fixed from a one-time validation grid search over the
# 0.05 lattice within +-0.1 of the estimated factors (mean estimate across
# the five data seeds: mu 0.3845, delta 0.6155), using the one-standard-error
# rule with ties broken toward the estimate.
_MU_STAR, _DELTA_STAR = 0.40, 0.60


def _community_case(data_seed):
    ds, feats = two_community_dataset(seed=data_seed, **_COMMUNITY)
    bip = build_bipartite(ds.train, ds.num_users, ds.num_items)
    plain = sym_normalize(bip, ds.num_users)
    knn = build_knn_graph(feats, KnnConfig(kappa=_KNN_KAPPA))
    augmented = sym_normalize(assemble_augmented(bip, item_block=knn), ds.num_users)
    return ds, plain, augmented


def _mean_test_ndcg(ds, adj, mu, delta, train_seeds):
    op = make_shifted_operator(adj, mu, delta)
    scores = []
    for seed in train_seeds:
        emb, _ = train_loop(ds, op, _FILTER, TrainConfig(seed=seed, **_TRAIN))
        final = propagate(op, emb.values.astype(np.float64), _FILTER)
        scores.append(evaluate(final, ds, "test").ndcg[20])
    return float(np.mean(scores))


def test_criterion_09_correction_beats_both_baselines():
    """On the two-community fixture the corrected run must beat plain training
    without side information AND the same augmented graph without correction,
    each in at least 4 of 5 data seeds (per-seed scores averaged over three
    training seeds, identical for all arms)."""
    start = time.perf_counter()
    wins_plain = wins_uncorrected = 0
    for data_seed in range(5):
        ds, plain, augmented = _community_case(data_seed)
        seeds = [data_seed * 100 + r for r in range(3)]
        ndcg_plain = _mean_test_ndcg(ds, plain, 0.0, 1.0, seeds)
        ndcg_unc = _mean_test_ndcg(ds, augmented, 0.0, 1.0, seeds)
        ndcg_ssc = _mean_test_ndcg(ds, augmented, _MU_STAR, _DELTA_STAR, seeds)
        wins_plain += ndcg_ssc > ndcg_plain
        wins_uncorrected += ndcg_ssc > ndcg_unc
        print(f"  data seed {data_seed}: no-side-info {ndcg_plain:.4f}, "
              f"uncorrected {ndcg_unc:.4f}, corrected {ndcg_ssc:.4f}")
    elapsed = time.perf_counter() - start
    ok = wins_plain >= 4 and wins_uncorrected >= 4 and elapsed < 600.0
    record(9, ok, f"corrected propagation (mu={_MU_STAR}, delta={_DELTA_STAR}) "
                  f"beats no-side-info {wins_plain}/5 and uncorrected-augmented "
                  f"{wins_uncorrected}/5 on test NDCG@20 (need >= 4/5 each); "
                  f"{elapsed:.0f}s (< 600s)")
    assert ok


def test_criterion_10_feature_noise_robustness():
    """Perturbing the item features with N(0, 0.5^2) noise before building the
    neighbor graph degrades the corrected run's mean test NDCG@20 by < 20%."""
    start = time.perf_counter()
    means = {}
    for delta_noise in (0.0, 0.5):
        scores = []
        for data_seed in range(5):
            ds, feats = two_community_dataset(seed=data_seed, **_COMMUNITY)
            noisy = inject_feature_noise(feats[0], delta_noise, seed=1000 + data_seed)
            bip = build_bipartite(ds.train, ds.num_users, ds.num_items)
            knn = build_knn_graph([noisy], KnnConfig(kappa=_KNN_KAPPA))
            adj = sym_normalize(assemble_augmented(bip, item_block=knn), ds.num_users)
            est = estimate_factors(adj)
            scores.append(_mean_test_ndcg(ds, adj, est.mu, est.delta,
                                          [data_seed * 100]))
        means[delta_noise] = float(np.mean(scores))
    degradation = (means[0.0] - means[0.5]) / means[0.0]
    elapsed = time.perf_counter() - start
    ok = degradation < 0.20
    record(10, ok, f"corrected run at max feature noise 0.5: mean test NDCG@20 "
                   f"{means[0.5]:.4f} vs {means[0.0]:.4f} clean, degradation "
                   f"{degradation * 100:+.1f}% (< 20%); {elapsed:.0f}s")
    assert ok
