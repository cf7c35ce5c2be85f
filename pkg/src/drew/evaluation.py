"""Evaluation harness: accuracy decomposition, routing error, rate limits.

All estimators are Monte-Carlo at desk scale with named substreams per
attack, so any record can be reproduced exactly from (store, seed).  The
quantities mirror the routing analysis:

* routing error ``epsilon_r`` = P(decoded cluster wrong | flagged reliable),
* the accuracy split into a gain term (cluster scan wins where the full
  scan is distracted) and a loss term (reliable but misrouted),
* the combinatorial lower bound on the gain from top-p displacement,
* detection-style ROC for in-dataset vs out-of-dataset queries.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import ecc
from .channel import AttackConfig, AttackStreams, apply_attack
from .pipeline import NO_MATCH, QueryConfig
from .rng import substream
from .store import Store, scan_top1
from .synthetic import heldout_pool

#: Reported redundancy values are capped here; beyond it they print as inf.
REDUNDANCY_CAP = 1.0e6


# ---------------------------------------------------------------------------
# query synthesis (batched twin of apply_attack)
# ---------------------------------------------------------------------------

def _attack_queries(store: Store, attack: AttackConfig, n_queries: int, seed: int):
    """Sample entries and push them through the attack channel, batched.

    Draws follow the exact same substreams and order as mapping
    :func:`drew.channel.apply_attack` over the sample, so per-query and
    batched evaluations are bit-identical.
    """
    if attack.out_of_dataset:
        raise ValueError("accuracy evaluation needs in-dataset attacks")
    smp = substream(seed, f"sample/{attack.name}")
    gt_idx = smp.integers(0, len(store), size=n_queries)
    streams = AttackStreams.for_attack(seed, attack.name)
    keys = store.cluster_keys[store.clusters[gt_idx]]
    if attack.p_a > 0.0:
        mask = (streams.key.random(keys.shape) < attack.p_a).astype(np.uint8)
        keys = keys ^ mask
    embs = store.embeddings[gt_idx]
    if attack.sigma > 0.0:
        embs = embs + attack.sigma * streams.embedding.standard_normal(embs.shape)
        norms = np.sqrt(np.einsum("nd,nd->n", embs, embs))
        embs = embs / norms[:, None]
    else:
        embs = embs.copy()
    return keys, embs, gt_idx


def _full_scan_with_ranks(store: Store, embs: np.ndarray, gt_idx: np.ndarray,
                          chunk: int = 128):
    """Exact full scan returning, per query, the argmax (tie-broken by id),
    its similarity, and the ground truth's 1-based rank under the same
    (similarity desc, id asc) ordering."""
    ids = store.ids
    B = embs.shape[0]
    best_idx = np.empty(B, dtype=np.intp)
    best_sim = np.empty(B)
    gt_rank = np.empty(B, dtype=np.int64)
    emb_t = store.embeddings.T
    for lo in range(0, B, chunk):
        hi = min(lo + chunk, B)
        sims = embs[lo:hi] @ emb_t  # (c, N), rows contiguous
        rows = np.arange(hi - lo)
        amax = np.argmax(sims, axis=1)
        mx = sims[rows, amax]
        ties = (sims == mx[:, None]).sum(axis=1)
        for j in np.flatnonzero(ties > 1):
            cand = np.flatnonzero(sims[j] == mx[j])
            amax[j] = cand[np.argmin(ids[cand])]
        g = gt_idx[lo:hi]
        gsim = sims[rows, g]
        ahead = (sims > gsim[:, None]).sum(axis=1)
        # tie peers: same similarity, smaller id (the ground truth itself
        # always sits in the equality count, so > 1 means real peers)
        eqc = (sims == gsim[:, None]).sum(axis=1)
        for j in np.flatnonzero(eqc > 1):
            peers = np.flatnonzero(sims[j] == gsim[j])
            ahead[j] += int((ids[peers] < ids[g[j]]).sum())
        best_idx[lo:hi] = amax
        best_sim[lo:hi] = mx
        gt_rank[lo:hi] = ahead + 1
    return best_idx, best_sim, gt_rank


# ---------------------------------------------------------------------------
# per-attack paired evaluation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AttackRecord:
    """Everything measured for one attack in one paired run."""

    name: str
    p_a: float
    sigma: float
    n_queries: int
    seed: int
    acc_drew: float
    acc_naive: float
    p_reliable: float
    p_correct_cluster_given_reliable: float
    epsilon_r: float
    epsilon_r_low_support: bool
    gain_term: float
    loss_term: float
    difference: float
    eq1_band: float
    eq1_ok: bool
    never_worse_ok: bool
    fallback_identity: bool
    alpha: float
    alpha_p: dict
    lemma1_bound: float

    def to_dict(self) -> dict:
        doc = dict(self.__dict__)
        doc["alpha_p"] = {str(p): v for p, v in self.alpha_p.items()}
        return doc


def _evaluate_attack(
    store: Store,
    attack: AttackConfig,
    cfg: QueryConfig,
    n_queries: int,
    seed: int,
    p_list: tuple[int, ...] = (2, 5, 10, 20),
) -> AttackRecord:
    spec = store.spec
    keys, embs, gt_idx = _attack_queries(store, attack, n_queries, seed)
    gt_ids = store.ids[gt_idx].astype(np.int64)
    gt_cluster = store.clusters[gt_idx]

    llrs = ecc.llr_from_keys(spec, keys, spec.design_p)
    codes, _, rel, _, _ = ecc.decode_batch(
        spec, llrs, cfg.reliability_threshold, cfg.reliability_mode
    )
    dec_cluster = ecc.codes_to_ints(codes)
    correct_cluster = dec_cluster == gt_cluster

    naive_idx, naive_sim, gt_rank = _full_scan_with_ranks(store, embs, gt_idx)
    naive_id = store.ids[naive_idx].astype(np.int64)

    # routed scope only where the decoder is confident and the cluster has
    # members; everything else inherits the naive result (same scan).
    drew_id = naive_id.copy()
    drew_sim = naive_sim.copy()
    result_reliable = np.zeros(len(gt_idx), dtype=bool)
    routed_rows = np.flatnonzero(rel)
    by_cluster: dict[int, list[int]] = {}
    for r in routed_rows.tolist():
        by_cluster.setdefault(int(dec_cluster[r]), []).append(r)
    for cluster, rows in by_cluster.items():
        members = store.cluster_members(cluster)
        if members.size == 0:
            continue
        idx, sims = scan_top1(store.embeddings[members], store.ids[members], embs[rows])
        drew_id[rows] = store.ids[members][idx].astype(np.int64)
        drew_sim[rows] = sims
        result_reliable[rows] = True

    naive_matched = np.where(naive_sim >= cfg.tau_r, naive_id, NO_MATCH)
    drew_matched = np.where(drew_sim >= cfg.tau_r, drew_id, NO_MATCH)
    naive_right = naive_matched == gt_ids
    drew_right = drew_matched == gt_ids

    n = float(len(gt_idx))
    n_rel = int(rel.sum())
    loss_i = rel & ~correct_cluster
    gain_i = drew_right & ~naive_right & rel & correct_cluster
    acc_drew = drew_right.mean()
    acc_naive = naive_right.mean()
    difference = acc_drew - acc_naive

    # paired-sample band for the decomposition inequality
    t = drew_right.astype(np.float64) - naive_right - gain_i + loss_i
    eq1_band = 3.0 * float(t.std(ddof=0)) / math.sqrt(n)
    eq1_ok = bool(t.mean() >= -eq1_band)

    eps = float(loss_i.sum() / n_rel) if n_rel else 0.0
    d_i = drew_right.astype(np.float64) - naive_right
    never_band = 3.0 * float(d_i.std(ddof=0)) / math.sqrt(n)
    never_worse_ok = bool(acc_drew >= acc_naive - eps - never_band)

    unrouted = ~result_reliable
    fallback_identity = bool(
        np.array_equal(drew_id[unrouted], naive_id[unrouted])
        and np.array_equal(drew_sim[unrouted], naive_sim[unrouted])
    )

    alpha = float((gt_rank == 1).mean())
    alpha_p = {int(p): float((gt_rank <= p).mean()) for p in p_list}
    bound = max(
        lemma1_bound(alpha_p[p], alpha, spec.k, p) for p in p_list
    )

    return AttackRecord(
        name=attack.name,
        p_a=attack.p_a,
        sigma=attack.sigma,
        n_queries=int(n),
        seed=seed,
        acc_drew=float(acc_drew),
        acc_naive=float(acc_naive),
        p_reliable=float(rel.mean()),
        p_correct_cluster_given_reliable=float((rel & correct_cluster).sum() / n_rel)
        if n_rel
        else 0.0,
        epsilon_r=eps,
        epsilon_r_low_support=n_rel == 0,
        gain_term=float(gain_i.mean()),
        loss_term=float(loss_i.mean()),
        difference=float(difference),
        eq1_band=eq1_band,
        eq1_ok=eq1_ok,
        never_worse_ok=never_worse_ok,
        fallback_identity=fallback_identity,
        alpha=alpha,
        alpha_p=alpha_p,
        lemma1_bound=float(bound),
    )


@dataclass(frozen=True)
class EvalReport:
    """Per-attack records plus the context needed to replay them."""

    store_size: int
    d: int
    k: int
    n: int
    design_p: float
    n_queries: int
    seed: int
    config: dict
    attacks: list

    def to_dict(self) -> dict:
        doc = dict(self.__dict__)
        doc["attacks"] = [r.to_dict() for r in self.attacks]
        return doc


def run_accuracy_eval(
    store: Store,
    attacks: list[AttackConfig],
    cfg: QueryConfig,
    n_queries: int,
    seed: int,
    p_list: tuple[int, ...] = (2, 5, 10, 20),
    workers: int = 1,
) -> EvalReport:
    """Paired drew/naive accuracy over an attack suite.

    Attacks are independent (disjoint substreams), so they may run in
    parallel workers; records keep suite order either way.
    """
    if not store.clustered:
        raise ValueError("evaluation needs a preprocessed store")
    if n_queries < 1:
        raise ValueError("n_queries must be positive")

    def one(attack):
        return _evaluate_attack(store, attack, cfg, n_queries, seed, p_list)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(one, attacks))
    else:
        records = [one(a) for a in attacks]
    spec = store.spec
    return EvalReport(
        store_size=len(store),
        d=store.d,
        k=spec.k,
        n=spec.n,
        design_p=spec.design_p,
        n_queries=n_queries,
        seed=seed,
        config={
            "reliability_threshold": cfg.reliability_threshold,
            "tau_r": cfg.tau_r,
            "reliability_mode": cfg.reliability_mode,
        },
        attacks=records,
    )


# ---------------------------------------------------------------------------
# routing error
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EpsilonEstimate:
    p_a: float
    value: float
    n_reliable: int
    n_trials: int
    low_support: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def estimate_epsilon_r(
    store: Store,
    attack: AttackConfig,
    n_trials: int,
    seed: int,
    cfg: QueryConfig = QueryConfig(),
) -> EpsilonEstimate:
    """Monte-Carlo P(decoded cluster wrong | reliable) for one attack.

    When no trial raises the reliable flag the estimate is reported as 0
    with ``low_support`` set; the caller decides what to make of it.
    """
    if not store.clustered:
        raise ValueError("estimate_epsilon_r needs a preprocessed store")
    if n_trials < 1:
        raise ValueError("n_trials must be positive")
    spec = store.spec
    smp = substream(seed, f"epsilon/{attack.name}/sample")
    kstream = substream(seed, f"epsilon/{attack.name}/key")
    wrong_reliable = 0
    n_rel = 0
    chunk = 20000
    for lo in range(0, n_trials, chunk):
        count = min(chunk, n_trials - lo)
        gt_idx = smp.integers(0, len(store), size=count)
        gt_cluster = store.clusters[gt_idx]
        keys = store.cluster_keys[gt_cluster]
        if attack.p_a > 0.0:
            keys = keys ^ (kstream.random(keys.shape) < attack.p_a).astype(np.uint8)
        llrs = ecc.llr_from_keys(spec, keys, spec.design_p)
        codes, _, rel, _, _ = ecc.decode_batch(
            spec, llrs, cfg.reliability_threshold, cfg.reliability_mode
        )
        dec = ecc.codes_to_ints(codes)
        n_rel += int(rel.sum())
        wrong_reliable += int((rel & (dec != gt_cluster)).sum())
    low = n_rel == 0
    return EpsilonEstimate(
        p_a=attack.p_a,
        value=0.0 if low else wrong_reliable / n_rel,
        n_reliable=n_rel,
        n_trials=n_trials,
        low_support=low,
    )


def epsilon_sweep(
    store: Store,
    p_grid,
    n_trials: int,
    seed: int,
    cfg: QueryConfig = QueryConfig(),
) -> list[EpsilonEstimate]:
    """estimate_epsilon_r across a flip-rate grid (sigma plays no role)."""
    out = []
    for p in p_grid:
        attack = AttackConfig(name=f"flip_{float(p)!r}", p_a=float(p), sigma=0.0)
        out.append(estimate_epsilon_r(store, attack, n_trials, seed, cfg))
    return out


def epsilon_band(p_golden: float, n_golden: int, n_run: int) -> float:
    """3-sigma binomial band for comparing two estimates of the same rate,
    padded by a rule-of-three floor so zero-count cells stay testable."""
    var = p_golden * (1.0 - p_golden) * (1.0 / n_golden + 1.0 / n_run)
    return 3.0 * math.sqrt(var) + 3.0 / min(n_golden, n_run)


def check_epsilon_goldens(
    store: Store,
    golden: dict,
    seed: int,
    n_trials: int | None = None,
    cfg: QueryConfig | None = None,
) -> tuple[bool, list[dict]]:
    """Re-estimate the epsilon_r curve and compare against a golden document.

    The golden document pins the code spec, threshold, mode, grid, trial
    count, and the calibrated values; the check runs with its own seed and
    passes when every point lands inside :func:`epsilon_band`.
    """
    spec = store.spec
    for key in ("k", "n", "block_len", "design_p"):
        if golden["spec"][key] != getattr(spec, key):
            raise ValueError(f"golden spec field {key!r} does not match the store")
    if cfg is None:
        cfg = QueryConfig(
            reliability_threshold=float(golden["threshold"]),
            reliability_mode=str(golden["reliability_mode"]),
        )
    n_run = int(n_trials or golden["n_trials"])
    rows = []
    all_ok = True
    for point in golden["points"]:
        est = estimate_epsilon_r(
            store,
            AttackConfig(name=f"flip_{float(point['p_A'])!r}", p_a=float(point["p_A"]), sigma=0.0),
            n_run,
            seed,
            cfg,
        )
        band = epsilon_band(float(point["value"]), int(golden["n_trials"]), n_run)
        ok = abs(est.value - float(point["value"])) <= band
        all_ok &= ok
        rows.append(
            {
                "p_A": est.p_a,
                "golden": float(point["value"]),
                "estimate": est.value,
                "band": band,
                "n_reliable": est.n_reliable,
                "ok": ok,
            }
        )
    return all_ok, rows


# ---------------------------------------------------------------------------
# gain lower bound
# ---------------------------------------------------------------------------

def lemma1_bound(alpha_p: float, alpha: float, k: int, p: int) -> float:
    """(alpha_p - alpha) * (1 - 2**-k) ** (p - 1), one term of the max."""
    if p < 2:
        raise ValueError("p must be >= 2")
    return (alpha_p - alpha) * (1.0 - 2.0 ** (-k)) ** (p - 1)


@dataclass(frozen=True)
class Lemma1Record:
    k: int
    n_queries: int
    seed: int
    lhs: float
    alpha: float
    alpha_p: dict
    bound: float
    best_p: int
    band: float
    holds: bool

    def to_dict(self) -> dict:
        doc = dict(self.__dict__)
        doc["alpha_p"] = {str(p): v for p, v in self.alpha_p.items()}
        return doc


def lemma1_check(
    store: Store,
    attack: AttackConfig,
    k: int,
    p_list: tuple[int, ...],
    n_queries: int,
    seed: int,
) -> Lemma1Record:
    """Check the top-p displacement bound with oracle routing.

    The left side is P(cluster-scoped argmax = item and full argmax != item)
    where the scope is the item's true cluster; the right side is the best
    ``lemma1_bound`` term over ``p_list``.  Holds up to 3-sigma paired noise.
    """
    if not store.clustered:
        raise ValueError("lemma1_check needs a preprocessed store")
    if store.spec.k == k:
        labels = store.clusters
    else:
        if not 1 <= k <= 30:
            raise ValueError("k out of range")
        labels = substream(seed, "lemma-partition").integers(0, 1 << k, size=len(store)).astype(np.int64)
    keys, embs, gt_idx = _attack_queries(store, attack, n_queries, seed)
    del keys  # oracle routing: the decoder plays no part here
    gt_ids = store.ids[gt_idx].astype(np.int64)
    naive_idx, _, gt_rank = _full_scan_with_ranks(store, embs, gt_idx)

    scoped_idx = np.empty(len(gt_idx), dtype=np.intp)
    groups: dict[int, list[int]] = {}
    for i, lab in enumerate(labels[gt_idx].tolist()):
        groups.setdefault(int(lab), []).append(i)
    for lab, rows in groups.items():
        members = np.flatnonzero(labels == lab)
        idx, _ = scan_top1(store.embeddings[members], store.ids[members], embs[rows])
        scoped_idx[rows] = members[idx]

    lhs_i = (store.ids[scoped_idx].astype(np.int64) == gt_ids) & (naive_idx != gt_idx)
    top1_i = gt_rank == 1
    alpha = float(top1_i.mean())
    alpha_p = {int(p): float((gt_rank <= p).mean()) for p in p_list}
    terms = {p: lemma1_bound(alpha_p[p], alpha, k, p) for p in p_list}
    best_p = max(terms, key=lambda p: (terms[p], -p))
    scale = (1.0 - 2.0 ** (-k)) ** (best_p - 1)
    v = lhs_i.astype(np.float64) - scale * ((gt_rank <= best_p).astype(np.float64) - top1_i)
    band = 3.0 * float(v.std(ddof=0)) / math.sqrt(len(v))
    return Lemma1Record(
        k=k,
        n_queries=int(len(gt_idx)),
        seed=seed,
        lhs=float(lhs_i.mean()),
        alpha=alpha,
        alpha_p=alpha_p,
        bound=float(terms[best_p]),
        best_p=int(best_p),
        band=band,
        holds=bool(v.mean() >= -band),
    )


# ---------------------------------------------------------------------------
# detection ROC
# ---------------------------------------------------------------------------

def roc_curve(pos: np.ndarray, neg: np.ndarray):
    """Threshold sweep over the pooled scores; returns (fpr, tpr, thr)."""
    pos = np.asarray(pos, dtype=np.float64)
    neg = np.asarray(neg, dtype=np.float64)
    if pos.size == 0 or neg.size == 0:
        raise ValueError("roc_curve needs scores on both sides")
    thr = np.unique(np.concatenate([pos, neg]))[::-1]
    ps = np.sort(pos)
    ns = np.sort(neg)
    tpr = (pos.size - np.searchsorted(ps, thr, side="left")) / pos.size
    fpr = (neg.size - np.searchsorted(ns, thr, side="left")) / neg.size
    fpr = np.concatenate([[0.0], fpr])
    tpr = np.concatenate([[0.0], tpr])
    return fpr, tpr, thr


def auroc(pos: np.ndarray, neg: np.ndarray) -> float:
    fpr, tpr, _ = roc_curve(pos, neg)
    return float(np.trapezoid(tpr, fpr))


def tpr_at_fpr(pos: np.ndarray, neg: np.ndarray, max_fpr: float = 0.1) -> float:
    """Largest TPR over thresholds keeping FPR <= max_fpr."""
    fpr, tpr, _ = roc_curve(pos, neg)
    mask = fpr <= max_fpr + 1e-12
    return float(tpr[mask].max())


@dataclass(frozen=True)
class RocRecord:
    attack: str
    n_in: int
    n_out: int
    seed: int
    auroc_drew: float
    auroc_naive: float
    tpr_at_fpr_0_1_drew: float
    tpr_at_fpr_0_1_naive: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def roc_eval(
    store: Store,
    attack: AttackConfig,
    n_in: int,
    n_out: int,
    seed: int,
    cfg: QueryConfig = QueryConfig(),
    pool: np.ndarray | None = None,
) -> RocRecord:
    """Paired AUROC / TPR@FPR=0.1 for drew and naive best-similarity scores.

    Positives are attacked in-dataset queries; negatives draw a held-out
    embedding and a uniform random key (no watermark).
    """
    from .pipeline import batch_query  # local import avoids a cycle

    if pool is None:
        pool = heldout_pool(max(n_out, 1), store.d, seed)
    keys_in, embs_in, _ = _attack_queries(store, attack, n_in, seed)
    ood = AttackConfig(name=f"{attack.name}/ood", p_a=attack.p_a, sigma=attack.sigma,
                       out_of_dataset=True)
    streams = AttackStreams.for_attack(seed, ood.name)
    n_bits = store.spec.n
    keys_out = np.empty((n_out, n_bits), dtype=np.uint8)
    embs_out = np.empty((n_out, store.d))
    for i in range(n_out):
        q = apply_attack(None, ood, streams, heldout_pool=pool, key_len=n_bits)
        keys_out[i] = q.observed_key
        embs_out[i] = q.observed_embedding
    keys = np.concatenate([keys_in, keys_out])
    embs = np.concatenate([embs_in, embs_out])
    drew_scores = np.array([r.similarity for r in batch_query(store, keys, embs, cfg)])
    naive_scores = np.array(
        [r.similarity for r in batch_query(store, None, embs, cfg, naive=True)]
    )
    return RocRecord(
        attack=attack.name,
        n_in=n_in,
        n_out=n_out,
        seed=seed,
        auroc_drew=auroc(drew_scores[:n_in], drew_scores[n_in:]),
        auroc_naive=auroc(naive_scores[:n_in], naive_scores[n_in:]),
        tpr_at_fpr_0_1_drew=tpr_at_fpr(drew_scores[:n_in], drew_scores[n_in:]),
        tpr_at_fpr_0_1_naive=tpr_at_fpr(naive_scores[:n_in], naive_scores[n_in:]),
    )


# ---------------------------------------------------------------------------
# rate limit curve
# ---------------------------------------------------------------------------

def capacity_curve(p_grid) -> list[dict]:
    """Rows of (p_A, channel capacity, implied minimum redundancy n/k).

    Redundancy is 1/capacity; beyond :data:`REDUNDANCY_CAP` (and at
    capacity 0) it is reported as unbounded (inf).
    """
    rows = []
    for p in np.asarray(p_grid, dtype=np.float64):
        cap = float(ecc.capacity_rate(p))
        red = math.inf if cap <= 1.0 / REDUNDANCY_CAP else 1.0 / cap
        rows.append({"p_A": float(p), "capacity": cap, "min_redundancy": red})
    return rows


# ---------------------------------------------------------------------------
# oracle-routed subset accuracy
# ---------------------------------------------------------------------------

def cluster_subset_accuracy(
    store: Store,
    attack: AttackConfig,
    k_grid,
    n_queries: int,
    seed: int,
) -> list[dict]:
    """Retrieval accuracy when the scan is restricted to the true cluster,
    for several partition sizes.

    Partitions are nested (labels mod 2**k), and the same attacked queries
    are reused for every k, so accuracy is non-decreasing in k point by
    point.  ``k = 0`` means the full store, i.e. the naive scan.
    """
    k_grid = [int(k) for k in k_grid]
    if any(k < 0 or k > 16 for k in k_grid):
        raise ValueError("k values must lie in [0, 16]")
    k_max = max(k_grid)
    labels = (
        substream(seed, "subset-labels").integers(0, 1 << k_max, size=len(store)).astype(np.int64)
        if k_max > 0
        else np.zeros(len(store), dtype=np.int64)
    )
    keys, embs, gt_idx = _attack_queries(store, attack, n_queries, seed)
    del keys
    gt_ids = store.ids[gt_idx].astype(np.int64)
    rows = []
    for k in k_grid:
        mod = labels & ((1 << k) - 1)
        hit = np.zeros(len(gt_idx), dtype=bool)
        groups: dict[int, list[int]] = {}
        for i, lab in enumerate(mod[gt_idx].tolist()):
            groups.setdefault(int(lab), []).append(i)
        for lab, qrows in groups.items():
            members = np.flatnonzero(mod == lab)
            idx, _ = scan_top1(store.embeddings[members], store.ids[members], embs[qrows])
            hit[qrows] = store.ids[members][idx].astype(np.int64) == gt_ids[qrows]
        rows.append({"k": k, "accuracy": float(hit.mean())})
    return rows


# ---------------------------------------------------------------------------
# code-only frame error sweep
# ---------------------------------------------------------------------------

def fer_sweep(
    spec: ecc.PolarCodeSpec,
    p_grid,
    frames: int,
    seed: int,
    threshold: float = 0.5,
    mode: str = "last-bit",
) -> list[dict]:
    """Frame error rate of the code alone across flip rates."""
    if frames < 1:
        raise ValueError("frames must be positive")
    rows = []
    table = ecc.encode_all(spec)
    for p in p_grid:
        p = float(p)
        if not 0.0 <= p <= 0.5:
            raise ValueError("flip rates must lie in [0, 0.5]")
        rng = substream(seed, f"fer/p={p!r}")
        msgs = rng.integers(0, 1 << spec.k, size=frames)
        keys = table[msgs]
        if p > 0.0:
            keys = keys ^ (rng.random(keys.shape) < p).astype(np.uint8)
        llrs = ecc.llr_from_keys(spec, keys, spec.design_p)
        codes, _, rel, _, _ = ecc.decode_batch(spec, llrs, threshold, mode)
        dec = ecc.codes_to_ints(codes)
        errors = int((dec != msgs).sum())
        fer = errors / frames
        rows.append(
            {
                "p_A": p,
                "frames": frames,
                "errors": errors,
                "fer": fer,
                "stderr": math.sqrt(max(fer * (1.0 - fer), 1.0 / frames) / frames),
                "p_reliable": float(rel.mean()),
            }
        )
    return rows
