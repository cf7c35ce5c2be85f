"""Command-line surface: build stores, run queries, evaluate, emit curves.

Exit codes: 0 success, 1 usage, 2 data error, 3 acceptance-band violation,
4 calibration required (golden numbers missing; candidates were written).
Errors are reported as one JSON object on stderr.  All output files are
written atomically (temp file + rename) and contain no timestamps, so a
rerun with the same seeds is byte-identical.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from importlib import resources

import numpy as np

from . import ecc, evaluation
from .backends import active_backend, available_backends, set_backend
from .channel import AttackConfig, default_suite, load_suite
from .pipeline import QueryConfig, batch_query, preprocess
from .store import Store, StoreFormatError, ingest_csv, load_store, save_store
from .synthetic import synthetic_store

CURVE_HEADER = "attack,p_A,sigma,metric,value,stderr,seed"

_STAGES = ("accuracy", "epsilon", "lemma1", "roc", "subset", "capacity-curve")


class CliError(Exception):
    exit_code = 2

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class UsageError(CliError):
    exit_code = 1


class DataError(CliError):
    exit_code = 2


class AcceptanceError(CliError):
    exit_code = 3


class CalibrationRequired(CliError):
    exit_code = 4


# ---------------------------------------------------------------------------
# config plumbing
# ---------------------------------------------------------------------------

_CONFIG_KEYS = {
    "store", "out_dir", "k", "n", "design_p", "seed",
    "reliability_threshold", "tau_r", "reliability_mode",
    "suite", "golden", "n_queries", "n_trials", "synthetic", "csv",
}

_DEFAULTS = {
    "k": 10,
    "n": 100,
    "design_p": 0.1,
    "seed": 7,
    "reliability_threshold": 0.5,
    "tau_r": -1.0,
    "reliability_mode": "last-bit",
    "n_queries": 2000,
    "n_trials": 100000,
}


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise DataError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise DataError(f"config file is not valid JSON: {exc}")
    if not isinstance(doc, dict):
        raise DataError("config file must hold a JSON object")
    unknown = sorted(set(doc) - _CONFIG_KEYS)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    return doc


def _setting(args, config: dict, key: str, default=None):
    """Flag wins over config file; config wins over the built-in default."""
    val = getattr(args, key.replace("-", "_"), None)
    if val is not None:
        return val
    if key in config:
        return config[key]
    return _DEFAULTS.get(key, default)


def _out_dir(args, config) -> str:
    out = _setting(args, config, "out_dir") or os.environ.get("DREW_OUT_DIR") or "."
    os.makedirs(out, exist_ok=True)
    return out


def _query_config(args, config) -> QueryConfig:
    return QueryConfig(
        reliability_threshold=float(_setting(args, config, "reliability_threshold")),
        tau_r=float(_setting(args, config, "tau_r")),
        reliability_mode=str(_setting(args, config, "reliability_mode")),
    )


# ---------------------------------------------------------------------------
# atomic output helpers
# ---------------------------------------------------------------------------

def _write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_text(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _fmt(v) -> str:
    if isinstance(v, float):
        if math.isinf(v):
            return "inf"
        return f"{v:.10g}"
    return str(v)


def _curve_text(rows: list[tuple]) -> str:
    out = [CURVE_HEADER]
    for row in rows:
        out.append(",".join(_fmt(v) for v in row))
    return "\n".join(out) + "\n"


def _binom_se(p: float, n: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / n)


def _print_json(doc) -> None:
    sys.stdout.write(_json_text(doc))


# ---------------------------------------------------------------------------
# build
# ---------------------------------------------------------------------------

def _parse_synthetic(tokens, config) -> tuple[int, int]:
    params = {}
    if isinstance(config.get("synthetic"), dict):
        params.update(config["synthetic"])
    for tok in tokens or ():
        if "=" not in tok:
            raise UsageError(f"--synthetic expects key=value tokens, got {tok!r}")
        key, _, val = tok.partition("=")
        params[key.strip()] = val.strip()
    count = int(params.get("N", params.get("count", 20000)))
    d = int(params.get("d", 64))
    if count < 1 or d < 1:
        raise UsageError("synthetic store needs N >= 1 and d >= 1")
    return count, d


def cmd_build(args) -> int:
    config = _load_config(args.config)
    seed = int(_setting(args, config, "seed"))
    k = int(_setting(args, config, "k"))
    n = int(_setting(args, config, "n"))
    design_p = float(_setting(args, config, "design_p"))
    csv_path = _setting(args, config, "csv")
    out_dir = _out_dir(args, config)
    store_path = _setting(args, config, "store") or os.path.join(out_dir, "store.drew")

    if csv_path is not None and args.synthetic is not None:
        raise UsageError("choose one of --csv and --synthetic")
    if csv_path is not None:
        if not os.path.exists(csv_path):
            raise DataError(f"csv file not found: {csv_path}")
        raw = ingest_csv(csv_path)
    else:
        count, d = _parse_synthetic(args.synthetic, config)
        raw = synthetic_store(count, d, seed)

    store = preprocess(raw, k=k, seed=seed, n=n, design_p=design_p)
    save_store(store, store_path)

    sizes = np.bincount(store.clusters, minlength=1 << k)
    hist: dict[str, int] = {}
    for size in sizes.tolist():
        hist[str(size)] = hist.get(str(size), 0) + 1
    _print_json(
        {
            "store": store_path,
            "count": len(store),
            "d": store.d,
            "k": k,
            "n": n,
            "design_p": design_p,
            "seed": seed,
            "clusters": {
                "total": int(1 << k),
                "empty": int((sizes == 0).sum()),
                "max_size": int(sizes.max()),
                "histogram": hist,
            },
        }
    )
    return 0


# ---------------------------------------------------------------------------
# query
# ---------------------------------------------------------------------------

def _parse_key(raw, n: int) -> np.ndarray:
    if isinstance(raw, str):
        if len(raw) != n or set(raw) - {"0", "1"}:
            raise ValueError(f"key must be {n} characters of 0/1")
        return np.frombuffer(raw.encode(), dtype=np.uint8) - ord("0")
    bits = np.asarray(raw, dtype=np.int64)
    if bits.shape != (n,) or not np.isin(bits, (0, 1)).all():
        raise ValueError(f"key must be {n} bits")
    return bits.astype(np.uint8)


def _parse_query_line(line: str, lineno: int, store: Store, naive: bool):
    doc = json.loads(line)
    if not isinstance(doc, dict):
        raise ValueError("query line must be a JSON object")
    qid = doc.get("query_id", lineno)
    emb = np.asarray(doc["embedding"], dtype=np.float64)
    if emb.shape != (store.d,):
        raise ValueError(f"embedding must have dim {store.d}")
    norm = np.linalg.norm(emb)
    if not np.isfinite(norm) or norm == 0.0:
        raise ValueError("embedding must be finite and nonzero")
    emb = emb / norm
    key = None
    if not naive:
        if "key" not in doc:
            raise ValueError("drew queries need a 'key' field (or use --naive)")
        key = _parse_key(doc["key"], store.spec.n)
    return qid, key, emb, doc.get("ground_truth_id")


def cmd_query(args) -> int:
    config = _load_config(args.config)
    store_path = _setting(args, config, "store")
    if store_path is None:
        raise UsageError("query needs --store")
    store = load_store(store_path)
    cfg = _query_config(args, config)

    if args.queries == "-":
        lines = sys.stdin.read().splitlines()
    else:
        if not os.path.exists(args.queries):
            raise DataError(f"query file not found: {args.queries}")
        with open(args.queries, encoding="utf-8") as fh:
            lines = fh.read().splitlines()

    parsed = []
    records: list[dict | None] = []
    for i, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            parsed.append(_parse_query_line(line, i, store, args.naive))
            records.append(None)
        except (ValueError, KeyError, json.JSONDecodeError) as exc:
            records.append({"query_id": i, "error": str(exc)})
            parsed.append(None)

    good = [p for p in parsed if p is not None]
    if good:
        embs = np.stack([p[2] for p in good])
        keys = None if args.naive else np.stack([p[1] for p in good])
        results = batch_query(store, keys, embs, cfg, naive=args.naive)
    else:
        results = []

    it = iter(results)
    good_it = iter(good)
    out_lines = []
    for rec, p in zip(records, parsed):
        if rec is not None:
            out_lines.append(json.dumps(rec, sort_keys=True))
            continue
        qid, _, _, gt = next(good_it)
        res = next(it)
        doc = res.to_dict()
        doc["query_id"] = qid
        doc["ground_truth_id"] = gt
        out_lines.append(json.dumps(doc, sort_keys=True))
    text = "\n".join(out_lines) + ("\n" if out_lines else "")
    if args.out is None or args.out == "-":
        sys.stdout.write(text)
    else:
        _write_atomic(args.out, text)
    return 0


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

def _default_golden_text() -> str | None:
    ref = resources.files("drew").joinpath("data/golden_epsilon_r.json")
    if not ref.is_file():
        return None
    return ref.read_text(encoding="utf-8")


def _load_golden(path: str | None) -> dict | None:
    if path is not None:
        if not os.path.exists(path):
            return None
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    text = _default_golden_text()
    return None if text is None else json.loads(text)


def _stage_accuracy(store, suite, cfg, n_queries, seed, workers):
    report = evaluation.run_accuracy_eval(
        store, suite, cfg, n_queries, seed, workers=workers
    )
    rows = []
    violations = []
    for r in report.attacks:
        for metric, value in (
            ("acc_drew", r.acc_drew),
            ("acc_naive", r.acc_naive),
            ("epsilon_r", r.epsilon_r),
            ("p_reliable", r.p_reliable),
            ("gain_term", r.gain_term),
            ("loss_term", r.loss_term),
        ):
            rows.append(
                (r.name, r.p_a, r.sigma, metric, value, _binom_se(value, r.n_queries), seed)
            )
        rows.append((r.name, r.p_a, r.sigma, "difference", r.difference, r.eq1_band / 3.0, seed))
        if not r.eq1_ok:
            violations.append(f"eq1 decomposition band failed for attack {r.name}")
        if not r.never_worse_ok:
            violations.append(f"never-worse band failed for attack {r.name}")
        if not r.fallback_identity:
            violations.append(f"fallback identity failed for attack {r.name}")
    return report.to_dict(), rows, violations


def _stage_epsilon(store, golden, out_dir, seed, n_trials, cfg):
    """Golden-number check; returns (section, rows, violations, missing)."""
    spec = store.spec
    if golden is None:
        grid = [0.05, 0.10, 0.15, 0.20, 0.25, 0.30]
        estimates = evaluation.epsilon_sweep(store, grid, n_trials, seed, cfg)
        candidate = {
            "spec": spec.to_dict(),
            "threshold": cfg.reliability_threshold,
            "reliability_mode": cfg.reliability_mode,
            "n_trials": n_trials,
            "seed": seed,
            "points": [{"p_A": e.p_a, "value": e.value, "n_reliable": e.n_reliable}
                       for e in estimates],
        }
        path = os.path.join(out_dir, "golden_epsilon_r.candidate.json")
        _write_atomic(path, _json_text(candidate))
        return {"status": "calibration-required", "candidate": path}, [], [], True
    mismatch = [
        key for key in ("k", "n", "block_len", "design_p")
        if golden["spec"][key] != getattr(spec, key)
    ]
    if mismatch:
        return (
            {"status": "skipped", "reason": f"store spec differs from golden: {mismatch}"},
            [], [], False,
        )
    golden_cfg = QueryConfig(
        reliability_threshold=float(golden["threshold"]),
        reliability_mode=str(golden["reliability_mode"]),
    )
    ok, rows = evaluation.check_epsilon_goldens(
        store, golden, seed, n_trials=n_trials, cfg=golden_cfg
    )
    curve = [
        ("epsilon_sweep", r["p_A"], 0.0, "epsilon_r", r["estimate"], r["band"] / 3.0, seed)
        for r in rows
    ]
    violations = [] if ok else [
        f"epsilon_r golden band failed at p_A={r['p_A']}" for r in rows if not r["ok"]
    ]
    return {"status": "ok" if ok else "violation", "points": rows}, curve, violations, False


def _stage_lemma1(store, n_queries, seed):
    attack = AttackConfig(name="lemma-regime", p_a=0.0, sigma=0.45)
    rec = evaluation.lemma1_check(
        store, attack, store.spec.k, (2, 5, 10, 20), n_queries, seed
    )
    violations = [] if rec.holds else ["lemma1 bound failed"]
    return rec.to_dict(), violations


def _stage_roc(store, suite, cfg, seed, n_in, n_out, attack_name):
    by_name = {a.name: a for a in suite}
    if attack_name not in by_name:
        raise UsageError(f"--roc-attack {attack_name!r} is not in the suite")
    rec = evaluation.roc_eval(store, by_name[attack_name], n_in, n_out, seed, cfg)
    curve = [
        (attack_name, by_name[attack_name].p_a, by_name[attack_name].sigma,
         metric, value, 0.0, seed)
        for metric, value in (
            ("auroc_drew", rec.auroc_drew),
            ("auroc_naive", rec.auroc_naive),
            ("tpr_at_fpr_0_1_drew", rec.tpr_at_fpr_0_1_drew),
            ("tpr_at_fpr_0_1_naive", rec.tpr_at_fpr_0_1_naive),
        )
    ]
    violations = []
    if rec.auroc_drew < rec.auroc_naive - 0.01:
        violations.append("drew AUROC fell more than 0.01 below naive AUROC")
    return rec.to_dict(), curve, violations


def _stage_subset(store, seed, n_queries):
    attack = AttackConfig(name="subset-regime", p_a=0.0, sigma=0.5)
    k_grid = [0, 2, 4, 6, 8, 10, 12]
    rows = evaluation.cluster_subset_accuracy(store, attack, k_grid, n_queries, seed)
    curve = [
        ("subset-regime", 0.0, 0.5, f"subset_accuracy_k{r['k']}", r["accuracy"],
         _binom_se(r["accuracy"], n_queries), seed)
        for r in rows
    ]
    accs = [r["accuracy"] for r in rows]
    violations = []
    if any(a > b + 1e-12 for a, b in zip(accs, accs[1:])):
        violations.append("subset accuracy is not non-decreasing in k")
    return rows, curve, violations


def _capacity_rows(grid, seed) -> tuple[list[dict], list[tuple]]:
    table = evaluation.capacity_curve(grid)
    curve = []
    for row in table:
        curve.append(("-", row["p_A"], 0.0, "capacity", row["capacity"], 0.0, seed))
        curve.append(("-", row["p_A"], 0.0, "min_redundancy", row["min_redundancy"], 0.0, seed))
    return table, curve


def cmd_eval(args) -> int:
    config = _load_config(args.config)
    store_path = _setting(args, config, "store")
    if store_path is None:
        raise UsageError("eval needs --store")
    store = load_store(store_path)
    cfg = _query_config(args, config)
    seed = int(_setting(args, config, "seed"))
    n_queries = int(_setting(args, config, "n_queries"))
    n_trials = int(_setting(args, config, "n_trials"))
    out_dir = _out_dir(args, config)

    suite_path = _setting(args, config, "suite")
    if suite_path is not None:
        suite = load_suite(suite_path)
    else:
        suite = default_suite()
    in_dataset = [a for a in suite if not a.out_of_dataset]

    stages = list(_STAGES) if not args.only else args.only.split(",")
    for stage in stages:
        if stage not in _STAGES:
            raise UsageError(f"unknown stage {stage!r}; expected one of {', '.join(_STAGES)}")

    report: dict = {
        "store": {
            "path": store_path,
            "count": len(store),
            "d": store.d,
            "k": store.spec.k,
            "n": store.spec.n,
            "design_p": store.spec.design_p,
        },
        "config": {
            "seed": seed,
            "n_queries": n_queries,
            "n_trials": n_trials,
            "reliability_threshold": cfg.reliability_threshold,
            "tau_r": cfg.tau_r,
            "reliability_mode": cfg.reliability_mode,
        },
        "stages": stages,
    }
    violations: list[str] = []
    calibration_needed = False

    if "accuracy" in stages:
        section, rows, bad = _stage_accuracy(
            store, in_dataset, cfg, n_queries, seed, args.workers
        )
        report["accuracy"] = section
        violations += bad
        _write_atomic(os.path.join(out_dir, "accuracy.csv"), _curve_text(rows))
    if "epsilon" in stages:
        golden = _load_golden(_setting(args, config, "golden"))
        section, rows, bad, missing = _stage_epsilon(
            store, golden, out_dir, seed, n_trials, cfg
        )
        report["epsilon_golden"] = section
        violations += bad
        calibration_needed |= missing
        if rows:
            _write_atomic(os.path.join(out_dir, "epsilon.csv"), _curve_text(rows))
    if "lemma1" in stages:
        section, bad = _stage_lemma1(store, n_queries, seed)
        report["lemma1"] = section
        violations += bad
    if "roc" in stages:
        section, rows, bad = _stage_roc(
            store, suite, cfg, seed, args.n_in, args.n_out, args.roc_attack
        )
        report["roc"] = section
        violations += bad
        _write_atomic(os.path.join(out_dir, "roc.csv"), _curve_text(rows))
    if "subset" in stages:
        section, rows, bad = _stage_subset(store, seed, n_queries)
        report["subset"] = section
        violations += bad
        _write_atomic(os.path.join(out_dir, "subset.csv"), _curve_text(rows))
    if "capacity-curve" in stages:
        grid = np.round(np.linspace(0.0, 0.5, 51), 6).tolist()
        table, rows = _capacity_rows(grid, seed)
        report["capacity"] = table
        _write_atomic(os.path.join(out_dir, "capacity.csv"), _curve_text(rows))

    report["violations"] = violations
    report["calibration_required"] = calibration_needed
    exit_code = 3 if violations else (4 if calibration_needed else 0)
    report["exit_code"] = exit_code
    _write_atomic(os.path.join(out_dir, "report.json"), _json_text(report))
    _print_json(
        {
            "report": os.path.join(out_dir, "report.json"),
            "violations": violations,
            "calibration_required": calibration_needed,
            "exit_code": exit_code,
        }
    )
    return exit_code


# ---------------------------------------------------------------------------
# capacity-curve / ecc-bench
# ---------------------------------------------------------------------------

def _parse_grid(text: str) -> list[float]:
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError("grid must be start:stop:num or comma-separated points")
        start, stop, num = float(parts[0]), float(parts[1]), int(parts[2])
        if num < 2:
            raise UsageError("grid needs at least 2 points")
        return np.round(np.linspace(start, stop, num), 10).tolist()
    return [float(tok) for tok in text.split(",") if tok.strip()]


def cmd_capacity_curve(args) -> int:
    config = _load_config(args.config)
    seed = int(_setting(args, config, "seed"))
    grid = _parse_grid(args.grid)
    if any(p < 0.0 or p > 0.5 for p in grid):
        raise UsageError("capacity grid must lie within [0, 0.5]")
    _, rows = _capacity_rows(grid, seed)
    text = _curve_text(rows)
    if args.out is None or args.out == "-":
        sys.stdout.write(text)
    else:
        _write_atomic(args.out, text)
    return 0


def cmd_ecc_bench(args) -> int:
    config = _load_config(args.config)
    seed = int(_setting(args, config, "seed"))
    k = int(_setting(args, config, "k"))
    n = int(_setting(args, config, "n"))
    design_p = float(_setting(args, config, "design_p"))
    if args.backend is not None:
        if args.backend not in available_backends():
            raise DataError(
                f"backend {args.backend!r} unavailable; have {available_backends()}"
            )
        set_backend(args.backend)
    spec = ecc.construct_code(k, n, design_p)
    grid = _parse_grid(args.grid)
    rows = evaluation.fer_sweep(spec, grid, args.frames, seed)
    curve = []
    for r in rows:
        curve.append(("-", r["p_A"], 0.0, "fer", r["fer"], r["stderr"], seed))
        curve.append(
            ("-", r["p_A"], 0.0, "p_reliable", r["p_reliable"],
             _binom_se(r["p_reliable"], r["frames"]), seed)
        )
    text = _curve_text(curve)
    if args.out is None or args.out == "-":
        sys.stdout.write(text)
    else:
        _write_atomic(args.out, text)
    sys.stderr.write(f"backend: {active_backend()}\n")
    return 0


# ---------------------------------------------------------------------------
# parser / entry
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drew",
        description="Watermark-keyed cluster routing with error-corrected decoding "
        "over an exact embedding store.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--seed", type=int, default=None)

    b = sub.add_parser("build", help="build a clustered store (synthetic or CSV)")
    common(b)
    b.add_argument("--synthetic", nargs="*", metavar="KEY=VAL",
                   help="synthetic store parameters, e.g. N=20000 d=64")
    b.add_argument("--csv", default=None, help="ingest embeddings from CSV")
    b.add_argument("--store", default=None, help="output store path")
    b.add_argument("--out-dir", default=None)
    b.add_argument("--k", type=int, default=None)
    b.add_argument("--n", type=int, default=None)
    b.add_argument("--design-p", dest="design_p", type=float, default=None)
    b.set_defaults(func=cmd_build)

    q = sub.add_parser("query", help="run queries from a JSON-lines file")
    common(q)
    q.add_argument("--store", default=None)
    q.add_argument("--queries", required=True, help="JSONL file of queries, or - for stdin")
    q.add_argument("--naive", action="store_true", help="full-store scan, ignore keys")
    q.add_argument("--out", default=None, help="output JSONL path (default stdout)")
    q.add_argument("--reliability-threshold", dest="reliability_threshold",
                   type=float, default=None)
    q.add_argument("--tau-r", dest="tau_r", type=float, default=None)
    q.add_argument("--reliability-mode", dest="reliability_mode",
                   choices=("last-bit", "min-bit"), default=None)
    q.set_defaults(func=cmd_query)

    e = sub.add_parser("eval", help="run the evaluation suite and emit reports")
    common(e)
    e.add_argument("--store", default=None)
    e.add_argument("--suite", default=None, help="attack suite JSON (default: packaged)")
    e.add_argument("--golden", default=None, help="golden epsilon_r file (default: packaged)")
    e.add_argument("--out-dir", default=None)
    e.add_argument("--n-queries", dest="n_queries", type=int, default=None)
    e.add_argument("--n-trials", dest="n_trials", type=int, default=None)
    e.add_argument("--only", default=None,
                   help=f"comma-separated stages from: {', '.join(_STAGES)}")
    e.add_argument("--workers", type=int, default=1)
    e.add_argument("--n-in", dest="n_in", type=int, default=1000)
    e.add_argument("--n-out", dest="n_out", type=int, default=1000)
    e.add_argument("--roc-attack", default="crop_0.5")
    e.add_argument("--reliability-threshold", dest="reliability_threshold",
                   type=float, default=None)
    e.add_argument("--tau-r", dest="tau_r", type=float, default=None)
    e.add_argument("--reliability-mode", dest="reliability_mode",
                   choices=("last-bit", "min-bit"), default=None)
    e.set_defaults(func=cmd_eval)

    c = sub.add_parser("capacity-curve", help="rate limit table over flip rates")
    common(c)
    c.add_argument("--grid", default="0.0:0.5:51", help="start:stop:num or p1,p2,...")
    c.add_argument("--out", default=None)
    c.set_defaults(func=cmd_capacity_curve)

    x = sub.add_parser("ecc-bench", help="frame-error-rate sweep for the code alone")
    common(x)
    x.add_argument("--k", type=int, default=None)
    x.add_argument("--n", type=int, default=None)
    x.add_argument("--design-p", dest="design_p", type=float, default=None)
    x.add_argument("--grid", default="0.0,0.05,0.1,0.15,0.2,0.25,0.3")
    x.add_argument("--frames", type=int, default=10000)
    x.add_argument("--backend", choices=("numpy", "numba"), default=None)
    x.add_argument("--out", default=None)
    x.set_defaults(func=cmd_ecc_bench)

    return parser


def _emit_error(exc: CliError) -> None:
    sys.stderr.write(
        json.dumps(
            {"error": type(exc).__name__, "message": exc.message,
             "exit_code": exc.exit_code},
            sort_keys=True,
        )
        + "\n"
    )


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage problems; the contract reserves 2 for
        # data errors, so remap while keeping --help's clean exit.
        return 0 if exc.code == 0 else 1
    try:
        return args.func(args)
    except CliError as exc:
        _emit_error(exc)
        return exc.exit_code
    except (StoreFormatError, ValueError, KeyError) as exc:
        _emit_error(DataError(str(exc)))
        return 2
    except OSError as exc:
        _emit_error(DataError(str(exc)))
        return 2


def entrypoint() -> None:
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    entrypoint()
