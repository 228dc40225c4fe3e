"""End-to-end commands: feature extraction, class similarity, detection, and website audit."""
from __future__ import annotations

import glob
import io
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence

import numpy as np

from . import statfit
from .audit import (HttpFetcher, build_resource_profile, build_whois_graph, cluster_resource_profiles,
                    collect_documents, flagged_urls, load_corpus, load_signatures, read_whois_jsonl,
                    scan_signatures)
from .config import PipelineConfig
from .errors import DegenerateDataError, InputError
from .features import (FEATURE_NAMES, WINDOW_FEATURES, catalog_document, extract_features, feature_matrix,
                       read_feature_matrix, temporal_field_names, write_feature_matrix)
from .ingest import ALL, Granularity, Label, LabelMap, parse_dns_log, read_domain_list, segment
from .ml import (cluster_window, evaluate, flag_suspicious, score_malicious_probability, split_dataset,
                 standardize, train_decision_tree, write_scores_csv)

log = logging.getLogger(__name__)

FEATURES_DIR, SIMILARITY_DIR, DETECT_DIR, AUDIT_DIR = "features", "similarity", "detect", "audit"
MIN_CLASS_SAMPLES = 10


def _write_text(path: str, text: str) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def _write_json(path: str, doc) -> str:
    return _write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _pool_map(fn: Callable, items: Sequence, workers: int) -> list:
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _label_map(cfg: PipelineConfig) -> LabelMap:
    lists = {name: getattr(cfg, name) for name in ("benign", "malicious", "cryptojacked")}
    return LabelMap.from_lists(**{k: read_domain_list(v, k) if v else () for k, v in lists.items()})


def window_label(hours: int) -> str:
    return Granularity.fixed(hours).label


# features ---------------------------------------------------------------

def run_features(cfg: PipelineConfig) -> list[str]:
    """Write the ALL matrix, one matrix per fixed-width window, and the feature catalog."""
    cfg.validate(required=("log",))
    parsed = parse_dns_log(cfg.log, cfg.log_format)
    if not parsed.records:
        raise DegenerateDataError(f"empty dataset: no valid records in {cfg.log}")
    labels = _label_map(cfg)
    root = os.path.join(cfg.out, FEATURES_DIR)
    written = []

    whole = extract_features(segment(parsed.records, ALL), threshold_frac=cfg.burst_fraction)
    written.append(_write_text(os.path.join(root, "ALL.csv"), _matrix_csv(whole, labels)))

    gran = Granularity.fixed(cfg.granularity_hours)
    windows = segment(parsed.records, gran)
    wdir = os.path.join(root, gran.label)
    for stale in glob.glob(os.path.join(wdir, "window_*.csv")):
        os.remove(stale)

    def one(item):
        window, recs = item
        return extract_features([(window, recs)], threshold_frac=cfg.burst_fraction)

    for (window, _), vectors in zip(windows, _pool_map(one, windows, cfg.workers)):
        path = os.path.join(wdir, f"window_{window.index:04d}.csv")
        written.append(_write_text(path, _matrix_csv(vectors, labels)))
    written.append(_write_text(os.path.join(root, "catalog.md"), catalog_document()))
    return written


def _matrix_csv(vectors, labels: LabelMap) -> str:
    buf = io.StringIO()
    write_feature_matrix(vectors, buf, {v.dn: labels.label(v.dn).value for v in vectors})
    return buf.getvalue()


def _read_matrix(path: str):
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            vectors, labels = read_feature_matrix(fh)
    except OSError as exc:
        raise InputError(f"cannot read feature matrix {path}: {exc}") from exc
    if labels is None:
        raise InputError(f"feature matrix {path} lacks a label column")
    return vectors, labels


# similarity -------------------------------------------------------------

def run_similarity(cfg: PipelineConfig, class_a: str | None = None, class_b: str | None = None,
                   features: Iterable[str] | None = None) -> list[str]:
    """Best fit per class and feature, the KL-divergence between them, and CDF plot data."""
    cfg.validate()
    class_a, class_b = class_a or cfg.class_a, class_b or cfg.class_b
    names = list(features or cfg.similarity_features or temporal_field_names())
    unknown = [n for n in names if n not in FEATURE_NAMES]
    if unknown:
        raise InputError(f"unknown feature names {unknown}")
    vectors, labels = _read_matrix(os.path.join(cfg.out, FEATURES_DIR, "ALL.csv"))
    X = feature_matrix(vectors)
    y = np.array([labels[v.dn] for v in vectors])
    for cls in (class_a, class_b):
        if not (y == cls).any():
            raise DegenerateDataError(f"class {cls!r} has no rows")

    root = os.path.join(cfg.out, SIMILARITY_DIR)
    for stale in glob.glob(os.path.join(root, "cdf_*.csv")):
        os.remove(stale)
    written, reports, skipped = [], [], []
    for name in names:
        col = X[:, FEATURE_NAMES.index(name)]
        samples = {cls: col[(y == cls) & (col > 0)] for cls in (class_a, class_b)}
        short = [cls for cls, s in samples.items() if len(s) < MIN_CLASS_SAMPLES]
        if short:
            log.warning("feature %s skipped: fewer than %d positive samples for %s", name, MIN_CLASS_SAMPLES, short)
            skipped.append({"feature": name, "reason": f"fewer than {MIN_CLASS_SAMPLES} positive samples",
                            "classes": short})
            continue
        fits = {cls: _best_fit(s) for cls, s in samples.items()}
        report = statfit.ComparisonReport(name, fits[class_a], fits[class_b], None, class_a, class_b)
        if fits[class_a].valid and fits[class_b].valid:
            try:
                report.kld_nats = statfit.kl_divergence(fits[class_a], fits[class_b])
            except DegenerateDataError as exc:
                report.notes.append(str(exc))
        else:
            report.notes.append("no valid fit")
        doc = report.to_dict()
        doc["n_samples"] = {cls: int(len(s)) for cls, s in samples.items()}
        reports.append(doc)
        for cls, fit in fits.items():
            if fit.valid:
                rows = ["value,empirical_cdf,model_cdf"]
                rows += [f"{v!r},{e!r},{m!r}" for v, e, m in statfit.cdf_plot_data(samples[cls], fit)]
                written.append(_write_text(os.path.join(root, f"cdf_{name}_{cls}.csv"), "\n".join(rows) + "\n"))
    written.append(_write_json(os.path.join(root, "report.json"),
                               {"class_a": class_a, "class_b": class_b, "features": reports, "skipped": skipped}))
    return written


def _best_fit(samples):
    try:
        return statfit.select_best_fit(samples)
    except DegenerateDataError as exc:
        return statfit.NoValidFit(str(exc), ())


# detect -----------------------------------------------------------------

def run_detect(cfg: PipelineConfig) -> list[str]:
    """Unsupervised malicious-probability scoring over window matrices, then the supervised tree."""
    cfg.validate()
    root = os.path.join(cfg.out, DETECT_DIR)
    return _detect_unsupervised(cfg, root) + _detect_supervised(cfg, root)


def _detect_unsupervised(cfg: PipelineConfig, root: str) -> list[str]:
    wdir = os.path.join(cfg.out, FEATURES_DIR, window_label(cfg.granularity_hours))
    paths = sorted(glob.glob(os.path.join(wdir, "window_*.csv")))
    if not paths:
        raise InputError(f"no window matrices under {wdir}; run the features command first")
    label_entries: dict[str, str] = {}
    loaded = []
    for path in paths:
        vectors, labels = _read_matrix(path)
        label_entries.update(labels)
        loaded.append((path, vectors))
    lmap = LabelMap({dn: lab for dn, lab in label_entries.items() if lab != Label.UNMARKED.value})
    if not any(lmap.is_known_malicious(dn) for dn in label_entries):
        raise DegenerateDataError("no labeled malicious DNs: malicious clusters cannot be identified")

    cols = list(WINDOW_FEATURES)

    def one(item):
        index, (_, vectors) = item
        dns = [v.dn for v in vectors]
        matrix = feature_matrix(vectors)[:, cols] if vectors else np.empty((0, len(cols)))
        return cluster_window(index, dns, matrix, cfg.window_k_range, cfg.seed)

    clusterings = _pool_map(one, list(enumerate(loaded)), cfg.workers)
    scores = score_malicious_probability([(c.dns, c.model) for c in clusterings], lmap)
    flagged = flag_suspicious(scores, cfg.probability_threshold)

    written = []
    buf = io.StringIO()
    write_scores_csv(scores, buf)
    written.append(_write_text(os.path.join(root, "scores.csv"), buf.getvalue()))
    buf = io.StringIO()
    write_scores_csv(flagged, buf)
    written.append(_write_text(os.path.join(root, "flagged.csv"), buf.getvalue()))
    written.append(_write_json(os.path.join(root, "unsupervised.json"), {
        "probability_threshold": cfg.probability_threshold,
        "window_k_range": list(cfg.window_k_range),
        "n_scored": len(scores),
        "n_flagged": len(flagged),
        "flagged": [s.dn for s in flagged],
        "windows": [{"window": os.path.basename(path),
                     "n_dns": len(c.dns),
                     "k": None if c.model is None else c.model.k,
                     "silhouette_table": {str(k): v for k, v in c.silhouette_table.items()}}
                    for (path, _), c in zip(loaded, clusterings)],
    }))
    return written


def _detect_supervised(cfg: PipelineConfig, root: str) -> list[str]:
    vectors, labels = _read_matrix(os.path.join(cfg.out, FEATURES_DIR, "ALL.csv"))
    keep = [i for i, v in enumerate(vectors) if labels[v.dn] in cfg.positive_labels + cfg.negative_labels]
    y = np.array([int(labels[vectors[i].dn] in cfg.positive_labels) for i in keep])
    if len(set(y.tolist())) < 2:
        raise DegenerateDataError("supervised training needs both positive and negative rows")
    X = standardize(feature_matrix(vectors)[keep])
    train, test = split_dataset(X, y, cfg.train_frac, cfg.seed)
    if len(test) == 0:
        raise DegenerateDataError("stratified split left no test rows")
    hp = cfg.hyperparameters()
    model = train_decision_tree(X[train], y[train], hp)
    metrics = evaluate(model, X[test], y[test])
    pred = model.predict(X[test])

    written = [_write_text(os.path.join(root, "tree.json"), model.to_json() + "\n")]
    doc = metrics.to_dict()
    doc.update({"preset": cfg.preset, "hyperparameters": model.to_dict()["hyperparameters"],
                "positive_labels": list(cfg.positive_labels), "negative_labels": list(cfg.negative_labels),
                "n_train": int(len(train)), "n_test": int(len(test)), "tree_depth": model.depth,
                "seed": cfg.seed})
    written.append(_write_json(os.path.join(root, "metrics.json"), doc))
    rows = ["dn,label,predicted"]
    rows += [f"{vectors[keep[i]].dn},{y[i]},{p}" for i, p in zip(test.tolist(), pred.tolist())]
    written.append(_write_text(os.path.join(root, "predictions.csv"), "\n".join(rows) + "\n"))
    return written


# audit ------------------------------------------------------------------

def read_capture_manifest(path: str) -> list[tuple[str, dict, dict]]:
    """jsonl of ``{"url", "t0": {kind: file or {"text": ...}}, "t1": {...}}``; files are relative to the manifest."""
    base = os.path.dirname(os.path.abspath(path))
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                entry = json.loads(line)
                sets = [{kind: _capture_text(base, ref) for kind, ref in entry[key].items()} for key in ("t0", "t1")]
            except (ValueError, KeyError, TypeError, AttributeError, OSError) as exc:
                raise InputError(f"{path}:{lineno}: bad capture entry: {exc}") from exc
            out.append((entry["url"], sets[0], sets[1]))
    return out


def _read_url_list(path: str) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip() and not line.lstrip().startswith("#")]


def _capture_text(base: str, ref) -> str:
    if isinstance(ref, dict):
        return str(ref["text"])
    with open(os.path.join(base, ref), encoding="utf-8") as fh:
        return fh.read()


def run_audit(cfg: PipelineConfig) -> list[str]:
    """Signature scan, resource-profile clustering, and whois graph, each when its input is configured."""
    cfg.validate()
    if cfg.corpus is None and cfg.urls is None:
        raise InputError("audit needs a document corpus or a URL list")
    root = os.path.join(cfg.out, AUDIT_DIR)
    signatures = load_signatures(cfg.signatures)
    if cfg.corpus is not None:
        fetcher = load_corpus(cfg.corpus)
        urls = _read_url_list(cfg.urls) if cfg.urls else sorted(fetcher.pages)
    else:
        fetcher = HttpFetcher()
        urls = _read_url_list(cfg.urls)
    docs, failures = collect_documents(urls, fetcher, cfg.fetch_concurrency)
    if not docs:
        raise InputError("no documents could be processed")
    hits = scan_signatures(docs, signatures)
    flagged = set(flagged_urls(hits))
    processed = list(dict.fromkeys(d.url for d in docs))
    report = {url: {"flagged": url in flagged, "hits": [], "profile": None, "cluster": None} for url in processed}
    for h in hits:
        report[h.url]["hits"].append(h.to_dict())

    written = []
    summary = {"n_documents": len(docs), "n_pages": len(processed), "n_hits": len(hits),
               "flagged": sorted(flagged), "fetch_failures": [list(f) for f in failures],
               "none_flagged": not flagged}

    if cfg.captures is not None:
        entries = read_capture_manifest(cfg.captures)
        profiles = [build_resource_profile(t0, t1, url) for url, t0, t1 in entries]
        clustering = cluster_resource_profiles(profiles, cfg.resource_k_range, cfg.seed)
        urls_p = [p.url for p in profiles]
        written.append(_write_json(os.path.join(root, "resource_clustering.json"), clustering.to_dict(urls_p)))
        for p, c in zip(profiles, clustering.model.labels.tolist()):
            slot = report.setdefault(p.url, {"flagged": False, "hits": [], "profile": None, "cluster": None})
            slot["profile"] = p.to_dict()
            slot["cluster"] = c
        summary["resource_k"] = clustering.model.k
        summary["small_clusters"] = {str(c): m for c, m in clustering.small_clusters.items()}

    if cfg.whois is not None:
        graph = build_whois_graph(read_whois_jsonl(cfg.whois))
        written.append(_write_json(os.path.join(root, "whois_components.json"), graph.to_components_dict()))
        written.append(_write_json(os.path.join(root, "country_tally.json"), graph.to_tally_dict()))

    written.append(_write_json(os.path.join(root, "report.json"), report))
    written.append(_write_json(os.path.join(root, "summary.json"), summary))
    return written
