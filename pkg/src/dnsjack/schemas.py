"""Schemas for every emitted file and the self-check that validates an output directory."""
from __future__ import annotations

import csv
import glob
import json
import os
from fractions import Fraction

import jsonschema

from .features import N_FEATURES

_NUM = {"type": "number"}
_RATE = {"type": "number", "minimum": 0, "maximum": 1}
_RATE_OR_NULL = {"anyOf": [_RATE, {"type": "null"}]}
_COUNT = {"type": "integer", "minimum": 0}
_FIT = {
    "type": "object",
    "required": ["family", "valid"],
    "properties": {
        "family": {"type": ["string", "null"]},
        "valid": {"type": "boolean"},
        "x_min": _NUM, "x_max": _NUM, "params": {"type": "object"},
        "log_likelihood": _NUM, "ks_statistic": _RATE, "n_tail": _COUNT,
        "reason": {"type": "string"}, "candidates": {"type": "array"},
    },
}
_HIT = {
    "type": "object",
    "required": ["url", "signature", "source", "offset", "context"],
    "properties": {"url": {"type": "string"}, "signature": {"type": "string"},
                   "source": {"enum": ["html", "script"]}, "offset": _COUNT,
                   "context": {"type": "string"}, "script_url": {"type": "string"}},
}

JSON_SCHEMAS = {
    "similarity/report.json": {
        "type": "object",
        "required": ["class_a", "class_b", "features", "skipped"],
        "properties": {
            "features": {"type": "array", "items": {
                "type": "object",
                "required": ["feature", "fit_class_a", "fit_class_b", "kld_nats", "notes"],
                "properties": {"fit_class_a": _FIT, "fit_class_b": _FIT,
                               "kld_nats": {"anyOf": [{"type": "number", "minimum": 0}, {"type": "null"}]},
                               "notes": {"type": "array", "items": {"type": "string"}}},
            }},
            "skipped": {"type": "array"},
        },
    },
    "detect/unsupervised.json": {
        "type": "object",
        "required": ["probability_threshold", "n_scored", "n_flagged", "flagged", "windows"],
        "properties": {"probability_threshold": _RATE, "n_scored": _COUNT, "n_flagged": _COUNT,
                       "flagged": {"type": "array", "items": {"type": "string"}},
                       "windows": {"type": "array", "items": {
                           "type": "object", "required": ["window", "n_dns", "k", "silhouette_table"],
                           "properties": {"k": {"type": ["integer", "null"]},
                                          "silhouette_table": {"type": "object", "additionalProperties":
                                                               {"type": "number", "minimum": -1, "maximum": 1}}}}}},
    },
    "detect/metrics.json": {
        "type": "object",
        "required": ["balanced_accuracy", "precision", "recall", "f1", "confusion_matrix", "hyperparameters"],
        "properties": {
            "balanced_accuracy": _RATE,
            "precision": {"type": "object", "additionalProperties": _RATE},
            "recall": {"type": "object", "additionalProperties": _RATE_OR_NULL},
            "f1": {"type": "object", "additionalProperties": _RATE_OR_NULL},
            "confusion_matrix": {"type": "array", "items": {"type": "array", "items": _COUNT}},
            "hyperparameters": {"type": "object",
                                "required": ["criterion", "max_depth", "min_samples_leaf",
                                             "min_samples_split", "splitter"],
                                "properties": {"criterion": {"enum": ["gini", "entropy"]},
                                               "splitter": {"enum": ["best"]}}},
        },
    },
    "detect/tree.json": {
        "type": "object",
        "required": ["hyperparameters", "classes", "n_features", "nodes"],
        "properties": {"nodes": {"type": "array", "minItems": 1, "items": {
            "type": "object",
            "required": ["counts", "depth", "impurity", "feature", "threshold", "left", "right"],
            "properties": {"counts": {"type": "array", "items": _COUNT}, "depth": _COUNT,
                           "feature": {"type": "integer"}, "threshold": _NUM,
                           "left": {"type": "integer"}, "right": {"type": "integer"}}}}},
    },
    "audit/report.json": {
        "type": "object",
        "additionalProperties": {
            "type": "object",
            "required": ["flagged", "hits", "profile", "cluster"],
            "properties": {"flagged": {"type": "boolean"}, "hits": {"type": "array", "items": _HIT},
                           "profile": {"type": ["object", "null"]},
                           "cluster": {"type": ["integer", "null"]}},
        },
    },
    "audit/summary.json": {
        "type": "object",
        "required": ["n_documents", "n_pages", "n_hits", "flagged", "none_flagged"],
        "properties": {"n_documents": {"type": "integer", "minimum": 1}, "n_hits": _COUNT,
                       "none_flagged": {"type": "boolean"}},
    },
    "audit/resource_clustering.json": {
        "type": "object",
        "required": ["k", "silhouette_table", "cluster_sizes", "small_clusters", "assignments"],
        "properties": {"k": {"type": "integer", "minimum": 2},
                       "silhouette_table": {"type": "object", "additionalProperties":
                                            {"type": "number", "minimum": -1, "maximum": 1}},
                       "cluster_sizes": {"type": "array", "items": _COUNT}},
    },
    "audit/whois_components.json": {
        "type": "object",
        "required": ["n_components", "components"],
        "properties": {"n_components": _COUNT,
                       "components": {"type": "array", "items": {"type": "array", "minItems": 1,
                                                                  "items": {"type": "string"}}}},
    },
    "audit/country_tally.json": {
        "type": "object",
        "required": ["countries", "absent"],
        "properties": {"countries": {"type": "object",
                                     "propertyNames": {"pattern": "^[A-Z]{2}$"},
                                     "additionalProperties": {"type": "integer", "minimum": 1}},
                       "absent": _COUNT},
    },
}

MATRIX_HEADER = ["dn", "granularity"] + [f"f{i}" for i in range(1, N_FEATURES + 1)] + ["label"]
SCORES_HEADER = ["dn", "times_malicious", "times_seen", "probability"]
CDF_HEADER = ["value", "empirical_cdf", "model_cdf"]
PREDICTIONS_HEADER = ["dn", "label", "predicted"]


def _check_matrix(rows):
    for row in rows:
        [float(x) for x in row[2:2 + N_FEATURES]]


def _check_scores(rows):
    for dn, mal, seen, prob in rows:
        mal, seen = int(mal), int(seen)
        if not 0 <= mal <= seen or seen < 1:
            raise ValueError(f"{dn}: bad counts {mal}/{seen}")
        if float(prob) != float(Fraction(mal, seen)):
            raise ValueError(f"{dn}: probability {prob} != {mal}/{seen}")


def _check_cdf(rows):
    prev = -1.0
    for row in rows:
        v, e, m = (float(x) for x in row)
        if not (0 <= e <= 1 and 0 <= m <= 1) or e < prev:
            raise ValueError(f"bad CDF row {row}")
        prev = e


def _check_predictions(rows):
    for row in rows:
        if len(row) != 3:
            raise ValueError(f"bad prediction row {row}")


CSV_SCHEMAS = {
    "features/ALL.csv": (MATRIX_HEADER, _check_matrix),
    "features/*/window_*.csv": (MATRIX_HEADER, _check_matrix),
    "detect/scores.csv": (SCORES_HEADER, _check_scores),
    "detect/flagged.csv": (SCORES_HEADER, _check_scores),
    "detect/predictions.csv": (PREDICTIONS_HEADER, _check_predictions),
    "similarity/cdf_*.csv": (CDF_HEADER, _check_cdf),
}


def validate_outputs(out_dir: str) -> tuple[list[str], list[str]]:
    """Validate every known file present under ``out_dir``; returns (checked, problems)."""
    checked, problems = [], []
    for rel, schema in JSON_SCHEMAS.items():
        path = os.path.join(out_dir, rel)
        if not os.path.exists(path):
            continue
        checked.append(rel)
        try:
            with open(path, encoding="utf-8") as fh:
                jsonschema.validate(json.load(fh), schema)
        except (ValueError, jsonschema.ValidationError) as exc:
            problems.append(f"{rel}: {getattr(exc, 'message', exc)}")
    for pattern, (header, check) in CSV_SCHEMAS.items():
        for path in sorted(glob.glob(os.path.join(out_dir, pattern))):
            rel = os.path.relpath(path, out_dir)
            checked.append(rel)
            try:
                with open(path, encoding="utf-8", newline="") as fh:
                    rows = list(csv.reader(fh))
                if not rows or rows[0] != header:
                    raise ValueError("unexpected header")
                if any(len(r) != len(header) for r in rows[1:]):
                    raise ValueError("ragged rows")
                check(rows[1:])
            except ValueError as exc:
                problems.append(f"{rel}: {exc}")
    return checked, problems
