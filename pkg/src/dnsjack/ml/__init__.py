"""Clustering, malicious-probability scoring, and decision-tree classification."""
from .cluster import ClusterModel, kmeans, select_k, silhouette, silhouette_samples, standardize
from .metrics import EvalMetrics, confusion_matrix, evaluate, metrics_from_confusion, split_dataset
from .scoring import (FLAG_THRESHOLD, WINDOW_K_RANGE, MaliciousScore, WindowClustering, cluster_window,
                      flag_suspicious, malicious_clusters, score_malicious_probability, write_scores_csv)
from .tree import PRESETS, TreeHyperparameters, TreeModel, TreeNode, best_split, train_decision_tree

__all__ = [
    "ClusterModel", "kmeans", "select_k", "silhouette", "silhouette_samples", "standardize",
    "EvalMetrics", "confusion_matrix", "evaluate", "metrics_from_confusion", "split_dataset",
    "FLAG_THRESHOLD", "WINDOW_K_RANGE", "MaliciousScore", "WindowClustering", "cluster_window",
    "flag_suspicious", "malicious_clusters", "score_malicious_probability", "write_scores_csv",
    "PRESETS", "TreeHyperparameters", "TreeModel", "TreeNode", "best_split", "train_decision_tree",
]
