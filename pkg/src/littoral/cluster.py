"""DBSCAN clustering of detection cells into point measurements."""
from dataclasses import dataclass

import numpy as np

from littoral import kernels


@dataclass(frozen=True)
class DbscanParams:
    eps: float
    min_pts: int

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.min_pts < 1:
            raise ValueError(f"min_pts must be at least 1, got {self.min_pts}")


SCOREMAP_DBSCAN = DbscanParams(eps=1.0, min_pts=5)
CFAR_DBSCAN = DbscanParams(eps=4.0, min_pts=2)


def dbscan(detections, params, backend=None):
    """Cluster labels for each detection row (``-1`` marks noise).

    Points are processed in row-major ``(a, r)`` order regardless of input
    order, and clusters are numbered in order of discovery, so the result is
    invariant to permutations of the input.
    """
    detections = np.asarray(detections, dtype=np.float64).reshape(-1, 3)
    n = detections.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    order = np.lexsort((detections[:, 1], detections[:, 0]))
    labels_sorted, _ = kernels.dbscan_labels(
        detections[order, :2], params.eps, params.min_pts, backend=backend
    )
    labels = np.empty(n, dtype=np.int64)
    labels[order] = labels_sorted
    return labels


def clusters_to_measurements(detections, labels, scoring="max"):
    """Centroid and confidence of every cluster, as ``(m, 3)`` rows ``(a, r, score)``."""
    if scoring not in ("max", "mean"):
        raise ValueError(f"scoring must be 'max' or 'mean', got {scoring!r}")
    detections = np.asarray(detections, dtype=np.float64).reshape(-1, 3)
    labels = np.asarray(labels)
    n_clusters = int(labels.max()) + 1 if labels.size else 0
    out = np.zeros((n_clusters, 3))
    for c in range(n_clusters):
        members = detections[labels == c]
        out[c, :2] = members[:, :2].mean(axis=0)
        out[c, 2] = members[:, 2].max() if scoring == "max" else members[:, 2].mean()
    return out


def detections_to_measurements(detections, params, scoring="max", backend=None):
    labels = dbscan(detections, params, backend=backend)
    return clusters_to_measurements(detections, labels, scoring)
