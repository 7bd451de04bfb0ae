"""Shared helpers for the test suite."""

from __future__ import annotations

import numpy as np

from feddpc.data import ClientDataset, Dataset


def mean_max_class_share(data: Dataset, clients: list[ClientDataset]) -> float:
    """Average, over non-empty clients, of the share of their largest class.

    1.0 means every client holds a single class; 1/n_classes means every
    client is perfectly balanced. Used as the heterogeneity statistic.
    """
    shares = []
    for c in clients:
        if len(c) == 0:
            continue
        counts = np.bincount(data.labels[c.sample_indices], minlength=data.n_classes)
        shares.append(counts.max() / len(c))
    return float(np.mean(shares))
