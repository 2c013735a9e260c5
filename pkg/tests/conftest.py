from datetime import date

import numpy as np
import pytest

from rinfer.panel import PanelDataset

START = date(2017, 10, 1)


def make_panel(y, start=START) -> PanelDataset:
    y = np.asarray(y, dtype=float)
    return PanelDataset(tuple(f"u{i:03d}" for i in range(y.shape[0])), start, y)


def poisson_panel(n, T, lam=5.0, seed=0, shift=0.0, a0=None) -> PanelDataset:
    y = np.random.default_rng(seed).poisson(lam, (n, T)).astype(float)
    if shift and a0 is not None:
        y[:, a0 - 1 :] += shift
    return make_panel(y)


@pytest.fixture
def small_panel():
    return poisson_panel(5, 12, seed=3, shift=1.0, a0=7)
