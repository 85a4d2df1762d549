import numpy as np
import pytest

from kantorovich_lab.measures import PseudometricSpace


def metric_closure(raw: np.ndarray) -> np.ndarray:
    """Shortest-path closure: turns any symmetric nonnegative matrix into a metric."""
    d = raw.copy()
    np.fill_diagonal(d, 0.0)
    for k in range(d.shape[0]):
        d = np.minimum(d, d[:, [k]] + d[[k], :])
    return d


def random_space(rng, n, anchor=None, with_coords=False, lo=0.1, hi=4.0):
    raw = rng.uniform(lo, hi, size=(n, n))
    d = metric_closure((raw + raw.T) / 2.0)
    coords = rng.uniform(-3, 3, size=(n, 2)) if with_coords else None
    return PseudometricSpace(
        points=tuple(f"p{i}" for i in range(n)),
        metrics={"d": d},
        anchor=int(rng.integers(n)) if anchor is None else anchor,
        coords=coords,
    )


def random_degenerate_space(rng, n_classes, n_points, anchor=0):
    """Pseudometric whose null pairs form n_classes blocks."""
    raw = rng.uniform(0.5, 3.0, size=(n_classes, n_classes))
    D = metric_closure((raw + raw.T) / 2.0)
    assign = np.concatenate(
        [np.arange(n_classes), rng.integers(0, n_classes, size=n_points - n_classes)]
    )
    rng.shuffle(assign)
    p = D[np.ix_(assign, assign)].copy()
    np.fill_diagonal(p, 0.0)
    space = PseudometricSpace(
        points=tuple(f"p{i}" for i in range(n_points)), metrics={"p": p}, anchor=anchor
    )
    return space, assign


def two_point_space(dist, anchor=0):
    return PseudometricSpace(
        points=("a", "b"),
        metrics={"d": np.array([[0.0, dist], [dist, 0.0]])},
        anchor=anchor,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
