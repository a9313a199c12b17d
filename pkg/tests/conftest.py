import numpy as np
import pytest

from descomp import Dataset, AttributeMeta, numeric_dataset


def make_blobs(n=120, centers=((-2.0, -2.0), (2.0, 2.0)), scale=0.7, seed=0,
               class_names=None):
    """Two (or more) well-separated Gaussian blobs as a numeric Dataset."""
    rng = np.random.default_rng(seed)
    per = n // len(centers)
    parts, labels = [], []
    for c, center in enumerate(centers):
        parts.append(rng.normal(center, scale, size=(per, len(center))))
        labels.extend([c] * per)
    X = np.vstack(parts)
    y = np.array(labels)
    return numeric_dataset(X, y, len(centers), class_names=class_names)


def make_mixed_dataset():
    """Small dataset with a nominal column, for one-hot/ingest paths."""
    features = np.array([
        [0.0, 1.5], [1.0, -0.5], [2.0, 0.3], [0.0, 2.5],
        [1.0, -1.5], [2.0, 0.9], [0.0, 1.1], [1.0, -0.2],
    ])
    labels = np.array([0, 1, 0, 0, 1, 1, 0, 1])
    meta = (
        AttributeMeta("color", "nominal", ("red", "green", "blue")),
        AttributeMeta("x", "numeric"),
    )
    return Dataset(features, labels, meta, n_classes=2, class_names=("no", "yes"))


@pytest.fixture
def blobs():
    return make_blobs()


@pytest.fixture
def mixed_dataset():
    return make_mixed_dataset()
