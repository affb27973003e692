"""Dataset builders shared by the evaluation, CLI and acceptance tests."""
import numpy as np

from simplexshot.data import FeatureDataset
from simplexshot.model_selection import SelectionConfig

# single-vertex selection; the harness tests do not exercise vertex counting
K1_SELECTION = SelectionConfig(k_max=1, restarts_per_k=1)


def separable_dataset(n_classes=300, per_class=20, n_crops=2, dim=8, seed=0):
    """Every image of a class repeats the class prototype on all of its crops."""
    rng = np.random.default_rng(seed)
    protos = rng.normal(size=(n_classes, dim)) * 10.0
    return FeatureDataset.from_items(
        (f"c{c}-{i}", f"class{c}", np.tile(protos[c], (n_crops, 1)))
        for c in range(n_classes) for i in range(per_class))


def shuffled_labels(dataset, seed):
    labels = [dataset.labels[i] for i in dataset.image_ids]
    np.random.default_rng(seed).shuffle(labels)
    return type(dataset)(dict(dataset.features), dict(zip(dataset.image_ids, labels)))
