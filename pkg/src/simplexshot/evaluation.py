"""Episode evaluation harness and synthetic recovery scoring."""
import itertools
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from ._seeding import derive_seed
from .classifier import DEFAULT_ALPHA, nearest_supports, represent, stack_vertices
from .data import eligible_classes, sample_episode
from .errors import DimensionError, InvalidInputError
from .model_selection import SelectionConfig, select_k

# seed namespaces under the root seed
_IMAGE_STREAM = 0
_EPISODE_STREAM = 1


@dataclass(frozen=True)
class EvalConfig:
    n_episodes: int = 100_000
    way: int = 5
    queries_per_class: int = 15
    alpha: float = DEFAULT_ALPHA
    k1_filter: bool = False
    lambdas: tuple = ()
    seed: int = 0
    cache: bool = True
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    workers: int = 1

    def __post_init__(self):
        if self.n_episodes < 1:
            raise InvalidInputError(f"n_episodes must be >= 1, got {self.n_episodes}")
        if self.way < 1 or self.queries_per_class < 1:
            raise InvalidInputError("way and queries_per_class must be >= 1")
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidInputError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.workers < 1:
            raise InvalidInputError("workers must be >= 1")

    def describe(self):
        d = asdict(self)
        d["lambdas"] = list(self.lambdas)
        return d


@dataclass(frozen=True)
class EvalReport:
    accuracy_mean: float
    ci95_halfwidth: float
    episode_accuracies: tuple
    episodes_used: int
    pool_size: int
    excluded_images: int
    config: dict

    def to_dict(self):
        d = asdict(self)
        d["episode_accuracies"] = list(self.episode_accuracies)
        return d

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            d = json.load(fh)
        d["episode_accuracies"] = tuple(d["episode_accuracies"])
        return cls(**d)


def ci95_halfwidth(values):
    """Normal-approximation half width ``1.96 * std / sqrt(n)`` (population std)."""
    values = np.asarray(values, dtype=np.float64)
    return float(1.96 * values.std() / np.sqrt(len(values)))


def image_seed(root, index):
    return derive_seed(root, _IMAGE_STREAM, index)


def episode_seed(root, index):
    return derive_seed(root, _EPISODE_STREAM, index)


def _represent_job(args):
    image_id, X, selection, alpha = args
    return represent(image_id, X, selection, alpha)


class RepresentationCache:
    """Per-image vertex representations keyed by image id.

    The seed of an image depends only on its position in the dataset, so
    a representation is the same whether it is computed here, in a worker
    process, or recomputed without caching.
    """

    def __init__(self, dataset, selection, alpha, root_seed, enabled=True):
        self.dataset = dataset
        self.selection = selection
        self.alpha = alpha
        self.root_seed = root_seed
        self.enabled = enabled
        self._position = {image_id: i for i, image_id in enumerate(dataset.image_ids)}
        self._store = {}
        self.computed = 0

    def _job(self, image_id):
        seed = image_seed(self.root_seed, self._position[image_id])
        return (image_id, self.dataset.features[image_id],
                self.selection.with_seed(seed), self.alpha)

    def get(self, image_id):
        rep = self._store.get(image_id)
        if rep is None:
            rep = _represent_job(self._job(image_id))
            self.computed += 1
            if self.enabled:
                self._store[image_id] = rep
        return rep

    def prefetch(self, image_ids, workers=1):
        """Compute missing representations, optionally in worker processes."""
        missing = [i for i in image_ids if i not in self._store]
        if not self.enabled or not missing:
            return
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                reps = list(pool.map(_represent_job, [self._job(i) for i in missing],
                                     chunksize=max(1, len(missing) // (4 * workers))))
        else:
            reps = [_represent_job(self._job(i)) for i in missing]
        for rep in reps:
            self._store[rep.image_id] = rep
        self.computed += len(reps)


def run_episodes(dataset, config, *, cache=None):
    """Accuracy of nearest-vertex 1-shot classification over sampled episodes.

    With ``config.k1_filter`` only images whose selected vertex count is
    one enter the sampling pool.

    Raises
    ------
    InvalidInputError
        If the (filtered) pool cannot supply ``way`` classes with
        ``1 + queries_per_class`` images each.
    """
    if cache is None:
        cache = RepresentationCache(dataset, config.selection, config.alpha,
                                    config.seed, enabled=config.cache)
    pool_ids = dataset.image_ids
    if config.k1_filter:
        cache.prefetch(pool_ids, config.workers)
        pool_ids = [i for i in pool_ids if cache.get(i).chosen_k == 1]
    excluded = len(dataset) - len(pool_ids)
    pool = dataset.subset(pool_ids)
    index = pool.class_index
    if len(eligible_classes(index, config.queries_per_class)) < config.way:
        sizes = {label: len(ids) for label, ids in index.items()}
        raise InvalidInputError(
            f"episode pool too small: need {config.way} classes with >= "
            f"{1 + config.queries_per_class} images; pool has {len(pool_ids)} images "
            f"({excluded} excluded), class sizes {sizes}")
    if config.cache and config.workers > 1:
        cache.prefetch(pool_ids, config.workers)

    accuracies = np.empty(config.n_episodes)
    for e in range(config.n_episodes):
        episode = sample_episode(pool, config.way, config.queries_per_class,
                                 episode_seed(config.seed, e), class_index=index)
        supports = [cache.get(i) for i in episode.support_ids]
        queries = [cache.get(i) for i in episode.query_ids]
        s_rows, s_offsets = stack_vertices(supports)
        owners, _ = nearest_supports(queries, s_rows, s_offsets)
        predicted = [episode.classes[o] for o in owners]
        accuracies[e] = np.mean([p == t for p, t in zip(predicted, episode.query_labels)])

    return EvalReport(
        accuracy_mean=float(accuracies.mean()),
        ci95_halfwidth=ci95_halfwidth(accuracies),
        episode_accuracies=tuple(float(a) for a in accuracies),
        episodes_used=config.n_episodes,
        pool_size=len(pool_ids),
        excluded_images=excluded,
        config=config.describe(),
    )


def run_sweep(dataset, config):
    """One :class:`EvalReport` per entry of ``config.lambdas``.

    The regularization weight is applied to vertex extraction and hence
    also to the vertex-count selection that the K=1 filter relies on.
    """
    if not config.lambdas:
        raise InvalidInputError("lambda sweep needs at least one value")
    reports = []
    for lam in config.lambdas:
        cfg = EvalConfig(**{**config.__dict__, "selection": config.selection.with_lambda(float(lam)),
                            "lambdas": ()})
        reports.append((float(lam), run_episodes(dataset, cfg)))
    return reports


def write_sweep_csv(reports, path):
    with open(path, "w") as fh:
        fh.write("lambda,accuracy\n")
        for lam, report in reports:
            fh.write(f"{lam!r},{report.accuracy_mean!r}\n")


# --------------------------------------------------------------------------
# synthetic recovery

def match_vertices(estimated, truth):
    """Optimal one-to-one matching of estimated to true vertices.

    Returns ``(assignment, mean_error)`` where ``estimated[i]`` is matched
    to ``truth[assignment[i]]``.  Exhaustive over permutations for K <= 3
    (first optimum in lexicographic order wins), Hungarian otherwise.
    """
    estimated = np.asarray(estimated, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if estimated.ndim != 2 or estimated.shape != truth.shape:
        raise DimensionError(
            f"vertex sets differ in shape: {estimated.shape} vs {truth.shape}")
    cost = cdist(estimated, truth)
    k = len(cost)
    if k <= 3:
        best, best_perm = np.inf, None
        for perm in itertools.permutations(range(k)):
            total = cost[np.arange(k), perm].sum()
            if total < best:
                best, best_perm = total, perm
        assignment = np.array(best_perm, dtype=np.intp)
    else:
        _, assignment = linear_sum_assignment(cost)
    return assignment, float(cost[np.arange(k), assignment].mean())


@dataclass(frozen=True)
class RecoveryReport:
    chosen_k: int
    true_k: int
    vertex_error: float
    weight_error: float
    assignment: tuple


def recovery_score(X, truth, selection=None):
    """Score vertex and weight recovery against synthetic ground truth.

    Errors are NaN when the selected vertex count differs from the truth.
    The weight error is the mean row-wise total-variation distance.
    """
    result = select_k(X, selection or SelectionConfig())
    true_k = truth.true_vertices.shape[0]
    if result.chosen_k != true_k:
        return RecoveryReport(result.chosen_k, true_k, float("nan"), float("nan"), ())
    model = result.model
    assignment, vertex_error = match_vertices(model.vertices, truth.true_vertices)
    # column j of the reordered estimate corresponds to true vertex j
    order = np.argsort(assignment)
    W = np.asarray(model.weights)[:, order]
    weight_error = float(0.5 * np.abs(W - truth.true_weights).sum(axis=1).mean())
    return RecoveryReport(result.chosen_k, true_k, vertex_error, weight_error,
                          tuple(int(a) for a in assignment))
