"""
Transport service.

Builds pairing cost matrices between data points and Gaussian noise, solves
the AOT pairing (unconditional and class-wise), draws the pair pools that
training consumes, and evaluates the empirical 2-Wasserstein distance.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Literal, Optional

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict
from scipy.spatial.distance import cdist

from aot.config import settings
from aot.errors import InvalidInputError
from aot.models.assignment import CostMatrix
from aot.models.dataset import Dataset
from aot.models.training import AugmentationConfig
from aot.models.transport import (
    PairedBatch,
    PairingStats,
    PairingTrial,
    PairPool,
    SampleBatch,
)
from aot.services.assignment import AssignmentService
from aot.services.augmentation import augment
from aot.utils.rng import RngStreams

log = structlog.get_logger()


class W2Match(BaseModel):
    """Empirical W2 together with the optimal matching that produced it.

    `sample_index`/`reference_index` are the rows actually matched (a subset
    when the solver cap forced subsampling); `permutation[i]` is the position
    in `reference_index` matched to `sample_index[i]`.
    """

    w2: float
    permutation: np.ndarray
    sample_index: np.ndarray
    reference_index: np.ndarray
    subsampled: bool = False

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


def _check_pair_shapes(a: np.ndarray, b: np.ndarray, names=("images", "noises")):
    if a.ndim != 2 or b.ndim != 2:
        raise InvalidInputError(
            f"{names[0]} and {names[1]} must be 2-D arrays", field=names[0]
        )
    if a.shape != b.shape:
        raise InvalidInputError(
            f"{names[0]} {a.shape} and {names[1]} {b.shape} must have equal "
            "count and dimension",
            field=names[1],
        )
    if a.shape[0] < 1:
        raise InvalidInputError(f"{names[0]} must not be empty", field=names[0])


def _metric(squared: bool) -> str:
    return "sqeuclidean" if squared else "euclidean"


class TransportService:
    """AOT pairing and pair-pool construction."""

    @staticmethod
    def build_cost_matrix(
        images: np.ndarray,
        noises: np.ndarray,
        squared: bool = False,
        threads: Optional[int] = None,
    ) -> CostMatrix:
        """
        Entry (i, j) is ||images_i - noises_j||, or its square when `squared`.

        With `threads > 1` row blocks are computed concurrently; each row only
        depends on its own image so the result equals the sequential one.
        """
        images = np.asarray(images, dtype=np.float64)
        noises = np.asarray(noises, dtype=np.float64)
        _check_pair_shapes(images, noises)

        metric = _metric(squared)
        workers = settings.THREADS if threads is None else threads
        n = images.shape[0]
        if workers <= 1 or n < 2 * workers:
            return CostMatrix(costs=cdist(images, noises, metric=metric))

        costs = np.empty((n, n), dtype=np.float64)
        blocks = np.array_split(np.arange(n), workers)

        def fill(rows: np.ndarray) -> None:
            costs[rows] = cdist(images[rows], noises, metric=metric)

        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill, blocks))
        return CostMatrix(costs=costs)

    @staticmethod
    def pair_unconditional(batch: SampleBatch, squared: bool = False) -> PairedBatch:
        """Select noises[pi(i)] for point i, pi minimising the total cost."""
        cost = TransportService.build_cost_matrix(
            batch.points, batch.noises, squared=squared
        )
        assignment = AssignmentService.solve(cost)
        identity = math.fsum(np.diag(cost.costs).tolist())
        return PairedBatch(
            points=batch.points,
            selected_noises=batch.noises[assignment.permutation],
            labels=batch.labels,
            permutation=assignment.permutation,
            paired_cost=assignment.total_cost,
            independent_cost=identity,
        )

    @staticmethod
    def pair_conditional(
        batch: SampleBatch,
        class_count: Optional[int] = None,
        squared: bool = False,
    ) -> PairedBatch:
        """
        Class-wise pairing.

        Noises are handed out in sampling order to the classes in class order
        (the first n_0 noises to class 0, the next n_1 to class 1, ...), then
        each class is paired with its own noise block. Point order is kept.
        """
        if batch.labels is None:
            raise InvalidInputError(
                "conditional pairing requires labels", field="labels"
            )
        labels = batch.labels
        if labels.size and labels.min() < 0:
            raise InvalidInputError("labels must be non-negative", field="labels")
        classes = int(labels.max()) + 1 if class_count is None else class_count
        if labels.size and labels.max() >= classes:
            raise InvalidInputError(
                f"label {int(labels.max())} out of range for {classes} classes",
                field="labels",
            )

        n = batch.size
        perm = np.empty(n, dtype=np.intp)
        paired_cost = 0.0
        start = 0
        for c in range(classes):
            rows = np.flatnonzero(labels == c)
            if rows.size == 0:
                continue
            block = np.arange(start, start + rows.size)
            start += rows.size

            cost = TransportService.build_cost_matrix(
                batch.points[rows], batch.noises[block], squared=squared
            )
            assignment = AssignmentService.solve(cost)
            perm[rows] = block[assignment.permutation]
            paired_cost += assignment.total_cost
            log.debug(
                "paired class", label=c, size=int(rows.size), cost=assignment.total_cost
            )

        diagonal = np.linalg.norm(batch.points - batch.noises, axis=1)
        independent_cost = math.fsum((diagonal**2 if squared else diagonal).tolist())
        return PairedBatch(
            points=batch.points,
            selected_noises=batch.noises[perm],
            labels=labels,
            permutation=perm,
            paired_cost=paired_cost,
            independent_cost=independent_cost,
        )

    @staticmethod
    def pair_independent(batch: SampleBatch, squared: bool = False) -> PairedBatch:
        """Identity pairing: the baseline the AOT pairing is compared against."""
        diagonal = np.linalg.norm(batch.points - batch.noises, axis=1)
        total = math.fsum((diagonal**2 if squared else diagonal).tolist())
        return PairedBatch(
            points=batch.points,
            selected_noises=batch.noises,
            labels=batch.labels,
            permutation=np.arange(batch.size),
            paired_cost=total,
            independent_cost=total,
        )

    @staticmethod
    def draw_indices(
        dataset: Dataset,
        count: int,
        rng: np.random.Generator,
        class_balanced: bool = False,
    ) -> np.ndarray:
        """
        Indices of `count` dataset points.

        Uniform without replacement when `count` fits in the dataset, with
        replacement otherwise. With `class_balanced` and labels present, each
        class contributes count / C points when that divides evenly and every
        class is populated; otherwise the draw falls back to uniform, which
        follows the dataset's label frequencies.
        """
        if class_balanced and dataset.labels is not None:
            classes = dataset.class_count
            members = [np.flatnonzero(dataset.labels == c) for c in range(classes)]
            if count % classes == 0 and all(m.size for m in members):
                per_class = count // classes
                parts = [
                    rng.choice(m, size=per_class, replace=per_class > m.size)
                    for m in members
                ]
                return rng.permutation(np.concatenate(parts))
            log.warning(
                "class-balanced pool not feasible, drawing proportionally",
                pairs=count,
                classes=classes,
            )
        return rng.choice(dataset.size, size=count, replace=count > dataset.size)

    @staticmethod
    def make_pair_pool(
        dataset: Dataset,
        rngs: RngStreams,
        pairs: int,
        minibatch_size: int,
        mode: Literal["aot", "independent"] = "aot",
        conditional: bool = False,
        augmentation: Optional[AugmentationConfig] = None,
        squared: bool = False,
    ) -> PairPool:
        """
        Draw N points and N fresh noises, augment, pair, and wrap as a pool.

        Data, noise and augmentation draw from their own substreams, so the
        pairing mode changes nothing but the noise permutation.
        """
        if minibatch_size > pairs:
            raise InvalidInputError(
                f"minibatch size {minibatch_size} exceeds pool size {pairs}",
                field="minibatch_size",
            )
        if conditional and not dataset.is_labeled:
            raise InvalidInputError(
                "conditional pairing requires a labeled dataset", field="conditional"
            )

        index = TransportService.draw_indices(
            dataset, pairs, rngs.data, class_balanced=conditional
        )
        noises = rngs.noise.standard_normal((pairs, dataset.dim))
        points = augment(dataset.points[index], augmentation, rngs.augment)
        labels = None if dataset.labels is None else dataset.labels[index]
        batch = SampleBatch(points=points, noises=noises, labels=labels)

        if mode == "independent":
            paired = TransportService.pair_independent(batch, squared=squared)
        elif conditional:
            paired = TransportService.pair_conditional(
                batch, class_count=dataset.class_count, squared=squared
            )
        else:
            paired = TransportService.pair_unconditional(batch, squared=squared)
        return PairPool(batch=paired, minibatch_size=minibatch_size)

    @staticmethod
    def empirical_w2_match(
        samples: np.ndarray,
        reference: np.ndarray,
        cap: Optional[int] = None,
        rng: Optional[np.random.Generator] = None,
    ) -> W2Match:
        """
        Exact empirical W2 via assignment on squared distances.

        Sets larger than `cap` are subsampled (independently, without
        replacement) with `rng` and a warning is logged.
        """
        samples = np.asarray(samples, dtype=np.float64)
        reference = np.asarray(reference, dtype=np.float64)
        _check_pair_shapes(samples, reference, names=("samples", "reference"))

        cap = settings.W2_SOLVER_CAP if cap is None else cap
        m = samples.shape[0]
        sample_index = np.arange(m)
        reference_index = np.arange(m)
        subsampled = m > cap
        if subsampled:
            rng = rng if rng is not None else np.random.default_rng(0)
            sample_index = np.sort(rng.choice(m, size=cap, replace=False))
            reference_index = np.sort(rng.choice(m, size=cap, replace=False))
            log.warning("w2 sets subsampled", count=m, cap=cap)

        cost = TransportService.build_cost_matrix(
            samples[sample_index], reference[reference_index], squared=True
        )
        assignment = AssignmentService.solve(cost)
        return W2Match(
            w2=math.sqrt(assignment.total_cost / cost.n),
            permutation=assignment.permutation,
            sample_index=sample_index,
            reference_index=reference_index,
            subsampled=subsampled,
        )

    @staticmethod
    def empirical_w2(
        samples: np.ndarray,
        reference: np.ndarray,
        cap: Optional[int] = None,
        rng: Optional[np.random.Generator] = None,
    ) -> float:
        """sqrt((1/M) min_pi sum ||a_i - b_pi(i)||^2)."""
        return TransportService.empirical_w2_match(samples, reference, cap, rng).w2

    @staticmethod
    def pairing_cost_stats(
        dataset: Dataset,
        pairs: int,
        trials: int,
        seed: int,
        squared: bool = False,
    ) -> PairingStats:
        """AOT versus identity pairing cost over `trials` independent pool draws."""
        if trials < 1:
            raise InvalidInputError("trials must be at least 1", field="trials")
        seeds = np.random.SeedSequence(seed).generate_state(trials)
        results = []
        for trial, trial_seed in enumerate(seeds):
            pool = TransportService.make_pair_pool(
                dataset,
                RngStreams(int(trial_seed)),
                pairs=pairs,
                minibatch_size=pairs,
                squared=squared,
            )
            results.append(
                PairingTrial(
                    trial=trial,
                    aot_cost=pool.batch.paired_cost,
                    independent_cost=pool.batch.independent_cost,
                )
            )
        stats = PairingStats(trials=results)
        log.info(
            "pairing statistics",
            trials=trials,
            pairs=pairs,
            mean_aot=stats.mean_aot_cost,
            mean_independent=stats.mean_independent_cost,
            aot_wins=stats.aot_wins,
        )
        return stats
