"""
Analytic oracle denoisers: exact posterior means E[y | y + sigma * eps = x].
"""

from pathlib import Path
from typing import Any, Optional

import numpy as np
import structlog
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

from aot.errors import InvalidInputError
from aot.models.denoiser import AnalyticDenoiser

log = structlog.get_logger()


def _check_sigma(sigma: Any) -> np.ndarray:
    s = np.asarray(sigma, dtype=np.float64)
    if not np.all(np.isfinite(s)) or np.any(s <= 0):
        raise InvalidInputError("sigma must be finite and positive", field="sigma")
    return s


def _column(s: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Broadcast per-row sigmas against an (M, d) batch."""
    if s.ndim == 1 and x.ndim == 2:
        return s[:, None]
    return s


class AnalyticService:
    """Constructors, evaluation and CLI parsing for oracle denoisers."""

    @staticmethod
    def point_mass(mean) -> AnalyticDenoiser:
        return AnalyticDenoiser(variant="point_mass", mean=mean)

    @staticmethod
    def isotropic_gaussian(mean, std: float) -> AnalyticDenoiser:
        return AnalyticDenoiser(variant="isotropic_gaussian", mean=mean, std=std)

    @staticmethod
    def empirical(points) -> AnalyticDenoiser:
        points = np.asarray(points, dtype=np.float64)
        if points.ndim != 2 or points.shape[0] == 0:
            raise InvalidInputError(
                "empirical oracle needs a non-empty (K, d) point set", field="points"
            )
        return AnalyticDenoiser(variant="empirical", points=points)

    @staticmethod
    def analytic_denoise(
        oracle: AnalyticDenoiser, x: np.ndarray, sigma: Any
    ) -> np.ndarray:
        """
        Posterior mean at noise level sigma for a point x or a batch (M, d).

        `sigma` is a scalar or one value per row.
        """
        x = np.asarray(x, dtype=np.float64)
        if not np.all(np.isfinite(x)):
            raise InvalidInputError("x must be finite", field="x")
        s = _column(_check_sigma(sigma), x)

        if oracle.variant == "point_mass":
            return np.broadcast_to(oracle.mean, x.shape).copy()

        if oracle.variant == "isotropic_gaussian":
            shrink = oracle.std**2 / (oracle.std**2 + s**2)
            return oracle.mean + shrink * (x - oracle.mean)

        # Empirical: softmax weights over the data, reduced with log-sum-exp
        batch = np.atleast_2d(x)
        distances = cdist(batch, oracle.points, metric="sqeuclidean")
        scale = np.asarray(s, dtype=np.float64).reshape(-1, 1)
        logits = -distances / (2.0 * scale**2)
        weights = np.exp(logits - logsumexp(logits, axis=1, keepdims=True))
        result = weights @ oracle.points
        return result[0] if x.ndim == 1 else result

    @staticmethod
    def denoiser(oracle: AnalyticDenoiser):
        """Wrap an oracle in the (x, sigma, labels) denoiser calling convention."""

        def denoise(
            x: np.ndarray, sigma: Any, labels: Optional[np.ndarray] = None
        ) -> np.ndarray:
            return AnalyticService.analytic_denoise(oracle, x, sigma)

        denoise.oracle = oracle
        return denoise

    @staticmethod
    def parse_oracle_spec(spec: str) -> AnalyticDenoiser:
        """
        Parse a command-line oracle description.

        Accepted forms: `point_mass:MX,MY`, `gaussian:MX,MY:STD`,
        `empirical:PATH.csv`.
        """
        kind, _, rest = spec.partition(":")
        try:
            if kind == "point_mass":
                return AnalyticService.point_mass(_floats(rest))
            if kind in ("gaussian", "isotropic_gaussian"):
                mean, _, std = rest.partition(":")
                return AnalyticService.isotropic_gaussian(_floats(mean), float(std))
            if kind == "empirical":
                from aot.services.datasets.csv_io import load_csv

                dataset = load_csv(Path(rest))
                return AnalyticService.empirical(dataset.points)
        except ValueError as e:
            if isinstance(e, InvalidInputError):
                raise
            raise InvalidInputError(
                f"invalid oracle spec '{spec}': {e}", field="oracle"
            ) from e
        raise InvalidInputError(
            f"unknown oracle '{kind}', expected point_mass, gaussian or empirical",
            field="oracle",
        )


def _floats(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.split(",") if v.strip()], dtype=np.float64)
