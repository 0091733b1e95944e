"""
Diagnostics service.

Trajectory curvature, truncation error and sample quality (empirical W2).
"""

import math
from typing import Dict, List, Optional, Sequence

import numpy as np
import structlog

from aot.errors import InvalidInputError
from aot.models.schedule import SIGMA_MAX, SIGMA_MIN, NoiseSchedule
from aot.models.trajectory import (
    CurvatureReport,
    CurvatureStep,
    GenerationMetrics,
    SweepPoint,
    SweepResult,
    Trajectory,
)
from aot.services.sampler import DenoiserFn, SamplerService
from aot.services.schedule import ScheduleService
from aot.services.transport import TransportService

log = structlog.get_logger()

DEFAULT_RHOS = (9.0, 27.0, 81.0, 243.0)
DEFAULT_STEPS = (8, 18)

# Tangents shorter than this are treated as zero
_TANGENT_EPS = 1e-300


def _mode_counts(points: np.ndarray, modes: np.ndarray) -> Dict[str, int]:
    nearest = np.argmin(
        ((points[:, None, :] - modes[None, :, :]) ** 2).sum(axis=2), axis=1
    )
    counts = np.bincount(nearest, minlength=modes.shape[0])
    return {str(k): int(c) for k, c in enumerate(counts)}


class DiagnosticsService:
    """Quantitative checks on sampling trajectories and generated samples."""

    @staticmethod
    def curvature(traj: Trajectory) -> CurvatureReport:
        """
        Tangent curvature: mean of 1 - cos(d_i, d_{i+1}) over successive
        non-zero tangents at positive noise levels.

        x0 drift: total variation sum ||x0_{i+1} - x0_i|| of the denoised
        estimates over all recorded nodes.
        """
        if traj.is_batch:
            raise InvalidInputError(
                "curvature takes a single trajectory; use curvature_batch",
                field="traj",
            )
        if traj.size < 3:
            raise InvalidInputError(
                f"curvature needs at least 3 records, got {traj.size}", field="traj"
            )

        positive = np.flatnonzero(traj.sigmas > 0)
        norms = np.linalg.norm(traj.tangents, axis=1)
        valid = [int(i) for i in positive if norms[i] > _TANGENT_EPS]
        degenerate = int(positive.size - len(valid))
        if degenerate:
            log.warning("degenerate tangents skipped", count=degenerate)

        steps: Dict[int, CurvatureStep] = {}
        bends: List[float] = []
        for prev, cur in zip(valid, valid[1:]):
            cosine = float(
                np.dot(traj.tangents[prev], traj.tangents[cur])
                / (norms[prev] * norms[cur])
            )
            cosine = min(1.0, max(-1.0, cosine))
            bend = max(0.0, 1.0 - cosine)
            bends.append(bend)
            steps[cur] = CurvatureStep(
                node=cur,
                sigma=float(traj.sigmas[cur]),
                cosine=cosine,
                bend=bend,
                x0_step=0.0,
            )

        x0_steps = np.linalg.norm(np.diff(traj.x0_hats, axis=0), axis=1)
        per_step = []
        for node in range(traj.size):
            x0_step = float(x0_steps[node - 1]) if node > 0 else 0.0
            step = steps.get(node)
            if step is None:
                step = CurvatureStep(
                    node=node, sigma=float(traj.sigmas[node]), x0_step=x0_step
                )
            else:
                step = step.model_copy(update={"x0_step": x0_step})
            per_step.append(step)

        return CurvatureReport(
            tangent_curvature=math.fsum(bends) / len(bends) if bends else 0.0,
            x0_drift=math.fsum(x0_steps.tolist()),
            degenerate=degenerate,
            per_step=per_step,
        )

    @staticmethod
    def curvature_batch(traj: Trajectory) -> List[CurvatureReport]:
        """One report per trajectory of a batch run."""
        return [
            DiagnosticsService.curvature(traj.row(i)) for i in range(traj.batch_size)
        ]

    @staticmethod
    def truncation_error(
        denoiser: DenoiserFn,
        coarse: NoiseSchedule,
        fine: NoiseSchedule,
        x_init: np.ndarray,
        labels: Optional[np.ndarray] = None,
    ) -> float:
        """
        ||heun(coarse) - heun(fine)|| at the endpoint; the mean over rows when
        x_init is a batch.
        """
        if not (
            math.isclose(coarse.sigma_min, fine.sigma_min, rel_tol=1e-12)
            and math.isclose(coarse.sigma_max, fine.sigma_max, rel_tol=1e-12)
        ):
            raise InvalidInputError(
                "coarse and fine schedules must share sigma_min and sigma_max",
                field="fine",
            )
        identical = np.array_equal(coarse.sigmas, fine.sigmas)
        if not identical and fine.n < 4 * coarse.n:
            raise InvalidInputError(
                f"fine schedule needs at least {4 * coarse.n} steps, got {fine.n}",
                field="fine",
            )

        if identical:
            return 0.0
        end_coarse = SamplerService.heun_sample(denoiser, coarse, x_init, labels).final
        end_fine = SamplerService.heun_sample(denoiser, fine, x_init, labels).final
        gap = np.linalg.norm(np.atleast_2d(end_coarse - end_fine), axis=1)
        return float(np.mean(gap))

    @staticmethod
    def eval_generation(
        samples: np.ndarray,
        reference: np.ndarray,
        modes: Optional[np.ndarray] = None,
        cap: Optional[int] = None,
        rng: Optional[np.random.Generator] = None,
    ) -> GenerationMetrics:
        """
        Empirical W2 between samples and reference, plus nearest-mode counts
        for both sets when mixture mode centres are given.
        """
        match = TransportService.empirical_w2_match(samples, reference, cap, rng)
        metrics = GenerationMetrics(
            w2=match.w2,
            count=int(np.asarray(samples).shape[0]),
            subsampled=match.subsampled,
        )
        if modes is not None:
            modes = np.atleast_2d(np.asarray(modes, dtype=np.float64))
            metrics = metrics.model_copy(
                update={
                    "mode_counts": _mode_counts(np.asarray(samples), modes),
                    "reference_mode_counts": _mode_counts(
                        np.asarray(reference), modes
                    ),
                }
            )
        log.info("generation evaluated", w2=metrics.w2, count=metrics.count)
        return metrics

    @staticmethod
    def rho_step_sweep(
        denoiser: DenoiserFn,
        reference: np.ndarray,
        rng: np.random.Generator,
        rhos: Sequence[float] = DEFAULT_RHOS,
        steps: Sequence[int] = DEFAULT_STEPS,
        sigma_min: float = SIGMA_MIN,
        sigma_max: float = SIGMA_MAX,
        labels: Optional[np.ndarray] = None,
    ) -> SweepResult:
        """
        W2 and NFE over a (rho, steps) grid, every cell integrated from the
        same initial noise.
        """
        reference = np.asarray(reference, dtype=np.float64)
        count, dim = reference.shape
        x_init = sigma_max * rng.standard_normal((count, dim))

        points = []
        for n in steps:
            for rho in rhos:
                schedule = ScheduleService.timesteps(n, sigma_min, sigma_max, rho)
                traj = SamplerService.heun_sample(denoiser, schedule, x_init, labels)
                w2 = TransportService.empirical_w2(traj.final, reference)
                points.append(SweepPoint(rho=rho, steps=n, nfe=traj.nfe, w2=w2))
                log.info("sweep cell", rho=rho, steps=n, nfe=traj.nfe, w2=w2)
        return SweepResult(points=points)
