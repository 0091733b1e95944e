"""
Sampler service.

Deterministic probability-flow ODE integration dx/dsigma = (x - D(x; sigma)) / sigma
with Heun's method or plain Euler. A schedule with n positive levels costs
2n - 1 denoiser evaluations under Heun: two per interval between positive
levels and one for the final jump to sigma = 0, which lands exactly on D.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog

from aot.errors import InvalidInputError
from aot.models.schedule import NoiseSchedule
from aot.models.trajectory import Trajectory

log = structlog.get_logger()

DenoiserFn = Callable[..., np.ndarray]
ScheduleLike = Union[NoiseSchedule, Sequence[float], np.ndarray]

# Rows per chunk when generating many samples; fixed so results do not
# depend on the thread count
GENERATE_CHUNK = 512


class CountingDenoiser:
    """Wraps a denoiser and counts its evaluations."""

    def __init__(self, denoiser: DenoiserFn):
        self.denoiser = denoiser
        self.calls = 0

    def __call__(
        self, x: np.ndarray, sigma: Any, labels: Optional[np.ndarray] = None
    ) -> np.ndarray:
        self.calls += 1
        return self.denoiser(x, sigma, labels)


def _as_schedule(schedule: ScheduleLike) -> NoiseSchedule:
    if isinstance(schedule, NoiseSchedule):
        return schedule
    sigmas = np.asarray(schedule, dtype=np.float64)
    if sigmas.ndim != 1 or sigmas.size == 0 or sigmas[-1] != 0.0:
        raise InvalidInputError(
            "schedule must end with a terminal 0", field="schedule"
        )
    return NoiseSchedule.from_sigmas(sigmas)


def _as_state(x_init: np.ndarray) -> np.ndarray:
    x = np.array(x_init, dtype=np.float64)
    if x.ndim not in (1, 2) or not np.all(np.isfinite(x)):
        raise InvalidInputError(
            "x_init must be a finite (d,) or (M, d) array", field="x_init"
        )
    return x


class _Recorder:
    def __init__(self):
        self.sigmas: List[float] = []
        self.xs: List[np.ndarray] = []
        self.x0_hats: List[np.ndarray] = []
        self.tangents: List[np.ndarray] = []

    def add(
        self, sigma: float, x: np.ndarray, x0_hat: np.ndarray, tangent: np.ndarray
    ) -> None:
        self.sigmas.append(sigma)
        self.xs.append(x)
        self.x0_hats.append(x0_hat)
        self.tangents.append(tangent)

    def finish(
        self, x: np.ndarray, nfe: int, labels: Optional[np.ndarray]
    ) -> Trajectory:
        self.add(0.0, x, x, np.zeros_like(x))
        return Trajectory(
            sigmas=self.sigmas,
            xs=np.stack(self.xs),
            x0_hats=np.stack(self.x0_hats),
            tangents=np.stack(self.tangents),
            nfe=nfe,
            labels=labels,
        )


class SamplerService:
    """Heun and Euler samplers with full trajectory recording."""

    @staticmethod
    def heun_sample(
        denoiser: DenoiserFn,
        schedule: ScheduleLike,
        x_init: np.ndarray,
        labels: Optional[np.ndarray] = None,
    ) -> Trajectory:
        """
        Heun integration over every interval between positive levels, then a
        single Euler step to 0, which sets x to D(x; t_{n-1}).
        """
        schedule = _as_schedule(schedule)
        counter = CountingDenoiser(denoiser)
        recorder = _Recorder()
        x = _as_state(x_init)

        for t_cur, t_next in schedule.intervals():
            denoised = counter(x, t_cur, labels)
            d_cur = (x - denoised) / t_cur
            recorder.add(t_cur, x, denoised, d_cur)
            if t_next == 0.0:
                x = denoised
                break
            x_pred = x + (t_next - t_cur) * d_cur
            d_next = (x_pred - counter(x_pred, t_next, labels)) / t_next
            x = x + (t_next - t_cur) * (d_cur + d_next) / 2

        log.debug("heun sample finished", steps=schedule.n, nfe=counter.calls)
        return recorder.finish(x, counter.calls, labels)

    @staticmethod
    def euler_sample(
        denoiser: DenoiserFn,
        schedule: ScheduleLike,
        x_init: np.ndarray,
        labels: Optional[np.ndarray] = None,
    ) -> Trajectory:
        """First-order integration; one denoiser evaluation per level."""
        schedule = _as_schedule(schedule)
        counter = CountingDenoiser(denoiser)
        recorder = _Recorder()
        x = _as_state(x_init)

        for t_cur, t_next in schedule.intervals():
            denoised = counter(x, t_cur, labels)
            d_cur = (x - denoised) / t_cur
            recorder.add(t_cur, x, denoised, d_cur)
            if t_next == 0.0:
                x = denoised
                break
            x = x + (t_next - t_cur) * d_cur

        return recorder.finish(x, counter.calls, labels)

    @staticmethod
    def heun_segment(
        denoiser: DenoiserFn,
        schedule: ScheduleLike,
        x_init: np.ndarray,
        labels: Optional[np.ndarray] = None,
    ) -> Tuple[np.ndarray, int]:
        """Heun over sigma_max -> sigma_min only; returns (x at sigma_min, nfe)."""
        schedule = _as_schedule(schedule)
        counter = CountingDenoiser(denoiser)
        x = _as_state(x_init)
        for t_cur, t_next in schedule.intervals():
            if t_next == 0.0:
                break
            d_cur = (x - counter(x, t_cur, labels)) / t_cur
            x_pred = x + (t_next - t_cur) * d_cur
            d_next = (x_pred - counter(x_pred, t_next, labels)) / t_next
            x = x + (t_next - t_cur) * (d_cur + d_next) / 2
        return x, counter.calls

    @staticmethod
    def one_step_estimate(
        denoiser: DenoiserFn,
        x: np.ndarray,
        sigma: float,
        labels: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        """The full Euler jump from sigma to 0, which is D(x; sigma)."""
        if not (np.isfinite(sigma) and sigma > 0):
            raise InvalidInputError("sigma must be finite and positive", field="sigma")
        return np.asarray(denoiser(_as_state(x), sigma, labels), dtype=np.float64)

    @staticmethod
    def draw_initial(
        schedule: NoiseSchedule,
        count: int,
        dim: int,
        rng: np.random.Generator,
    ) -> np.ndarray:
        """x_init = sigma_max * N(0, I)."""
        return schedule.sigma_max * rng.standard_normal((count, dim))

    @staticmethod
    def generate(
        denoiser: DenoiserFn,
        schedule: NoiseSchedule,
        count: int,
        dim: int,
        noise_rng: np.random.Generator,
        class_count: int = 0,
        label_rng: Optional[np.random.Generator] = None,
        threads: int = 1,
    ) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        """
        Draw `count` samples with Heun from fresh initial noise.

        Conditional models get labels drawn uniformly over the classes.
        Rows are integrated in fixed chunks, optionally on several threads.
        """
        if count < 1:
            raise InvalidInputError("count must be at least 1", field="count")
        x_init = SamplerService.draw_initial(schedule, count, dim, noise_rng)
        labels = None
        if class_count:
            rng = label_rng if label_rng is not None else noise_rng
            labels = rng.integers(0, class_count, size=count)

        starts = range(0, count, GENERATE_CHUNK)

        def run(start: int) -> np.ndarray:
            stop = min(start + GENERATE_CHUNK, count)
            chunk_labels = None if labels is None else labels[start:stop]
            return SamplerService.heun_sample(
                denoiser, schedule, x_init[start:stop], chunk_labels
            ).final

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                parts = list(pool.map(run, starts))
        else:
            parts = [run(start) for start in starts]

        samples = np.concatenate(parts, axis=0)
        log.info(
            "samples generated",
            count=count,
            steps=schedule.n,
            rho=schedule.rho,
            nfe_per_sample=2 * schedule.n - 1,
        )
        return samples, labels
