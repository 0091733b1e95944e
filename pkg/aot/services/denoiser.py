"""
Denoiser service.

The learned denoiser is a small fully-connected network F wrapped in the
preconditioning

    D(x; sigma) = c_skip(sigma) x + c_out(sigma) F(c_in(sigma) x, c_noise(sigma))

with c_skip = sd^2 / (sigma^2 + sd^2), c_out = sigma sd / sqrt(sigma^2 + sd^2),
c_in = 1 / sqrt(sigma^2 + sd^2) and c_noise = ln(sigma) / 4, where sd is the
data standard deviation. Everything runs in float64 on the CPU.
"""

import math
from typing import Any, Optional, Sequence, Tuple

import numpy as np
import structlog
import torch
from torch import nn
from torch.nn.utils import parameters_to_vector, vector_to_parameters

from aot.errors import InvalidInputError
from aot.models.denoiser import GradientBundle
from aot.models.training import DenoiserSpec
from aot.models.transport import Minibatch
from aot.services.schedule import ScheduleService
from aot.utils.rng import RngStreams

log = structlog.get_logger()

DTYPE = torch.float64


class SigmaEmbedding(nn.Module):
    """Sinusoidal features of c_noise at geometrically spaced frequencies."""

    def __init__(self, frequencies: int, max_frequency: float):
        super().__init__()
        if frequencies == 0:
            freqs = torch.zeros(0, dtype=DTYPE)
        elif frequencies == 1:
            freqs = torch.ones(1, dtype=DTYPE)
        else:
            exponents = torch.arange(frequencies, dtype=DTYPE) / (frequencies - 1)
            freqs = max_frequency**exponents
        self.register_buffer("freqs", freqs)

    @property
    def out_dim(self) -> int:
        return 2 * int(self.freqs.shape[0])

    def forward(self, c_noise: torch.Tensor) -> torch.Tensor:
        angles = c_noise[:, None] * self.freqs[None, :]
        return torch.cat([torch.sin(angles), torch.cos(angles)], dim=1)


class MLP(nn.Module):
    """SiLU network; weights drawn N(0, 1/fan_in), biases zero."""

    def __init__(
        self,
        in_dim: int,
        hidden_dims: Sequence[int],
        out_dim: int,
        generator: torch.Generator,
        zero_output: bool = True,
    ):
        super().__init__()
        dims = [in_dim, *hidden_dims]
        self.hidden = nn.ModuleList(
            nn.Linear(a, b, dtype=DTYPE) for a, b in zip(dims[:-1], dims[1:])
        )
        self.out = nn.Linear(dims[-1], out_dim, dtype=DTYPE)

        with torch.no_grad():
            for layer in self.hidden:
                _fan_in_init(layer, generator)
            if zero_output:
                self.out.weight.zero_()
                self.out.bias.zero_()
            else:
                _fan_in_init(self.out, generator)

    def forward(self, h: torch.Tensor) -> torch.Tensor:
        for layer in self.hidden:
            h = nn.functional.silu(layer(h))
        return self.out(h)


def _fan_in_init(layer: nn.Linear, generator: torch.Generator) -> None:
    fan_in = layer.weight.shape[1]
    weight = torch.randn(layer.weight.shape, generator=generator, dtype=DTYPE)
    layer.weight.copy_(weight / math.sqrt(fan_in))
    layer.bias.zero_()


def one_hot(labels: torch.Tensor, class_count: int) -> torch.Tensor:
    return nn.functional.one_hot(labels.long(), class_count).to(DTYPE)


class DenoiserModel(nn.Module):
    """Preconditioned MLP denoiser, conditioned on sigma and optionally a class."""

    def __init__(self, spec: DenoiserSpec, generator: torch.Generator):
        super().__init__()
        self.spec = spec
        self.embedding = SigmaEmbedding(
            spec.embedding_frequencies, spec.embedding_max_frequency
        )
        in_dim = spec.input_dim + self.embedding.out_dim + spec.class_count
        self.net = MLP(
            in_dim, spec.hidden_dims, spec.input_dim, generator, zero_output=True
        )

    def preconditioning(
        self, sigma: torch.Tensor
    ) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]:
        sd = self.spec.sigma_data
        total = sigma**2 + sd**2
        c_skip = sd**2 / total
        c_out = sigma * sd / torch.sqrt(total)
        c_in = 1.0 / torch.sqrt(total)
        c_noise = torch.log(sigma) / 4.0
        return c_skip, c_out, c_in, c_noise

    def forward(
        self,
        x: torch.Tensor,
        sigma: torch.Tensor,
        labels: Optional[torch.Tensor] = None,
    ) -> torch.Tensor:
        c_skip, c_out, c_in, c_noise = self.preconditioning(sigma)
        features = [c_in[:, None] * x, self.embedding(c_noise)]
        if self.spec.class_count:
            features.append(one_hot(labels, self.spec.class_count))
        raw = self.net(torch.cat(features, dim=1))
        return c_skip[:, None] * x + c_out[:, None] * raw


def as_batch(
    x: Any, sigma: Any, dim: int
) -> Tuple[torch.Tensor, torch.Tensor, bool]:
    """Validate (x, sigma) and return (B, d) / (B,) tensors plus a squeeze flag."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    batch = np.atleast_2d(x)
    if batch.ndim != 2 or batch.shape[1] != dim:
        raise InvalidInputError(
            f"x must have trailing dimension {dim}, got shape {x.shape}", field="x"
        )
    if not np.all(np.isfinite(batch)):
        raise InvalidInputError("x must be finite", field="x")
    sigmas = np.broadcast_to(np.asarray(sigma, dtype=np.float64), (batch.shape[0],))
    if not np.all(np.isfinite(sigmas)) or np.any(sigmas <= 0):
        raise InvalidInputError("sigma must be finite and positive", field="sigma")
    return (
        torch.tensor(batch, dtype=DTYPE),
        torch.tensor(np.array(sigmas), dtype=DTYPE),
        single,
    )


def as_labels(
    labels: Optional[Any], class_count: int, rows: int
) -> Optional[torch.Tensor]:
    if class_count == 0:
        return None
    if labels is None:
        raise InvalidInputError(
            "class-conditional model needs labels", field="labels"
        )
    values = np.broadcast_to(np.asarray(labels, dtype=np.int64), (rows,))
    if values.min() < 0 or values.max() >= class_count:
        raise InvalidInputError(
            f"labels must lie in 0..{class_count - 1}", field="labels"
        )
    return torch.tensor(np.array(values))


class DenoiserService:
    """Construction, evaluation and differentiation of learned denoisers."""

    @staticmethod
    def create(spec: DenoiserSpec, rngs: Optional[RngStreams] = None) -> DenoiserModel:
        rngs = rngs if rngs is not None else RngStreams(0)
        model = DenoiserModel(spec, rngs.torch_generator())
        log.debug(
            "denoiser created",
            parameters=DenoiserService.parameter_count(model),
            hidden=list(spec.hidden_dims),
        )
        return model

    @staticmethod
    def denoise(
        model: DenoiserModel,
        x: np.ndarray,
        sigma: Any,
        labels: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        """D(x; sigma) for one point (d,) or a batch (M, d)."""
        xt, st, single = as_batch(x, sigma, model.spec.input_dim)
        lt = as_labels(labels, model.spec.class_count, xt.shape[0])
        with torch.no_grad():
            out = model(xt, st, lt).numpy()
        if not np.all(np.isfinite(out)):
            raise InvalidInputError("denoiser produced non-finite output", field="x")
        return out[0] if single else out

    @staticmethod
    def denoiser(model: DenoiserModel):
        """Wrap a model in the (x, sigma, labels) denoiser calling convention."""

        def denoise(
            x: np.ndarray, sigma: Any, labels: Optional[np.ndarray] = None
        ) -> np.ndarray:
            return DenoiserService.denoise(model, x, sigma, labels)

        denoise.model = model
        return denoise

    @staticmethod
    def loss_and_grad(
        model: DenoiserModel,
        batch: Minibatch,
        sigmas: np.ndarray,
        weighting: str = "edm",
    ) -> GradientBundle:
        """
        L = (1/B) sum_i lambda(sigma_i) ||D(y_i + sigma_i eps_i; sigma_i) - y_i||^2

        and its gradient with respect to every parameter, by reverse mode.
        Parameters are left untouched.
        """
        points = np.asarray(batch.points, dtype=np.float64)
        noises = np.asarray(batch.noises, dtype=np.float64)
        sigmas = np.asarray(sigmas, dtype=np.float64)
        if points.ndim != 2 or points.shape != noises.shape:
            raise InvalidInputError(
                "minibatch points and noises must have equal shape (B, d)",
                field="batch",
            )
        if points.shape[1] != model.spec.input_dim:
            raise InvalidInputError(
                f"minibatch dimension {points.shape[1]} does not match model "
                f"dimension {model.spec.input_dim}",
                field="batch",
            )
        if sigmas.shape != (points.shape[0],):
            raise InvalidInputError("one sigma per minibatch element", field="sigmas")

        weights = np.asarray(
            ScheduleService.loss_weight(sigmas, model.spec.sigma_data, weighting)
        )
        y = torch.tensor(points, dtype=DTYPE)
        eps = torch.tensor(noises, dtype=DTYPE)
        st = torch.tensor(sigmas, dtype=DTYPE)
        wt = torch.tensor(weights, dtype=DTYPE)
        lt = as_labels(batch.labels, model.spec.class_count, points.shape[0])

        params = list(model.parameters())
        denoised = model(y + st[:, None] * eps, st, lt)
        loss = (wt * ((denoised - y) ** 2).sum(dim=1)).mean()
        grads = torch.autograd.grad(loss, params)
        flat = torch.cat([g.reshape(-1) for g in grads]).detach().numpy()
        return GradientBundle(loss=float(loss.detach()), grads=flat)

    @staticmethod
    def get_parameters(model: nn.Module) -> np.ndarray:
        return parameters_to_vector(model.parameters()).detach().numpy().copy()

    @staticmethod
    def set_parameters(model: nn.Module, vector: Sequence[float]) -> None:
        values = np.asarray(vector, dtype=np.float64)
        count = DenoiserService.parameter_count(model)
        if values.shape != (count,):
            raise InvalidInputError(
                f"expected {count} parameters, got {values.shape}", field="params"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("parameters must be finite", field="params")
        with torch.no_grad():
            vector_to_parameters(torch.tensor(values, dtype=DTYPE), model.parameters())

    @staticmethod
    def parameter_count(model: nn.Module) -> int:
        return sum(p.numel() for p in model.parameters())
