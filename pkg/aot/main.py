"""
Command-line entry point.

Every command writes a run manifest before it starts work, draws all of its
randomness from one seed (`--seed`, then AOT_SEED, then the config file, then
0) and reports failures on stderr as one machine-readable line:

    error: {"code": 2, "flag": "--steps", "message": "..."}

Exit codes: 0 success, 2 validation error, 3 runtime error.
"""

import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, NoReturn, Optional, Sequence, Tuple, Type

import click
import numpy as np
import structlog
import torch
from pydantic import BaseModel, ValidationError

from aot import __version__
from aot.config import settings
from aot.errors import InvalidInputError
from aot.models.dataset import Dataset, DatasetConfig, NormalizationRecord
from aot.models.guidance import GuidanceRunConfig
from aot.models.manifest import RunManifest
from aot.models.schedule import RHO, SIGMA_MAX, SIGMA_MIN, NoiseSchedule
from aot.models.training import RunConfig, TrainLog
from aot.services.analytic import AnalyticService
from aot.services.checkpoint import CheckpointService
from aot.services.datasets import build_dataset, load_csv, write_csv
from aot.services.datasets.registry import get_all_generator_definitions
from aot.services.denoiser import DenoiserService
from aot.services.diagnostics import DEFAULT_RHOS, DEFAULT_STEPS, DiagnosticsService
from aot.services.guidance import GuidanceService, GuidedDenoiser
from aot.services.sampler import DenoiserFn, SamplerService
from aot.services.schedule import ScheduleService
from aot.services.training import TrainingService
from aot.services.transport import TransportService
from aot.utils.csv_format import vector_columns, write_rows
from aot.utils.rng import RngStreams
from aot.utils.validate_config import (
    apply_overrides,
    validate_config,
    validate_config_dict,
)

log = structlog.get_logger()

EXIT_VALIDATION = 2
EXIT_RUNTIME = 3

# Service argument names that differ from the flag carrying them
FLAG_ALIASES = {"n": "--steps", "sigmas": "--steps", "path": "PATH"}


def _stderr_logger(*args: Any) -> structlog.PrintLogger:
    # resolved per call so redirected stderr streams are honoured
    return structlog.PrintLogger(sys.stderr)


def configure_logging(
    level: str = settings.LOG_LEVEL, fmt: str = settings.LOG_FORMAT
) -> None:
    """Route structlog to stderr so stdout stays machine-readable."""
    renderer: Any
    if fmt == "json":
        renderer = structlog.processors.JSONRenderer(sort_keys=True)
    else:
        renderer = structlog.dev.ConsoleRenderer(colors=False)

    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            renderer,
        ],
        wrapper_class=structlog.make_filtering_bound_logger(
            logging.getLevelName(level.upper())
        ),
        logger_factory=_stderr_logger,
        cache_logger_on_first_use=False,
    )


def _flag(field: Optional[str]) -> Optional[str]:
    if not field:
        return None
    if field in FLAG_ALIASES:
        return FLAG_ALIASES[field]
    if field.startswith("-") or field.isupper():
        return field
    return "--" + field.replace("_", "-")


def describe_error(exc: BaseException) -> Tuple[int, Optional[str], str]:
    """Map an exception to (exit code, offending flag, message)."""
    if isinstance(exc, click.UsageError):
        param = getattr(exc, "param", None)
        flag = None
        if param is not None:
            if isinstance(param, click.Argument):
                flag = param.human_readable_name
            elif param.opts:
                flag = param.opts[0]
        return EXIT_VALIDATION, flag, exc.format_message()
    if isinstance(exc, ValidationError):
        errors = exc.errors()
        loc = ".".join(str(part) for part in errors[0]["loc"]) if errors else None
        return EXIT_VALIDATION, _flag(loc), str(exc)
    if isinstance(exc, InvalidInputError):
        return EXIT_VALIDATION, _flag(exc.field), str(exc)
    return EXIT_RUNTIME, None, f"{type(exc).__name__}: {exc}"


def report_error(ctx: click.Context, exc: BaseException) -> NoReturn:
    """Print the `error: {...}` line on stderr and exit with its code."""
    code, flag, message = describe_error(exc)
    if code == EXIT_RUNTIME:
        log.error("command failed", error=message)
    payload = {"code": code, "flag": flag, "message": message}
    click.echo("error: " + json.dumps(payload, sort_keys=True), err=True)
    ctx.exit(code)


class AOTGroup(click.Group):
    """Command group that turns failures into an error line and exit code."""

    def parse_args(self, ctx: click.Context, args: List[str]) -> List[str]:
        try:
            return super().parse_args(ctx, args)
        except click.exceptions.NoArgsIsHelpError:
            raise
        except click.UsageError as e:
            report_error(ctx, e)

    def invoke(self, ctx: click.Context) -> Any:
        try:
            return super().invoke(ctx)
        except (click.exceptions.Exit, click.exceptions.Abort):
            raise
        except Exception as e:
            report_error(ctx, e)


# Helpers shared by the commands


def resolve_seed(flag: Optional[int], config_seed: Optional[int] = None) -> int:
    """--seed, then AOT_SEED, then the config file, then 0."""
    for candidate in (flag, settings.SEED, config_seed):
        if candidate is not None:
            return int(candidate)
    return 0


def load_run_config(
    path: Path, model: Type[BaseModel], overrides: Sequence[str]
) -> BaseModel:
    """Read a JSON config, apply `--set` overrides and validate."""
    text = Path(path).read_text()
    ok, result = validate_config(text, model)
    if not ok:
        raise InvalidInputError(f"{path}: {result}", field="CONFIG")
    if not overrides:
        return result

    try:
        data = apply_overrides(json.loads(text), overrides)
    except ValueError as e:
        raise InvalidInputError(str(e), field="--set") from e
    ok, result = validate_config_dict(data, model)
    if not ok:
        raise InvalidInputError(str(result), field="--set")
    return result


def _jsonable(value: Any) -> Any:
    return json.loads(json.dumps(value, default=str))


def write_manifest(
    ctx: click.Context,
    path: Path,
    seed: Optional[int],
    artifacts: Dict[str, Path],
    config: Optional[Dict[str, Any]] = None,
) -> RunManifest:
    manifest = RunManifest(
        command=ctx.info_name or ctx.command.name,
        options=_jsonable(ctx.params),
        config=config,
        seed=seed,
        threads=ctx.obj.get("threads", 1) if ctx.obj else 1,
        artifacts={name: str(p) for name, p in artifacts.items()},
        version=__version__,
    )
    manifest.write(path)
    log.info("manifest written", path=str(path), command=manifest.command)
    return manifest


def _manifest_path(out: Path) -> Path:
    return out.with_name(out.name + ".manifest.json")


def emit_json(payload: Any, out: Optional[Path] = None) -> None:
    text = json.dumps(payload, sort_keys=True, indent=2)
    if out is not None:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text + "\n")
    click.echo(text)


def _schedule(steps: int, rho: float, sigma_min: float, sigma_max: float):
    return ScheduleService.timesteps(steps, sigma_min, sigma_max, rho)


class DenoiserSource(BaseModel):
    """A denoiser from a checkpoint or an analytic oracle, with its data space."""

    denoiser: Any
    dim: int
    class_count: int = 0
    normalization: Optional[NormalizationRecord] = None


def denoiser_source(
    checkpoint: Optional[Path], oracle: Optional[str]
) -> DenoiserSource:
    if (checkpoint is None) == (oracle is None):
        raise InvalidInputError(
            "give exactly one of --checkpoint or --oracle", field="--checkpoint"
        )
    if oracle is not None:
        spec = AnalyticService.parse_oracle_spec(oracle)
        return DenoiserSource(denoiser=AnalyticService.denoiser(spec), dim=spec.dim)

    record = CheckpointService.read_checkpoint(checkpoint)
    if record.kind != "denoiser":
        raise InvalidInputError(
            f"{checkpoint} holds a {record.kind}, not a denoiser", field="--checkpoint"
        )
    model = CheckpointService.model_from_checkpoint(record, use_ema=True)
    return DenoiserSource(
        denoiser=DenoiserService.denoiser(model),
        dim=model.spec.input_dim,
        class_count=model.spec.class_count,
        normalization=CheckpointService.normalization(record),
    )


def _to_raw(source: DenoiserSource, points: np.ndarray) -> np.ndarray:
    if source.normalization is None:
        return points
    return source.normalization.invert(points)


def _to_model_space(source: DenoiserSource, points: np.ndarray) -> np.ndarray:
    if source.normalization is None:
        return points
    return source.normalization.apply(points)


def _parse_params(items: Sequence[str]) -> Dict[str, Any]:
    try:
        return apply_overrides({}, items)
    except ValueError as e:
        raise InvalidInputError(str(e), field="--param") from e


def write_train_log(path: Path, train_log: TrainLog) -> None:
    # wall time goes to the log only; the CSV must be reproducible
    header = ["refresh", "mean_loss", "mean_pairing_cost", "mean_independent_cost"]
    rows = (
        [r.refresh, r.mean_loss, r.mean_pairing_cost, r.mean_independent_cost]
        for r in train_log.records
    )
    with open(path, "w", newline="") as stream:
        write_rows(stream, header, rows)


def write_trajectories(path: Path, traj, dim: int) -> None:
    header = (
        ["trajectory", "node", "sigma"]
        + vector_columns("x", dim)
        + vector_columns("x0_hat", dim)
        + vector_columns("d", dim)
    )
    rows: List[List[Any]] = []
    for t in range(traj.batch_size):
        single = traj.row(t)
        for node in range(single.size):
            rows.append(
                [t, node, float(single.sigmas[node])]
                + single.xs[node].tolist()
                + single.x0_hats[node].tolist()
                + single.tangents[node].tolist()
            )
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as stream:
        write_rows(stream, header, rows)


seed_option = click.option(
    "--seed", type=int, default=None, help="Seed for every random draw."
)
steps_option = click.option(
    "--steps", type=int, default=18, show_default=True, help="Schedule length n."
)
rho_option = click.option(
    "--rho", type=float, default=RHO, show_default=True, help="Schedule exponent."
)
sigma_min_option = click.option(
    "--sigma-min", type=float, default=SIGMA_MIN, show_default=True
)
sigma_max_option = click.option(
    "--sigma-max", type=float, default=SIGMA_MAX, show_default=True
)
set_option = click.option(
    "--set",
    "overrides",
    multiple=True,
    metavar="KEY=VALUE",
    help="Override a config value; dotted keys address sections.",
)


@click.group(cls=AOTGroup)
@click.version_option(__version__, prog_name="aot")
@click.option(
    "--log-level",
    default=settings.LOG_LEVEL,
    type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
    show_default=True,
)
@click.option(
    "--log-format",
    default=settings.LOG_FORMAT,
    type=click.Choice(["console", "json"]),
    show_default=True,
)
@click.option(
    "--threads",
    default=settings.THREADS,
    type=click.IntRange(min=1),
    show_default=True,
    help="Worker threads for cost matrices, sample chunks and torch.",
)
@click.pass_context
def cli(ctx: click.Context, log_level: str, log_format: str, threads: int) -> None:
    """Diffusion training with approximated optimal transport pairing."""
    configure_logging(log_level, log_format)
    torch.set_num_threads(threads)
    settings.THREADS = threads
    ctx.obj = {"threads": threads}


@cli.command()
@click.argument("config", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@set_option
@seed_option
@click.option(
    "--out",
    type=click.Path(file_okay=False, path_type=Path),
    required=True,
    help="Output directory.",
)
@click.pass_context
def train(
    ctx: click.Context,
    config: Path,
    overrides: Tuple[str, ...],
    seed: Optional[int],
    out: Path,
) -> None:
    """Train a denoiser; writes checkpoint.json and train_log.csv."""
    run_config = load_run_config(config, RunConfig, overrides)
    run_seed = resolve_seed(seed, run_config.train.seed)
    run_config = run_config.model_copy(
        update={"train": run_config.train.model_copy(update={"seed": run_seed})}
    )
    resolved = run_config.model_dump(mode="json")

    checkpoint_path = out / "checkpoint.json"
    log_path = out / "train_log.csv"
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(
        ctx,
        out / "manifest.json",
        run_seed,
        {"checkpoint": checkpoint_path, "train_log": log_path},
        config=resolved,
    )

    rngs = RngStreams(run_seed)
    dataset = build_dataset(run_config.dataset, rngs.derive(0).data)
    checkpoint_dir = out / "checkpoints" if run_config.train.checkpoint_every else None
    result = TrainingService.run(
        run_config.train, dataset, rngs, checkpoint_dir=checkpoint_dir
    )

    CheckpointService.save_checkpoint(
        result.model,
        checkpoint_path,
        ema=result.ema,
        config=resolved,
        normalization=dataset.normalization,
        rng=rngs.describe(),
    )
    write_train_log(log_path, result.log)
    log.info(
        "training finished",
        refreshes=len(result.log.records),
        final_loss=result.log.losses[-1],
        checkpoint=str(checkpoint_path),
    )


@cli.command()
@click.argument(
    "checkpoint", type=click.Path(exists=True, dir_okay=False, path_type=Path)
)
@steps_option
@rho_option
@sigma_min_option
@sigma_max_option
@click.option("--count", type=click.IntRange(min=1), default=1000, show_default=True)
@seed_option
@click.option(
    "--out", type=click.Path(dir_okay=False, path_type=Path), required=True
)
@click.pass_context
def sample(
    ctx: click.Context,
    checkpoint: Path,
    steps: int,
    rho: float,
    sigma_min: float,
    sigma_max: float,
    count: int,
    seed: Optional[int],
    out: Path,
) -> None:
    """Draw samples with Heun; written in the original data coordinates."""
    schedule = _schedule(steps, rho, sigma_min, sigma_max)
    run_seed = resolve_seed(seed)
    source = denoiser_source(checkpoint, None)
    write_manifest(ctx, _manifest_path(out), run_seed, {"samples": out})

    _generate_to_csv(ctx, source.denoiser, source, schedule, count, run_seed, out)


def _generate_to_csv(
    ctx: click.Context,
    denoiser: DenoiserFn,
    source: DenoiserSource,
    schedule: NoiseSchedule,
    count: int,
    seed: int,
    out: Path,
) -> None:
    rngs = RngStreams(seed)
    samples, labels = SamplerService.generate(
        denoiser,
        schedule,
        count,
        source.dim,
        rngs.noise,
        class_count=source.class_count,
        label_rng=rngs.labels,
        threads=ctx.obj.get("threads", 1),
    )
    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(out, _to_raw(source, samples), labels)
    log.info("samples written", path=str(out), count=count)


@cli.command(name="eval")
@click.argument(
    "samples", type=click.Path(exists=True, dir_okay=False, path_type=Path)
)
@click.argument(
    "reference", type=click.Path(exists=True, dir_okay=False, path_type=Path)
)
@click.option(
    "--mode",
    "modes",
    multiple=True,
    metavar="X,Y,...",
    help="Mixture mode centre; repeat for each mode.",
)
@click.option("--cap", type=click.IntRange(min=1), default=None)
@seed_option
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None)
@click.pass_context
def eval_command(
    ctx: click.Context,
    samples: Path,
    reference: Path,
    modes: Tuple[str, ...],
    cap: Optional[int],
    seed: Optional[int],
    out: Optional[Path],
) -> None:
    """Empirical W2 (and mode counts) of samples against a reference set."""
    run_seed = resolve_seed(seed)
    if out is not None:
        write_manifest(ctx, _manifest_path(out), run_seed, {"metrics": out})

    sample_set = load_csv(samples)
    reference_set = load_csv(reference)
    if sample_set.size != reference_set.size:
        raise InvalidInputError(
            f"samples ({sample_set.size}) and reference ({reference_set.size}) "
            "must have the same number of rows",
            field="REFERENCE",
        )
    centres = None
    if modes:
        try:
            centres = np.array(
                [[float(v) for v in mode.split(",")] for mode in modes]
            )
        except ValueError as e:
            raise InvalidInputError(f"invalid mode: {e}", field="--mode") from e
        if centres.shape[1] != sample_set.dim:
            raise InvalidInputError(
                "mode centres must match the data dimension", field="--mode"
            )
    metrics = DiagnosticsService.eval_generation(
        sample_set.points,
        reference_set.points,
        modes=centres,
        cap=cap,
        rng=RngStreams(run_seed).evaluation,
    )
    emit_json(metrics.model_dump(mode="json"), out)


@cli.command(name="pair-stats")
@click.option(
    "--dataset",
    "source",
    default="gaussian",
    show_default=True,
    help="Registered generator name or a CSV path.",
)
@click.option(
    "--param", "params", multiple=True, metavar="KEY=VALUE", help="Generator option."
)
@click.option("--count", type=click.IntRange(min=1), default=10000, show_default=True)
@click.option("--pairs", type=click.IntRange(min=1), default=256, show_default=True)
@click.option("--trials", type=click.IntRange(min=1), default=100, show_default=True)
@click.option(
    "--cost",
    type=click.Choice(["euclidean", "sqeuclidean"]),
    default="euclidean",
    show_default=True,
)
@seed_option
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None)
@click.pass_context
def pair_stats(
    ctx: click.Context,
    source: str,
    params: Tuple[str, ...],
    count: int,
    pairs: int,
    trials: int,
    cost: str,
    seed: Optional[int],
    out: Optional[Path],
) -> None:
    """AOT versus independent pairing cost over repeated pool draws."""
    run_seed = resolve_seed(seed)
    if out is not None:
        write_manifest(ctx, _manifest_path(out), run_seed, {"pair_stats": out})

    rngs = RngStreams(run_seed)
    if source.endswith(".csv") or Path(source).is_file():
        dataset = load_csv(source)
    else:
        try:
            dataset = build_dataset(
                DatasetConfig(
                    generator=source,
                    params=_parse_params(params),
                    count=count,
                    normalize=False,
                ),
                rngs.data,
            )
        except InvalidInputError as e:
            if e.field == "generator":
                raise InvalidInputError(str(e), field="--dataset") from e
            if e.field not in ("count", "--param"):
                raise InvalidInputError(str(e), field="--param") from e
            raise
    stats = TransportService.pairing_cost_stats(
        dataset,
        pairs=pairs,
        trials=trials,
        seed=run_seed,
        squared=cost == "sqeuclidean",
    )

    header = ["trial", "aot_cost", "independent_cost", "relative_reduction"]
    rows = [
        [t.trial, t.aot_cost, t.independent_cost, t.relative_reduction]
        for t in stats.trials
    ]
    if out is None:
        write_rows(click.get_text_stream("stdout"), header, rows)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", newline="") as stream:
            write_rows(stream, header, rows)
    log.info(
        "pairing summary",
        mean_aot=stats.mean_aot_cost,
        mean_independent=stats.mean_independent_cost,
        mean_relative_reduction=stats.mean_relative_reduction,
        aot_wins=stats.aot_wins,
    )


@cli.command()
@steps_option
@rho_option
@sigma_min_option
@sigma_max_option
def schedule(steps: int, rho: float, sigma_min: float, sigma_max: float) -> None:
    """Print the noise levels t_0..t_n (t_n = 0) as CSV."""
    levels = _schedule(steps, rho, sigma_min, sigma_max)
    write_rows(
        click.get_text_stream("stdout"),
        ["i", "sigma"],
        ([i, float(s)] for i, s in enumerate(levels.sigmas)),
    )


@cli.command()
@click.option(
    "--checkpoint",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
)
@click.option(
    "--oracle",
    default=None,
    metavar="SPEC",
    help="point_mass:MX,MY | gaussian:MX,MY:STD | empirical:PATH",
)
@steps_option
@rho_option
@sigma_min_option
@sigma_max_option
@click.option("--count", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--label", type=click.IntRange(min=0), default=None)
@click.option(
    "--solver", type=click.Choice(["heun", "euler"]), default="heun", show_default=True
)
@seed_option
@click.option(
    "--out", type=click.Path(dir_okay=False, path_type=Path), required=True
)
@click.option(
    "--report", type=click.Path(dir_okay=False, path_type=Path), default=None
)
@click.pass_context
def traj(
    ctx: click.Context,
    checkpoint: Optional[Path],
    oracle: Optional[str],
    steps: int,
    rho: float,
    sigma_min: float,
    sigma_max: float,
    count: int,
    label: Optional[int],
    solver: str,
    seed: Optional[int],
    out: Path,
    report: Optional[Path],
) -> None:
    """Record full trajectories (model space) and their curvature report."""
    noise_schedule = _schedule(steps, rho, sigma_min, sigma_max)
    source = denoiser_source(checkpoint, oracle)
    run_seed = resolve_seed(seed)
    artifacts = {"trajectory": out}
    if report is not None:
        artifacts["report"] = report
    write_manifest(ctx, _manifest_path(out), run_seed, artifacts)

    rngs = RngStreams(run_seed)
    x_init = SamplerService.draw_initial(noise_schedule, count, source.dim, rngs.noise)
    labels = None
    if source.class_count:
        if label is not None and label >= source.class_count:
            raise InvalidInputError(
                f"label must be below {source.class_count}", field="--label"
            )
        labels = (
            np.full(count, label)
            if label is not None
            else rngs.labels.integers(0, source.class_count, size=count)
        )
    sampler = (
        SamplerService.heun_sample if solver == "heun" else SamplerService.euler_sample
    )
    trajectory = sampler(source.denoiser, noise_schedule, x_init, labels)
    write_trajectories(out, trajectory, source.dim)

    reports = DiagnosticsService.curvature_batch(trajectory)
    payload = {
        "nfe": trajectory.nfe,
        "steps": noise_schedule.n,
        "solver": solver,
        "mean_tangent_curvature": float(
            np.mean([r.tangent_curvature for r in reports])
        ),
        "mean_x0_drift": float(np.mean([r.x0_drift for r in reports])),
        "reports": [r.model_dump(mode="json") for r in reports],
    }
    emit_json(payload, report)


@cli.command()
@click.option(
    "--checkpoint",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
)
@click.option("--oracle", default=None, metavar="SPEC")
@click.option(
    "--reference",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    required=True,
    help="Reference points in original data coordinates.",
)
@click.option("--rhos", "rhos", type=float, multiple=True, default=DEFAULT_RHOS)
@click.option(
    "--step-counts", "step_counts", type=int, multiple=True, default=DEFAULT_STEPS
)
@sigma_min_option
@sigma_max_option
@seed_option
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None)
@click.pass_context
def sweep(
    ctx: click.Context,
    checkpoint: Optional[Path],
    oracle: Optional[str],
    reference: Path,
    rhos: Tuple[float, ...],
    step_counts: Tuple[int, ...],
    sigma_min: float,
    sigma_max: float,
    seed: Optional[int],
    out: Optional[Path],
) -> None:
    """W2 and NFE over a (rho, steps) grid from shared initial noise."""
    source = denoiser_source(checkpoint, oracle)
    run_seed = resolve_seed(seed)
    if out is not None:
        write_manifest(ctx, _manifest_path(out), run_seed, {"sweep": out})

    reference_set = load_csv(reference)
    if reference_set.dim != source.dim:
        raise InvalidInputError(
            "reference dimension does not match the denoiser", field="--reference"
        )
    rngs = RngStreams(run_seed)
    labels = None
    if source.class_count:
        if reference_set.labels is not None:
            labels = reference_set.labels
        else:
            labels = rngs.labels.integers(
                0, source.class_count, size=reference_set.size
            )
    result = DiagnosticsService.rho_step_sweep(
        source.denoiser,
        _to_model_space(source, reference_set.points),
        rngs.noise,
        rhos=rhos,
        steps=step_counts,
        sigma_min=sigma_min,
        sigma_max=sigma_max,
        labels=labels,
    )

    header = ["rho", "steps", "nfe", "w2"]
    rows = [[p.rho, p.steps, p.nfe, p.w2] for p in result.points]
    if out is None:
        write_rows(click.get_text_stream("stdout"), header, rows)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", newline="") as stream:
            write_rows(stream, header, rows)
    best = {str(steps): rho for steps, rho in result.best_rho().items()}
    log.info("best rho per step count", best=best)


def _real_dataset(
    run_config: GuidanceRunConfig,
    normalization: Optional[NormalizationRecord],
    rng: np.random.Generator,
) -> Dataset:
    """Real points mapped into the base model's normalised space."""
    raw = build_dataset(
        run_config.dataset.model_copy(update={"normalize": False}), rng
    )
    if normalization is None:
        return raw
    return Dataset(
        points=normalization.apply(raw.points),
        labels=raw.labels,
        class_count=raw.class_count,
        normalization=normalization,
    )


@cli.command(name="dg-train")
@click.argument(
    "checkpoint", type=click.Path(exists=True, dir_okay=False, path_type=Path)
)
@click.argument("config", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@set_option
@seed_option
@click.option(
    "--out",
    type=click.Path(file_okay=False, path_type=Path),
    required=True,
    help="Output directory.",
)
@click.pass_context
def dg_train(
    ctx: click.Context,
    checkpoint: Path,
    config: Path,
    overrides: Tuple[str, ...],
    seed: Optional[int],
    out: Path,
) -> None:
    """Train a real-vs-generated discriminator for a base checkpoint."""
    run_config = load_run_config(config, GuidanceRunConfig, overrides)
    dg_config = run_config.discriminator
    run_seed = resolve_seed(seed, dg_config.seed)
    dg_config = dg_config.model_copy(update={"seed": run_seed})
    run_config = run_config.model_copy(update={"discriminator": dg_config})
    resolved = run_config.model_dump(mode="json")

    disc_path = out / "discriminator.json"
    metrics_path = out / "dg_metrics.json"
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(
        ctx,
        out / "manifest.json",
        run_seed,
        {"discriminator": disc_path, "metrics": metrics_path},
        config=resolved,
    )

    source = denoiser_source(checkpoint, None)
    rngs = RngStreams(run_seed)
    real = _real_dataset(run_config, source.normalization, rngs.derive(0).data)
    if real.dim != source.dim:
        raise InvalidInputError(
            "dataset dimension does not match the checkpoint", field="CONFIG"
        )
    noise_schedule = ScheduleService.timesteps(
        dg_config.steps, SIGMA_MIN, SIGMA_MAX, dg_config.rho
    )
    generation = rngs.derive(2)
    points, labels = SamplerService.generate(
        source.denoiser,
        noise_schedule,
        dg_config.generated_count,
        source.dim,
        generation.noise,
        class_count=source.class_count,
        label_rng=generation.labels,
        threads=ctx.obj.get("threads", 1),
    )
    generated = Dataset(
        points=points,
        labels=labels,
        class_count=max(source.class_count, 1),
    )
    disc = GuidanceService.train_discriminator(
        real, generated, dg_config.use_aot, dg_config, rngs.derive(1)
    )
    CheckpointService.save_checkpoint(
        disc, disc_path, config=resolved, rng=rngs.describe()
    )

    held_out = rngs.evaluation
    held_out_count = min(real.size, generated.size, 2048)
    real_index = held_out.choice(real.size, size=held_out_count, replace=False)
    generated_index = held_out.choice(
        generated.size, size=held_out_count, replace=False
    )
    accuracy = {}
    for sigma in (0.1, 0.5, 2.0):
        accuracy[str(sigma)] = GuidanceService.discriminator_accuracy(
            disc,
            real.points[real_index],
            generated.points[generated_index],
            sigma,
            held_out,
            real_labels=None if real.labels is None else real.labels[real_index],
            generated_labels=None if labels is None else labels[generated_index],
        )
    metrics = {"accuracy": accuracy, "use_aot": dg_config.use_aot}
    metrics_path.write_text(json.dumps(metrics, sort_keys=True, indent=2) + "\n")
    log.info("discriminator trained", path=str(disc_path), accuracy=accuracy)


@cli.command(name="dg-sample")
@click.argument(
    "checkpoint", type=click.Path(exists=True, dir_okay=False, path_type=Path)
)
@click.argument(
    "discriminator", type=click.Path(exists=True, dir_okay=False, path_type=Path)
)
@click.option("--weight", type=float, default=1.0, show_default=True)
@steps_option
@rho_option
@sigma_min_option
@sigma_max_option
@click.option("--count", type=click.IntRange(min=1), default=1000, show_default=True)
@seed_option
@click.option(
    "--out", type=click.Path(dir_okay=False, path_type=Path), required=True
)
@click.pass_context
def dg_sample(
    ctx: click.Context,
    checkpoint: Path,
    discriminator: Path,
    weight: float,
    steps: int,
    rho: float,
    sigma_min: float,
    sigma_max: float,
    count: int,
    seed: Optional[int],
    out: Path,
) -> None:
    """Draw samples with discriminator guidance."""
    noise_schedule = _schedule(steps, rho, sigma_min, sigma_max)
    run_seed = resolve_seed(seed)
    source = denoiser_source(checkpoint, None)
    record = CheckpointService.read_checkpoint(discriminator)
    if record.kind != "discriminator":
        raise InvalidInputError(
            f"{discriminator} holds a {record.kind}, not a discriminator",
            field="DISCRIMINATOR",
        )
    disc = CheckpointService.model_from_checkpoint(record)
    if disc.spec.input_dim != source.dim:
        raise InvalidInputError(
            "discriminator dimension does not match the checkpoint",
            field="DISCRIMINATOR",
        )
    guided = GuidedDenoiser(source.denoiser, disc, weight)
    write_manifest(ctx, _manifest_path(out), run_seed, {"samples": out})

    _generate_to_csv(ctx, guided, source, noise_schedule, count, run_seed, out)
    log.info("guided sampling finished", discriminator_calls=guided.discriminator_calls)


@cli.command()
def generators() -> None:
    """List the registered dataset generators as JSON."""
    emit_json(get_all_generator_definitions())


if __name__ == "__main__":
    cli()
