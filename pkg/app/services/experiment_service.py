"""Experiment service module.

This module runs an experiment configuration: for every sweep point and
trial it generates a seeded instance, builds the application problem, solves
it and evaluates the application's metrics. Trials run concurrently on worker
threads; the rows are merged in (point, trial) order so results.csv does not
depend on scheduling.
"""

import asyncio
import math
import os
import time
from pathlib import Path
from typing import List, Optional, Tuple

from app.applications.builders import build_problem
from app.applications.metrics import nmse_db, nmse_h_resolved, nmse_x, nmse_z, rpca_low_rank
from app.core.config import get_settings
from app.core.exceptions import ExperimentError, UampMfException
from app.core.logging_config import get_logger
from app.datagen.generators import GenSpec
from app.datagen.instances import Instance, generate_instance
from app.denoisers.gaussian import GaussianGammaDenoiser
from app.services.experiment_config import ExperimentConfig
from app.services.plotting import write_plots
from app.solvers.engine import solve
from app.solvers.uamp import solve_uamp
from app.storage.results_store import ResultRow, write_config_echo, write_results

logger = get_logger(__name__)

Point = Tuple[Optional[float], Optional[float]]

METRICS = {
    "rpca": ("NMSE_Z",),
    "dl": ("NMSE_H",),
    "csmu": ("NMSE_X",),
    "nmf": ("NMSE_Z",),
    "sparse_mf": ("NMSE_H", "NMSE_Z"),
    "sparse_nmf": ("NMSE_Z",),
    "uamp": ("NMSE_X",),
}


def worker_count() -> int:
    """Thread cap from ``UAMPMF_THREADS``; 0 means one per CPU."""
    threads = get_settings().UAMPMF_THREADS
    if threads > 0:
        return threads
    return os.cpu_count() or 1


def _solve_linear_model(config: ExperimentConfig, instance: Instance) -> Tuple[dict, int, bool]:
    prior = config.prior
    denoiser = GaussianGammaDenoiser(instance.X.shape, epsilon=prior.epsilon, eta=prior.eta)
    result = solve_uamp(
        instance.Y,
        instance.H,
        instance.noise_precision,
        denoiser,
        variant=config.uamp.variant,
        tol=config.uamp.tol,
        max_iters=config.uamp.max_iters,
    )
    return {"NMSE_X": nmse_x(instance.X, result.x_est)}, result.iterations, result.converged


def _solve_factorization(config: ExperimentConfig, gen: GenSpec, instance: Instance) -> Tuple[dict, int, bool]:
    application = config.experiment.application
    spec = config.application_spec(gen, instance.extras.get("h_bar"))
    problem = build_problem(spec, instance.Y, config.solver_options(gen.seed))
    result = solve(problem)

    values = {}
    if application == "rpca":
        values["NMSE_Z"] = nmse_db(instance.Z, rpca_low_rank(result.H_hat, result.X_hat, spec.rank), "NMSE_Z")
    elif application == "csmu":
        values["NMSE_X"] = nmse_x(instance.X, result.X_hat)
    else:
        for metric in METRICS[application]:
            if metric == "NMSE_H":
                values[metric] = nmse_h_resolved(instance.H, result.H_hat)
            else:
                values[metric] = nmse_z(instance.Z, result.H_hat, result.X_hat)
    return values, result.iterations, result.converged


def run_trial(config: ExperimentConfig, point: Point, seed: int) -> List[ResultRow]:
    """
    Generate, solve and evaluate one (point, seed) pair.

    Any library failure becomes one non-converged row per metric carrying
    ``FAILED_TRIAL_DB``; the experiment never stops on a bad trial.
    """
    settings = get_settings()
    application = config.experiment.application
    axis1, axis2 = point
    started = time.perf_counter()
    try:
        gen = config.gen_spec(point, seed)
        instance = generate_instance(application, gen)
        if application == "uamp":
            values, iters, converged = _solve_linear_model(config, instance)
        else:
            values, iters, converged = _solve_factorization(config, gen, instance)
    except (UampMfException, ValueError, FloatingPointError, ArithmeticError) as e:
        logger.warning(
            f"Trial failed at point {point}, seed {seed}: {e}",
            extra={"application": application, "seed": seed},
        )
        values = {metric: settings.FAILED_TRIAL_DB for metric in METRICS[application]}
        iters, converged = 0, False

    if not all(math.isfinite(value) for value in values.values()):
        values = {metric: settings.FAILED_TRIAL_DB for metric in METRICS[application]}
        converged = False

    wall = time.perf_counter() - started if config.experiment.record_wall_time else 0.0
    logger.debug(
        f"Trial done at point {point}, seed {seed}",
        extra={"iterations": iters, "converged": converged, **values},
    )
    return [
        ResultRow(
            application=application,
            axis1=axis1,
            axis2=axis2,
            seed=seed,
            metric=metric,
            value_db=values[metric],
            iters=iters,
            wall_s=wall,
            converged=converged,
        )
        for metric in METRICS[application]
    ]


async def _run_trials(config: ExperimentConfig) -> List[ResultRow]:
    semaphore = asyncio.Semaphore(worker_count())

    async def bounded(point: Point, seed: int) -> List[ResultRow]:
        async with semaphore:
            return await asyncio.to_thread(run_trial, config, point, seed)

    jobs = [
        bounded(point, config.data.seed + trial)
        for point in config.points()
        for trial in range(config.experiment.trials)
    ]
    # gather keeps submission order, which is the (point, seed) order
    batches = await asyncio.gather(*jobs)
    return [row for batch in batches for row in batch]


def _with_overrides(config: ExperimentConfig, seed: Optional[int], output_dir: Optional[str]) -> ExperimentConfig:
    experiment = config.experiment
    data = config.data
    if output_dir is not None:
        experiment = experiment.model_copy(update={"output_dir": str(output_dir)})
    if seed is not None:
        data = data.model_copy(update={"seed": int(seed)})
    return config.model_copy(update={"experiment": experiment, "data": data})


def run_experiment(
    config: ExperimentConfig,
    output_dir: Optional[str] = None,
    seed: Optional[int] = None,
) -> List[ResultRow]:
    """
    Run every (sweep point, trial) of ``config`` and write its artifacts.

    Args:
        config: Validated experiment configuration
        output_dir: Overrides ``[experiment] output_dir``
        seed: Overrides ``[data] seed``; trial t uses seed + t

    Returns:
        List[ResultRow]: Rows in (point, seed, metric) order

    Raises:
        ExperimentError: If the artifacts cannot be written
    """
    config = _with_overrides(config, seed, output_dir)
    application = config.experiment.application
    out = Path(config.experiment.output_dir)
    points = config.points()
    logger.info(
        f"Running {application} experiment",
        extra={
            "points": len(points),
            "trials": config.experiment.trials,
            "axes": list(config.axes),
            "workers": worker_count(),
        },
    )

    rows = asyncio.run(_run_trials(config))

    failed = sum(1 for row in rows if not row.converged)
    if failed:
        logger.warning(f"{failed} of {len(rows)} rows did not converge")

    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ExperimentError(application, f"cannot create output directory {out}: {e}") from e
    write_results(out / "results.csv", rows)
    write_config_echo(out / "config.echo", config.to_ini())
    write_plots(out, config, rows)
    logger.info(f"Experiment {application} finished, artifacts in {out}")
    return rows
