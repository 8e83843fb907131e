import logging
from typing import Dict, List, Optional

import pandas as pd

from freemal.harness import (
    CSV_COLUMNS,
    ExperimentSpec,
    default_workers,
    n_grid_from_ticks,
    run_experiment,
)

log = logging.getLogger(__name__)


def generate_experiment_matrix(
    events: List[str],
    model: str,
    k: int,
    p: int,
    trials: int,
    seed: int,
    epsilon: str,
    L: int,
    lambda_: str,
    beta: str,
    n_grid: Optional[List[int]] = None,
    min_n: int = None,
    max_n: int = None,
    n_increment: int = None,
    n_type: str = "linear",
):
    """One experiment document per event, sharing the sampler and the n grid.

    The grid is either listed explicitly or generated from ticks."""
    if not n_grid:
        n_grid = n_grid_from_ticks(min_n, max_n, n_increment, n_type)

    experiments = []
    for event in events:
        spec = ExperimentSpec.from_dict(
            {
                "event": event,
                "model": model,
                "k": k,
                "p": p,
                "n": n_grid,
                "trials": trials,
                "seed": seed,
                "epsilon": epsilon,
                "L": L,
                "lambda": lambda_,
                "beta": beta,
            }
        )
        experiments.append(spec.to_dict())

    log.info(f"Generated {len(experiments)} experiments over n={list(n_grid)}")
    return {"experiment_matrix": {"experiments": experiments}}


def estimate_events(experiment_matrix: Dict, workers: Optional[int]):
    workers = workers or default_workers()
    estimates, fits = [], []
    for document in experiment_matrix["experiments"]:
        spec = ExperimentSpec.from_dict(document)
        result = run_experiment(spec, workers)
        frame = result.frame()
        frame.insert(0, "event", document["event"])
        estimates.append(frame)
        fits.append(
            {
                "event": document["event"],
                "slope": result.fit.slope,
                "intercept": result.fit.intercept,
                "censored": result.fit.censored,
            }
        )

    if estimates:
        combined = pd.concat(estimates, ignore_index=True)
    else:
        combined = pd.DataFrame(columns=["event", *CSV_COLUMNS])
    return {
        "estimates": combined,
        "decay_fits": pd.DataFrame(
            fits, columns=["event", "slope", "intercept", "censored"]
        ),
    }


def check_decay(estimates: pd.DataFrame, decay_fits: pd.DataFrame):
    """Flag events whose success frequency drops by more than two standard
    errors between consecutive n, or whose failure rate does not decay."""
    findings = []
    for event, rows in estimates.groupby("event", sort=False):
        p_hat = rows["p_hat"].to_numpy()
        stderr = rows["stderr"].to_numpy()
        inversions = int(
            sum(
                p_hat[j + 1] < p_hat[j] - 2 * max(stderr[j], stderr[j + 1])
                for j in range(len(p_hat) - 1)
            )
        )
        slope = float(decay_fits.loc[decay_fits["event"] == event, "slope"].iloc[0])
        decaying = slope < 0 or bool((rows["successes"] == rows["trials"]).all())
        if inversions or not decaying:
            log.warning(
                f"Event '{event}': {inversions} inversions, decay slope {slope:.6g}"
            )
        findings.append(
            {
                "event": event,
                "inversions": inversions,
                "slope": slope,
                "decaying": decaying,
            }
        )
    return {
        "decay_checks": pd.DataFrame(
            findings, columns=["event", "inversions", "slope", "decaying"]
        )
    }
