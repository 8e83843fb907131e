"""
Pipeline 'experiments': Monte-Carlo estimates of the event probabilities
over a grid of word lengths, and their exponential decay fits.
"""

from kedro.pipeline import node, pipeline

from freemal.pipelines.experiments.nodes import (
    check_decay,
    estimate_events,
    generate_experiment_matrix,
)


def create_pipeline(**kwargs) -> dict:
    pl_generate_experiment_matrix = pipeline(
        [
            node(
                func=generate_experiment_matrix,
                inputs={
                    "events": "params:experiments.events",
                    "model": "params:experiments.model",
                    "k": "params:experiments.k",
                    "p": "params:experiments.p",
                    "trials": "params:experiments.trials",
                    "seed": "params:experiments.seed",
                    "epsilon": "params:experiments.epsilon",
                    "L": "params:experiments.L",
                    "lambda_": "params:experiments.lambda",
                    "beta": "params:experiments.beta",
                    "n_grid": "params:experiments.n_grid",
                    "min_n": "params:experiments.min_n",
                    "max_n": "params:experiments.max_n",
                    "n_increment": "params:experiments.n_increment",
                    "n_type": "params:experiments.n_type",
                },
                outputs={
                    "experiment_matrix": "experiment_matrix",
                },
                name="generate_experiment_matrix",
            ),
        ],
        outputs={"experiment_matrix": "experiment_matrix"},
    )

    pl_estimate_events = pipeline(
        [
            node(
                func=estimate_events,
                inputs={
                    "experiment_matrix": "experiment_matrix",
                    "workers": "params:experiments.workers",
                },
                outputs={
                    "estimates": "estimates",
                    "decay_fits": "decay_fits",
                },
                name="estimate_events",
            ),
            node(
                func=check_decay,
                inputs={
                    "estimates": "estimates",
                    "decay_fits": "decay_fits",
                },
                outputs={
                    "decay_checks": "decay_checks",
                },
                name="check_decay",
            ),
        ],
        inputs={"experiment_matrix": "experiment_matrix"},
        outputs={
            "estimates": "estimates",
            "decay_fits": "decay_fits",
            "decay_checks": "decay_checks",
        },
    )

    return {
        "pl_generate_experiment_matrix": pl_generate_experiment_matrix,
        "pl_estimate_events": pl_estimate_events,
    }
