"""Project pipelines."""

from typing import Dict

from kedro.pipeline import Pipeline

from freemal.pipelines import certification as cert
from freemal.pipelines import experiments as exp
from freemal.pipelines import sharpness as sharp


def register_pipelines() -> Dict[str, Pipeline]:
    """Register the project's pipelines.

    Returns:
        A mapping from pipeline names to ``Pipeline`` objects.
    """
    exp_pipelines = exp.create_pipeline()
    cert_pipelines = cert.create_pipeline()
    sharp_pipelines = sharp.create_pipeline()

    experiments = (
        exp_pipelines["pl_generate_experiment_matrix"]
        + exp_pipelines["pl_estimate_events"]
    )
    certification = (
        cert_pipelines["pl_certify_subgroups"] + cert_pipelines["pl_falsify_certified"]
    )

    return {
        "__default__": experiments
        + certification
        + sharp_pipelines["pl_verify_sharpness"],
        "prepare": exp_pipelines["pl_generate_experiment_matrix"],
        "experiments": experiments,
        "certify": cert_pipelines["pl_certify_subgroups"],
        "certification": certification,
        "sharpness": sharp_pipelines["pl_verify_sharpness"],
    }
