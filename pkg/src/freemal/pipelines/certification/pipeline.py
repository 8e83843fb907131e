"""
Pipeline 'certification': sample random subgroups, certify them and test
the certified ones against random automorphisms.
"""

from kedro.pipeline import node, pipeline

from freemal.pipelines.certification.nodes import (
    certify_subgroups,
    falsify_certified,
    sample_subgroups,
)


def create_pipeline(**kwargs) -> dict:
    pl_certify_subgroups = pipeline(
        [
            node(
                func=sample_subgroups,
                inputs={
                    "model": "params:certification.model",
                    "k": "params:certification.k",
                    "n": "params:certification.n",
                    "p": "params:certification.p",
                    "count": "params:certification.subgroups",
                    "seed": "params:certification.seed",
                },
                outputs={
                    "subgroups": "subgroups",
                },
                name="sample_subgroups",
            ),
            node(
                func=certify_subgroups,
                inputs={
                    "subgroups": "subgroups",
                    "k": "params:certification.k",
                    "lambda_": "params:certification.lambda",
                    "beta": "params:certification.beta",
                    "epsilon": "params:certification.epsilon",
                    "min_outer": "params:certification.min_outer",
                },
                outputs={
                    "certificates": "certificates",
                },
                name="certify_subgroups",
            ),
        ],
        outputs={"subgroups": "subgroups", "certificates": "certificates"},
    )

    pl_falsify_certified = pipeline(
        [
            node(
                func=falsify_certified,
                inputs={
                    "subgroups": "subgroups",
                    "certificates": "certificates",
                    "k": "params:certification.k",
                    "automorphisms": "params:certification.automorphisms",
                    "factors": "params:certification.factors",
                    "seed": "params:certification.seed",
                },
                outputs={
                    "falsification": "falsification",
                },
                name="falsify_certified",
            ),
        ],
        inputs={"subgroups": "subgroups", "certificates": "certificates"},
        outputs={"falsification": "falsification"},
    )

    return {
        "pl_certify_subgroups": pl_certify_subgroups,
        "pl_falsify_certified": pl_falsify_certified,
    }
