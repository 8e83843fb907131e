"""
Pipeline 'sharpness': build the subgroup tower and verify that its edge
groups attain the splitting rank bound.
"""

from kedro.pipeline import node, pipeline

from freemal.pipelines.sharpness.nodes import verify_levels


def create_pipeline(**kwargs) -> dict:
    pl_verify_sharpness = pipeline(
        [
            node(
                func=verify_levels,
                inputs={
                    "k": "params:sharpness.k",
                    "max_level": "params:sharpness.max_level",
                },
                outputs={
                    "sharpness_report": "sharpness_report",
                    "sharpness_summary": "sharpness_summary",
                },
                name="verify_levels",
            ),
        ],
        outputs={
            "sharpness_report": "sharpness_report",
            "sharpness_summary": "sharpness_summary",
        },
    )

    return {"pl_verify_sharpness": pl_verify_sharpness}
