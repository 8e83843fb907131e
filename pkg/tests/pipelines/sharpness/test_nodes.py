from freemal.pipelines.sharpness.nodes import verify_levels


def test_verify_levels():
    outputs = verify_levels(2, 2)
    summary = outputs["sharpness_summary"]
    assert list(summary["i"]) == [1, 2]
    assert list(summary["rank_C"]) == [1, 3]
    assert summary["equality"].all()
    assert summary["nested"].all()
    report = outputs["sharpness_report"]
    assert report["k"] == 2
    assert [level["i"] for level in report["levels"]] == [1, 2]
