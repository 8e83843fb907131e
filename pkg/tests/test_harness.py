import io
import math
from fractions import Fraction

import numpy as np
import pytest

from freemal.errors import CapabilityError, PreconditionError, UnknownEventError
from freemal.harness import (
    CSV_COLUMNS,
    EVENTS,
    EstimateRow,
    ExperimentSpec,
    default_workers,
    fit_decay,
    n_grid_from_ticks,
    parse_event,
    resolve_event,
    run_experiment,
    run_trial,
    write_estimates_csv,
)


def spec(**values):
    values = {"event": "coverage", "k": 2, "n": [10, 20], "trials": 20, **values}
    return ExperimentSpec.from_dict(values)


def csv_text(result) -> str:
    stream = io.StringIO()
    write_estimates_csv(result, stream)
    return stream.getvalue()


def test_parse_event():
    assert parse_event("coverage(3)") == ("coverage", 3)
    assert parse_event("equidistributed(1/20)") == ("equidistributed", Fraction(1, 20))
    assert parse_event("free-basis") == ("free-basis", None)
    with pytest.raises(UnknownEventError):
        parse_event("prefixes(2)")
    with pytest.raises(UnknownEventError):
        parse_event("coverage(x)")
    with pytest.raises(UnknownEventError):
        resolve_event("no-such-event")


def test_event_argument_overrides_defaults():
    assert spec(event="coverage(2)", L=5).L == 2
    assert spec(event="equidistributed(1/10)").epsilon == Fraction(1, 10)


@pytest.mark.parametrize(
    "values, error",
    [
        ({"n": [20, 10]}, PreconditionError),
        ({"n": []}, PreconditionError),
        ({"trials": 0}, PreconditionError),
        ({"event": "free-basis", "k": 1}, PreconditionError),
        ({"event": "relabel-match-free", "k": 9}, CapabilityError),
        ({"event": "walk-length"}, UnknownEventError),
    ],
)
def test_invalid_specs(values, error):
    with pytest.raises(error):
        spec(**values)


def test_spec_round_trip():
    original = spec(event="prefixes", p=2, seed=4, **{"lambda": "1/30"})
    assert ExperimentSpec.from_dict(original.to_dict()) == original


def test_spec_seed_reaches_sampler():
    assert spec(seed=9).sampler.seed == 9


def test_n_grid_from_string():
    assert spec(n="10,20,40").n_grid == (10, 20, 40)


@pytest.mark.parametrize("name", sorted(EVENTS))
def test_every_event_runs(name):
    experiment = spec(event=name, p=2, n=[30], trials=2)
    assert run_trial(experiment, 30, 0) in (True, False)


def test_short_words_fail_instead_of_raising():
    experiment = spec(event="equidistributed", n=[1])
    assert not run_trial(experiment, 1, 0)


def test_estimate_row():
    row = EstimateRow.from_counts(100, 1000, 900)
    assert row.p_hat == 0.9
    assert math.isclose(row.standard_error, math.sqrt(0.9 * 0.1 / 1000))
    with pytest.raises(PreconditionError):
        EstimateRow.from_counts(100, 10, 11)


def test_fit_decay():
    rows = [
        EstimateRow.from_counts(100, 1000, 500),
        EstimateRow.from_counts(200, 1000, 750),
    ]
    fit = fit_decay(rows)
    assert math.isclose(fit.slope, np.log(0.5) / 100)
    assert fit.censored == 0


def test_fit_decay_censors_certain_events():
    rows = [EstimateRow.from_counts(n, 100, 100) for n in (10, 20, 30)]
    fit = fit_decay(rows)
    assert fit.censored == 3
    assert math.isclose(fit.slope, 0, abs_tol=1e-12)


def test_fit_decay_needs_two_lengths():
    fit = fit_decay([EstimateRow.from_counts(10, 100, 50)])
    assert math.isnan(fit.slope)


def test_csv_format():
    lines = csv_text(run_experiment(spec(event="coverage(1)"))).splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 4
    assert lines[1].startswith("10,20,")
    assert lines[1].endswith(",")
    assert lines[-1].startswith("#fit slope=")
    assert "censored=" in lines[-1]


def test_timing_fills_wall_time():
    result = run_experiment(spec(), timing=True)
    assert all(row.wall_time is not None for row in result.rows)


def test_deterministic_across_workers():
    experiment = spec(event="free-basis", p=2, n=[10, 20, 40], trials=40, seed=7)
    sequential = csv_text(run_experiment(experiment, workers=1))
    assert csv_text(run_experiment(experiment, workers=1)) == sequential
    assert csv_text(run_experiment(experiment, workers=2)) == sequential


def test_workers_must_be_positive():
    with pytest.raises(PreconditionError):
        run_experiment(spec(), workers=0)


def test_default_workers():
    assert default_workers() >= 1


def test_n_grid_from_ticks():
    assert n_grid_from_ticks(1, 5, 2) == [1, 3, 5]
    assert n_grid_from_ticks(5, 7, 1, "exp2") == [32, 64, 128]
    with pytest.raises(PreconditionError):
        n_grid_from_ticks(1, 5, 1, "log")


def _decays(result) -> bool:
    p_hat = [row.p_hat for row in result.rows]
    stderr = [row.standard_error for row in result.rows]
    inversions = sum(
        p_hat[j + 1] < p_hat[j] - 2 * max(stderr[j], stderr[j + 1])
        for j in range(len(p_hat) - 1)
    )
    drops = sum(b < a for a, b in zip(p_hat, p_hat[1:]))
    certain = all(row.successes == row.trials for row in result.rows)
    return inversions == 0 and drops <= 1 and (result.fit.slope < 0 or certain)


@pytest.mark.slow
@pytest.mark.parametrize(
    "event",
    [
        "prefixes",
        "distinct-subwords",
        "equidistributed(1/20)",
        "coverage(3)",
        "free-basis",
    ],
)
def test_events_become_typical(event):
    experiment = spec(
        event=event,
        model="walk",
        p=2,
        n=[100, 200, 400, 800],
        trials=1000,
        seed=1111,
        **{"lambda": "1/20", "beta": "1/5"},
    )
    assert _decays(run_experiment(experiment, workers=None))


@pytest.mark.slow
def test_coverage_reaches_certainty():
    experiment = spec(event="coverage(3)", n=[100, 200, 400, 800], trials=1000, seed=7)
    result = run_experiment(experiment, workers=None)
    assert result.rows[-1].p_hat >= 0.99


@pytest.mark.slow
def test_stats_identical_for_four_and_eight_workers():
    experiment = spec(event="coverage(3)", n=[100, 200, 400], trials=1000, seed=7)
    texts = {csv_text(run_experiment(experiment, workers=w)) for w in (1, 4, 8)}
    assert len(texts) == 1
