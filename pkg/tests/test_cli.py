import pytest
import yaml
from click.testing import CliRunner

from freemal.cli import cli
from freemal.errors import TowerInvariantError


@pytest.fixture
def runner():
    return CliRunner()


def invoke(runner, *args):
    return runner.invoke(cli, list(args), catch_exceptions=False)


def test_reduce(runner):
    result = invoke(runner, "reduce", "abBA")
    assert result.exit_code == 0
    assert result.output.strip() == "1"


def test_reduce_cyclic(runner):
    assert invoke(runner, "reduce", "--cyclic", "baBAB").output.strip() == "B"


def test_apply(runner):
    assert invoke(runner, "apply", "W(a;{b})", "ab").output.strip() == "aba"


def test_minimize(runner):
    document = yaml.safe_load(invoke(runner, "minimize", "abAB").output)
    assert document["length"] == 4


def test_malformed_word_is_a_usage_error(runner):
    result = invoke(runner, "reduce", "a?b")
    assert result.exit_code == 2
    assert "?" in result.output


def test_malformed_automorphism_is_a_usage_error(runner):
    result = invoke(runner, "apply", "W(a;{b}", "ab")
    assert result.exit_code == 2


def test_fold_and_intersect(runner, tmp_path):
    first, second = tmp_path / "first.yml", tmp_path / "second.yml"
    assert invoke(runner, "fold", "--k", "2", "a", "-o", str(first)).exit_code == 0
    assert invoke(runner, "fold", "aa", "b", "-o", str(second)).exit_code == 0
    result = invoke(runner, "intersect", str(first), str(second))
    components = yaml.safe_load(result.output)
    basepointed = [c for c in components if c["basepointed"]]
    assert len(basepointed) == 1
    assert basepointed[0]["rank"] == 1


def test_fold_reads_generator_file(runner, tmp_path):
    gens = tmp_path / "gens.txt"
    gens.write_text("ab  # first\n\nba\n")
    result = invoke(runner, "fold", "--gens-file", str(gens))
    assert result.exit_code == 0
    assert result.output


def test_malnormal(runner):
    result = invoke(runner, "malnormal", "a", "b")
    assert yaml.safe_load(result.output) == {"malnormal": True}
    strict = invoke(runner, "malnormal", "--strict", "--k", "2", "aa")
    assert strict.exit_code == 1
    assert yaml.safe_load(strict.output)["malnormal"] is False


def test_certify(runner):
    result = invoke(runner, "certify", "a", "b")
    assert result.exit_code == 0
    document = yaml.safe_load(result.output)
    assert document["verdict"] == "inconclusive"
    assert invoke(runner, "certify", "--strict", "a", "b").exit_code == 1


def test_certify_falsify(runner):
    result = invoke(runner, "certify", "--falsify", "5", "aabbaBBAAbAB", "AAbbABBaaBaB")
    document = yaml.safe_load(result.output)
    assert document["falsification"]["tested"] == 5


def test_certify_needs_generators(runner):
    assert invoke(runner, "certify").exit_code == 2


def test_sample(runner):
    result = invoke(runner, "--trials", "4", "sample", "--model", "sphere", "--n", "9")
    lines = result.output.splitlines()
    assert len(lines) == 4
    assert all(len(line) == 9 for line in lines)


def test_sample_tuples(runner):
    result = invoke(runner, "sample", "--n", "12", "--p", "3", "--trials", "2")
    lines = result.output.splitlines()
    assert len(lines) == 2
    assert all(line.count("; ") == 2 for line in lines)


def test_coverage(runner):
    document = yaml.safe_load(invoke(runner, "coverage", "--L", "1", "abAB").output)
    assert document == {"covered": True, "missing_count": 0, "missing": []}
    assert invoke(runner, "coverage", "--strict", "--L", "2", "ab").exit_code == 1


def test_sharpness(runner):
    document = yaml.safe_load(invoke(runner, "sharpness", "--i", "1").output)
    assert document["equality"]
    assert document["rank_C"] == 1


def test_failed_construction_is_not_a_usage_error(runner, monkeypatch):
    def broken(k, i):
        raise TowerInvariantError(f"rank mismatch at level {i}")

    monkeypatch.setattr("freemal.cli.verify_sharpness", broken)
    result = invoke(runner, "sharpness", "--i", "1")
    assert result.exit_code == 3
    assert "rank mismatch at level 1" in result.output
    assert "Usage:" not in result.output


def test_stats(runner):
    args = ["--seed", "3", "stats", "--event", "free-basis", "--p", "2"]
    args += ["--n", "10,20", "--trials", "30", "--workers", "1"]
    first, second = invoke(runner, *args), invoke(runner, *args)
    assert first.exit_code == 0
    assert first.output == second.output
    lines = first.output.splitlines()
    assert lines[0] == "n,trials,successes,p_hat,stderr,wall_ms"
    assert lines[1].startswith("10,30,")
    assert lines[-1].startswith("#fit ")


def test_stats_unknown_event(runner):
    result = invoke(runner, "stats", "--event", "nope", "--n", "10", "--workers", "1")
    assert result.exit_code == 2


def test_stats_from_config(runner, tmp_path):
    config = tmp_path / "stats.yml"
    config.write_text(
        yaml.safe_dump(
            {"trials": 5, "stats": {"event": "coverage", "n": [10, 20], "L": 1}}
        )
    )
    result = invoke(runner, "--config", str(config), "stats", "--workers", "1")
    assert result.exit_code == 0
    lines = result.output.splitlines()
    assert lines[1].startswith("10,5,")
    assert lines[2].startswith("20,5,")
