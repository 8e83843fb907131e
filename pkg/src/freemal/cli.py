"""Command line tools for the freemal workbench.

Intended to be invoked as ``freemal`` or ``python -m freemal``; the ``run``
command drives the Kedro project pipelines."""
import logging
from typing import List, Optional, Sequence

import click
import yaml
from kedro.framework.cli.project import (
    NODE_ARG_HELP,
    PARAMS_ARG_HELP,
    PIPELINE_ARG_HELP,
    RUNNER_ARG_HELP,
    TAG_ARG_HELP,
)
from kedro.framework.cli.utils import (
    CONTEXT_SETTINGS,
    _get_values_as_tuple,
    _split_params,
    env_option,
)
from kedro.framework.session import KedroSession
from kedro.utils import load_obj
from rich.console import Console
from rich.logging import RichHandler

from freemal.certifier import CertParams, certify, falsify
from freemal.errors import FreeGroupError, TowerInvariantError
from freemal.freewords import (
    Alphabet,
    ReducedWord,
    covers_all_subwords,
    cyclic_core,
    format_word,
    free_reduce,
    parse_letters,
)
from freemal.harness import ExperimentSpec, run_experiment, write_estimates_csv
from freemal.sampling import (
    MODELS,
    SamplerSpec,
    random_automorphism,
    random_subgroup,
    sample_word,
)
from freemal.sharpness import verify_sharpness
from freemal.stallings import (
    deserialize,
    fiber_product,
    from_generators,
    is_malnormal,
    serialize,
)
from freemal.whitehead import apply, format_automorphism, minimize, parse_automorphism

log = logging.getLogger(__name__)

_RENAMED = {"lambda": "lambda_", "L": "window"}


def _option_name(key: str) -> str:
    return _RENAMED.get(key, key.replace("-", "_"))


def _config_file_callback(ctx, param, value):
    """Fill ``ctx.default_map`` from a YAML document. Top-level keys reach
    every command that has such an option, a mapping under a command name
    only that command. Flags given on the command line still win."""
    if not value:
        return value
    with open(value, encoding="utf-8") as f:
        document = yaml.safe_load(f) or {}
    if not isinstance(document, dict):
        raise click.BadParameter("the document must be a mapping", ctx, param)

    commands = getattr(ctx.command, "commands", {})
    shared = {
        _option_name(key): entry
        for key, entry in document.items()
        if key not in commands
    }
    default_map = dict(ctx.default_map or {})
    default_map.update(shared)
    for name in commands:
        section = document.get(name) or {}
        default_map[name] = {
            **shared,
            **{_option_name(key): entry for key, entry in section.items()},
        }
    ctx.default_map = default_map
    return value


def _setup_logging(verbose: int):
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbose, logging.DEBUG)
    handler = RichHandler(console=Console(stderr=True), show_path=False)
    root = logging.getLogger("freemal")
    root.handlers = [handler]
    root.setLevel(level)
    root.propagate = False


class IntList(click.ParamType):
    """Comma-separated integers, or a list of integers from a config document."""

    name = "integers"

    def convert(self, value, param, ctx):
        if isinstance(value, (list, tuple)):
            items = list(value)
        else:
            items = [item for item in str(value).split(",") if item.strip()]
        try:
            return [int(item) for item in items]
        except (TypeError, ValueError):
            self.fail(f"'{value}' is not a list of integers", param, ctx)


class ConstructionError(click.ClickException):
    """A construction broke its own invariants; the input was fine."""

    exit_code = 3


class _FreemalGroup(click.Group):
    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except TowerInvariantError as e:
            log.error(f"Construction failed: {e}")
            raise ConstructionError(str(e)) from e
        except FreeGroupError as e:
            raise click.UsageError(str(e), ctx) from e


def _rank_option(f):
    return click.option(
        "--k", "k", type=click.IntRange(min=1), default=None, help="Rank of F_k."
    )(f)


def _output_option(f):
    return click.option(
        "--output",
        "-o",
        type=click.File("w", encoding="utf-8"),
        default="-",
        help="Write the result here instead of standard output.",
    )(f)


def _seed_option(f):
    return click.option(
        "--seed", type=click.IntRange(min=0), default=None, help="Master seed."
    )(f)


def _trials_option(f):
    return click.option(
        "--trials", type=click.IntRange(min=1), default=None, help="Number of trials."
    )(f)


def _generators_options(f):
    f = click.argument("words", nargs=-1)(f)
    return click.option(
        "--gens-file",
        type=click.File("r", encoding="utf-8"),
        default=None,
        help="File with one generator per line ('#' starts a comment).",
    )(f)


def _read_words(
    texts: Sequence[str], k: Optional[int], minimum: int = 1
) -> List[ReducedWord]:
    raw = []
    alphabet = Alphabet(k) if k else None
    for text in texts:
        try:
            raw.append(parse_letters(text, alphabet))
        except FreeGroupError as e:
            raise click.BadParameter(str(e), param_hint=f"'{text}'") from e
    if alphabet is None:
        alphabet = Alphabet.infer((x for letters in raw for x in letters), minimum)
    return [free_reduce(letters, alphabet) for letters in raw]


def _read_generators(words, gens_file, k, minimum: int = 1) -> List[ReducedWord]:
    texts = list(words)
    if gens_file is not None:
        for line in gens_file:
            line = line.split("#", 1)[0].strip()
            if line:
                texts.append(line)
    if not texts:
        raise click.UsageError("No generators given")
    gens = _read_words(texts, k, minimum)
    if any(not len(g) for g in gens):
        raise click.BadParameter("generators must be nontrivial", param_hint="WORDS")
    return gens


def _dump(document, output):
    output.write(yaml.safe_dump(document, sort_keys=False, default_flow_style=None))


def _resolve(ctx, name, value):
    return ctx.obj[name] if value is None else value


@click.group(cls=_FreemalGroup, context_settings=CONTEXT_SETTINGS, name="freemal")
@click.option(
    "--config",
    "-c",
    type=click.Path(exists=True, dir_okay=False, resolve_path=True),
    is_eager=True,
    expose_value=False,
    callback=_config_file_callback,
    help="YAML document with option values; flags override it.",
)
@click.option("--seed", type=click.IntRange(min=0), default=0, help="Master seed.")
@click.option(
    "--trials", type=click.IntRange(min=1), default=1000, help="Number of trials."
)
@click.option("-v", "--verbose", count=True, help="-v for info, -vv for debug logs.")
@click.pass_context
def cli(ctx, seed, trials, verbose):
    """Free group words, Stallings graphs, Whitehead automorphisms and
    malnormality certificates."""
    _setup_logging(verbose)
    ctx.obj = {"seed": seed, "trials": trials}


@cli.command()
@click.argument("word")
@_rank_option
@click.option("--cyclic", is_flag=True, help="Print the cyclically reduced core.")
def reduce(word, k, cyclic):
    """Freely reduce WORD."""
    (w,) = _read_words([word], k)
    click.echo(format_word(cyclic_core(w) if cyclic else w))


@cli.command(name="minimize")
@click.argument("word")
@_rank_option
@_output_option
def minimize_command(word, k, output):
    """Whitehead-minimal representative of the orbit of WORD."""
    (w,) = _read_words([word], k)
    result = minimize(w)
    _dump(
        {
            "minimal": format_word(result.minimal),
            "length": len(result.minimal),
            "automorphism": format_automorphism(result.path),
        },
        output,
    )


@cli.command(name="apply")
@click.argument("automorphism")
@click.argument("word")
@_rank_option
def apply_automorphism(automorphism, word, k):
    """Image of WORD under AUTOMORPHISM (factors applied right to left)."""
    (w,) = _read_words([word], k)
    alpha = parse_automorphism(automorphism, w.alphabet)
    click.echo(format_word(apply(alpha, w)))


@cli.command()
@_generators_options
@_rank_option
@_output_option
def fold(words, gens_file, k, output):
    """Stallings graph of the subgroup generated by WORDS."""
    gens = _read_generators(words, gens_file, k)
    output.write(serialize(from_generators(gens, gens[0].alphabet)))


@cli.command()
@click.argument("first", type=click.File("r", encoding="utf-8"))
@click.argument("second", type=click.File("r", encoding="utf-8"))
@_output_option
def intersect(first, second, output):
    """Intersections of conjugates of two subgroups given as graph documents."""
    components = fiber_product(deserialize(first.read()), deserialize(second.read()))
    _dump(
        [
            {
                "basepointed": component.basepointed,
                "rank": component.rank,
                "generators": [format_word(w) for w in component.graph().basis_words()],
            }
            for component in components
        ],
        output,
    )


@cli.command()
@_generators_options
@_rank_option
@click.option("--strict", is_flag=True, help="Exit with 1 if not malnormal.")
@click.pass_context
def malnormal(ctx, words, gens_file, k, strict):
    """Whether the subgroup generated by WORDS is malnormal."""
    gens = _read_generators(words, gens_file, k)
    report = is_malnormal(from_generators(gens, gens[0].alphabet))
    document = {"malnormal": report.ok}
    if not report.ok:
        witness = report.witness
        document["witness"] = {
            "rank": witness.rank,
            "generators": [format_word(w) for w in witness.graph().basis_words()],
        }
    _dump(document, click.get_text_stream("stdout"))
    if strict and not report.ok:
        ctx.exit(1)


@cli.command(name="certify")
@_generators_options
@_rank_option
@click.option("--lambda", "lambda_", default="1/20", help="Prefix scale lambda.")
@click.option("--beta", default="1/5", help="Window scale beta.")
@click.option("--epsilon", default=None, help="Equidistribution target.")
@click.option("--min-outer", type=click.IntRange(min=1), default=None)
@click.option(
    "--falsify",
    "falsify_count",
    type=click.IntRange(min=0),
    default=0,
    help="Test the certificate against this many random automorphisms.",
)
@click.option("--factors", type=click.IntRange(min=1), default=5)
@_seed_option
@click.option("--strict", is_flag=True, help="Exit with 1 unless certified.")
@_output_option
@click.pass_context
def certify_command(
    ctx,
    words,
    gens_file,
    k,
    lambda_,
    beta,
    epsilon,
    min_outer,
    falsify_count,
    factors,
    seed,
    strict,
    output,
):
    """Aut-malnormality certificate for the subgroup generated by WORDS."""
    gens = _read_generators(words, gens_file, k, minimum=2)
    params = CertParams.from_dict(
        {"lambda": lambda_, "beta": beta, "epsilon": epsilon, "min_outer": min_outer}
    )
    report = certify(gens, params)
    document = report.to_document()
    if falsify_count:
        seed = _resolve(ctx, "seed", seed)
        alphabet = gens[0].alphabet
        automorphisms = (
            random_automorphism(alphabet.rank, factors, seed, t)
            for t in range(falsify_count)
        )
        violations = falsify(from_generators(gens, alphabet), automorphisms)
        document["falsification"] = {
            "tested": falsify_count,
            "violations": violations,
        }
    _dump(document, output)
    if strict and not report.certified:
        ctx.exit(1)


@cli.command()
@click.option("--model", type=click.Choice(MODELS), default="walk")
@_rank_option
@click.option("--n", "n", type=click.IntRange(min=0), required=True)
@click.option("--p", "p", type=click.IntRange(min=1), default=1)
@_seed_option
@_trials_option
@_output_option
@click.pass_context
def sample(ctx, model, k, n, p, seed, trials, output):
    """Draw random words (p = 1) or generator tuples, one per line."""
    spec = SamplerSpec(model, k or 2, n, p, _resolve(ctx, "seed", seed))
    for t in range(_resolve(ctx, "trials", trials)):
        if p == 1:
            output.write(format_word(sample_word(spec, t)) + "\n")
        else:
            words = random_subgroup(spec, t).words
            output.write("; ".join(format_word(w) for w in words) + "\n")


@cli.command()
@click.option("--event", required=True, help="Event name, e.g. coverage or free-basis.")
@click.option("--model", type=click.Choice(MODELS), default="walk")
@_rank_option
@click.option("--n", "n", type=IntList(), required=True, help="e.g. 100,200,400")
@click.option("--p", "p", type=click.IntRange(min=1), default=1)
@click.option("--L", "window", type=click.IntRange(min=1), default=3)
@click.option("--epsilon", default="1/20", help="Equidistribution threshold.")
@click.option("--lambda", "lambda_", default="1/20")
@click.option("--beta", default="1/5")
@click.option("--min-outer", type=click.IntRange(min=1), default=None)
@click.option(
    "--workers",
    type=click.IntRange(min=1),
    default=None,
    help="Worker processes; half the CPUs by default.",
)
@click.option("--timing", is_flag=True, help="Fill the wall_ms column.")
@_seed_option
@_trials_option
@_output_option
@click.pass_context
def stats(
    ctx,
    event,
    model,
    k,
    n,
    p,
    window,
    epsilon,
    lambda_,
    beta,
    min_outer,
    workers,
    timing,
    seed,
    trials,
    output,
):
    """Estimate an event probability over a grid of n and fit its decay."""
    spec = ExperimentSpec.from_dict(
        {
            "event": event,
            "model": model,
            "k": k or 2,
            "n": n,
            "p": p,
            "L": window,
            "epsilon": epsilon,
            "lambda": lambda_,
            "beta": beta,
            "min_outer": min_outer,
            "seed": _resolve(ctx, "seed", seed),
            "trials": _resolve(ctx, "trials", trials),
        }
    )
    write_estimates_csv(run_experiment(spec, workers, timing), output)


@cli.command()
@_rank_option
@click.option("--i", "i", type=click.IntRange(min=1), required=True, help="Level.")
@click.option("--strict", is_flag=True, help="Exit with 1 unless the bound is met.")
@_output_option
@click.pass_context
def sharpness(ctx, k, i, strict, output):
    """Tower level i, its splitting and a witness word for the rank bound."""
    report = verify_sharpness(k or 2, i)
    _dump(report.to_document(), output)
    if strict and not report.equality:
        ctx.exit(1)


@cli.command()
@click.argument("word")
@_rank_option
@click.option("--L", "window", type=click.IntRange(min=1), default=3)
@click.option("--undirected", is_flag=True, help="Count inverse occurrences too.")
@click.option("--strict", is_flag=True, help="Exit with 1 unless covered.")
@click.pass_context
def coverage(ctx, word, k, window, undirected, strict):
    """Whether the cyclic core of WORD contains every reduced word of length L."""
    (w,) = _read_words([word], k)
    report = covers_all_subwords(
        cyclic_core(w), window, "undirected" if undirected else "directed"
    )
    _dump(
        {
            "covered": report.ok,
            "missing_count": report.missing_count,
            "missing": [format_word(u) for u in report.missing],
        },
        click.get_text_stream("stdout"),
    )
    if strict and not report.ok:
        ctx.exit(1)


@cli.command()
@env_option
@click.option("--pipeline", "-p", type=str, default=None, help=PIPELINE_ARG_HELP)
@click.option("--node", "-n", "node_names", type=str, multiple=True, help=NODE_ARG_HELP)
@click.option("--tag", "-t", type=str, multiple=True, help=TAG_ARG_HELP)
@click.option(
    "--runner", "-r", type=str, default=None, multiple=False, help=RUNNER_ARG_HELP
)
@click.option(
    "--params",
    type=click.UNPROCESSED,
    default="",
    help=PARAMS_ARG_HELP,
    callback=_split_params,
)
def run(env, pipeline, node_names, tag, runner, params):
    """Run the project pipelines."""
    runner_class = load_obj(runner or "SequentialRunner", "kedro.runner")
    tag = _get_values_as_tuple(tag) if tag else tag
    node_names = _get_values_as_tuple(node_names) if node_names else node_names

    with KedroSession.create(env=env, extra_params=params) as session:
        session.run(
            tags=tag,
            runner=runner_class(),
            node_names=node_names,
            pipeline_name=pipeline,
        )
