"""
The popcone command group

`popcone relax|gen|reproduce|compare` run the library directly; because the
group is a FlaskGroup, `popcone run` serves the HTTP blueprints as well.
"""
import json
import logging
import os
import sys

import click
from flask.cli import FlaskGroup

from . import utils
from .errors import ProblemFormatError, RelaxationError
from .extensions import load_solver_config, oracle_budget, thread_count
from .models.enums import Approach, ConeKind, SolveStatus
from .services import experiments, instances
from .services.problem_io import load_problem, problem_hash, save_problem
from .services.tables import render

EXIT_PARSE = 2
EXIT_BUILD = 3
EXIT_SOLVER = 4

FORMATS = ('markdown', 'csv')
EXTENSIONS = {'markdown': 'md', 'csv': 'csv'}


def _fail(message: str, code: int):
    click.echo(f'Error: {message}', err=True)
    sys.exit(code)


def _threads(value):
    return thread_count() if value is None else max(1, value)


@click.command('relax')
@click.argument('file', type=click.Path(dir_okay=False))
@click.option('--approach', type=click.Choice([a.value for a in Approach]), default=Approach.tensor.value,
              show_default=True)
@click.option('--cone', type=click.Choice([c.value for c in ConeKind]), default=ConeKind.dnn.value,
              show_default=True)
@click.option('--relaxed-linking', is_flag=True, help='Linking equalities y = x_a x_b become <=.')
@click.option('--sign-rows', is_flag=True, help='Entrywise sign rows on free-variable SDP relaxations.')
@click.option('--out', type=click.Path(dir_okay=False), help='Write the program and the solve report as JSON.')
def relax_command(file, approach, cone, relaxed_linking, sign_rows, out):
    """Build one relaxation of the problem in FILE and solve it."""
    try:
        pop = load_problem(file)
    except ProblemFormatError as e:
        _fail(str(e), EXIT_PARSE)

    try:
        program, report = experiments.solve_relaxation(
            pop, Approach(approach), ConeKind(cone), load_solver_config(),
            relaxed_linking=relaxed_linking, add_sign_rows=sign_rows,
        )
    except RelaxationError as e:
        _fail(str(e), EXIT_BUILD)

    shape = program.shape()
    click.echo(f'bound {utils.format_bound(report.bound)} {report.status.value}')
    click.echo(f"vars {shape['vars']}  rows {shape['rows']}  nonneg {shape['nonneg']}  "
               f"psd_blocks {shape['psd_blocks']}  psd_sizes {shape['psd_sizes']}")
    if report.message:
        click.echo(report.message)

    if out:
        summary = {k: utils.json_number(v) for k, v in report.summary().items()}
        dump = {
            'problemHash': problem_hash(pop),
            'approach': approach,
            'cone': cone,
            'bound': utils.json_number(report.bound),
            'report': summary,
            'program': program.to_dict(),
        }
        with open(out, 'w', encoding='utf-8') as f:
            json.dump(dump, f, indent=2)
        logging.info(f"Wrote {out}")

    if report.status is SolveStatus.numerical_trouble and not report.reduced_accuracy:
        sys.exit(EXIT_SOLVER)


@click.command('gen')
@click.option('--example', type=click.IntRange(4, 5), required=True)
@click.option('--count', type=click.IntRange(min=1), default=None, help='Defaults to the table size.')
@click.option('--seed', type=int, default=None, help='Defaults to the example number.')
@click.option('--outdir', type=click.Path(file_okay=False), default='.', show_default=True)
@click.option('--budget', type=click.IntRange(min=1), default=None, help='Oracle samples per feasibility screen.')
def gen_command(example, count, seed, outdir, budget):
    """Write random Example 4 or Example 5 instances as problem files."""
    count = count or experiments.DEFAULT_COUNTS[example]
    seed = experiments.DEFAULT_SEEDS[example] if seed is None else seed
    problems = instances.generate(example, count, seed, screen_budget=budget or oracle_budget())
    os.makedirs(outdir, exist_ok=True)
    for k, pop in enumerate(problems, start=1):
        path = os.path.join(outdir, f'ex{example}_{k:03d}.json')
        save_problem(pop, path)
        click.echo(path)


@click.command('reproduce')
@click.option('--target', type=click.Choice(experiments.TARGETS), required=True)
@click.option('--full', is_flag=True, help='Example 2 on the whole grid.')
@click.option('--format', 'fmt', type=click.Choice(FORMATS), default='markdown', show_default=True)
@click.option('--outdir', type=click.Path(file_okay=False), help='Also write <target>.md and <target>.csv here.')
@click.option('--budget', type=click.IntRange(min=1), default=None, help='Oracle samples per instance.')
@click.option('--seed', type=int, default=None)
@click.option('--threads', type=click.IntRange(min=1), default=None, help='Defaults to POPCONE_THREADS.')
def reproduce_command(target, full, fmt, outdir, budget, seed, threads):
    """Rebuild one of the comparison tables."""
    table = experiments.reproduce(target, load_solver_config(), full=full, budget=budget or oracle_budget(),
                                  seed=seed, threads=_threads(threads))
    click.echo(render(table, fmt), nl=False)

    if outdir:
        os.makedirs(outdir, exist_ok=True)
        for name, ext in EXTENSIONS.items():
            path = os.path.join(outdir, f'{target}.{ext}')
            with open(path, 'w', encoding='utf-8', newline='') as f:
                f.write(render(table, name))
            logging.info(f"Wrote {path}")

    if table.failed:
        _fail(f'{target}: at least one cell failed or disagreed with its reference value', EXIT_SOLVER)


@click.command('compare')
@click.argument('files', nargs=-1, required=True, type=click.Path(dir_okay=False))
@click.option('--budget', type=click.IntRange(min=1), default=None, help='Oracle samples per instance.')
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--format', 'fmt', type=click.Choice(FORMATS), default='markdown', show_default=True)
@click.option('--threads', type=click.IntRange(min=1), default=None, help='Defaults to POPCONE_THREADS.')
def compare_command(files, budget, seed, fmt, threads):
    """Oracle value, TP-DNN and QP-DNN bounds for every problem file."""
    table, _ = experiments.compare_files(files, load_solver_config(), budget=budget or oracle_budget(),
                                         seed=seed, threads=_threads(threads))
    click.echo(render(table, fmt), nl=False)
    if table.failed:
        sys.exit(EXIT_SOLVER)


COMMANDS = (relax_command, gen_command, reproduce_command, compare_command)


def register_commands(app):
    for command in COMMANDS:
        app.cli.add_command(command)


def _create_app():
    from . import create_app
    return create_app()


main = FlaskGroup(create_app=_create_app, help='Tensor-cone and quadratic-lifting relaxations of polynomial problems.')
for _command in COMMANDS:
    main.add_command(_command)
