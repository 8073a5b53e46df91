"""
The `nbmf` command.

    nbmf factorize --config run.cfg --out results/ --als.rank=10
    nbmf gen-synth --n=110 --k=10 --rho=0.5 --out synthetic/
    nbmf calibrate --config run.cfg --distances 0,0.3,0.6
    nbmf solve-qubo column.qubo --solver RA --initial 0110
    nbmf relaxation-study --preset paper-synthetic --out study/

Every configuration key can be given as `--section.key=value` after the
subcommand. Exit codes: 0 success, 2 invalid configuration or input format,
3 dataset problems, 1 anything else.
"""
import argparse
import asyncio
import json
import logging
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Callable, Optional

from pydantic import ValidationError

from nbmf_annealing.config import (
    PRESETS,
    CalibrationConfig,
    ConfigTree,
    GenSynthConfig,
    RunConfig,
    SolveQuboConfig,
    StudyRunConfig,
    build_config,
    ensure_configuration_errors,
    parse_overrides,
    preset,
    read_config_file,
)
from nbmf_annealing.constants import SYNTHETIC_OUTPUT_DIR
from nbmf_annealing.core import BinaryVector, RngSpec
from nbmf_annealing.datagen import SyntheticSpec, export_dataset, generate_dataset, load_manifest
from nbmf_annealing.errors import ConfigurationError, IngestionError, NbmfError, QuboFormatError
from nbmf_annealing.experiments import run_calibration, run_factorize, run_study
from nbmf_annealing.qubo import read_qubo
from nbmf_annealing.reporting import staged_output
from nbmf_annealing.results import SolverKind
from nbmf_annealing.solvers import SolverConfig, solve_instance

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIGURATION = 2
EXIT_DATASET = 3

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'
LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR')


def configure_logging(level: str) -> None:
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def run_checks(config: RunConfig) -> None:
    """
    Run the filesystem checks of `config` before anything is written.

    Failures located under `dataset` raise `IngestionError`, all others
    `ConfigurationError`.
    """

    try:
        with ensure_configuration_errors():
            asyncio.run(config.model_async_check())
    except ConfigurationError as O_o:
        if any(loc[:1] == ('dataset',) for loc, _ in O_o.details):
            raise IngestionError(O_o.message) from O_o
        raise


def cmd_factorize(config: RunConfig) -> int:
    run_checks(config)
    V = config.dataset.load()
    with staged_output(config.output_dir) as staging:
        run_factorize(config, V, staging)
    return EXIT_OK


def cmd_gen_synth(spec: SyntheticSpec, out: Path) -> int:
    dataset = generate_dataset(spec)
    with staged_output(out) as staging:
        export_dataset(dataset, spec, staging)
    logger.info('generated V of shape %s into %s', dataset.V.data.shape, out)
    return EXIT_OK


def cmd_calibrate(config: RunConfig, distances: Optional[Sequence[float]] = None) -> int:
    if distances is not None:
        with ensure_configuration_errors():
            calibration = CalibrationConfig.model_validate(
                {**config.calibration.model_dump(), 'distances': list(distances)},
            )
        config = config.model_copy(update={'calibration': calibration})
    run_checks(config)
    V = config.dataset.load()
    with staged_output(config.output_dir) as staging:
        recommendation = run_calibration(config, V, staging)
    sys.stdout.write(json.dumps({'recommended_distance': recommendation['recommended_distance']}) + '\n')
    return EXIT_OK


def _parse_initial(bits: Optional[str]) -> Optional[BinaryVector]:
    if bits is None:
        return None
    if not bits or set(bits) - {'0', '1'}:
        raise ConfigurationError(
            f'--initial must be a string of 0 and 1, got {bits!r}',
            details=[(('initial',), 'expected a bit string')],
        )
    return BinaryVector(data=[int(bit) for bit in bits])


def cmd_solve_qubo(
    file: Path,
    kind: SolverKind,
    config: SolverConfig = SolverConfig(),
    *,
    seed: RngSpec = RngSpec(),
    initial: Optional[str] = None,
) -> int:
    q = read_qubo(file)
    start = _parse_initial(initial)
    if start is not None and start.len != q.size:
        raise ConfigurationError(
            f'--initial has {start.len} bits, the instance has {q.size} variables',
            details=[(('initial',), 'length does not match the instance')],
        )
    report = solve_instance(kind, q, config, seed, initial=start)
    result = {
        'solver': report.solver.value,
        'assignment': report.best_state.bits(),
        'energy': report.best_energy,
        'objective': report.best_objective,
        'wall_time': report.wall_time,
        'samples_evaluated': report.samples_evaluated,
        'optimal': report.optimal,
    }
    sys.stdout.write(json.dumps(result) + '\n')
    return EXIT_OK


def cmd_relaxation_study(config: StudyRunConfig) -> int:
    config.output_dir.mkdir(parents=True, exist_ok=True)
    run_study(config, config.output_dir)
    return EXIT_OK


def _flag_layer(args: argparse.Namespace) -> ConfigTree:
    layer: ConfigTree = {}
    if args.seed is not None:
        layer['seed'] = args.seed
    if args.threads is not None:
        layer['threads'] = args.threads
    if args.output_dir is not None:
        layer['output_dir'] = args.output_dir
    return layer


def _layers(args: argparse.Namespace, extra: list[str]) -> list[ConfigTree]:
    layers = [preset(args.preset)]
    if args.config is not None:
        layers.append(read_config_file(args.config))
    layers.append(parse_overrides(extra))
    layers.append(_flag_layer(args))
    return layers


def _factorize(args: argparse.Namespace, layers: list[ConfigTree]) -> int:
    return cmd_factorize(build_config(RunConfig, *layers))


def _gen_synth(args: argparse.Namespace, layers: list[ConfigTree]) -> int:
    if args.manifest is not None:
        spec = load_manifest(args.manifest)
        return cmd_gen_synth(spec, Path(args.output_dir or SYNTHETIC_OUTPUT_DIR))
    config = build_config(GenSynthConfig, *layers)
    return cmd_gen_synth(config.spec(), config.output_dir)


def _calibrate(args: argparse.Namespace, layers: list[ConfigTree]) -> int:
    if args.distances is not None:
        layers = [*layers, {'calibration': {'distances': args.distances}}]
    return cmd_calibrate(build_config(RunConfig, *layers))


def _solve_qubo(args: argparse.Namespace, layers: list[ConfigTree]) -> int:
    config = build_config(SolveQuboConfig, *layers, {'solver': args.solver})
    return cmd_solve_qubo(
        args.file,
        config.solver,
        config,
        seed=RngSpec(master_seed=config.seed),
        initial=args.initial,
    )


def _relaxation_study(args: argparse.Namespace, layers: list[ConfigTree]) -> int:
    return cmd_relaxation_study(build_config(StudyRunConfig, *layers))


COMMANDS: dict[str, Callable[[argparse.Namespace, list[ConfigTree]], int]] = {
    'factorize': _factorize,
    'gen-synth': _gen_synth,
    'calibrate': _calibrate,
    'solve-qubo': _solve_qubo,
    'relaxation-study': _relaxation_study,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    common.add_argument('--config', type=Path, help='key=value configuration file')
    common.add_argument('--preset', choices=sorted(PRESETS), help='preset applied before the file and flags')
    common.add_argument('--seed', help='master seed')
    common.add_argument('--out', dest='output_dir', help='output directory')
    common.add_argument('--threads', help='worker threads (default: $NBMF_THREADS or 1)')
    common.add_argument('--log-level', default='WARNING', choices=LOG_LEVELS, type=str.upper)

    parser = argparse.ArgumentParser(
        prog='nbmf',
        description='Nonnegative/binary matrix factorization with annealing H-step solvers.',
        epilog='Any configuration key can be overridden with --section.key=value.',
        allow_abbrev=False,
    )
    commands = parser.add_subparsers(dest='command', required=True)

    commands.add_parser('factorize', parents=[common], allow_abbrev=False, help='run ALS NBMF for every method')

    gen_synth = commands.add_parser(
        'gen-synth', parents=[common], allow_abbrev=False, help='generate a synthetic dataset',
    )
    gen_synth.add_argument('--manifest', type=Path, help='regenerate the dataset described by a manifest')

    calibrate = commands.add_parser(
        'calibrate', parents=[common], allow_abbrev=False, help='sweep the reverse annealing distance',
    )
    calibrate.add_argument('--distances', help='comma separated reversal distances in [0, 1]')

    solve_qubo = commands.add_parser(
        'solve-qubo', parents=[common], allow_abbrev=False, help='solve one QUBO file and print the result',
    )
    solve_qubo.add_argument('file', type=Path)
    solve_qubo.add_argument('--solver', default=SolverKind.EXACT.value, help='Exact, FA, RA or RA+FA')
    solve_qubo.add_argument('--initial', help='initial bit string for RA')

    commands.add_parser(
        'relaxation-study', parents=[common], allow_abbrev=False, help='PGDRound accuracy on synthetic data',
    )
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    configure_logging(args.log_level)

    try:
        return COMMANDS[args.command](args, _layers(args, extra))
    except (ConfigurationError, QuboFormatError) as O_o:
        _report_error(O_o)
        return EXIT_CONFIGURATION
    except ValidationError as O_o:
        _report_error(O_o)
        return EXIT_CONFIGURATION
    except IngestionError as O_o:
        _report_error(O_o)
        return EXIT_DATASET
    except NbmfError as O_o:
        _report_error(O_o)
        return EXIT_FAILURE
    except KeyboardInterrupt:
        logger.warning('interrupted')
        return 130


def _report_error(error: Exception) -> None:
    sys.stderr.write(f'nbmf: error: {error}\n')
