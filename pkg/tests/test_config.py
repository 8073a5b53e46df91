from pathlib import Path

import pydantic
import pytest

from nbmf_annealing.als import AlsConfig
from nbmf_annealing.config import (
    CalibrationConfig,
    CsvSource,
    GenSynthConfig,
    ImageSource,
    RunConfig,
    SolveQuboConfig,
    StudyConfig,
    StudyRunConfig,
    SyntheticSource,
    build_config,
    default_threads,
    ensure_configuration_errors,
    merge,
    parse_config_text,
    parse_overrides,
    preset,
    read_config_file,
    set_dotted,
)
from nbmf_annealing.errors import ConfigurationError
from nbmf_annealing.results import SolverKind

SYNTHETIC = {'dataset': {'kind': 'synthetic', 'n': '20', 'k': '4', 'rho': '1'}, 'als': {'rank': '2'}}


def test_parse_config_text():
    tree = parse_config_text(
        '# faces run\n'
        '\n'
        'dataset.kind = images\n'
        'dataset.path=faces/\n'
        'als.solvers.ra_schedule.reversal_distance=0.3\n'
        'methods=Exact,RA+PGD\n',
    )
    assert tree == {
        'dataset': {'kind': 'images', 'path': 'faces/'},
        'als': {'solvers': {'ra_schedule': {'reversal_distance': '0.3'}}},
        'methods': 'Exact,RA+PGD',
    }


def test_parse_config_text_cites_the_line():
    with pytest.raises(ConfigurationError) as O_o:
        parse_config_text('als.rank=3\nnonsense\n', source='run.cfg')
    assert str(O_o.value).startswith('run.cfg:2:')


def test_set_dotted_conflicts():
    tree: dict = {}
    set_dotted(tree, 'als.rank', '3')
    with pytest.raises(ConfigurationError):
        set_dotted(tree, 'als.rank.value', '3')
    with pytest.raises(ConfigurationError):
        set_dotted(tree, 'als', '3')
    with pytest.raises(ConfigurationError):
        set_dotted(tree, 'als..rank', '3')


def test_read_config_file(tmp_path):
    path = tmp_path / 'run.cfg'
    path.write_text('seed=7\n', encoding='utf-8')
    assert read_config_file(path) == {'seed': '7'}
    with pytest.raises(ConfigurationError):
        read_config_file(tmp_path / 'missing.cfg')


def test_parse_overrides():
    tree = parse_overrides(['--als.rank=3', '--als.max-iterations', '5', '--emit.qubo_dumps', '--seed=1'])
    assert tree == {
        'als': {'rank': '3', 'max_iterations': '5'},
        'emit': {'qubo_dumps': 'true'},
        'seed': '1',
    }
    with pytest.raises(ConfigurationError):
        parse_overrides(['rank=3'])


def test_merge_prefers_later_layers():
    merged = merge({'als': {'rank': '3', 'rel_tol': '0'}}, {'als': {'rank': '5'}, 'seed': '2'})
    assert merged == {'als': {'rank': '5', 'rel_tol': '0'}, 'seed': '2'}


def test_presets():
    config = build_config(RunConfig, preset('paper-synthetic'))
    assert isinstance(config.dataset, SyntheticSource)
    assert config.dataset.m == 24
    assert config.als.rank == 10

    faces = preset('paper-faces')
    assert faces['als']['rank'] == '35'
    assert len(faces['methods'].split(',')) == len(SolverKind)
    assert preset(None) == {}
    with pytest.raises(ConfigurationError):
        preset('unknown')


def test_seed_and_threads_are_shared():
    config = build_config(RunConfig, SYNTHETIC, {'seed': '9', 'threads': '3'})
    assert config.als.seed.master_seed == 9
    assert config.als.threads == 3
    assert config.dataset.seed.master_seed == 9

    own = build_config(RunConfig, SYNTHETIC, {'seed': '9', 'als': {'seed': {'master_seed': '4'}}})
    assert own.als.seed.master_seed == 4


def test_methods_are_comma_separated():
    config = build_config(RunConfig, SYNTHETIC, {'methods': 'Exact, pgd,ra_fa'})
    assert config.methods == [SolverKind.EXACT, SolverKind.PGD_ROUND, SolverKind.RA_FA]


def test_schedule_keys_reach_the_solvers():
    config = build_config(RunConfig, SYNTHETIC, parse_overrides(['--als.solvers.fa_schedule.reads=7']))
    assert config.als.solvers.fa_schedule.reads == 7
    assert config.als.solvers.ra_schedule.reads == 240



def test_partial_schedule_keeps_the_other_defaults():
    overrides = parse_overrides(['--als.solvers.ra_schedule.reversal_distance=0.3'])
    schedule = build_config(RunConfig, SYNTHETIC, overrides).als.solvers.ra_schedule
    assert schedule.reversal_distance == 0.3
    assert schedule.reads == 240
    assert schedule.sweeps_total == 60

    solve = build_config(SolveQuboConfig, {'fa_schedule': {'sweeps_total': '5'}})
    assert solve.fa_schedule.reads == 1000
    assert solve.fa_schedule.sweeps_total == 5


def test_validation_errors_list_every_location():
    with pytest.raises(ConfigurationError) as O_o:
        build_config(RunConfig, {'dataset': {'kind': 'synthetic', 'n': '20', 'k': '4', 'rho': '-1'}, 'als': {}})
    locations = {loc for loc, _ in O_o.value.details}
    assert ('als', 'rank') in locations
    assert any(loc[:1] == ('dataset',) for loc in locations)
    assert 'als.rank' in str(O_o.value)


def test_ensure_configuration_errors_prefixes_locations():
    with pytest.raises(ConfigurationError) as O_o:
        with ensure_configuration_errors('als'):
            AlsConfig.model_validate({'rank': '0'})
    assert O_o.value.details[0][0] == ('als', 'rank')


def test_calibration_config():
    assert CalibrationConfig(distances='0, 0.5,1').distances == [0.0, 0.5, 1.0]
    with pytest.raises(pydantic.ValidationError):
        CalibrationConfig(distances=[1.5])
    with pytest.raises(pydantic.ValidationError):
        CalibrationConfig(method='FA')
    with pytest.raises(pydantic.ValidationError):
        CalibrationConfig(distances=[])


def test_study_config():
    study = StudyConfig(ks='10,20', rhos='0.5,2')
    assert study.ks == [10, 20]
    assert study.rhos == [0.5, 2.0]
    with pytest.raises(pydantic.ValidationError):
        StudyConfig(n=20, ks=[10])
    with pytest.raises(pydantic.ValidationError):
        StudyConfig(rhos=[0.0])

    run = build_config(StudyRunConfig, preset('paper-synthetic'), {'seed': '3'})
    assert run.study.ks == [10, 20, 30, 40]
    assert run.seed == 3


def test_gen_synth_config():
    config = build_config(GenSynthConfig, {'n': '110', 'k': '10', 'rho': '0.5', 'seed': '2'})
    spec = config.spec()
    assert spec.m == 24
    assert spec.seed.master_seed == 2
    assert config.output_dir == Path('synthetic')
    with pytest.raises(ConfigurationError):
        build_config(GenSynthConfig, {'n': '20', 'k': '10', 'rho': '0.5'})
    with pytest.raises(ConfigurationError):
        build_config(GenSynthConfig, {'n': '110', 'k': '10', 'rho': '0'})


def test_solve_qubo_config_takes_top_level_schedules():
    config = build_config(SolveQuboConfig, {'fa_schedule': {'reads': '7'}, 'solver': 'ra+fa', 'seed': '5'})
    assert config.fa_schedule.reads == 7
    assert config.solver is SolverKind.RA_FA
    assert config.seed == 5


def test_default_threads(monkeypatch):
    monkeypatch.delenv('NBMF_THREADS', raising=False)
    assert default_threads() == 1
    monkeypatch.setenv('NBMF_THREADS', '4')
    assert default_threads() == 4
    assert build_config(RunConfig, SYNTHETIC).als.threads == 4
    monkeypatch.setenv('NBMF_THREADS', 'many')
    assert default_threads() == 1


@pytest.mark.asyncio
async def test_csv_source_checks(tmp_path):
    with pytest.raises(pydantic.ValidationError) as O_o:
        await CsvSource(path=tmp_path / 'missing.csv').model_async_check()
    assert O_o.value.errors()[0]['loc'] == ('path',)

    empty = tmp_path / 'empty.csv'
    empty.write_text('', encoding='utf-8')
    with pytest.raises(pydantic.ValidationError):
        await CsvSource(path=empty).model_async_check()

    present = tmp_path / 'V.csv'
    present.write_text('1,2\n3,4\n', encoding='utf-8')
    source = CsvSource(path=present)
    await source.model_async_check()
    assert source.load().shape == (2, 2)


@pytest.mark.asyncio
async def test_image_source_checks(tmp_path):
    with pytest.raises(pydantic.ValidationError):
        await ImageSource(path=tmp_path).model_async_check()
    (tmp_path / 'a.pgm').write_text('P2\n1 1\n255\n255\n', encoding='ascii')
    source = ImageSource(path=tmp_path, side=1)
    await source.model_async_check()
    assert source.load().data.tolist() == [[1.0]]


@pytest.mark.asyncio
async def test_run_config_checks_dataset_and_output(tmp_path):
    blocker = tmp_path / 'taken'
    blocker.write_text('', encoding='utf-8')
    config = build_config(RunConfig, {
        'dataset': {'kind': 'csv', 'path': str(tmp_path / 'missing.csv')},
        'als': {'rank': '2'},
        'output_dir': str(blocker),
    })
    with pytest.raises(pydantic.ValidationError) as O_o:
        await config.model_async_check()
    assert {e['loc'] for e in O_o.value.errors()} == {('__root__',), ('dataset', 'path')}

    fine = build_config(RunConfig, SYNTHETIC, {'output_dir': str(tmp_path / 'new' / 'results')})
    await fine.model_async_check()
