import numpy as np
import pytest

from nbmf_annealing.config import StudyConfig, StudyRunConfig
from nbmf_annealing.errors import RangeError
from nbmf_annealing.experiments import run_study_cell, summarize_trajectory
from nbmf_annealing.metrics import ColumnEval, summarize_evaluations


def evaluation(iteration: int, column: int, distance: int) -> ColumnEval:
    return ColumnEval(
        iteration=iteration,
        column=column,
        objective_method=1.0 + distance,
        objective_opt=1.0,
        hamming=distance,
        approx_ratio=1.0 + distance,
        optimal_flag=True,
    )


def test_trajectory_summary_groups_by_iteration():
    evaluations = [evaluation(2, 0, 1), evaluation(1, 0, 0), evaluation(1, 1, 2), evaluation(2, 1, 1)]
    summary_rows, frequency_rows = summarize_trajectory(evaluations, 2)

    assert [row[0] for row in summary_rows] == [1, 2]
    assert summary_rows[0][1:4] == (2, 2, 1.0)
    assert summary_rows[0][7] == 0.5
    assert summary_rows[1][3] == 1.0
    assert summary_rows[1][7] == 0.0
    assert frequency_rows == [(1, 0, 1), (1, 1, 0), (1, 2, 1), (2, 0, 0), (2, 1, 2), (2, 2, 0)]


def test_trajectory_summary_rejects_distances_beyond_the_column_length():
    with pytest.raises(RangeError):
        summarize_trajectory([evaluation(1, 0, 3)], 2)


def test_hamming_per_bit_scales_by_the_column_length():
    summary = summarize_evaluations([evaluation(1, 0, 2), evaluation(1, 1, 4)])
    mean, sem = summary.hamming_per_bit(8)
    assert mean == pytest.approx(3.0 / 8)
    assert sem == pytest.approx(summary.sem_hamming / 8)
    assert summarize_evaluations([]).hamming_per_bit(8) == (None, None)


def test_rounding_accuracy_follows_the_shape_parameter():
    config = StudyRunConfig(seed=0, threads=1, study=StudyConfig(n=60, ks=[6, 12], rhos=[0.5, 10.0]))
    cells = {
        (k, rho): summarize_evaluations(run_study_cell(config, k, rho)[0])
        for k in (6, 12)
        for rho in (0.5, 10.0)
    }

    for k in (6, 12):
        concentrated, spread = cells[(k, 0.5)], cells[(k, 10.0)]
        assert spread.mean_hamming > concentrated.mean_hamming
        assert abs(spread.mean_approx_ratio - 1.0) > abs(concentrated.mean_approx_ratio - 1.0)

    # Raw distances grow with the column length, the per-bit share falls or stays level
    for rho in (0.5, 10.0):
        small, large = cells[(6, rho)], cells[(12, rho)]
        small_mean, small_sem = small.hamming_per_bit(6)
        large_mean, large_sem = large.hamming_per_bit(12)
        slack = 2.0 * float(np.hypot(small_sem or 0.0, large_sem or 0.0))
        assert large_mean <= small_mean + slack
