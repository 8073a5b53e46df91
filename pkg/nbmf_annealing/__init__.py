from nbmf_annealing.als import AlsConfig as AlsConfig
from nbmf_annealing.als import FactorizationState as FactorizationState
from nbmf_annealing.als import als_nbmf as als_nbmf
from nbmf_annealing.als import als_nmf as als_nmf
from nbmf_annealing.annealing import AnnealSchedule as AnnealSchedule
from nbmf_annealing.annealing import Sampler as Sampler
from nbmf_annealing.annealing import SimulatedAnnealingSampler as SimulatedAnnealingSampler
from nbmf_annealing.annealing import best_read_states as best_read_states
from nbmf_annealing.annealing import solve_fa as solve_fa
from nbmf_annealing.annealing import solve_ra as solve_ra
from nbmf_annealing.checks import CheckInfo as CheckInfo
from nbmf_annealing.checks import async_field_check as async_field_check
from nbmf_annealing.checks import async_model_check as async_model_check
from nbmf_annealing.core import BinaryMatrix as BinaryMatrix
from nbmf_annealing.core import BinaryVector as BinaryVector
from nbmf_annealing.core import BoxVector as BoxVector
from nbmf_annealing.core import NonnegMatrix as NonnegMatrix
from nbmf_annealing.core import RngSpec as RngSpec
from nbmf_annealing.core import column as column
from nbmf_annealing.core import frobenius_error as frobenius_error
from nbmf_annealing.datagen import SyntheticSpec as SyntheticSpec
from nbmf_annealing.datagen import generate_dataset as generate_dataset
from nbmf_annealing.datagen import generate_h as generate_h
from nbmf_annealing.datagen import load_images as load_images
from nbmf_annealing.datagen import sample_gamma as sample_gamma
from nbmf_annealing.errors import NbmfError as NbmfError
from nbmf_annealing.exact import solve_exact as solve_exact
from nbmf_annealing.metrics import ColumnEval as ColumnEval
from nbmf_annealing.metrics import evaluate_columns as evaluate_columns
from nbmf_annealing.metrics import hamming as hamming
from nbmf_annealing.metrics import histogram as histogram
from nbmf_annealing.metrics import summarize_evaluations as summarize_evaluations
from nbmf_annealing.mixins import AsyncCheckModelMixin as AsyncCheckModelMixin
from nbmf_annealing.pgd import LeastSquaresProblem as LeastSquaresProblem
from nbmf_annealing.pgd import PgdConfig as PgdConfig
from nbmf_annealing.pgd import pgd_solve as pgd_solve
from nbmf_annealing.qubo import IsingInstance as IsingInstance
from nbmf_annealing.qubo import QuboInstance as QuboInstance
from nbmf_annealing.qubo import build_qubo as build_qubo
from nbmf_annealing.qubo import qubo_to_ising as qubo_to_ising
from nbmf_annealing.results import SolveReport as SolveReport
from nbmf_annealing.results import SolverKind as SolverKind
from nbmf_annealing.solvers import SolverConfig as SolverConfig
from nbmf_annealing.solvers import solve_column as solve_column
from nbmf_annealing.solvers import solve_pgd_round as solve_pgd_round
