# Those will be added to the registered async check methods
ASYNC_FIELD_CHECK_CONFIG_KEY = 'nbmf_async_field_check_config'
ASYNC_MODEL_CHECK_CONFIG_KEY = 'nbmf_async_model_check_config'

# Those will be added to the pydantic model as class vars
# (MUST match names used in mixins.py!)
ASYNC_FIELD_CHECKS_KEY = 'nbmf_model_async_field_checks'
ASYNC_MODEL_CHECKS_KEY = 'nbmf_model_async_model_checks'

# Relaxed values at or above this map to 1
ROUNDING_THRESHOLD = 0.5

# Exact solver limits
EXHAUSTIVE_MAX_SIZE = 20
EXHAUSTIVE_GUARD_SIZE = 30
EXACT_HARD_CAP = 40
DEGENERACY_MAX_SIZE = 20
EXACT_TIME_LIMIT_SECONDS = 60.0

# Relative slack used when comparing objective values of binary states
ENERGY_TOLERANCE = 1e-9

# Stream layout of RngSpec: epoch 0 is initialisation, ALS iteration t uses epoch t
INIT_EPOCH = 0

THREADS_ENV_VAR = 'NBMF_THREADS'

TRAJECTORY_HEADER = ('iteration', 'method', 'error', 'error_after_w_step')
TIMINGS_HEADER = ('iteration', 'method', 'w_step_seconds', 'h_step_seconds', 'elapsed_seconds')
METRICS_HEADER = (
    'iteration',
    'column',
    'objective_method',
    'objective_opt',
    'hamming',
    'approx_ratio',
    'optimal_flag',
)
HISTOGRAM_HEADER = ('bin_lower', 'bin_upper', 'count')
CALIBRATION_HEADER = ('distance', 'escape_rate', 'improve_rate', 'mean_energy')
# Aggregate columns shared by the per-iteration summaries and the study cells
SUMMARY_COLUMNS = (
    'columns',
    'evaluated',
    'mean_hamming',
    'sem_hamming',
    'mean_approx_ratio',
    'sem_approx_ratio',
    'optimal_fraction',
    'undefined_ratio',
    'non_optimal',
)
ITERATION_SUMMARY_HEADER = ('iteration', *SUMMARY_COLUMNS)
HAMMING_FREQUENCY_HEADER = ('iteration', 'distance', 'count')
STUDY_HEADER = ('k', 'rho', *SUMMARY_COLUMNS, 'mean_hamming_per_bit', 'sem_hamming_per_bit')

PACKAGE_NAME = 'nbmf-annealing'
MANIFEST_NAME = 'manifest.json'
SYNTHETIC_OUTPUT_DIR = 'synthetic'
STUDY_COLUMNS_HEADER = (
    'k',
    'rho',
    'column',
    'objective_method',
    'objective_opt',
    'hamming',
    'approx_ratio',
    'optimal_flag',
    'degenerate',
)
