# numerical tolerances
ZERO_TOLERANCE = 1e-12
UNIT_NORM_TOLERANCE = 1e-12
LOAD_NORM_TOLERANCE = 1e-6
TIE_TOLERANCE = 1e-12
COVER_TOLERANCE = 1e-6
PROPER_TOLERANCE = 1e-9
MARGIN_SLACK = 1e-12
NEGATIVE_TOLERANCE = 1e-12

# quantization sets
SIGN_ENUMERATION_CAP = 16
CIRCULAR_SNAP = 1e-15
MULTISTART_STARTS = 64
MULTISTART_REFINED = 8
HULL_MAX_DIMS = 6
COVER_CROSSCHECK_MAX_DIMS = 8
GRID_REFINE_STEPS = [1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8]

# runs
DEFAULT_ALPHA = 1.0
DEFAULT_MAX_ITER = 10000
FLOOR_FRACTION = 0.1
# run.x0 = auto warm-starts these families at their reference solution
WARM_START_FAMILIES = ('tcp',)
TRACE_COLUMNS = ['t', 'f', 'grad_norm', 'l_alpha', 'gamma', 'bits']
PRIMAL_COLUMNS = ['primal_objective', 'primal_residual']
CSV_FLOAT_FORMAT = '%.17g'
SWEEP_COLUMNS = ['gamma', 'floor', 'final_f', 'bits', 'hit_iteration']
SWEEP_GAMMAS = [0.005, 0.01, 0.05, 0.1, 0.5, 1.0]

# random streams (Philox counters), one per consumer
SEED_ENV_VAR = "QGRAD_SEED"
DEFAULT_SEED = 1
STREAM_COVER = 0
STREAM_TCP = 1
STREAM_FLOW = 2
STREAM_TASKS = 3
STREAM_QUADRATIC = 4
STREAM_SAMPLES = 5

# finite differences and Lipschitz estimates
FD_STEP = 1e-6
KINK_DISTANCE_FACTOR = 10.0
KINK_CLASSIFY_TOLERANCE = 1e-4
LIPSCHITZ_SAMPLE_PAIRS = 200
LIPSCHITZ_SAFETY = 1.1

# TCP flow control experiment
TCP_SOURCES = 20
TCP_LINKS = 100
TCP_DENSITY = 0.5
TCP_UTILITY_SCALE = 1000.0
TCP_CAPACITY = 1.0
TCP_RATE_BOUNDS = (0.0, 1.0)
TCP_RESAMPLE_LIMIT = 1000

# optimal network flow
FLOW_NODES = 6
FLOW_EXTRA_EDGES = 4
FLOW_RHO_RANGE = (0.5, 2.0)
FLOW_REFERENCE_NODE = -1

# task allocation experiment
TASK_MACHINES = 4
TASK_COUNT = 2
TASK_COEF_RANGE = (1.0, 5.0)
TASK_CAP = 3.0
TASK_DEMAND = 3.0

# scalar step-size benchmark, first entry is the default outer branch
SCALAR_OUTER_BRANCHES = ('constant', 'linear')

# configuration sections
CONFIG_SECTIONS = ['problem', 'quantizer', 'schedule', 'stopping', 'run']
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
