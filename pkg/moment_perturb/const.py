"""Constants for the moment-map perturbation toolkit."""

TOOL_NAME = "moment-perturb"
TOOL_VERSION = "1.0.0"

# Spec and report schemas are versioned independently of the tool.
SPEC_SCHEMA_VERSION = 1
REPORT_SCHEMA_VERSION = 1

# Tolerance keys: accepted in spec files under "tolerances" and via --tol
TOL_RANK = "rank_tol"
TOL_ZERO = "zero_tol"
TOL_ORTHOGONALITY = "orthogonality_tol"
TOL_ORBIT = "orbit_tol"
TOL_SPECTRUM = "spectrum_tol"
TOL_UNSTABLE = "unstable_ratio"
TOL_STAGNATION = "stagnation_tol"
TOL_ESCAPE_STEP = "escape_step"
TOL_CERTIFICATE_SLACK = "certificate_slack"
TOL_RECHECK = "recheck_tol"

# Option keys: flow and perturbation controls
OPT_MAX_ITER = "max_iter"
OPT_STAGNATION_WINDOW = "stagnation_window"
OPT_MAX_STEP = "max_step"
OPT_LAMBDA_SAMPLES = "lambda_samples"
OPT_LAMBDA_MARGIN = "lambda_margin"
OPT_ORBIT_RADIUS = "orbit_radius"

# Defaults: algebra
DEFAULT_RANK_TOL = 1e-8
CONDITIONING_FACTOR = 100.0
ANTI_HERMITIAN_TOL = 1e-8
GENERATOR_CHECK_TOL = 1e-12
CLOSURE_TOL = 1e-10
DEPENDENCE_TOL = 1e-12  # relative Gram eigenvalue below which generators are dependent
SUPPORT_TOL = 1e-12  # relative modulus below which a coordinate counts as zero
DEFAULT_SPECTRUM_TOL = 1e-9
MAX_DENOMINATOR = 64

# Defaults: moment maps and slice models
DEFAULT_ORTHOGONALITY_TOL = 1e-9
EQUIVARIANCE_TOL = 1e-9
FINITE_DIFFERENCE_STEP = 1e-5
HESSIAN_CHECK_TOL = 1e-6
EQUIVARIANCE_SAMPLES = 16
DEFAULT_BALL_RADIUS = 100.0

# Defaults: Kempf-Ness flow
DEFAULT_ZERO_TOL = 1e-10
DEFAULT_UNSTABLE_RATIO = 1e-10
DEFAULT_MAX_ITER = 2000
DEFAULT_STAGNATION_WINDOW = 100
DEFAULT_STAGNATION_TOL = 1e-9
DEFAULT_ESCAPE_STEP = 1e-3
DEFAULT_MAX_STEP = 8.0
ARMIJO_C1 = 1e-4
ARMIJO_MAX_HALVINGS = 40
WITNESS_DRIFT_STEPS = 8  # trailing steps summed into an unstable witness direction

# Defaults: perturbation solver
DEFAULT_LAMBDA_SAMPLES = 64
DEFAULT_LAMBDA_MARGIN = 0.25
DEFAULT_CERTIFICATE_SLACK = 1e-6
DEFAULT_RECHECK_TOL = 1e-9
NEWTON_DAMPING_FRACTION = 8.0
NEWTON_MAX_ITER = 200
NEWTON_MAX_HALVINGS = 30
BALL_SAMPLE_SHRINK = 1e-9  # boundary samples sit this far inside the δ-ball

# Defaults: degenerations
DEFAULT_ORBIT_TOL = 1e-7
DEFAULT_ORBIT_RADIUS = 10.0

# Exit codes
EXIT_OK = 0
EXIT_REFUSAL = 2
EXIT_INCONSISTENT = 3
EXIT_PARSE_ERROR = 4

DEFAULT_TOLERANCES: dict[str, float] = {
    TOL_RANK: DEFAULT_RANK_TOL,
    TOL_ZERO: DEFAULT_ZERO_TOL,
    TOL_ORTHOGONALITY: DEFAULT_ORTHOGONALITY_TOL,
    TOL_ORBIT: DEFAULT_ORBIT_TOL,
    TOL_SPECTRUM: DEFAULT_SPECTRUM_TOL,
    TOL_UNSTABLE: DEFAULT_UNSTABLE_RATIO,
    TOL_STAGNATION: DEFAULT_STAGNATION_TOL,
    TOL_ESCAPE_STEP: DEFAULT_ESCAPE_STEP,
    TOL_CERTIFICATE_SLACK: DEFAULT_CERTIFICATE_SLACK,
    TOL_RECHECK: DEFAULT_RECHECK_TOL,
}

DEFAULT_OPTIONS: dict[str, float] = {
    OPT_MAX_ITER: DEFAULT_MAX_ITER,
    OPT_STAGNATION_WINDOW: DEFAULT_STAGNATION_WINDOW,
    OPT_MAX_STEP: DEFAULT_MAX_STEP,
    OPT_LAMBDA_SAMPLES: DEFAULT_LAMBDA_SAMPLES,
    OPT_LAMBDA_MARGIN: DEFAULT_LAMBDA_MARGIN,
    OPT_ORBIT_RADIUS: DEFAULT_ORBIT_RADIUS,
}

# Spec file keys
CONF_SCHEMA_VERSION = "schema_version"
CONF_SEED = "seed"
CONF_DESCRIPTION = "description"
CONF_GROUP = "group"
CONF_GROUP_TYPE = "type"
CONF_GENERATORS = "generators"
CONF_REPRESENTATION = "representation"
CONF_WEIGHTS = "weights"
CONF_MATRICES = "matrices"
CONF_POINTS = "points"
CONF_MODELS = "models"
CONF_OUTER = "outer"
CONF_PHI = "phi"
CONF_COEFF = "coeff"
CONF_POWERS = "powers"
CONF_PARAM = "param"
CONF_PARAMS = "params"
CONF_BALL_RADIUS = "ball_radius"
CONF_FORM_SCALE = "form_scale"
CONF_TOLERANCES = "tolerances"

GROUP_TORUS = "torus"
GROUP_MATRIX = "matrix"
DEFAULT_SEED = 0
