"""Central table of defaults and tolerances.

Every numeric default used by the library and the command line lives here.
The command line accepts overrides of the ``TOLERANCES`` entries through
``--tolerances FILE`` or a ``tolerances`` block in the config.
"""

TOLERANCES = {
    # Gram matrix of basis modes vs identity (max entry)
    "eta_orth": 1e-8,
    # relative eigen-residual of discrete modes
    "eta_eig": 1e-6,
    # slack on Bernstein-type inequality checks
    "eta_bern": 1e-4,
    # final state of the null control, relative to |u0|
    "eta_ctrl": 1e-8,
    # windowed null modes: leakage above this is flagged in reports
    "eta_leak": 1e-2,
    # coefficient-tail fraction accepted by the resolution check
    "resolution_tail": 1e-12,
    # relative l_max sensitivity accepted for observability constants
    "truncation_delta": 0.05,
}

# degeneracy truncation and its diagnostic increment
L_MAX = 8
L_MAX_DIAGNOSTIC_STEP = 4

# Gauss-Hermite nodes per axis by dimension (fallback for other d)
GRID_NODES = {2: 96, 3: 40, 4: 20}
GRID_NODES_FALLBACK = 12

# window width of null-direction modes is SIGMA_NULL_FACTOR / sqrt(E)
SIGMA_NULL_FACTOR = 6.0

# Bernstein and recursion experiments
BERNSTEIN_M_MAX = 4
EST1_M_MAX = 3
RECURSION_M_MAX = 4
N_SEEDS = 20

# good/bad partition
GOOD_BAD_ELL = 0.5
GOOD_BAD_M_MAX = 4

# thickness scans: cells per period and axis
THICKNESS_RESOLUTION = 200

# Remez-type check
REMEZ_DEGREE = 8
REMEZ_MEASURE = 0.1
REMEZ_TRIALS = 500

# heat control
N_TIME = 64
HORIZON = 1.0

# normal form; antisymmetry is accepted up to this relative violation
ANTISYM_TOL = 1e-12
RANK_TOL = 1e-12
CLUSTER_TOL = 1e-10

# norm-equivalence constant in the energy form of the theorem bound (c_d = d)
C_D_IS_DIMENSION = True


def tolerances(overrides: dict | None = None) -> dict:
    out = dict(TOLERANCES)
    if overrides:
        unknown = set(overrides) - set(out)
        if unknown:
            raise KeyError(f"unknown tolerance keys {sorted(unknown)}")
        out.update({k: float(v) for k, v in overrides.items()})
    return out
