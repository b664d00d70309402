"""
Constants used throughout platelimit.
"""

# Element families
LAGRANGE_P2 = "p2_lagrange"
HERMITE_P3 = "p3_hermite"

# Mesh patterns and file formats
PATTERN_DIAG = "diag"
PATTERN_CROSSED = "crossed"
FORMAT_TRIANGLE = "triangle_node_ele"
FORMAT_MSH2 = "msh2_ascii"
UNTAGGED = "untagged"
RECT_SIDES = ("left", "right", "bottom", "top")

# Boundary condition kinds
BC_DIRICHLET = "dirichlet"
BC_CLAMPED = "clamped"
BC_FREE = "free"
BC_SYMMETRY = "symmetry"
BC_KINDS = (BC_DIRICHLET, BC_CLAMPED, BC_FREE, BC_SYMMETRY)

# Yield criteria
VON_MISES = "von_mises"
TRESCA = "tresca"
JOHANSEN = "johansen"

# Rigor flags of the computed bound
RIGOR_STRICT = "strict"
RIGOR_QUADRATURE_LIMITED = "quadrature-limited"

# Solver defaults
DEFAULT_TOL_FEAS = 1e-8
DEFAULT_TOL_GAP = 1e-8
DEFAULT_MAX_ITER = 200
KKT_REGULARIZATION = 1e-8
STEP_FRACTION = 0.99

# Output
DEFAULT_OUTPUT_FOLDER = "results"
LOG_FILE_NAME = "platelimit.log"
CONIC_DUMP_HEADER = "PLATELIMIT-CONIC 1"
