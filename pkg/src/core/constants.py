from typing import Final

ARTIFACT_VERSION: Final[str] = "0.1.0"

# --- Binary formats ---
VECBIN_MAGIC: Final[bytes] = b"MRNG"
VECBIN_VERSION: Final[int] = 1
GRAPH_MAGIC: Final[bytes] = b"MRNGG"
GRAPH_VERSION: Final[int] = 1
CONFLICT_MAGIC: Final[bytes] = b"MRNGC"
CONFLICT_VERSION: Final[int] = 1
UNBOUNDED_DEGREE: Final[int] = 0xFFFFFFFF
DIGEST_SIZE: Final[int] = 8

# --- Error Messages ---
ERR_DIMENSION_MISMATCH: Final[str] = "Dimension mismatch: {a} vs {b}."
ERR_NON_FINITE: Final[str] = "Coordinates must be finite (no NaN/Inf)."
ERR_EMPTY_DATASET: Final[str] = "Dataset must contain at least one point of dimension >= 1."
ERR_DUPLICATE_POINTS: Final[str] = "Dataset contains identical points {a} and {b}."
ERR_LUNE_UNDEFINED: Final[str] = "lune(x, y) is undefined when x == y."
ERR_DEGENERATE_RAY: Final[str] = "Angle undefined: ray endpoint coincides with the apex."
ERR_THETA_RANGE: Final[str] = "theta={theta} is outside [0, pi]."
ERR_POSITIVE: Final[str] = "{name} must be a positive integer, got {value}."
ERR_NODE_RANGE: Final[str] = "Node id {node} is out of range for n={n}."
ERR_TOO_FEW_POINTS: Final[str] = "MRNG construction needs at least 2 points, got {n}."
ERR_POOL_SELF: Final[str] = "Candidate pool of node {node} contains the node itself."
ERR_POOL_RANGE: Final[str] = "Candidate pool of node {node} contains out-of-range id {bad}."
ERR_POOL_COUNT: Final[str] = "Expected {n} candidate pools, got {got}."
ERR_KNN_RANGE: Final[str] = "Pool size {size} must satisfy 1 <= size <= n-1={limit}."
ERR_K_RANGE: Final[str] = "k={k} must satisfy 1 <= k <= n={n}."
ERR_POOL_SPEC: Final[str] = "Invalid pool descriptor '{spec}'; expected 'full' or 'knn:L'."
ERR_CHECKSUM: Final[str] = "Dataset checksum mismatch: expected {expected:#018x}, got {got:#018x}."
ERR_NOT_LOCAL_MIN: Final[str] = "Node {node} is not a local minimum: neighbor {better} is closer to q."
ERR_MISSING_CONFLICTS: Final[str] = "A conflict map is required for this operation."
ERR_CONFLICT_SHAPE: Final[str] = "Conflict map does not match graph: node {node} has {got} lists, {expected} edges."
ERR_CAP_EXCEEDED: Final[str] = "n={n} exceeds the {what} cap of {cap}; pass --force to override."
ERR_BAD_MAGIC: Final[str] = "Unrecognised file magic {magic!r} in {path}."
ERR_BAD_VERSION: Final[str] = "Unsupported format version {version} in {path}."
ERR_TRUNCATED: Final[str] = "File {path} is truncated or malformed."
ERR_DIGEST: Final[str] = "Payload digest mismatch in {path}; the file is corrupt."
ERR_LEMMA4_PRECONDITION: Final[str] = "Sampling check requires delta(u,q) >= delta(v,q) > 0."
ERR_GEN_SPEC: Final[str] = "Invalid generator spec '{spec}'; expected 'n=..,d=..,seed=..'."

# --- Check names ---
CHECK_MONOTONIC: Final[str] = "monotonic"
CHECK_DEFINITION: Final[str] = "definition"
CHECK_MINIMALITY: Final[str] = "minimality"
CHECK_ANGLES: Final[str] = "angles"
CHECK_LEMMA4: Final[str] = "lemma4"

# --- CLI exit codes ---
EXIT_OK: Final[int] = 0
EXIT_CHECK_FAILED: Final[int] = 1
EXIT_USAGE: Final[int] = 2
EXIT_IO: Final[int] = 3
