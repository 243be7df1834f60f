"""Constants for the gazekit pipeline."""

# Screen and gaze grid (landscape tablet)
SCREEN_WIDTH_CM = 22.62
SCREEN_HEIGHT_CM = 14.14
GRID_ROWS = 5
GRID_COLS = 7
GRID_DX_CM = 3.42
GRID_DY_CM = 3.41
GRID_POINTS = GRID_ROWS * GRID_COLS

# Frame selection inside one dot-display chunk (seconds after the dot appears)
CHUNK_START_OFFSET_S = 1.5
CHUNK_END_OFFSET_S = 2.5
DOT_INTERVAL_S = 3.0
FRAMES_PER_CHUNK = 5

# Eye crop geometry
EYE_NORM_SIZE = 100
EYE_CROP_HALF_HEIGHT = 15
EYE_CROP_HEIGHT = 2 * EYE_CROP_HALF_HEIGHT
EYE_CROP_WIDTH = EYE_NORM_SIZE
PUPIL_ROW = 67  # round(2/3 * 100)

# Eye localisation
MIN_BOX_FRACTION = 0.03
SYMMETRY_TOLERANCE = 0.5

# Blink detection
BLINK_WINDOW = 20
BLINK_SKIP = 6
BLINK_SIGMA_FACTOR = 2.0
BLINK_MIN_RISE = 0.01

# Laplacian of Gaussian used for features and frame selection
LOG_SIGMA = 1.4
LOG_SIDE = 9

# Feature layouts
HOG_BINS = 9
HOG_CELL_GRID = (3, 10)
HOG_BLOCK_CELLS = 2
HOG_CLIP = 0.2
MHOG_LEVELS = ((1, 1), (2, 2), (3, 5), (6, 10))
LBP_CODES = 59
LBP_CELL_GRID = (3, 10)
GEOMETRY_FEATURE_LENGTH = 10

# Reduction
PCA_FLOOR = 200
LDA_EPSILON_SCALE = 1e-6

# Regression
KNN_K = 3
FOREST_TREES = 100
FOREST_MIN_LEAF = 5

# Tracking filter
FILTER_SIGMA_T = 5.0
FILTER_SIGMA_R_CM = 1.7

# Evaluation
VIEWING_DISTANCES_CM = (30.0, 40.0, 50.0)
PROTOCOL_REPEATS = 5

# Published reference numbers for the public dataset
REFERENCE_MHOG_RF_ME_CM = 3.17
REFERENCE_TOLERANCE_CM = 0.5

# File formats
FEATURE_DUMP_MAGIC = b"GZKF"
FEATURE_DUMP_VERSION = 1
MODEL_MAGIC = b"GZKMODEL"
MODEL_FORMAT_VERSION = 1
