from .compare import ComparisonRow, compare_solvers, performance_profile
from .path import PathGrid, PathPoint, Spacing, W2Rule, run_path, support_monotonicity, warm_start_from
