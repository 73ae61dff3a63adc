"""Configuration settings for singtraj."""
import os
from pathlib import Path

# Cache database configuration
CACHE_DB_PATH = os.getenv('SINGTRAJ_CACHE_DB', str(Path.home() / '.singtraj' / 'cache.db'))
CACHE_ENABLED = os.getenv('SINGTRAJ_CACHE', '1') != '0'

# Groebner resource ceilings
MAX_BASIS_SIZE = int(os.getenv('SINGTRAJ_MAX_BASIS', '5000'))
MAX_TOTAL_DEGREE = int(os.getenv('SINGTRAJ_MAX_DEGREE', '64'))

# Parallelism
THREADS = int(os.getenv('SINGTRAJ_THREADS', str(os.cpu_count() or 1)))

# Output settings
DEFAULT_DECIMALS = 2
DEFAULT_SAMPLES = 512
FEASIBILITY_SAMPLES = int(os.getenv('SINGTRAJ_FEASIBILITY_SAMPLES', '64'))
REPORT_SCHEMA = 1

# Certified arithmetic settings
ROOT_WIDTH_EXPONENT = 12  # Event boxes are refined below 10**-12
PI_BITS = 96
MAX_REFINEMENTS = 200
MIXED_MIN_WIDTH_EXPONENT = 30  # Smallest t-subinterval examined by isolate_mixed

# Logging configuration
LOG_FILE = os.getenv('SINGTRAJ_LOG_FILE', 'singtraj.log')
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
LOG_LEVEL = os.getenv('SINGTRAJ_LOG_LEVEL', 'INFO')

# Built-in models and trajectories
BUILTIN_MODELS = ('orthoglide',)
BUILTIN_TRAJECTORIES = ('heart1', 'heart2', 'helix')
ORTHOGLIDE_LEG_LENGTH = 2
ORTHOGLIDE_JOINT_LIMITS = (0, 4)
