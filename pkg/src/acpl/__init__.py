"""Anti-curriculum pseudo-labelling for feature-vector datasets."""
from ._accel import USE_NUMBA, backend_name

__version__ = "0.1.0"
