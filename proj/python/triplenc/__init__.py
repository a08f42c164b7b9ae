"""Triple-encoder scoring engine: training, incremental scoring and evaluation."""

from ._core import *  # noqa: F401,F403
from ._core import Error, __doc__  # noqa: F401
