"""Two-temperature overdamped Langevin dynamics with fast and slow variable blocks."""

__version__ = "0.1.0"

from .potential import Quadratic, SoftSpinGlass, RankOneInference, make_potential  # noqa: E402,F401
from .dynamics import SimConfig, simulate  # noqa: E402,F401
