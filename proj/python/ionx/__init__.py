"""Ion-intercalation memristor and crossbar simulator."""

from ._ionx import *  # noqa: F401,F403
from ._ionx import __version__  # noqa: F401
