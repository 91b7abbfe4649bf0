"""Python interface to the software DRAM Bender."""

from ._dbender import *  # noqa: F401,F403
from ._dbender import Error, Platform, Program, __version__, assemble, parse_assembly, simulate  # noqa: F401
