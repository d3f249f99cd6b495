from ._panelbn import *  # noqa: F401,F403
from ._panelbn import __version__, cli

__all__ = [name for name in dir() if not name.startswith("_")]
