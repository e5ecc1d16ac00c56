"""Two-stream consensus network for weakly supervised temporal action localization."""

from ._core import *  # noqa: F401,F403
