"""Python bindings for the grammar induction toolkit."""

from ._grind import *  # noqa: F401,F403
