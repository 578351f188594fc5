# SPDX-License-Identifier: Apache-2.0
"""Crowded-scene detection: set assignment, EMD matching, Set NMS, metrics."""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
