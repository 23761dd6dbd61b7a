"""
Version information for ubdb

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

# Single source of truth for version
__version__ = "0.1.0"

# Version tuple for comparisons
VERSION = tuple(map(int, __version__.split(".")))
