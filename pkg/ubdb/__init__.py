"""
ubdb: compiler and verifier for layered Event-B database models

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

from ubdb.version import __version__

__all__ = ["__version__"]
