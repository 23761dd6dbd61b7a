"""
python -m ubdb

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

from ubdb.cli import entry_point

entry_point()
