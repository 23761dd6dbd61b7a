"""
ubdb MCP Server Package

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

from ubdb.server.app import entry_point, main

__all__ = ["entry_point", "main"]
