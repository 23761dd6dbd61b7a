"""
Utility modules for ubdb

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""
