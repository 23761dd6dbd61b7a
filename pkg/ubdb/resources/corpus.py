"""
Bundled Model Corpus Resource Provider

Serves the .ubdb models shipped with the package as `models://<name>`.

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

from typing import List, Optional

from ubdb.config import get_bundled_model, list_bundled_models
from ubdb.utils.logger import get_logger

logger = get_logger()

URI_PREFIX = "models://"


def model_uris() -> List[str]:
    return [f"{URI_PREFIX}{name}" for name in list_bundled_models()]


def read_model(uri: str) -> Optional[str]:
    """DSL text of a bundled model, or None when the URI names no bundled model"""
    if not uri.startswith(URI_PREFIX):
        return None
    name = uri[len(URI_PREFIX):]
    if name not in list_bundled_models():
        logger.warning(f"Unknown bundled model requested: {name}")
        return None
    return get_bundled_model(name).read_text(encoding="utf-8")
