"""
Setup script for ubdb
"""

from pathlib import Path

from setuptools import find_packages, setup

# Read version from version module
try:
    from ubdb.version import __version__
except ImportError:
    __version__ = "0.1.0"

# Read README for long description
readme_file = Path(__file__).parent / "README.md"
long_description = readme_file.read_text(encoding="utf-8") if readme_file.exists() else ""

setup(
    name="ubdb",
    version=__version__,
    description=(
        "Compiler and small-scope verifier for layered UML-B/Event-B database models. "
        "Checks invariants and refinement by exhaustive exploration, lints the modelling "
        "patterns and generates SQL tables and stored procedures."
    ),
    long_description=long_description,
    long_description_content_type="text/markdown",
    author="Alex J Lennon",
    author_email="ajlennon@dynamicdevices.co.uk",
    maintainer="Alex J Lennon",
    maintainer_email="ajlennon@dynamicdevices.co.uk",
    license="GPL-3.0-or-later",
    packages=find_packages(exclude=["tests", "tests.*", "examples", "examples.*"]),
    package_data={"ubdb": ["models/*.ubdb"]},
    install_requires=[
        "mcp>=1.0.0,<2",
        "pydantic>=2.0.0",
        "lark>=1.1.0",
        "sqlalchemy>=2.0.0",
        "matplotlib>=3.5.0",
    ],
    python_requires=">=3.10",
    entry_points={
        "console_scripts": [
            "ubdb=ubdb.cli:entry_point",
            "mcp-ubdb=ubdb.server.app:entry_point",
        ],
    },
)
