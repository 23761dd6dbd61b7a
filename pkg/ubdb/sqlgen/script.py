"""
Generated SQL script and its manifest

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator

from ubdb.config import SQL_DIALECTS
from ubdb.exceptions import EmitError
from ubdb.sqlgen.schema import ProcedureDef, TableDef
from ubdb.utils.logger import get_logger
from ubdb.version import __version__

logger = get_logger()


class ManifestNote(BaseModel):
    """How a model element is enforced or represented by the database"""

    model_config = ConfigDict(frozen=True)

    element: str
    enforcement: str
    detail: str = ""


class Manifest(BaseModel):
    """Model element to SQL object names, plus the atom-to-row-id policy"""

    model_config = ConfigDict(frozen=True)

    generator: str = "ubdb"
    generator_version: str = __version__
    dialect: str
    machine: str
    chain: List[str] = Field(default_factory=list)
    verified: bool = False
    forced: bool = False
    scope: Dict[str, int] = Field(default_factory=dict)
    tables: Dict[str, str] = Field(default_factory=dict)
    columns: Dict[str, str] = Field(default_factory=dict)
    procedures: Dict[str, str] = Field(default_factory=dict)
    atom_ids: Dict[str, str] = Field(default_factory=dict)
    notes: List[ManifestNote] = Field(default_factory=list)

    @field_validator("dialect")
    @classmethod
    def _known_dialect(cls, value: str) -> str:
        if value not in SQL_DIALECTS:
            raise ValueError(f"dialect must be one of {SQL_DIALECTS}, got {value!r}")
        return value

    def to_json(self) -> str:
        return self.model_dump_json(indent=2) + "\n"


@dataclass(frozen=True)
class SqlScript:
    """Dependency-ordered statements: tables first, then procedures"""

    dialect: str
    statements: Tuple[str, ...]
    tables: Tuple[TableDef, ...] = ()
    procedures: Tuple[ProcedureDef, ...] = ()
    notes: Tuple[ManifestNote, ...] = ()
    manifest: Optional[Manifest] = None
    machine: Optional[str] = None

    def text(self) -> str:
        header = [f"-- Generated by ubdb {__version__} ({self.dialect})"]
        if self.machine:
            header.append(f"-- Machine: {self.machine}")
        return "\n".join(header) + "\n\n" + "\n\n".join(self.statements) + "\n"

    def table(self, name: str) -> Optional[TableDef]:
        for table in self.tables:
            if table.name == name:
                return table
        return None

    def procedure(self, name: str) -> Optional[ProcedureDef]:
        for procedure in self.procedures:
            if procedure.name == name:
                return procedure
        return None


def manifest_path(destination: Path) -> Path:
    return Path(destination).with_suffix(".manifest.json")


def emit(script: SqlScript, destination) -> Tuple[Path, Optional[Path]]:
    """
    Write the script (UTF-8, LF) and its manifest next to it.

    Identical scripts produce byte-identical files.

    Returns:
        (script path, manifest path or None when the script has no manifest)

    Raises:
        EmitError: the files could not be written
    """
    target = Path(destination)
    manifest_file = manifest_path(target) if script.manifest is not None else None
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        with open(target, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(script.text())
        if manifest_file is not None:
            with open(manifest_file, "w", encoding="utf-8", newline="\n") as handle:
                handle.write(script.manifest.to_json())
    except OSError as e:
        raise EmitError(
            f"Cannot write {target}: {e}",
            details={"path": str(target)},
            suggestions=["Check that the output directory is writable"],
        ) from e
    logger.info(f"emit: wrote {target} ({len(script.statements)} statement(s))")
    return target, manifest_file
