"""
Pytest configuration and fixtures for ubdb tests

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

from pathlib import Path

import pytest

from ubdb.config import get_bundled_model
from ubdb.engine import Scope
from ubdb.model import resolve
from ubdb.parser import load_chain
from ubdb.resources.health import reset_metrics

DEPT_MODEL = """\
context Dept_ctx
  sets PERSON DEPARTMENT
end

machine Dept
  sees Dept_ctx
  layer structure
  class Staff : PERSON kind primary
  class Department : DEPARTMENT kind primary
  association worksIn : Staff --> Department
  association hasDean : Department +-> Staff
  invariant @inv_dean !d : dom(hasDean) . worksIn(hasDean(d)) = d

  event addDepartment constructor of Department
    any this_d : DEPARTMENT
    where
      @grd1 this_d /: Department
    then
      @act1 Department := Department \\/ {this_d}
  end

  event addStaff constructor of Staff
    any this_s : PERSON, d : Department
    where
      @grd1 this_s /: Staff
    then
      @act1 Staff := Staff \\/ {this_s}
      @act2 worksIn := worksIn \\/ {this_s |-> d}
  end

  event setDean
    any d : Department, s : Staff
    where
      @grd1 worksIn(s) = d
    then
      @act1 hasDean := hasDean <+ {d |-> s}
  end
end
"""

# setDean without its guard: a dean may work in another department
UNGUARDED_DEPT_MODEL = DEPT_MODEL.replace(
    "    where\n      @grd1 worksIn(s) = d\n", ""
)

ABSTRACT_MODEL = """\
context Abs_ctx
  sets A_SET X_VALUE
end

machine Abs
  sees Abs_ctx
  layer structure
  class A : A_SET kind primary

  event addA constructor of A
    any this_a : A_SET
    where
      @grd1 this_a /: A
    then
      @act1 A := A \\/ {this_a}
  end
end
"""

REFINEMENT_MODEL = (
    ABSTRACT_MODEL
    + """
machine Conc refines Abs
  layer attributes
  attribute x : A --> X_VALUE

  event addA extends addA
    any v : X_VALUE
    then
      @act2 x := x \\/ {this_a |-> v}
  end
end
"""
)

# the concrete addA drops the freshness guard, so it fires where the abstract one cannot
WEAK_REFINEMENT_MODEL = (
    ABSTRACT_MODEL
    + """
machine Weak refines Abs
  layer structure

  event addA refines addA
    any this_a : A_SET
    then
      @act1 A := A \\/ {this_a}
  end
end
"""
)


@pytest.fixture(autouse=True)
def plain_output(monkeypatch):
    """Reports without ANSI colours and fresh server metrics for every test"""
    monkeypatch.setenv("UBDB_COLOR", "0")
    reset_metrics()
    yield
    reset_metrics()


@pytest.fixture
def dept_text() -> str:
    return DEPT_MODEL


@pytest.fixture
def unguarded_dept_text() -> str:
    return UNGUARDED_DEPT_MODEL


@pytest.fixture
def refinement_text() -> str:
    return REFINEMENT_MODEL


@pytest.fixture
def weak_refinement_text() -> str:
    return WEAK_REFINEMENT_MODEL


@pytest.fixture
def dept_chain():
    """Resolved Dept chain"""
    return resolve(load_chain(DEPT_MODEL))


@pytest.fixture
def unguarded_dept_chain():
    return resolve(load_chain(UNGUARDED_DEPT_MODEL))


@pytest.fixture
def dept_scope(dept_chain) -> Scope:
    """Two people and two departments"""
    return Scope.for_chain(dept_chain, {"PERSON": 2, "DEPARTMENT": 2})


@pytest.fixture
def relation_chain():
    """Resolved bundled two-class relation model"""
    return resolve(load_chain(get_bundled_model("relation")))


@pytest.fixture
def sres_chain():
    """Resolved bundled student records model"""
    return resolve(load_chain(get_bundled_model("sres")))


@pytest.fixture
def model_file(tmp_path: Path):
    """Write model text to a file and return its path"""

    def _write(text: str, name: str = "model.ubdb") -> Path:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return _write
