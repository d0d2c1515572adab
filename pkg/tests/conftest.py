import pathlib

import pytest

from skillground import db as dbmod
from skillground.backends import PerfectOracleBackend
from skillground.db import AnnotationSet

FIXTURES = pathlib.Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixture_db_path() -> pathlib.Path:
    return FIXTURES / "skilldb_300.json"


@pytest.fixture(scope="session")
def annotations_path() -> pathlib.Path:
    return FIXTURES / "annotations_100.json"


@pytest.fixture(scope="session")
def scenario_path() -> pathlib.Path:
    return FIXTURES / "corridor_scenario.json"


@pytest.fixture(scope="session")
def fixture_db(fixture_db_path):
    return dbmod.load(fixture_db_path)


@pytest.fixture(scope="session")
def annotations(annotations_path) -> AnnotationSet:
    return AnnotationSet.load(annotations_path)


@pytest.fixture(scope="session")
def oracle_backend(fixture_db) -> PerfectOracleBackend:
    return PerfectOracleBackend(fixture_db)
