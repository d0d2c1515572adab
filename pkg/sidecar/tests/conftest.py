import pathlib

import pytest

from vlm_sidecar.encoders import HashedEncoder
from vlm_sidecar.server import SidecarServer, run_in_thread

REPO_ROOT = pathlib.Path(__file__).resolve().parents[2]
PRIMARY_FIXTURES = REPO_ROOT / "tests" / "fixtures"


@pytest.fixture(scope="session")
def sidecar_url():
    server = SidecarServer(("127.0.0.1", 0), HashedEncoder(dim=128))
    run_in_thread(server)
    yield f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()


@pytest.fixture(scope="session")
def fixture_db_path() -> pathlib.Path:
    return PRIMARY_FIXTURES / "skilldb_300.json"


@pytest.fixture(scope="session")
def annotations_path() -> pathlib.Path:
    return PRIMARY_FIXTURES / "annotations_100.json"
