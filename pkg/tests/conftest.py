import json
from pathlib import Path

import pytest

from tirforge.mockteacher import MockTeacherServer, load_fixture_dir
from tirforge.sandbox import ExecLimits

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def server_fixtures():
    return load_fixture_dir(FIXTURES / "server")


@pytest.fixture
def mock_server(server_fixtures):
    server = MockTeacherServer(server_fixtures).start()
    yield server
    server.stop()


@pytest.fixture(scope="session")
def fixture_problems():
    rows = []
    with open(FIXTURES / "server" / "problems.jsonl", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rows.append(json.loads(line))
    return rows


@pytest.fixture
def fast_limits() -> ExecLimits:
    return ExecLimits(wall_s=5.0, mem_mb=256)
