import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for the oracles module

from fastapi.testclient import TestClient

from ftdf.service import create_app


@pytest.fixture()
def client():
    with TestClient(create_app()) as c:
        yield c
