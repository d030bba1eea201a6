import numpy as np
import pytest
from fastapi.testclient import TestClient

from singlering.main import app

client = TestClient(app)

TWO_ATOM = {"atoms": [[0.5, 0.5], [2.0, 0.5]]}
DIRAC_ONE = {"atoms": [[1.0, 1.0]]}


def test_health():
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json()["status"] == "ok"


def test_root_lists_docs():
    assert client.get("/").json()["docs"] == "/docs"


def test_ring_radii():
    response = client.post("/measures/ring-radii", json=TWO_ATOM)
    assert response.status_code == 200
    body = response.json()
    assert body["a"] == pytest.approx(0.685994, abs=1e-6)
    assert body["b"] == pytest.approx(1.457738, abs=1e-6)
    assert body["a_defined"]


@pytest.mark.parametrize(
    "doc",
    [
        {"atoms": []},
        {"atoms": [[1.0, 0.5]]},
        {"atoms": [[2.0, 0.5], [1.0, 0.5]]},
    ],
)
def test_malformed_measure_documents_are_rejected(doc):
    assert client.post("/measures/ring-radii", json=doc).status_code == 422


def test_negative_support_is_a_bad_request():
    response = client.post("/measures/ring-radii", json={"atoms": [[-1.0, 0.5], [1.0, 0.5]]})
    assert response.status_code == 400


def test_diagnostics():
    response = client.post("/measures/diagnostics", json={"theta": DIRAC_ONE, "n": 100, "kappa": 0.5, "M": 2.0})
    assert response.status_code == 200
    body = response.json()
    assert body["norm_ok"]
    assert body["eta"] == pytest.approx(0.1)


def test_solve_matches_arcsine_law():
    response = client.post("/freeconv/solve", json={"theta": DIRAC_ONE, "rho": 1.0, "re": 0.5, "im": 1.0})
    assert response.status_code == 200
    body = response.json()
    z = 0.5 + 1.0j
    expected = 1.0 / (np.sqrt(z - 2) * np.sqrt(z + 2))
    assert complex(body["G"]["re"], body["G"]["im"]) == pytest.approx(expected, abs=1e-6)
    assert body["branch_ok"]


def test_solve_principal_only_reports_lost_branch():
    payload = {"theta": DIRAC_ONE, "rho": 3.0, "re": 3.0, "im": 1e-3, "principal_only": True}
    assert client.post("/freeconv/solve", json=payload).status_code == 422


def test_solve_requires_upper_half_plane():
    payload = {"theta": DIRAC_ONE, "rho": 1.0, "re": 0.5, "im": 0.0}
    assert client.post("/freeconv/solve", json=payload).status_code == 422


def test_gap_probe():
    body = client.post("/freeconv/gap-probe", json={"theta": DIRAC_ONE, "rho": 3.0, "halfwidth": 0.5}).json()
    assert body["gap"]
    body = client.post("/freeconv/gap-probe", json={"theta": DIRAC_ONE, "rho": 1.0, "halfwidth": 0.1}).json()
    assert not body["gap"]


def test_ring_support():
    body = client.post("/ringlaw/support", json=DIRAC_ONE).json()
    assert (body["a"], body["b"]) == (1.0, 1.0)


def test_eta():
    body = client.post("/rdiagonal/eta", json={"eps": 1.0, "c0": 2.0, "s": 1.0}).json()
    assert body["eta"] == pytest.approx(0.0625)
    assert body["margin"] == pytest.approx(0.25)
