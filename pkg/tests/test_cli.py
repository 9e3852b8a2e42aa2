import json

import numpy as np
import pytest

from conftest import diag222
from trk.algebra import Tensor, tensor_to_json
from trk.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    return code, json.loads(capsys.readouterr().out)


@pytest.fixture
def tfile(tmp_path):
    def write(obj, name="t.json"):
        path = tmp_path / name
        path.write_text(json.dumps(obj))
        return str(path)
    return write


def test_bias_diag(capsys, tfile):
    code, out = run(capsys, "bias", "-i", tfile(tensor_to_json(diag222())))
    assert code == 0
    assert out["num"] == "9" and out["exp"] == 4 and out["p"] == 2


def test_dense_input(capsys, tfile):
    code, out = run(capsys, "mrank", "-i", tfile({"p": 3, "dense": np.eye(3, dtype=int).tolist()}))
    assert code == 0 and out["rank"] == 3


def test_prank_zero(capsys, tfile):
    code, out = run(capsys, "prank", "-i", tfile(tensor_to_json(Tensor.zeros(2, (2, 2, 2)))))
    assert code == 0 and out["prank"] == 0


def test_arank(capsys, tfile):
    code, out = run(capsys, "arank", "-i", tfile(tensor_to_json(Tensor.unit(2, 2, (1, 1)))))
    assert code == 0 and out["arank"] == pytest.approx(1.0)


def test_extract_then_verify(capsys, tmp_path):
    cert = tmp_path / "cert.json"
    assert main(["extract", "--full-space", "-p", "2", "-d", "3", "-n", "6", "-t", "6", "-r", "1",
                 "--out", str(cert)]) == 0
    code, rep = run(capsys, "verify", "-i", str(cert))
    assert code == 0 and rep["ok"]
    code, tail = run(capsys, "tail-check", "-i", str(cert), "--mode", "exact")
    assert code == 0 and tail["link_a"] and tail["link_b"]


def test_verify_failure_exit_1(capsys, tmp_path):
    cert = tmp_path / "cert.json"
    assert main(["extract", "--full-space", "-p", "2", "-d", "2", "-n", "6", "-t", "6", "-r", "3",
                 "--out", str(cert)]) == 0
    doc = json.loads(cert.read_text())
    doc["W"]["tensors"] = [tensor_to_json(Tensor.unit(2, 6, (1, 1)))]
    idx = [i for i, T in enumerate(doc["input_basis"]["tensors"])
           if T["entries"] == [[1, 1, 1]]][0]
    doc["W_coeffs"] = [[int(i == idx) for i in range(len(doc["input_basis"]["tensors"]))]]
    cert.write_text(json.dumps(doc))
    code, rep = run(capsys, "verify", "-i", str(cert))
    assert code == 1 and not rep["ok"] and rep["counterexample"] is not None


def test_usage_errors(capsys, tfile):
    code, out = run(capsys, "bias")
    assert code == 2 and out["error"]["type"] == "usage"
    code, out = run(capsys, "extract", "-t", "2", "-r", "1")
    assert code == 2
    code, out = run(capsys, "bias", "-i", tfile({"p": 4, "dense": [[1]]}))
    assert code == 2 and "prime" in out["error"]["message"]
    code, out = run(capsys, "extract", "--full-space", "-p", "2", "-d", "3", "-n", "4", "-t", "4", "-r", "2")
    assert code == 2 and out["error"]["type"] == "PreconditionError"


def test_sz_commands(capsys):
    code, out = run(capsys, "sz-independence", "-p", "5", "-k", "3", "-n", "3", "-s", "4",
                    "--trials", "10")
    assert code == 0 and out["kind"] == "independence" and "wall_clock" in out
    code, out = run(capsys, "sz-demo", "-p", "5", "-k", "3", "-n", "3", "-s", "4", "--trials", "5")
    assert code == 0 and out["aggregate"]["all_blockers_ap_free"]


def test_selftest_subset(capsys):
    code, out = run(capsys, "selftest", "--only", "d2_equivalence", "cover_correctness")
    assert code == 0 and out["passed"] and len(out["criteria"]) == 2
