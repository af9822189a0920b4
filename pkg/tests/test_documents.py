import copy
import json
from importlib import resources

import numpy as np
import pytest

from isacdp import documents as doc
from isacdp import regions as rg
from isacdp.errors import DocumentError

DATA = resources.files("isacdp") / "data"


def _raw(name):
    return json.loads((DATA / name).read_text())


@pytest.mark.parametrize("name", ["binary_multiplicative.json", "xor_deterministic.json"])
def test_bundled_documents_are_clean(name):
    assert doc.validate_document(DATA / name) == []


def test_binary_document_matches_builder():
    loaded = doc.load_system(DATA / "binary_multiplicative.json")
    built = rg.binary_example()
    assert np.allclose(loaded.joint.probs, built.joint.probs, atol=1e-15)


def test_xor_document_point():
    pt = rg.deterministic_capacity_point(doc.load_system(DATA / "xor_deterministic.json"))
    assert pt.R == pytest.approx(1.0) and pt.D == 0.0


def test_slightly_unnormalized_row_gives_one_diagnostic(tmp_path):
    raw = _raw("binary_multiplicative.json")
    raw["kernels"]["P_U"]["rows"][0] = [0.25, 0.749999]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(raw))
    diags = doc.validate_document(path)
    assert len(diags) == 1
    assert "P_U" in diags[0] and "row 0" in diags[0]
    with pytest.raises(DocumentError):
        doc.load_system(path)


def test_all_problems_are_collected():
    raw = _raw("binary_multiplicative.json")
    raw["kernels"]["P_U"]["rows"][0] = [1.25, -0.25]
    raw["alphabets"]["S"] = 0
    raw["extra"] = 1
    doc_, diags = doc.parse_document(raw)
    assert doc_ is None
    text = "\n".join(diags)
    assert "column 1" in text and "'extra'" in text and "S" in text
    assert len(diags) >= 3


def test_invalid_json_and_missing_file(tmp_path):
    bad = tmp_path / "x.json"
    bad.write_text("{not json")
    assert doc.validate_document(bad)
    with pytest.raises(OSError):
        doc.validate_document(tmp_path / "missing.json")


def test_roundtrip_of_random_system(tmp_path):
    sys = rg.random_system(4, sizes={"S": 3, "Z": 3})
    path = tmp_path / "sys.json"
    path.write_text(json.dumps(doc.system_to_document(sys)))
    assert doc.validate_document(path) == []
    back = doc.load_system(path)
    assert np.allclose(back.joint.probs, sys.joint.probs, atol=1e-15)


def test_load_dist(tmp_path):
    path = tmp_path / "d.json"
    path.write_text(json.dumps({"alphabets": {"A": 3},
                                "dists": {"P": {"alphabet": "A", "probs": [0.2, 0.3, 0.5]},
                                          "Q": {"alphabet": "A", "probs": [0.1, 0.1, 0.8]}}}))
    assert np.allclose(doc.load_dist(path, "Q").probs, [0.1, 0.1, 0.8])
    with pytest.raises(DocumentError):
        doc.load_dist(path)
    with pytest.raises(DocumentError):
        doc.load_dist(path, "R")


def test_joint_dist_is_flattened(tmp_path):
    path = tmp_path / "j.json"
    path.write_text(json.dumps({"alphabets": {"A": 2, "B": 2},
                                "dists": {"P": {"alphabet": ["A", "B"], "probs": [0.1, 0.2, 0.3, 0.4]}}}))
    assert doc.load_dist(path).probs.tolist() == [0.1, 0.2, 0.3, 0.4]


def test_missing_system_section(tmp_path):
    raw = copy.deepcopy(_raw("binary_multiplicative.json"))
    del raw["system"]
    path = tmp_path / "n.json"
    path.write_text(json.dumps(raw))
    with pytest.raises(DocumentError, match="no 'system'"):
        doc.load_system(path)
