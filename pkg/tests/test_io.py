import json

import numpy as np
import pytest

from plnet.bilip import BiLipModel, ConditionedBiLipModel, conditioned_forward, g_forward
from plnet.errors import ConfigError
from plnet.io import decode_array, encode_array, from_document, load_model, save_model, to_document
from plnet.monlip import MonLipSpec, forward, materialize
from plnet.pl import PLNet, f_eval


def test_array_encoding_is_exact():
    a = np.random.default_rng(0).normal(size=(3, 4))
    d = encode_array(a)
    assert d["shape"] == [3, 4]
    np.testing.assert_array_equal(decode_array(json.loads(json.dumps(d))), a)


def test_monlip_round_trip_and_weight_check(tmp_path):
    spec = MonLipSpec(3, (4, 4), 0.5, 2.0, "tanh")
    params = spec.init_params(np.random.default_rng(1))
    params["by"] = np.array([0.1, 0.2, 0.3])
    path = tmp_path / "layer.json"
    save_model(path, (spec, params))
    spec2, params2 = load_model(path)
    assert spec2 == spec
    x = np.array([0.3, -1.0, 2.0])
    np.testing.assert_array_equal(forward(materialize(spec2, params2), x), forward(materialize(spec, params), x))
    doc = json.loads(path.read_text())
    assert set(doc["weights"]) == {"S", "V", "psi"}
    doc["arrays"]["fq"] = encode_array(np.zeros((8, 3)))
    with pytest.raises(ConfigError, match="do not match"):
        from_document(doc)


def test_bilip_and_plnet_round_trip(tmp_path):
    g = BiLipModel.build(2, 2, (4,), 0.2, 5.0, seed=2)
    g.domain = np.array([[-2.0, 2.0], [-1.0, 3.0]])
    net = PLNet(g, 0.25, g.domain)
    save_model(tmp_path / "g.json", g)
    save_model(tmp_path / "f.json", net)
    g2, net2 = load_model(tmp_path / "g.json"), load_model(tmp_path / "f.json")
    X = np.random.default_rng(3).normal(size=(5, 2))
    np.testing.assert_array_equal(g_forward(g2, X), g_forward(g, X))
    np.testing.assert_array_equal(f_eval(net2, X), f_eval(net, X))
    np.testing.assert_array_equal(net2.domain, net.domain)
    assert g2.mu == g.mu and g2.nu == g.nu


def test_conditioned_round_trip(tmp_path):
    cm = ConditionedBiLipModel(BiLipModel.build(2, 1, (4,), 0.3, 3.0, seed=4), 2, (8,), seed=5)
    net = PLNet(cm, -0.1, cond_domain=[[-1, 1], [-1, 1]])
    save_model(tmp_path / "c.json", net)
    back = load_model(tmp_path / "c.json")
    assert back.conditioned and back.c == -0.1
    x, p = np.array([0.1, 0.2]), np.array([0.5, -0.5])
    np.testing.assert_array_equal(conditioned_forward(back.g, x, p), conditioned_forward(cm, x, p))


def test_bad_documents(tmp_path):
    with pytest.raises(ConfigError):
        from_document({"format": "other"})
    with pytest.raises(ConfigError):
        from_document({"format": "plnet-model", "version": 99})
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_model(path)
    with pytest.raises(ConfigError):
        to_document(object())
