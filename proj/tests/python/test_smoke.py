import json

import numpy as np
import pytest

import henon_toolkit as ht


def test_fixed_point_green_vanishes():
    f = ht.Family.quadratic_t(0.5)
    g = ht.green(f, 0.0, (1.5, 1.5), max_iter=40)
    assert g.lower == 0.0
    assert g.upper <= 1e-9


def test_green_functional_equation():
    f = ht.Family.quadratic_t(0.5)
    z = (0.3 + 0.1j, 2.5)
    g = ht.green(f, 0.0, z)
    g1 = ht.green(f, 0.0, f(0.0, z))
    assert g.lower > 0.0
    assert abs(g1.mid - 2.0 * g.mid) <= 3.0 * (g.width + g1.width)


def test_inverse_round_trip():
    f = ht.Family.quadratic([0.0, 1.0], [0.3])
    z = (0.2 - 0.4j, 1.1 + 0.5j)
    w = f.inverse(-0.7, f(-0.7, z))
    assert abs(w[0] - z[0]) < 1e-14 and abs(w[1] - z[1]) < 1e-14


def test_family_json_round_trip():
    f = ht.Family.exact_quadratic_t("1/2")
    g = ht.Family.from_json(f.to_json())
    assert g.is_rational and g.degree == 2
    assert json.loads(g.to_json()) == json.loads(f.to_json())


def test_fixed_points_and_classes():
    plus, minus = ht.fixed_points(0.5, 0.0)
    assert plus == pytest.approx(1.5) and minus == pytest.approx(0.0)
    recs = ht.find_periodic(ht.Family.quadratic_t(0.5), 0.0, 1, [-3, 3, -3, 3], [-3, 3, -3, 3])
    assert len(recs) == 2
    assert recs[0]["class"] == "attracting"
    assert ht.classify(2.0, 0.5) == "saddle"


def test_height_of_fixed_point_is_zero():
    h = ht.canonical_height(ht.Family.exact_quadratic_t("1/2"), "0", "3/2", "3/2", "both")
    assert h["value"] == 0.0 and h["error"] == 0.0


def test_render_shape_and_sign():
    img = ht.render_green(ht.Family.quadratic_t(0.5), 0.0, [-3, 3, -3, 3], 24, 16)
    assert img.shape == (16, 24)
    assert np.all(img >= 0.0)
    assert img[0, 0] > 0.0


def test_saddle_experiment_matches_claims():
    r = ht.saddle_experiment()
    assert r["fitted_ratio"] < 0.9
    assert r["backward_sup"][-1] <= 1e-3


def test_bad_family_raises():
    with pytest.raises(ht.HenonError):
        ht.Family.from_json('{"factors": []}')


def test_cli_passthrough(tmp_path):
    assert "certify-julia" in ht.commands()
    code, log = ht.run("height", str(tmp_path), preset="fixed-point")
    assert code == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["summary"]["value"] == 0.0
    code, log = ht.run("height", str(tmp_path / "x"))
    assert code == 2 and "config error" in log
