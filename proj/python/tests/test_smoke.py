import json
import math

import pytest

import siot_edge as se


def test_distance_and_response_time():
    assert se.geo_distance(0, 0, 0, 1) == pytest.approx(111194.93, rel=1e-7)
    rt = se.response_time(1000, 1, "d2d", 1.0, 1.0, 100.0)
    assert rt == pytest.approx(1.05)
    assert se.response_time(1000, 1, "d2d", 1.0, 1.0, 0.0) is None
    with pytest.raises(ValueError):
        se.response_time(1, 1, "wifi", 1, 1, 1)


def test_metrics():
    r = se.compute_metrics([1.0], [1.5])
    assert r["pcd"] == pytest.approx(40.0)
    assert r["mse"] == pytest.approx(0.25)
    assert r["mae"] == pytest.approx(0.5)


def test_owner_network_edge_count():
    edges = se.generate_owner_network(10, 4, 1.0, 3)
    assert len(edges) == 20


def test_devices_round_trip(tmp_path):
    devs = se.generate_devices(50, 25, 1)
    assert len(devs) == 50
    path = tmp_path / "devices.csv"
    se.save_devices(path, devs)
    back = se.load_devices(path)
    assert back == devs
    assert all(d.availability_pct >= 0 for d in back)


def test_louvain_two_triangles():
    g = se.SocialGraph("sor")
    for a, b in [(1, 2), (2, 3), (1, 3), (4, 5), (5, 6), (4, 6), (3, 4)]:
        g.set_edge(a, b, 1.0)
    res = se.louvain(g)
    labels = res["labels"]
    assert labels[1] == labels[2] == labels[3]
    assert labels[4] == labels[5] == labels[6]
    assert labels[1] != labels[4]
    assert res["modularity"] == pytest.approx(5 / 14, abs=1e-12)
    assert se.modularity(g, labels) == pytest.approx(res["modularity"])


def test_relation_builders():
    devs = []
    for i, owner in enumerate([0, 0, 1, 2], start=1):
        d = se.Device()
        d.id = i
        d.owner_id = owner
        d.latitude, d.longitude = 43.46, -3.81
        d.availability_pct = 50
        devs.append(d)
    sfor = se.build_sfor(devs, 3, [(0, 1), (1, 2)])
    assert sfor.weight(1, 2) == 1.0
    assert sfor.weight(1, 3) == 0.5
    assert sfor.weight(1, 4) == 0.25
    sor = se.build_sor(devs, [(1, 2, 0.0, 30.0)] * 3 + [(3, 4, 0.0, 30.0)] * 2)
    assert sor.weight(1, 2) == 0.5
    assert sor.weight(3, 4) is None
    clor = se.build_clor(devs, 100.0)
    assert clor.weight(1, 4) == 1.0


def test_candidate_set():
    sfor = {1: 0, 2: 0, 3: 0, 4: 0, 5: 1}
    sor = {1: 0, 3: 0, 4: 0, 5: 0, 2: 1}
    assert se.candidate_set(1, [("sfor", sfor), ("sor", sor)], "intersection") == {3, 4}
    assert se.candidate_set(1, [("sfor", sfor), ("sor", sor)], "union") == {2, 3, 4, 5}
    with pytest.raises(se.SiotError):
        se.candidate_set(5, [("sfor", {5: 0, 1: 1}), ("sor", {5: 0, 2: 1})], "intersection")


SMALL = {
    "seed": 3,
    "dataset": {"n_devices": 150, "n_owners": 80, "days": 2},
    "experiences": {"count": 600},
    "allocation": {"requests": 2},
    "learner": {
        "grids": {
            "dt": {"max_depth": [4, None]},
            "rf": {"n_trees": [8], "max_depth": [6]},
            "gbr": {"n_stages": [20], "learning_rate": [0.1], "max_depth": [3]},
        }
    },
}


def test_pipeline_and_allocate(tmp_path):
    metrics = se.run_pipeline(SMALL, tmp_path / "run")
    for m in ("dt", "rf", "gbr"):
        for k in ("pcd", "mse", "mae"):
            assert math.isfinite(metrics["models"][m][k])
    assert metrics["stamp"]["config_hash"] == se.config_hash(SMALL)

    again = se.run_pipeline(SMALL, tmp_path / "again")
    assert again == metrics
    assert (tmp_path / "run" / "metrics.json").read_bytes() == (tmp_path / "again" / "metrics.json").read_bytes()

    model = se.Model.load(tmp_path / "run" / "models" / "model_gbr.json")
    assert model.variant == "gbr"
    assert model.tree_count == 20

    allocs = json.loads((tmp_path / "run" / "allocations.json").read_text())["allocations"]
    requester = allocs[0]["requester_id"]
    res = se.allocate(tmp_path / "run", requester, 37.0, 1.18, config=SMALL, use_oracle=True)
    assert res["requester_id"] == requester
    assert res["predicted_rt_s"] == pytest.approx(res["oracle_rt_s"])


def test_config_errors(tmp_path):
    with pytest.raises(se.ConfigError):
        se.run_pipeline({"learner": {"train_fraction": 2.0}}, tmp_path / "bad")
    assert not (tmp_path / "bad").exists()
    bad_devices = tmp_path / "d.csv"
    bad_devices.write_text("id,owner_id\n1,0\n")
    with pytest.raises(se.StageError, match="generate"):
        se.run_pipeline({"paths": {"devices": str(bad_devices)}}, tmp_path / "x")
