"""Smoke test for the compiled extension.

Run after building, with the module importable, e.g.:
    cargo build --release -p greenkit-py --features extension-module
    cp target/release/libgreenkit_py.so crates/py/python/greenkit_py.so
    python3 crates/py/python/smoke_test.py
"""

import json
import math
import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import greenkit_py as gk


def check_rsvd():
    n = 40
    a = [[(1.0 if i == j else 0.0) * 2.0 ** (-i) for j in range(n)] for i in range(n)]
    u, s, v, err = gk.randomized_svd(a, 5, 5, seed=3)
    assert len(u) == n and len(u[0]) == 10
    tail = math.sqrt(sum(4.0 ** (-i) for i in range(5, n)))
    assert err <= 10.0 * tail, err
    assert abs(s[0] - 1.0) <= err
    again = gk.randomized_svd(a, 5, 5, seed=3)
    assert again[1] == s

    report = gk.verify_bound(a, 5, 5, trials=20, seed=1)
    assert report["failures"] == 0, report


def check_gp():
    kernel = json.dumps({"type": "jacobi", "M": 20, "alpha": 1.0, "beta": 1.0, "nu": 2.0})
    nodes, samples = gk.gp_sample(kernel, 4, seed=5)
    assert len(samples) == 4 and all(len(f) == len(nodes) for f in samples)
    assert abs(samples[0][0]) < 1e-12 and abs(samples[0][-1]) < 1e-12


def check_green():
    g = gk.green_reference(json.dumps({"preset": "poisson"}), 65)
    x = [i / 64 for i in range(65)]
    err = max(abs(g[i][j] - (x[min(i, j)] * (1 - x[max(i, j)])))
              for i in range(65) for j in range(65))
    assert err < 1e-12, err


def check_pipeline():
    manifest = {
        "operator": {"preset": "poisson"},
        "kernel": {"type": "jacobi", "M": 40, "alpha": 1.0, "beta": 1.0, "nu": 2.0},
        "grid_n": 257,
        "sensors": {"stride": 4},
        "N": 20,
        "noise": 0.0,
        "seed": 7,
    }
    data = gk.Dataset.generate(json.dumps(manifest))
    assert len(data) == 20
    forcing, solution = data.pair(0)
    assert len(forcing) == len(data.grid) and len(solution) == len(data.sensors)

    config = json.dumps({"green_widths": [2, 8, 8, 1], "hom_widths": [1, 4, 1], "epochs": 50})
    model, history = gk.train(data, seed=1, config_json=config)
    assert len(history) == 51 and all(math.isfinite(v) for v in history)
    assert history[-1] < history[0]
    assert abs(model.loss(data) - history[-1]) < 1e-12

    clone = gk.GreenModel.from_json(model.to_json())
    assert clone.kernel(17) == model.kernel(17)
    feats = model.features(33)
    assert 0.0 <= feats["symmetry_score"] <= math.sqrt(2.0)
    assert len(feats["mode_energies"]) <= 4


def check_cli():
    assert gk.run_cli(["--version"]) == 0
    assert gk.run_cli(["no-such-command"]) == 1
    with tempfile.TemporaryDirectory() as out:
        kernel = os.path.join(out, "kernel.json")
        with open(kernel, "w") as f:
            json.dump({"type": "jacobi", "M": 10, "alpha": 1.0, "beta": 1.0, "nu": 2.0}, f)
        code = gk.run_cli(["gp-sample", "--kernel", kernel, "--n", "2", "--seed", "1", "--out", out])
        assert code == 0
        assert os.path.exists(os.path.join(out, "manifest.json"))


if __name__ == "__main__":
    for check in (check_rsvd, check_gp, check_green, check_pipeline, check_cli):
        check()
        print(f"{check.__name__}: ok")
