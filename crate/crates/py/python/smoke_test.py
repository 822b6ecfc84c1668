"""Exercises the compiled `declutter` extension end to end.

Build first, e.g. `maturin develop -m crates/py/Cargo.toml`, or
`cargo build -p declutter-py --release --features extension-module` and
copy `target/release/libdeclutter_py.so` to `declutter.so` on the path.
"""

import json

import declutter


def main():
    scene = declutter.spawn_heap(3, 12)
    assert len(json.loads(scene)["objects"]) == 12

    scores = json.loads(declutter.clutter_scores(scene, k=12))
    assert scores["global"] > 0.0
    assert len(scores["poses"]) == 3

    action, rationale, index = declutter.decide_action(0.5, [0.6, 0.1, 0.3], 0, t_global=0.3, t_local=0.4)
    assert (action, rationale, index) == ("grasp", "local_low", 1)
    assert declutter.decide_action(0.0, [0.1], 3)[1] == "failure_override"

    field = declutter.distance_transform([[False] * 5 for _ in range(5)])
    assert field[2][2] == 3.0

    cfg = {"variant": "disperse_grasp", "trials": 5, "max_objects": 6, "seeds": [1]}
    report = json.loads(declutter.run_batch(json.dumps(cfg)))
    assert report["attempts"] >= 5

    try:
        declutter.run_batch(json.dumps({"trials": 0}))
    except ValueError:
        pass
    else:
        raise AssertionError("invalid config accepted")

    print("smoke test ok", declutter.__version__)


if __name__ == "__main__":
    main()
