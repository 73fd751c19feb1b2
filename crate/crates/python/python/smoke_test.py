"""Smoke test for the tard_py extension: generate, train, adapt, evaluate."""

import math
import os
import tempfile

import tard_py


def main():
    source = {"num_events": 60, "size_dist": [5, 15], "seed": 3}
    train_events = tard_py.generate_domain(source, "src-")
    assert len(train_events) == 60
    ev = train_events[0]
    assert ev.num_nodes == len(ev.features)
    assert len(ev.edges) == ev.num_nodes - 1

    target = tard_py.apply_shift(dict(source, num_events=20))
    assert math.isclose(target["mean_rotation"], math.pi / 3)
    test_events = tard_py.generate_domain(target, "tgt-")

    model = tard_py.train(train_events, {"epochs": 5, "seed": 1})
    assert len(model.history) == 5
    probs = model.predict_proba(test_events[0])
    assert math.isclose(sum(probs), 1.0, abs_tol=1e-12)

    result = model.evaluate(test_events)
    metrics = result["metrics"]
    assert 0.0 <= metrics["accuracy"] <= 1.0
    assert len(result["records"]) == 20

    plain = model.evaluate(test_events, {"ttt_steps": 0})
    for rec, event in zip(plain["records"], test_events):
        assert rec["probs"] == model.predict_proba(event)

    ablation = model.ablate(test_events)
    assert sorted(ablation) == ["TARD", "TARD-constraint", "TARD-ttt"]
    assert ablation["TARD-ttt"]["accuracy"] == plain["metrics"]["accuracy"]

    with tempfile.TemporaryDirectory() as tmp:
        ckpt = os.path.join(tmp, "model.json")
        model.save(ckpt)
        again = tard_py.Model.load(ckpt)
        assert again.predict_proba(test_events[0]) == probs
        data = os.path.join(tmp, "events.jsonl")
        tard_py.write_dataset(test_events, data)
        back = tard_py.read_dataset(data)
        assert [e.features for e in back] == [e.features for e in test_events]

    manual = tard_py.Event("hand", 1, [(0, 1), (0, 2)], [[0.0, 1.0], [1.0, 0.0], [0.5, 0.5]])
    assert manual.num_nodes == 3
    for bad in (
        lambda: tard_py.Event("bad", 0, [(0, 5)], [[0.0], [1.0]]),
        lambda: tard_py.train(train_events, {"alpha1": -1.0}),
        lambda: model.evaluate(test_events, {"nonsense": 1}),
    ):
        try:
            bad()
        except ValueError:
            pass
        else:
            raise AssertionError("expected ValueError")

    assert len(tard_py.SWEEP_GRID) == 9
    print("smoke test passed:", model, "accuracy", metrics["accuracy"])


if __name__ == "__main__":
    main()
