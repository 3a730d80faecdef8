"""Smoke test for the Python bindings.

Build and install first:
    maturin build --release -m crates/python/Cargo.toml
    pip install target/wheels/xrl_explain_py-*.whl
"""

import os
import tempfile

import xrl_explain_py as xe


def main():
    policy = xe.Policy.train("mountaincar")
    returns = policy.evaluate()
    mean = sum(returns) / len(returns)
    print(f"agent mean return {mean:.1f}")
    assert mean >= -160

    replay = policy.collect(10_000)
    print(f"{len(replay)} records, features {replay.feature_names}, actions {replay.action_names}")

    result = xe.pipeline(replay, n_cat=5, env="mountaincar")
    report = result.report
    print(f"E_approx {report['e_approx']}  E_F1 {report['e_f1']:.3f}  goal reached {report['performance']['successes']}/10")
    for action, text in result.explanations():
        print(f"  {action}: {text}")
    assert report["performance"]["successes"] >= 1

    preds = result.predicates
    action, provenance = result.rules.select_action(preds, [-0.5, 0.01])
    print(f"rule action for (-0.5, 0.01): {action} via {provenance['kind']}")

    print(replay.sql("when will you do push_left?"))
    for action, n, text in xe.explain(replay, "what if velocity is high", preds):
        print(f"  [{action}: {n}] {text}")

    binary = xe.Predicates.build(replay, n_cat=2)
    print("APE:", {k: v["kind"] for k, v in xe.ape(replay, binary).items()})

    try:
        xe.validate_sql("DROP TABLE replay", replay)
    except xe.XrlError as e:
        print(f"rejected: {e}")
    else:
        raise AssertionError("DROP accepted")

    refined, trace = xe.refine(replay, preds, "max-f1", budget=2)
    assert trace["best"]["e_f1"] >= trace["initial"]["e_f1"]
    print(f"max-F1 refinement {trace['initial']['e_f1']:.3f} -> {trace['best']['e_f1']:.3f}")

    with tempfile.TemporaryDirectory() as d:
        db = os.path.join(d, "mc.db")
        replay.save(db)
        again = xe.Replay.load(db)
        assert len(again) == len(replay)
        rules = os.path.join(d, "rules.json")
        result.rules.save(rules)
        assert xe.RuleSet.load(rules).to_json() == result.rules.to_json()

    print("smoke test passed")


if __name__ == "__main__":
    main()
