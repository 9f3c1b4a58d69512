"""Smoke test for the tod_py extension.

Build and install first:  pip install --no-build-isolation -e crates/py
"""

import json

import tod_py


def main():
    assert set(tod_py.domains()) == {"attraction", "hotel", "restaurant", "train"}

    parsed = tod_py.extract("restaurant", "cheap italian in the north")
    values = {k: v["value"] for k, v in parsed["slots"].items() if v["value"]}
    assert values == {"pricerange": "cheap", "food": "italian", "area": "north"}, values

    session = tod_py.Session("restaurant")
    for utterance in ["I want french food in the north", "no", "thanks that is all"]:
        assert not session.completed
        session.advance(utterance)
    assert session.completed, session.stage

    tod_lines = [text for who, text in session.transcript() if who == "tod"]
    assert any("two two" in line for line in tod_lines), tod_lines
    assert session.trace() and session.trace()[0].startswith("cycle=1 ")

    state = json.loads(session.state_json())
    assert state == session.state()
    slots = {s: v["normalized"] for s, v in state["predefined_slots"].items() if v is not None}
    assert slots == {"area": "north", "food": "french"}, slots

    try:
        session.advance("one more thing")
    except tod_py.TodError:
        pass
    else:
        raise AssertionError("completed session accepted input")

    try:
        tod_py.Session("taxi")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown domain accepted")

    summary = tod_py.replay_fixtures(per_domain=5)
    assert summary["conversations"] == 20, summary
    assert summary["inform_rate"] == summary["success_rate"] == 100.0, summary

    assert tod_py.summarize_counts(4, 3, 3)["inform_rate"] == 75.0

    print("smoke test ok:", json.dumps(summary))


if __name__ == "__main__":
    main()
