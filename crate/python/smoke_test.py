"""Smoke test for the comp_oc extension module.

Build and install first:
    pip install ./crates/python
"""

import pathlib

import comp_oc

FIXTURES = pathlib.Path(__file__).resolve().parents[1] / "crates" / "core" / "fixtures"


def main():
    raw = comp_oc.Instance.fixture("example2")
    assert (raw.n, raw.q, raw.horizon) == (1, 1, 2)
    cert = raw.certify()
    assert cert["verdict"] == "ConvexOnly", cert

    u = raw.solve([0.05])
    assert abs(raw.cost([0.05], u)) < 1e-12

    inst = comp_oc.Instance.load(FIXTURES / "example2.json").calibrate()
    ctrl = comp_oc.Controller.synthesize(inst, 0.25)
    report = ctrl.evaluate([[-0.1], [0.0], [0.07]])
    assert report["weak_err_max"] <= 0.25, report
    assert ctrl.total_size == ctrl.plan["total_size"]
    print(f"example2: k_bar={ctrl.plan['k_bar']} width={ctrl.width} weak_err_max={report['weak_err_max']:.2e}")

    lq3 = comp_oc.Instance.fixture("lq3").extend()
    assert lq3.n == 3 and not lq3.has_stage_cost
    print("lq3 extended features:", lq3.features())

    report, code = comp_oc.run_config(FIXTURES / "example2.config.json")
    assert code == 0 and len(report["points"]) == 3
    print("pipeline hash:", report["content_hash"][:16])

    try:
        comp_oc.Instance.load(FIXTURES / "missing_horizon.json")
    except ValueError as e:
        assert "horizon" in str(e)
    else:
        raise AssertionError("malformed instance accepted")
    print("ok")


if __name__ == "__main__":
    main()
