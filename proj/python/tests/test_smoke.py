import math

import pytest

import ajreserve as aj


def test_crps_point_mass():
    f = aj.StepCdf.degenerate(3.0)
    assert aj.crps(f, 3.0) == 0.0
    assert aj.crps(f, 1.25) == 1.75


def test_step_cdf_residual_atom():
    f = aj.StepCdf([1.0, 2.0], [0.5, 0.8])
    assert f(1.5) == 0.5
    assert f.effective(2.0) == 1.0
    assert math.isclose(f.residual_mass, 0.2)
    assert aj.tail_integral(f, 0.5, 1) == pytest.approx(0.5 + 0.5)


def test_chain_ladder_hand_factor():
    res = aj.chain_ladder([[100, 150], [200, None]])
    assert res["factors"] == [1.5]
    assert res["total_reserve"] == 100.0


def test_errors_map_to_python():
    with pytest.raises(aj.ValidationError):
        aj.error_incidence(1.0, 0.0)
    with pytest.raises(aj.Error):
        aj.simulate(k=2)


def test_simulate_fit_predict(tmp_path):
    sim = aj.simulate(k=4, scenario="beta", seed=3, first_volume=300, volume_decrement=50)
    assert sim.n_claims == 750
    records = sim.observed_records()
    path = tmp_path / "claims.csv"
    aj.write_claims(path, records)
    back = aj.read_claims(path, months_per_period=1)
    assert len(back) == len(records)

    plain = aj.fit_predict(records, k=4)
    featured = aj.fit_predict(records, k=4, features=["accident_period"], threads=2)
    assert plain["n_rbns"] == sim.n_open
    assert plain["curve_violations"] == 0
    assert plain["y_tot"] == pytest.approx(plain["y_closed"] + plain["y_rbns"] + plain["y_ibnr"])
    truth = dict(zip(sim.claim_ids, sim.ultimates))
    for fit in (plain, featured):
        scores = [aj.crps(c["cdf"], truth[c["claim_id"]]) for c in fit["claims"]]
        assert all(s >= 0.0 for s in scores)


def test_reproduce_rows():
    rows = aj.reproduce(ks=[4], replications=1, scenarios=["alpha"], threads=2)
    assert len(rows) == 2
    assert {r["U"] for r in rows} == {False, True}
    assert all(math.isfinite(r["ei_aj"]) for r in rows)
