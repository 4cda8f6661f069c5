import numpy as np
import pytest

from shuffle_gossip.experiment import (CSV_HEADER, ExperimentConfig, Layer, SchemaError,
                                       compare_layers, fastest, read_summary_csv,
                                       rounds_to_fraction, run_experiment, run_replicate,
                                       summarize, sweep_csv, sweep_s, write_atomic)
from shuffle_gossip.params import ParameterError, ProtocolParams
from shuffle_gossip.topology import Topology

SMALL = ProtocolParams(n=40, c=10, s=4, N=64)


def config(**kw):
    base = dict(params=SMALL, topology=Topology.grid(8), rounds=60, replicates=3)
    base.update(kw)
    return ExperimentConfig(**base)


def test_csv_layout_and_determinism():
    a = run_experiment(config()).to_csv()
    b = run_experiment(config()).to_csv()
    assert a == b
    lines = a.splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert len(lines) == 62
    assert lines[1].startswith("0,0.015625,0,0.015625,0")


def test_seed_changes_output():
    assert run_experiment(config()).to_csv() != run_experiment(config(base_seed=7)).to_csv()


def test_replicates_depend_only_on_index():
    cfg = config(replicates=4)
    summary = run_experiment(cfg)
    for i in range(4):
        again = run_replicate(cfg, i)
        assert np.array_equal(again.replication, summary.replicates[i].replication)


def test_parallel_matches_sequential():
    cfg = config(replicates=4)
    assert run_experiment(cfg, workers=2).to_csv() == run_experiment(cfg).to_csv()


def test_single_replicate_has_zero_std():
    s = run_experiment(config(replicates=1))
    assert not s.repl_std.any() and not s.cov_std.any()


def test_sample_std():
    # two hand-made replicate curves
    from shuffle_gossip.experiment import ReplicateResult
    r = [ReplicateResult(np.array([0.0, 1.0]), np.array([0.0, 1.0])),
         ReplicateResult(np.array([0.0, 3.0]), np.array([1.0, 1.0]))]
    s = summarize(r)
    assert s.repl_mean.tolist() == [0.0, 2.0]
    assert s.repl_std.tolist() == [0.0, np.sqrt(2.0)]
    assert s.cov_std[1] == 0


def test_ode_layer():
    cfg = ExperimentConfig(params=ProtocolParams(500, 100, 50, 2500),
                           topology=Topology.complete(2500), layer=Layer.ODE, rounds=1000,
                           replicates=5)
    s = run_experiment(cfg)
    assert len(s.replicates) == 1
    assert not s.repl_std.any()
    assert s.repl_mean[-1] == pytest.approx(0.2, abs=1e-6)


def test_ode_layer_needs_full_connectivity():
    with pytest.raises(ParameterError):
        config(layer="ode")


def test_config_validation():
    with pytest.raises(ParameterError):
        config(replicates=0)
    with pytest.raises(ParameterError):
        config(topology=Topology.grid(7))
    with pytest.raises(ValueError):
        config(layer="bogus")


def test_protocol_layer_with_conservation_check():
    cfg = ExperimentConfig(params=ProtocolParams(30, 8, 3, 36), topology=Topology.grid(6),
                           layer="protocol", warmup_rounds=40, rounds=30, replicates=2,
                           check_conservation=True)
    s = run_experiment(cfg)
    assert s.conservation_violations == 0
    assert s.repl_mean[0] == pytest.approx(1 / 36)
    assert np.all(np.diff(s.cov_mean) >= 0)


def test_compare_self_passes():
    s = run_experiment(config())
    report = compare_layers(s, s)
    assert report.passed
    assert not report.repl_diff.any() and not report.cov_diff.any()
    assert report.summary_line().startswith("PASS")


def test_compare_detects_offset():
    s = run_experiment(config())
    shifted = run_experiment(config())
    shifted.repl_mean = shifted.repl_mean + 0.5
    report = compare_layers(s, shifted, metrics=("replication",))
    assert not report.passed and report.summary_line().startswith("FAIL")


def test_compare_resolution_floor():
    s = run_experiment(config(replicates=1))
    other = run_experiment(config(replicates=1, base_seed=3))
    assert not compare_layers(s, other).passed
    assert compare_layers(s, other, resolution=1.0).passed


def test_compare_schema_mismatch():
    with pytest.raises(SchemaError):
        compare_layers(run_experiment(config()), run_experiment(config(rounds=61)))


def test_round_trip(tmp_path):
    s = run_experiment(config())
    path = tmp_path / "s.csv"
    write_atomic(path, s.to_csv())
    back = read_summary_csv(path)
    assert back.to_csv() == s.to_csv()
    assert list(tmp_path.iterdir()) == [path]


@pytest.mark.parametrize("text", [
    "",
    "a,b\n1,2\n",
    ",".join(CSV_HEADER) + "\n",
    ",".join(CSV_HEADER) + "\n1,0,0,0,0\n",
    ",".join(CSV_HEADER) + "\n0,x,0,0,0\n",
    ",".join(CSV_HEADER) + "\n0,nan,0,0,0\n",
    ",".join(CSV_HEADER) + "\n0,1,0,0\n",
])
def test_bad_csv(tmp_path, text):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(SchemaError):
        read_summary_csv(path)


def test_rounds_to_fraction():
    s = run_experiment(config(rounds=400))
    t = rounds_to_fraction(s)
    assert t is not None and s.repl_mean[t] >= 0.9 * 0.25 > s.repl_mean[t - 1]
    assert rounds_to_fraction(s, target=10.0) is None


def test_sweep():
    rows = sweep_s(config(rounds=300), [1, 4, 9], at_round=100)
    assert [r.s for r in rows] == [1, 4, 9]
    assert all(r.at_round == 100 for r in rows)
    text = sweep_csv(rows).splitlines()
    assert text[0] == "s,rounds_to_90pct,round,repl_mean,cov_mean"
    assert len(text) == 4
    best = fastest(rows)
    assert best is not None and best.s == 4
    with pytest.raises(ParameterError):
        sweep_s(config(), [2], at_round=500)
