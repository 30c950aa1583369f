import json

import numpy as np
import pandas as pd
import pytest
from dynaconf import Dynaconf

from qem.core.errors import ConfigError
from qem.core.experiments import (
    ExperimentConfig,
    PecSettings,
    ZneSettings,
    error_histogram,
    gen_clifford_t_circuit,
    median_projector,
    random_pauli_observable,
    run_experiment,
    run_fig1_experiment,
    run_fig2_experiment,
)
from qem.core.state import DensityMatrix
from qem.main import get_config_path


def test_gen_circuit_layers(rng):
    circuit = gen_clifford_t_circuit(rng, 6, 20)
    singles, doubles = circuit.gate_counts()
    assert circuit.depth == 20
    assert singles == 10 * 6
    assert doubles == 10 * 3
    assert all(g.arity == 1 for g in circuit.layers[0])
    assert all(g.gate == "CNOT" for g in circuit.layers[1])

    first_cnot = gen_clifford_t_circuit(rng, 4, 3, first_layer="cnot")
    assert [g.gate for g in first_cnot.layers[0]] == ["CNOT", "CNOT"]
    assert sorted(q for g in first_cnot.layers[0] for q in g.qubits) == [0, 1, 2, 3]


def test_gen_circuit_checks(rng):
    with pytest.raises(ValueError):
        gen_clifford_t_circuit(rng, 3, 4)
    with pytest.raises(ValueError):
        gen_clifford_t_circuit(rng, 2, 0)
    with pytest.raises(ValueError):
        gen_clifford_t_circuit(rng, 2, 2, first_layer="random")


def test_gen_circuit_is_reproducible():
    a = gen_clifford_t_circuit(np.random.default_rng(4), 4, 6)
    b = gen_clifford_t_circuit(np.random.default_rng(4), 4, 6)
    assert a == b


def test_median_projector_picks_heaviest_half():
    probs = np.array([0.1, 0.4, 0.3, 0.2])
    median = median_projector(DensityMatrix(np.diag(probs).astype(complex)))
    assert median.indices == (1, 2)
    assert median.ideal_value == pytest.approx(0.7)


def test_median_projector_ties_and_lower_bound():
    median = median_projector(DensityMatrix.maximally_mixed(2))
    assert median.indices == (0, 1)
    assert median.ideal_value == pytest.approx(0.5)
    psi = np.zeros(8, dtype=complex)
    psi[5] = 1.0
    assert median_projector(DensityMatrix.from_statevector(psi)).ideal_value == pytest.approx(1.0)


def test_random_pauli_is_not_identity(rng):
    for _ in range(50):
        assert not random_pauli_observable(rng, 3).is_identity()


def test_settings_validation():
    with pytest.raises(ConfigError):
        ZneSettings(epsilons=())
    with pytest.raises(ConfigError):
        ZneSettings(models=("coherent",))
    with pytest.raises(ConfigError):
        PecSettings(n_qubits=5)
    with pytest.raises(ConfigError):
        PecSettings(runs=100, groups=50, pilot_runs=2)
    with pytest.raises(ConfigError):
        PecSettings(noise="damping", depth=20, first_layer="single")
    PecSettings(noise="damping", depth=20, first_layer="cnot")
    assert PecSettings(noise="damping", depth=20).first_layer == "cnot"
    assert PecSettings(noise="damping", depth=7).first_layer == "single"
    assert PecSettings(depth=20).first_layer == "single"
    with pytest.raises(ConfigError):
        PecSettings(first_layer="random")


def _settings(tmp_path, text):
    user = tmp_path / "user.yaml"
    user.write_text(text, encoding="utf-8")
    return Dynaconf(
        settings_files=[str(get_config_path("default.yaml")), str(user)],
        environments=True,
        merge_enabled=True,
    )


def test_config_from_settings(tmp_path):
    settings = _settings(tmp_path, f'default:\n  output: "{tmp_path.as_posix()}/out"\n  pec:\n    circuits: 3\n')
    config = ExperimentConfig.from_settings(settings, "pec", seed=99)
    assert config.seed == 99
    assert config.pec.circuits == 3
    assert config.pec.runs == 4000
    assert config.pec.groups == 1300
    assert config.pec.first_layer == "single"

    (tmp_path / "damping").mkdir()
    damping = _settings(tmp_path / "damping", "default:\n  pec:\n    noise: \"damping\"\n    depth: 20\n")
    assert ExperimentConfig.from_settings(damping, "pec").pec.first_layer == "cnot"

    zne = ExperimentConfig.from_settings(settings, "zne")
    assert len(zne.zne.epsilons) == 10
    assert zne.zne.epsilons[0] == pytest.approx(1e-3)
    assert zne.zne.epsilons[-1] == pytest.approx(1e-2)


def test_config_rejects_bad_values(tmp_path):
    settings = _settings(tmp_path, "default:\n  zne:\n    epsilon_min: 0.05\n    epsilon_max: 0.01\n")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_settings(settings, "zne")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_settings(settings, "fig3")


def _small_zne(**overrides):
    params = dict(
        n_qubits=2,
        drift_steps=2,
        step_time=1.0,
        epsilons=(1e-3, 3e-3),
        models=("depolarizing", "damping_dephasing"),
        max_order=2,
        instances=2,
    )
    params.update(overrides)
    return ZneSettings(**params)


def test_fig1_small_run(tmp_path):
    config = ExperimentConfig("zne", 12, str(tmp_path), zne=_small_zne())
    tables = run_fig1_experiment(config)
    runs = tables["runs"]
    assert len(runs) == 2 * 2 * 2 * 3
    assert (runs["abs_error"] >= 0).all()
    assert len(tables["nodes"]) == 2 * 2 * 2 * (1 + 2 + 3)
    for name in ("fig1_nodes.csv", "fig1_runs.csv", "fig1_summary.csv", "fig1_slopes.csv", "fig1_plot.csv", "fig1.gp"):
        assert (tmp_path / name).exists()
    metadata = json.loads((tmp_path / "metadata.json").read_text(encoding="utf-8"))
    assert metadata["seed"] == 12
    assert "started" in metadata

    again = run_fig1_experiment(ExperimentConfig("zne", 12, str(tmp_path / "again"), workers=2, zne=_small_zne()))
    pd.testing.assert_frame_equal(runs, again["runs"])


def test_fig1_non_markovian_and_rk4(tmp_path):
    zne = _small_zne(models=("non_markovian",), instances=1, method="rk4", dt_max=0.05, max_order=1)
    tables = run_experiment(ExperimentConfig("zne", 3, str(tmp_path), gnuplot=False, zne=zne))
    assert not (tmp_path / "fig1.gp").exists()
    assert set(tables["runs"]["model"]) == {"non_markovian"}


def test_fig2_small_run(tmp_path):
    pec = PecSettings(n_qubits=2, depth=4, epsilon=0.01, runs=400, groups=50, pilot_runs=2, circuits=3)
    table = run_fig2_experiment(ExperimentConfig("pec", 8, str(tmp_path), pec=pec))
    assert len(table) == 3
    assert (table["exact"] >= 0.5 - 1e-12).all()
    assert (table["gamma"] > 1.0).all()
    assert (tmp_path / "fig2.csv").exists()
    assert (tmp_path / "fig2_sorted.csv").exists()
    hist = pd.read_csv(tmp_path / "fig2_hist.csv")
    assert hist["delta_count"].sum() == 3
    assert hist["delta0_count"].sum() == 3
    assert (tmp_path / "fig2_hist.gp").exists()
    again = run_fig2_experiment(ExperimentConfig("pec", 8, str(tmp_path / "again"), workers=3, pec=pec))
    pd.testing.assert_frame_equal(table, again)


def test_fig2_damping_flat(tmp_path):
    pec = PecSettings(
        n_qubits=2,
        depth=3,
        epsilon=0.02,
        noise="damping",
        runs=300,
        estimator="flat",
        groups=1,
        circuits=2,
        initial_state="zero",
        backend="simplex",
    )
    table = run_fig2_experiment(ExperimentConfig("pec", 5, str(tmp_path), gnuplot=False, pec=pec))
    assert len(table) == 2
    assert (table["M"] == 300).all()


@pytest.mark.slow
def test_fig1_error_scaling(tmp_path):
    zne = ZneSettings(instances=5, epsilons=tuple(np.geomspace(1e-3, 1e-2, 6)))
    tables = run_fig1_experiment(ExperimentConfig("zne", 20240517, str(tmp_path), workers=4, zne=zne))
    for row in tables["slopes"].itertuples():
        assert abs(row.slope - (row.n + 1)) < 0.5


@pytest.mark.slow
def test_fig2_mitigated_beats_unmitigated(tmp_path):
    pec = PecSettings(circuits=20)
    table = run_fig2_experiment(ExperimentConfig("pec", 20240517, str(tmp_path), workers=4, pec=pec))
    assert table["delta"].median() < table["delta0"].median()
    assert table["delta"].median() < 2 * table["gamma"].median() / np.sqrt(pec.runs)


def test_error_histogram_shares_bins():
    hist = error_histogram([0.01, 0.02, 0.02, 0.5], [0.1, 0.3, 0.4, 0.9], bins=4)
    assert len(hist) == 4
    assert hist["delta_count"].sum() == 4
    assert hist["delta0_count"].sum() == 4
    assert hist["bin_left"].iloc[0] == pytest.approx(0.01)
    assert hist["bin_right"].iloc[-1] == pytest.approx(0.9)
    assert hist["delta_count"].iloc[0] == 3
    assert hist["delta0_count"].iloc[-1] == 1
    assert (hist["bin_center"] > hist["bin_left"]).all()
