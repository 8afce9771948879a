import json
import math
from dataclasses import replace

import numpy as np
import pytest

from etransport.cli import EXIT_ABORT, EXIT_CONFIG, EXIT_OK, EXIT_VERIFY, envelope_constants, main, run, sweep, verify
from etransport.config import (
    ConfigError,
    Expression,
    Preset,
    Tabulated,
    config_to_dict,
    evaluate_expression,
    gaussian_wells,
    initial_state,
    load_config,
    parse_config,
    preset_section4,
    save_config,
)
from etransport.discretization import Dirichlet, Grid1D, NeumannZeroFlux
from etransport.model import TemperatureDependent


class TestPreset:
    def test_values(self):
        """[PAPER] well depth exp(-12) ~ 6.1e-6 and unit value at the ends."""
        assert gaussian_wells(0.5) == pytest.approx(math.exp(-12), rel=1e-15)
        assert f"{math.exp(-12):.1e}" == "6.1e-06"
        assert gaussian_wells(0.0) == 1.0
        assert gaussian_wells(1.0) == 1.0

    def test_symmetry(self):
        """[TRIVIAL] mirrored Gaussians."""
        s = np.linspace(1e-3, 0.499, 200)
        np.testing.assert_allclose(gaussian_wells(0.5 - s), gaussian_wells(0.5 + s), rtol=1e-13)

    def test_config(self):
        """[PAPER] preset grid, boundary data, time step and initial data."""
        cfg = preset_section4(-0.25)
        assert cfg.grid.num_points == 501 and cfg.grid.dx == pytest.approx(2e-3)
        assert cfg.grid.bc_left == cfg.grid.bc_right == Dirichlet(1.0, 1.0)
        assert cfg.solver.dt_max == 2e-3 and cfg.solver.t_end == 1.0
        assert cfg.entropy_pairs[0].b1 == -0.75 and cfg.entropy_pairs[0].b2 == 5.0
        state = initial_state(cfg.initial_condition, cfg.grid)
        assert state.n.min() == pytest.approx(math.exp(-12), rel=1e-15)
        np.testing.assert_allclose(state.theta, state.n, rtol=1e-15)


class TestExpressions:
    def test_grammar(self):
        """[DERIVED] expressions against numpy evaluations."""
        x = np.linspace(0, 1, 5)
        np.testing.assert_allclose(evaluate_expression("1 + 2*x^2 - x/4", x), 1 + 2 * x**2 - x / 4)
        np.testing.assert_allclose(evaluate_expression("exp(-x) * abs(sin(pi*x)) + cos(e)", x),
                                   np.exp(-x) * np.abs(np.sin(np.pi * x)) + np.cos(np.e))
        np.testing.assert_array_equal(evaluate_expression("3", x), 3.0)
        np.testing.assert_allclose(evaluate_expression("-x + +1", x), 1 - x)

    @pytest.mark.parametrize("bad", ["__import__('os')", "x.real", "log(x)", "x if x else 1", "[x]", "exp(x, 2)", "1 +"])
    def test_rejected(self, bad):
        """[TRIVIAL] anything outside the grammar is rejected."""
        with pytest.raises(ValueError):
            evaluate_expression(bad, np.zeros(3))

    def test_piecewise_matches_preset(self):
        """[DERIVED] the piecewise form reproduces the preset exactly."""
        x = np.linspace(0, 1, 501)
        pieces = ((0.5, "exp(-48*x^2)"), (None, "exp(-48*(x-1)^2)"))
        np.testing.assert_array_equal(evaluate_expression(pieces, x), gaussian_wells(x))

    def test_piecewise_gap(self):
        """[TRIVIAL] uncovered nodes are an error."""
        with pytest.raises(ValueError):
            evaluate_expression(((0.5, "1"),), np.linspace(0, 1, 5))


def full_config_dict():
    return {
        "model": {
            "beta": 0.1,
            "relaxation": {"kind": "temperature_dependent", "tau0": 0.5, "tau1": 2.0},
            "n_D": 1.0,
            "theta_D": 1.0,
            "allow_extended_beta": False,
        },
        "grid": {
            "x_min": 0.0,
            "x_max": 2.0,
            "num_points": 41,
            "bc_left": {"kind": "neumann"},
            "bc_right": {"kind": "dirichlet", "n_D": 1.0, "theta_D": 1.0},
        },
        "solver": {"newton_tol": 1e-11, "t_end": 0.05, "snapshot_times": [0.0, 0.01]},
        "initial_condition": {
            "kind": "expression",
            "n": [{"until": 1.0, "expr": "1 + 0.5*cos(pi*x/2)^2"}, {"expr": "1"}],
            "theta": "1 + 0.2*sin(pi*x/4)",
        },
        "entropy_pairs": [[-0.4, 5.0], [-3.0, 5.0]],
        "output_dir": "somewhere",
    }


class TestConfig:
    def test_parse(self):
        """[TRIVIAL] full schema parse."""
        cfg = parse_config(full_config_dict())
        assert cfg.model.relaxation == TemperatureDependent(0.5, 2.0)
        assert isinstance(cfg.grid.bc_left, NeumannZeroFlux)
        assert cfg.solver.snapshot_times == (0.0, 0.01)
        assert isinstance(cfg.initial_condition, Expression)
        assert len(cfg.entropy_pairs) == 2

    def test_round_trip(self, tmp_path):
        """[TRIVIAL] parse -> serialize -> parse is the identity."""
        for cfg in (parse_config(full_config_dict()), preset_section4(0.25), preset_section4(0.75, True)):
            again = load_config(save_config(cfg, tmp_path / "c.json"))
            assert again == cfg
            assert config_to_dict(again) == config_to_dict(cfg)

    def test_defaults(self):
        """[TRIVIAL] omitted sections take defaults."""
        cfg = parse_config({"model": {"beta": 0.0}})
        assert cfg.grid == Grid1D()
        assert cfg.initial_condition == Preset()
        assert (cfg.entropy_pairs[0].b1, cfg.entropy_pairs[0].b2) == (-0.5, 5.0)

    @pytest.mark.parametrize(
        "mutate, path",
        [
            (lambda d: d.update(extra=1), "extra"),
            (lambda d: d["model"].update(tau=1.0), "model.tau"),
            (lambda d: d["grid"]["bc_right"].update(value=1), "grid.bc_right.value"),
            (lambda d: d["solver"].update(tolerance=1), "solver.tolerance"),
            (lambda d: d["initial_condition"]["n"][0].update(upto=1), "initial_condition.n[0].upto"),
            (lambda d: d["model"].update(beta=0.7), "model"),
            (lambda d: d["grid"].update(num_points=2), "grid"),
            (lambda d: d["initial_condition"].update(theta="log(x)"), "initial_condition.theta"),
            (lambda d: d["initial_condition"]["n"][0].pop("until"), "initial_condition.n[0].until"),
            (lambda d: d["entropy_pairs"].append([5.0]), "entropy_pairs[2]"),
            (lambda d: d["model"]["relaxation"].update(kind="other"), "model.relaxation.kind"),
        ],
    )
    def test_rejections_carry_path(self, mutate, path):
        """[TRIVIAL] strict key checking reports the field path."""
        data = full_config_dict()
        mutate(data)
        with pytest.raises(ConfigError) as info:
            parse_config(data)
        assert info.value.path == path

    def test_extended_beta_flag(self):
        """[TRIVIAL] extended beta needs the override."""
        data = {"model": {"beta": -0.75}}
        with pytest.raises(ConfigError):
            parse_config(data)
        assert parse_config(data, allow_extended_beta=True).model.beta == -0.75

    def test_tabulated(self, tmp_path):
        """[DERIVED] linear interpolation of tabulated data."""
        (tmp_path / "ic.csv").write_text("x,n,theta\n0,1,1\n0.5,2,0.5\n1,1,1\n")
        grid = Grid1D(num_points=5)
        state = initial_state(Tabulated("ic.csv"), grid, base_dir=tmp_path)
        np.testing.assert_allclose(state.n, [1, 1.5, 2, 1.5, 1])
        np.testing.assert_allclose(state.theta, [1, 0.75, 0.5, 0.75, 1])
        (tmp_path / "bad.csv").write_text("x,n\n0,1\n1,1\n")
        with pytest.raises(ConfigError):
            initial_state(Tabulated("bad.csv"), grid, base_dir=tmp_path)

    def test_nonpositive_initial_data(self):
        """[TRIVIAL] nonpositive initial data is rejected."""
        with pytest.raises(ConfigError):
            initial_state(Expression("x", "1"), Grid1D(num_points=5))


def short_config(beta=0.25, t_end=0.03):
    return preset_section4(beta, t_end=t_end, snapshot_times=(0.0, 0.01, t_end))


class TestRun:
    def test_outputs(self, tmp_path):
        """[TRIVIAL] output files, formatting and byte-identical reruns."""
        cfg = short_config()
        outcome = run(cfg, tmp_path / "a")
        assert outcome.status == EXIT_OK
        names = sorted(p.name for p in (tmp_path / "a").iterdir())
        assert names == ["config.json", "snapshot_t0.01.csv", "snapshot_t0.03.csv", "snapshot_t0.csv", "summary.json", "trajectory.csv"]
        traj = (tmp_path / "a" / "trajectory.csv").read_bytes()
        assert b"\r" not in traj
        assert traj.splitlines()[0] == b"t,dt,newton_iters,S_pair,dissipation,dist_n,dist_w,rel_dist_n,rel_dist_w,min_n,min_theta,log_entropy"
        summary = json.loads((tmp_path / "a" / "summary.json").read_text())
        assert summary["status"] == "completed"
        assert summary["entropy"][0]["monotone"]
        assert "newton_tol" in summary["defaults_flagged"]
        # rerun is byte-identical
        run(cfg, tmp_path / "b")
        for name in names:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_snapshot_uv_columns(self, tmp_path):
        """[DERIVED] u, v columns agree with n, theta to 1e-12."""
        cfg = short_config(beta=-0.25)
        run(cfg, tmp_path)
        table = np.genfromtxt(tmp_path / "snapshot_t0.03.csv", delimiter=",", names=True)
        beta = -0.25
        np.testing.assert_allclose(table["u"], table["n"] * table["theta"] ** (0.5 - beta), rtol=1e-12)
        np.testing.assert_allclose(table["v"], table["n"] * table["theta"] ** (1.5 - beta), rtol=1e-12)

    def test_equilibrium_rows_are_zero(self, tmp_path):
        """[TRIVIAL] equilibrium initial data gives all-zero diagnostics."""
        cfg = replace(short_config(), initial_condition=Expression("1", "1"))
        assert run(cfg, tmp_path).status == EXIT_OK
        table = np.genfromtxt(tmp_path / "trajectory.csv", delimiter=",", names=True)
        for col in ("S_pair", "dissipation", "dist_n", "dist_w", "rel_dist_n", "rel_dist_w", "log_entropy"):
            assert np.all(table[col] == 0.0), col
        assert np.all(table["newton_iters"] == 0)

    def test_abort_dumps_state(self, tmp_path):
        """[TRIVIAL] an abort writes the last state and exit code 3."""
        cfg = preset_section4(0.25, t_end=0.01, newton_tol=1e-300, newton_max_iters=1, dt_min=1e-4)
        outcome = run(cfg, tmp_path)
        assert outcome.status == EXIT_ABORT
        assert (tmp_path / "last_state.csv").exists()
        assert json.loads((tmp_path / "summary.json").read_text())["status"] == "aborted"

    def test_envelope_constants(self):
        """[DERIVED] envelope constants on synthetic series."""
        t = np.linspace(0, 1, 50)
        for v in (np.exp(-7 * t), 2 / (1 + 3 * t)):
            c1, c2, _ = envelope_constants(t, v)
            assert c1 > 0 and c2 > 0
            assert np.all(v <= c1 / (1 + c2 * t) * (1 + 1e-14))
        # algebraic data recovers its own constants
        c1, c2, _ = envelope_constants(t, 2 / (1 + 3 * t))
        assert (c1, c2) == (pytest.approx(2.0), pytest.approx(3.0))
        # exponential data: (e^{7t} - 1)/t increases, so C2 is set by the first step t = 1/49
        c1, c2, _ = envelope_constants(t, np.exp(-7 * t))
        assert c1 == pytest.approx(1.0, rel=1e-14)
        assert c2 == pytest.approx(49 * (math.exp(1 / 7) - 1), rel=1e-12)
        with pytest.raises(ValueError):
            envelope_constants(t, 1 + t)


class TestSweep:
    def test_two_betas(self, tmp_path):
        """[TRIVIAL] two betas give two trajectories and a combined table."""
        status = sweep([-0.25, 0.25], short_config(t_end=0.01), tmp_path)
        assert {b: s["status"] for b, s in status.items()} == {-0.25: 0, 0.25: 0}
        assert (tmp_path / "beta_-0.25" / "trajectory.csv").exists()
        assert (tmp_path / "beta_0.25" / "trajectory.csv").exists()
        combined = np.genfromtxt(tmp_path / "decay_combined.csv", delimiter=",", names=True)
        assert combined.dtype.names == ("beta", "t", "rel_dist_n", "rel_dist_w")
        assert set(combined["beta"]) == {-0.25, 0.25}

    def test_validation(self, tmp_path):
        """[TRIVIAL] empty and out-of-range beta lists are rejected."""
        with pytest.raises(ConfigError):
            sweep([], short_config(), tmp_path)
        with pytest.raises(ConfigError):
            sweep([0.25, 0.75], short_config(), tmp_path)

    def test_parallel_matches_serial(self, tmp_path):
        """[TRIVIAL] parallel and serial sweeps agree."""
        cfg = short_config(t_end=0.005)
        sweep([-0.25, 0.25], cfg, tmp_path / "s", workers=1)
        sweep([-0.25, 0.25], cfg, tmp_path / "p", workers=2)
        assert (tmp_path / "s" / "decay_combined.csv").read_bytes() == (tmp_path / "p" / "decay_combined.csv").read_bytes()


class TestMain:
    def write(self, tmp_path, cfg):
        return str(save_config(cfg, tmp_path / "run.json"))

    def test_simulate(self, tmp_path):
        """[TRIVIAL] simulate via main."""
        path = self.write(tmp_path, short_config(t_end=0.005))
        assert main(["simulate", "--config", path, "--out", str(tmp_path / "o")]) == EXIT_OK
        assert (tmp_path / "o" / "trajectory.csv").exists()

    def test_config_errors(self, tmp_path):
        """[TRIVIAL] configuration errors map to exit code 2."""
        assert main(["simulate", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG
        (tmp_path / "bad.json").write_text('{"model": {"beta": 0.0}, "oops": 1}')
        assert main(["simulate", "--config", str(tmp_path / "bad.json")]) == EXIT_CONFIG
        (tmp_path / "junk.json").write_text("{")
        assert main(["verify", "--config", str(tmp_path / "junk.json")]) == EXIT_CONFIG

    def test_extended_beta_flag(self, tmp_path):
        """[TRIVIAL] extended beta only with the flag."""
        cfg = preset_section4(0.75, True, t_end=0.002, snapshot_times=())
        data = config_to_dict(cfg)
        data["model"]["allow_extended_beta"] = False
        path = tmp_path / "ext.json"
        path.write_text(json.dumps(data))
        assert main(["simulate", "--config", str(path), "--out", str(tmp_path / "x")]) == EXIT_CONFIG
        assert main(["simulate", "--config", str(path), "--out", str(tmp_path / "y"), "--allow-extended-beta"]) == EXIT_OK

    def test_sweep_cli(self, tmp_path):
        """[TRIVIAL] sweep via main with its exit codes."""
        path = self.write(tmp_path, short_config(t_end=0.002))
        assert main(["sweep", "--betas=-0.25,0.25", "--config", path, "--out", str(tmp_path / "s")]) == EXIT_OK
        assert main(["sweep", "--betas", "", "--config", path, "--out", str(tmp_path / "e")]) == EXIT_CONFIG
        assert main(["sweep", "--betas=-0.75,0.75", "--config", path, "--out", str(tmp_path / "f")]) == EXIT_CONFIG
        assert main(["sweep", "--betas=-0.75,0.75", "--config", path, "--out", str(tmp_path / "g"), "--allow-extended-beta"]) == EXIT_OK

    def test_simulate_abort(self, tmp_path):
        """[TRIVIAL] solver abort maps to exit code 3."""
        cfg = preset_section4(0.25, t_end=0.01, newton_tol=1e-300, newton_max_iters=1, dt_min=1e-4)
        assert main(["simulate", "--config", self.write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == EXIT_ABORT

    def test_region_scan(self, tmp_path):
        """[DERIVED] region-scan CLI output contains the hand-computed rows."""
        out = tmp_path / "scan.csv"
        assert main(["region-scan", "--out", str(out)]) == EXIT_OK
        lines = out.read_text().splitlines()
        assert len(lines) == 1 + 100 * 2001
        assert "0.0,5.0,true,11.0,229.0" in lines
        assert "0.0,1.0,false,7.0,-39.0" in lines
        assert main(["region-scan", "--b-step", "0.3", "--out", str(out)]) == EXIT_CONFIG

    def test_verify(self, tmp_path, capsys):
        """[TRIVIAL] verify prints passing checks."""
        path = self.write(tmp_path, short_config(t_end=0.01))
        assert main(["verify", "--config", path]) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines and all(line.startswith("PASS") for line in lines)
        names = {line.split()[1].rstrip(":") for line in lines}
        assert {"jacobian_fd", "positivity", "mass_balance", "uv_consistency"} <= names


def test_verify_reports_failure():
    """[TRIVIAL] verify reports an aborted run as a failed check."""
    # an unreachable tolerance makes the run abort, which verify reports as a failed check
    cfg = preset_section4(0.25, newton_tol=1e-300, newton_max_iters=1, dt_min=1e-4)
    checks = verify(cfg, 0.01)
    assert ("run_completes", False) in [(name, ok) for name, ok, _ in checks]
    assert EXIT_VERIFY == 1
