import numpy as np
import pytest

from rssloc.core import Heading, Position, rss_distance
from rssloc.filter import dead_reckon
from rssloc.sim import (
    AccessPoint,
    Environment,
    GroundTruth,
    ImuErrorModel,
    corrupt_steps,
    generate_path,
    grid_environment,
    path_loss_dbm,
    rectangle,
    simulate_rss,
)


class TestGeneratePath:
    def test_square_one_lap(self):
        truth = generate_path(rectangle(40.0, 20.0), laps=1, step_length=1.0)
        assert len(truth.positions) == 121  # 120 steps + start
        assert truth.positions[-1].distance_to(truth.positions[0]) < 1e-9

    def test_three_laps_triples_length(self):
        one = generate_path(rectangle(40.0, 20.0), laps=1, step_length=1.0)
        three = generate_path(rectangle(40.0, 20.0), laps=3, step_length=1.0)
        assert len(three.positions) - 1 == 3 * (len(one.positions) - 1)

    def test_heading_along_x_segment_is_zero(self):
        truth = generate_path(rectangle(40.0, 20.0), laps=1, step_length=1.0)
        assert truth.headings[1] == pytest.approx(0.0, abs=1e-12)
        assert truth.headings[0] == truth.headings[1]

    def test_degenerate_polyline_rejected(self):
        p = Position(0.0, 0.0)
        with pytest.raises(ValueError):
            generate_path([p, p], laps=1, step_length=1.0)

    def test_open_polyline_rejected(self):
        with pytest.raises(ValueError):
            generate_path([Position(0, 0), Position(1, 0)], laps=1, step_length=0.5)


class TestCorruptSteps:
    def test_zero_error_reproduces_truth(self):
        truth = generate_path(rectangle(40.0, 20.0), laps=2, step_length=0.7)
        steps = corrupt_steps(truth, ImuErrorModel(), seed=0)
        path, _ = dead_reckon(truth.positions[0], Heading(truth.headings[0]), steps)
        for got, want in zip(path, truth.positions):
            assert got.distance_to(want) < 1e-9

    def test_constant_bias_accumulates(self):
        line = tuple(Position(float(k), 0.0) for k in range(101))
        truth = GroundTruth(positions=line, headings=(0.0,) * 101)
        steps = corrupt_steps(truth, ImuErrorModel(heading_bias_per_step=0.002), seed=0)
        assert sum(s.delta_theta for s in steps) == pytest.approx(0.2, abs=1e-12)
        _, final_heading = dead_reckon(line[0], Heading(0.0), steps)
        assert final_heading.theta == pytest.approx(0.2, abs=1e-12)

    def test_fixed_seed_deterministic(self):
        truth = generate_path(rectangle(10.0, 10.0), laps=1, step_length=0.5)
        err = ImuErrorModel(step_noise_sigma=0.05, heading_noise_sigma=0.02)
        a = corrupt_steps(truth, err, seed=3)
        b = corrupt_steps(truth, err, seed=3)
        assert a == b

    def test_timestamps_at_fixed_cadence(self):
        truth = generate_path(rectangle(10.0, 10.0), laps=1, step_length=1.0)
        steps = corrupt_steps(truth, ImuErrorModel(), seed=0)
        assert [s.t for s in steps[:3]] == [0.5, 1.0, 1.5]


class TestSimulateRss:
    def ap(self, **kw):
        kw.setdefault("ap_id", "AP0")
        kw.setdefault("pos", Position(0.0, 0.0))
        kw.setdefault("shadowing_sigma", 0.0)
        return AccessPoint(**kw)

    def test_reference_distance_gives_tx_power(self):
        ap = self.ap(tx_power_dbm=-30.0)
        assert path_loss_dbm(ap, 1.0) == -30.0
        assert path_loss_dbm(ap, 0.2) == -30.0  # clamped below 1 m

    def test_path_loss_at_10m(self):
        ap = self.ap(tx_power_dbm=-30.0, path_loss_exponent=2.0)
        assert path_loss_dbm(ap, 10.0) == pytest.approx(-50.0)

    def test_weak_ap_omitted(self):
        line = tuple(Position(float(k), 0.0) for k in range(5))
        truth = GroundTruth(positions=line, headings=(0.0,) * 5)
        env = Environment(aps=(
            self.ap(ap_id="near", pos=Position(0.0, 1.0)),
            self.ap(ap_id="far", pos=Position(500.0, 0.0), detection_floor_dbm=-95.0),
        ))
        scans = simulate_rss(truth, env, scan_period=1.0, seed=0)
        for scan in scans:
            assert "near" in scan.readings
            assert "far" not in scan.readings

    def test_revisit_same_position_zero_distance(self):
        # 2 laps, scan cadence dividing the lap duration: scan i and i+60
        # fall at the same true position; zero shadowing -> distance 0
        truth = generate_path(rectangle(40.0, 20.0), laps=2, step_length=1.0)
        env = Environment(aps=tuple(
            self.ap(ap_id=f"AP{i}", pos=Position(10.0 * i, -3.0), detection_floor_dbm=-110.0)
            for i in range(4)
        ))
        scans = simulate_rss(truth, env, scan_period=1.0, seed=0)
        per_lap = 60  # 120 steps/lap at 0.5 s -> 60 s -> 60 scans
        for i in range(0, per_lap, 7):
            assert rss_distance(scans[i], scans[i + per_lap]) < 1e-9

    def test_scan_cadence_decoupled_from_steps(self):
        truth = generate_path(rectangle(40.0, 20.0), laps=1, step_length=1.0)
        scans = simulate_rss(truth, Environment(aps=(self.ap(),)), scan_period=1.3, seed=0)
        assert scans[0].t == pytest.approx(1.3)
        assert len(scans) == int(truth.times[-1] / 1.3)

    def test_invalid_scan_period(self):
        truth = generate_path(rectangle(10.0, 10.0), laps=1, step_length=1.0)
        with pytest.raises(ValueError):
            simulate_rss(truth, Environment(aps=()), scan_period=0.0, seed=0)


class TestEnvironments:
    def test_grid_environment_count_and_determinism(self):
        a = grid_environment(12, (-5.0, 45.0), (-5.0, 25.0), seed=1)
        b = grid_environment(12, (-5.0, 45.0), (-5.0, 25.0), seed=1)
        assert len(a.aps) == 12
        assert a == b
        assert len({ap.ap_id for ap in a.aps}) == 12

    def test_detection_floor_validation(self):
        with pytest.raises(ValueError):
            AccessPoint(ap_id="x", pos=Position(0, 0), detection_floor_dbm=-120.0)


class TestDriftMonotonicity:
    def test_terminal_error_nondecreasing_in_bias(self):
        biases = [0.0, 0.002, 0.004]
        mean_err = []
        truth = generate_path(rectangle(40.0, 20.0), laps=2, step_length=0.7)
        for bias in biases:
            errs = []
            for seed in range(5):
                err = ImuErrorModel(step_noise_sigma=0.03, heading_noise_sigma=0.01,
                                    heading_bias_per_step=bias)
                steps = corrupt_steps(truth, err, seed=seed)
                path, _ = dead_reckon(truth.positions[0], Heading(truth.headings[0]), steps)
                errs.append(path[-1].distance_to(truth.positions[-1]))
            mean_err.append(np.mean(errs))
        assert mean_err[0] <= mean_err[1] <= mean_err[2]
