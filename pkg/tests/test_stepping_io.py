import csv

import numpy as np
import pytest

from netkin.io import export_csv, fmt, read_manifest, write_manifest, write_table
from netkin.stepping import Trajectory, integrate, snapshot_steps


class TestSnapshotSteps:
    def test_requested_times_kept(self):
        n, wanted = snapshot_steps(1.0, 0.1, [0.3, 0.0, 1.0])
        assert n == 10
        assert wanted == {0: 0.0, 3: 0.3, 10: 1.0}

    def test_default_is_endpoints(self):
        assert snapshot_steps(2.0, 0.5, None) == (4, {0: 0.0, 4: 2.0})

    @pytest.mark.parametrize("t_end, dt, snaps", [
        (1.0, 0.0, None), (0.0, 0.1, None), (1.05, 0.1, None),
        (1.0, 0.1, [0.25]), (1.0, 0.1, [1.5]), (1.0, 0.1, [-0.1]),
    ])
    def test_rejects(self, t_end, dt, snaps):
        with pytest.raises(ValueError):
            snapshot_steps(t_end, dt, snaps)


class TestIntegrate:
    def test_exponential(self):
        times, states = integrate(lambda t, y: -y, [1.0], 1.0, 0.01, [0.0, 0.5, 1.0])
        np.testing.assert_array_equal(times, [0.0, 0.5, 1.0])
        np.testing.assert_allclose(states[:, 0], np.exp(-times), rtol=1e-9)

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            integrate(lambda t, y: y, [1.0], 1.0, 0.1, method="leapfrog")

    def test_post_step_applied(self):
        _, states = integrate(lambda t, y: np.ones(1), [0.0], 1.0, 0.25,
                              post_step=lambda t, y: np.minimum(y, 0.5))
        assert states[-1, 0] == 0.5


class TestTrajectory:
    def test_times_must_increase(self):
        with pytest.raises(ValueError):
            Trajectory([0.0, 1.0, 1.0], np.zeros((3, 1)))

    def test_at(self):
        traj = Trajectory([0.0, 0.3], np.array([[1.0], [2.0]]))
        assert traj.at(0.1 * 3)[0] == 2.0
        with pytest.raises(KeyError):
            traj.at(0.2)


class TestExport:
    def _field(self, n_times=2):
        states = np.arange(n_times * 2 * 3, dtype=float).reshape(n_times, 2, 3) / 3
        return Trajectory(np.arange(n_times, dtype=float), states)

    def test_layout_and_precision(self, tmp_path):
        path = export_csv(self._field(), tmp_path / "out.csv")
        rows = list(csv.reader(open(path)))
        assert rows[0] == ["t", "site", "V_0", "V_1", "V_2"]
        assert len(rows) == 1 + 2 * 2
        assert float(rows[2][3]) == 4 / 3
        assert rows[2][1] == "1"

    def test_empty_trajectory_is_header_only(self, tmp_path):
        traj = Trajectory(np.zeros(0), np.zeros((0, 2, 3)), meta={"state_dim": 3})
        path = export_csv(traj, tmp_path / "empty.csv")
        assert path.read_text() == "t,site,V_0,V_1,V_2\n"

    def test_field_layout_with_names(self, tmp_path):
        traj = Trajectory([0.0], np.ones((1, 3, 2)), meta={"fields": ["u", "v", "r"],
                                                            "x": [0.25, 0.75]})
        rows = list(csv.reader(open(export_csv(traj, tmp_path / "sir.csv"))))
        assert rows[0] == ["t", "site", "x", "u", "v", "r"]
        assert rows[2][:3] == ["0", "1", "0.75"]

    def test_deterministic_bytes(self, tmp_path):
        a = export_csv(self._field(3), tmp_path / "a.csv").read_bytes()
        b = export_csv(self._field(3), tmp_path / "b.csv").read_bytes()
        assert a == b

    def test_fmt_round_trips(self):
        x = np.random.default_rng(0).random(100)
        assert all(float(fmt(v)) == v for v in x)
        assert fmt(np.int64(3)) == "3"

    def test_table_and_manifest(self, tmp_path):
        write_table(tmp_path / "t.csv", ["name", "value"], [["a", 0.1]])
        assert (tmp_path / "t.csv").read_text() == "name,value\na,0.10000000000000001\n"
        cfg = {"model": "norms", "norms": {"t_end": 1.0}}
        write_manifest(tmp_path / "m.json", cfg, 7, "0.1.0")
        assert read_manifest(tmp_path / "m.json") == cfg
