import random

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from przi import rqa
from przi.rqa import (LineDistribution, build_rp, downsample, export_rp, phase_space_diameter,
                      read_pgm, read_trajectory, recurrence_radius, trapping_time,
                      vertical_line_distribution, write_trajectory)

SEQ = "ABCDAAABCDEFE"


def symbol_traj(seq):
    # distinct symbols sit on the axes of R^26, mutual distance sqrt(2)
    return np.eye(26)[[ord(c) - 65 for c in seq]]


def naive_runs(cells):
    out = {}
    n0, n1 = cells.shape
    for c in range(n0):
        run = 0
        for r in range(n1 + 1):
            if r < n1 and cells[c][r]:
                run += 1
            elif run:
                out[run] = out.get(run, 0) + 1
                run = 0
    return out


def naive_tt(cells, v_min=2):
    runs = naive_runs(cells)
    num = sum(v * c for v, c in runs.items() if v >= v_min)
    den = sum(c for v, c in runs.items() if v >= v_min)
    return num / den if den else None


class TestSymbolSequenceExample:
    def setup_method(self):
        self.rp = build_rp(symbol_traj(SEQ), 0.5)

    def test_shaded_cells(self):
        expected = {(c, r) for c in range(13) for r in range(13) if SEQ[c] == SEQ[r]}
        got = {tuple(x) for x in np.argwhere(self.rp.cells)}
        assert got == expected

    def test_vertical_line(self):
        col0 = self.rp.cells[0]
        assert col0[4] and col0[5] and col0[6] and not col0[7]

    def test_diagonal_line(self):
        assert all(self.rp.cells[i, 6 + i] for i in range(4))
        assert not self.rp.cells[4, 10]

    def test_line_distribution(self):
        d = vertical_line_distribution(self.rp)
        assert d.counts == naive_runs(self.rp.cells)
        # columns 0, 4, 5, 6 (state A) each hold a run of three
        assert d.counts[3] == 4


class TestBuild:
    def test_constant_fully_shaded(self):
        rp = build_rp(np.zeros((10, 3)), 0.1)
        assert rp.cells.all()
        assert vertical_line_distribution(rp).counts == {10: 10}

    def test_strict_inequality(self):
        rp = build_rp([[0.0], [0.5]], 0.5)
        assert not rp.cells[0, 1]

    def test_errors(self):
        with pytest.raises(ValueError):
            build_rp([[0.0, 1.0], [0.0]], 0.1)
        with pytest.raises(ValueError):
            build_rp([[0.0]], 0.1)
        with pytest.raises(ValueError):
            build_rp([[0.0], [1.0]], 0.0)

    def test_blocked_equals_single_pass(self):
        x = np.random.default_rng(0).uniform(-1, 1, (150, 5))
        assert np.array_equal(build_rp(x, 1.2, block=16).cells, build_rp(x, 1.2, block=4096).cells)

    @given(st.integers(0, 2**32), st.integers(2, 40), st.floats(0.05, 2.0))
    def test_symmetric_with_loi(self, seed, n, eps):
        steps = np.random.default_rng(seed).normal(0, 0.05, (n, 60))
        walk = np.clip(np.cumsum(steps, axis=0), -1, 1)
        c = build_rp(walk, eps).cells
        assert np.array_equal(c, c.T) and c.diagonal().all()


class TestTrappingTime:
    def test_formula(self):
        assert trapping_time(LineDistribution({2: 2, 4: 1})) == pytest.approx(8 / 3)

    def test_single_line(self):
        assert trapping_time(LineDistribution({1: 5, 3: 1})) == 3

    def test_undefined(self):
        assert trapping_time(LineDistribution({1: 9})) is None

    def test_only_loi(self):
        rp = build_rp(np.eye(8), 0.5)
        d = vertical_line_distribution(rp)
        assert d.counts == {1: 8} and trapping_time(d) is None

    def test_random_matrices_vs_oracle(self):
        rng = np.random.default_rng(123)
        for _ in range(1000):
            n = int(rng.integers(1, 65))
            m = rng.random((n, n)) < rng.uniform(0.05, 0.95)
            d = vertical_line_distribution(m)
            assert d.counts == naive_runs(m)
            assert trapping_time(d) == naive_tt(m)

    @given(arrays(bool, st.tuples(st.integers(1, 30), st.integers(1, 30))), st.integers(1, 4))
    def test_oracle_property(self, m, v_min):
        d = vertical_line_distribution(m, v_min)
        assert trapping_time(d) == naive_tt(m, v_min)


class TestRadius:
    def test_sixty_dimensional_radius_and_diameter(self):
        assert round(recurrence_radius(60, 0.05), 3) == 0.387
        assert round(phase_space_diameter(60), 3) == 15.492


class TestExport:
    def test_pgm_roundtrip(self, tmp_path):
        rp = build_rp(symbol_traj(SEQ), 0.5)
        paths = export_rp(rp, tmp_path)
        assert np.array_equal(read_pgm(paths["pgm"]), rp.cells)
        header = paths["pgm"].read_bytes()[:13]
        assert header.startswith(b"P5\n13 13\n255\n")

    def test_origin_lower_left(self, tmp_path):
        cells = np.zeros((3, 3), bool)
        cells[0, 0] = True
        rqa.write_pgm(tmp_path / "x.pgm", cells)
        raw = (tmp_path / "x.pgm").read_bytes()[-9:]
        assert raw[6] == 0 and raw.count(0) == 1  # bottom-left pixel

    def test_downsample_sizes(self):
        assert downsample(np.zeros((168, 168), bool), 1).shape == (168, 168)
        assert downsample(np.zeros((100, 100), bool), 25).shape == (4, 4)
        assert downsample(np.zeros((101, 101), bool), 25).shape == (5, 5)

    def test_downsample_max_pool(self):
        m = np.zeros((4, 4), bool)
        m[3, 0] = True
        assert downsample(m, 2).tolist() == [[False, False], [True, False]]

    def test_empty_rp_is_loi(self, tmp_path):
        rp = build_rp(np.eye(5) * 10, 0.1)
        export_rp(rp, tmp_path)
        assert np.array_equal(read_pgm(tmp_path / "rp.pgm"), np.eye(5, dtype=bool))
        rows = (tmp_path / "rp_cells.csv").read_text().splitlines()
        assert rows == ["c,r"] + [f"{i},{i}" for i in range(5)]

    def test_bad_factor(self):
        with pytest.raises(ValueError):
            downsample(np.zeros((2, 2), bool), 0)


class TestTrajectoryIO:
    def test_roundtrip(self, tmp_path):
        x = np.random.default_rng(1).uniform(-1, 1, (5, 4))
        write_trajectory(tmp_path / "t.csv", range(5), x)
        t, y = read_trajectory(tmp_path / "t.csv")
        assert list(t) == [0, 1, 2, 3, 4] and np.allclose(x, y, atol=1e-6)

    def test_ragged_rejected(self, tmp_path):
        (tmp_path / "t.csv").write_text("time_hours,s_0,s_1\n0,0.1,0.2\n1,0.3\n")
        with pytest.raises(ValueError):
            read_trajectory(tmp_path / "t.csv")

    def test_out_of_range_rejected(self, tmp_path):
        (tmp_path / "t.csv").write_text("time_hours,s_0\n0,1.5\n1,0\n")
        with pytest.raises(ValueError):
            read_trajectory(tmp_path / "t.csv")

    def test_stats(self, tmp_path):
        rp, dist, st_ = rqa.analyse_trajectory(symbol_traj(SEQ), 0.5)
        rqa.write_stats(tmp_path / "s.txt", st_)
        back = rqa.read_stats(tmp_path / "s.txt")
        assert float(back["trapping_time"]) == pytest.approx(trapping_time(dist))
        assert back["n"] == "13"
