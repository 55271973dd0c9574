import numpy as np
import pytest

from mycelogic import experiments, rcnet, spikegates
from mycelogic.substrate import GridTemplate, synthesize_colony


class TestPlaceElectrodes:
    def test_deterministic_and_on_conductive_cells(self):
        t = synthesize_colony(2, 64, 64, 0.08, 600, initial_tips=4)
        a = experiments.place_electrodes(t, 8)
        b = experiments.place_electrodes(t, 8)
        assert [e.center for e in a] == [e.center for e in b]
        for e in a:
            assert t.mask[e.center]

    def test_farthest_point_spread(self):
        t = GridTemplate(32, 32, np.ones((32, 32), dtype=bool))
        els = experiments.place_electrodes(t, 5)
        centers = np.array([e.center for e in els], dtype=float)
        # pairwise separation stays macroscopic under FPS
        d = np.linalg.norm(centers[:, None] - centers[None, :], axis=2)
        np.fill_diagonal(d, np.inf)
        assert d.min() > 5.0

    def test_placement_radius_restricts(self):
        t = GridTemplate(64, 64, np.ones((64, 64), dtype=bool))
        els = experiments.place_electrodes(t, 6, placement_radius=10.0)
        centroid = np.array([31.5, 31.5])
        for e in els:
            assert np.linalg.norm(np.array(e.center) - centroid) <= 10.0 + 1e-9

    def test_too_few_candidates(self):
        mask = np.zeros((16, 16), dtype=bool)
        mask[8, 8] = True
        mask[8, 9] = True
        with pytest.raises(ValueError):
            experiments.place_electrodes(GridTemplate(16, 16, mask), 5)


class TestSpikeCensusExperiment:
    def test_single_small_colony_runs_and_merges(self):
        cfg = experiments.SpikeCensusConfig(
            colonies=2,
            width=64,
            height=64,
            steps=900,
            electrodes=6,
            pairs=1,
            iterations=30_000,
            placement_radius=20.0,
            seed=0,
        )
        census = experiments.run_spike_census(cfg)
        counts = census.counts()
        assert sum(counts.values()) > 0
        # per-electrode rows stay consistent after the merge
        for row in census.per_electrode.values():
            assert all(v >= 0 for v in row.values())

    def test_threaded_merge_equals_sequential(self):
        cfg = experiments.SpikeCensusConfig(
            colonies=2,
            width=64,
            height=64,
            steps=900,
            electrodes=6,
            pairs=1,
            iterations=20_000,
            placement_radius=20.0,
            seed=3,
        )
        seq = experiments.run_spike_census(cfg)
        cfg.threads = 2
        par = experiments.run_spike_census(cfg)
        assert seq.per_electrode == par.per_electrode


class TestRcSweepExperiment:
    def test_threaded_equals_sequential(self):
        cfg = experiments.RcSweepConfig(
            mode="serial", ensemble=4, width=64, height=64, steps=700,
            theta_min=1e-3, theta_max=1e-2, theta_step=1e-3, seed=1,
        )
        graph = experiments.colony_graph_for(cfg)
        seq = experiments.run_rc_sweep(cfg, graph=graph)
        cfg.threads = 2
        par = experiments.run_rc_sweep(cfg, graph=graph)
        for cls in rcnet.GATE_CLASSES:
            assert np.array_equal(seq.counts[cls], par.counts[cls])

    def test_fit_report_structure(self):
        cfg = experiments.RcSweepConfig(
            mode="parallel", ensemble=3, width=64, height=64, steps=700,
            theta_min=1e-3, theta_max=2e-2, theta_step=1e-3, seed=2,
        )
        res = experiments.run_rc_sweep(cfg)
        report = experiments.sweep_fit_report(res)
        assert set(report) == set(rcnet.GATE_CLASSES)
        for entry in report.values():
            assert "total" in entry and "power_law" in entry and "poly1" in entry and "poly2" in entry

    def test_theta_grid_matches_published_sweep(self):
        grid = experiments.RcSweepConfig().theta_grid()
        assert len(grid) == 500
        assert grid[0] == pytest.approx(1e-4)
        assert grid[-1] == pytest.approx(5e-2)
        assert np.allclose(np.diff(grid), 1e-4)
