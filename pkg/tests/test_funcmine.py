import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mycelogic import experiments, rcnet
from mycelogic.funcmine import (
    ALL_ONES,
    ChannelRecording,
    FunctionCensus,
    IncompleteRecordingError,
    RcFunctionSubstrate,
    SopExpression,
    StateSchedule,
    TruthTable16,
    boundaries_sidecar,
    census_functions,
    census_to_csv,
    extract_table,
    linear_band_builder,
    load_recordings,
    recordings_to_csv,
    sop,
    synth_driver,
    threshold_sweep,
    top_report,
)


def recording(volts_by_state, samples_per_state=4, dwell=1.0, cid=1):
    """One sample block per state with the given per-state voltage lists."""
    times, volts = [], []
    for s in range(16):
        vs = volts_by_state.get(s, [0.0]) if isinstance(volts_by_state, dict) else [volts_by_state[s]]
        for i, v in enumerate(np.resize(vs, samples_per_state)):
            times.append(s * dwell + (i + 0.5) * dwell / samples_per_state)
            volts.append(v)
    return ChannelRecording(
        channel_id=cid,
        times=np.asarray(times),
        volts=np.asarray(volts),
        boundaries=np.arange(17) * dwell,
    )


def table_of(predicate) -> int:
    value = 0
    for s in range(16):
        a, b, c, d = (s >> 3) & 1, (s >> 2) & 1, (s >> 1) & 1, s & 1
        if predicate(a, b, c, d):
            value |= 1 << s
    return value


class TestExtractTable:
    def test_all_zero_constant_false(self):
        rec = recording({s: [0.0] for s in range(16)})
        assert extract_table(rec, (-1.0, 1.0)).value == 0x0000

    def test_everywhere_excursion_constant_true(self):
        rec = recording({s: [10.0] for s in range(16)})
        assert extract_table(rec, (-1.0, 1.0)).value == 0xFFFF

    def test_select_a_from_constructed_trace(self):
        # excursions only in states with A=1: oracle by direct rule
        rec = recording({s: [5.0 if (s >> 3) & 1 else 0.0] for s in range(16)})
        expected = table_of(lambda a, b, c, d: a)
        assert extract_table(rec, (-1.0, 1.0)).value == expected

    def test_polarity_ignored(self):
        rec = recording({s: [-10.0 if s == 3 else 0.0] for s in range(16)})
        assert extract_table(rec, (-1.0, 1.0)).value == 1 << 3

    def test_band_boundary_is_inside(self):
        rec = recording({s: [1.0] for s in range(16)})
        assert extract_table(rec, (-1.0, 1.0)).value == 0x0000
        assert extract_table(rec, (-0.5, 0.999)).value == 0xFFFF

    def test_empty_state_errors(self):
        rec = recording({s: [0.0] for s in range(16)})
        rec.times = rec.times[4:]  # drop state 0 samples
        rec.volts = rec.volts[4:]
        with pytest.raises(IncompleteRecordingError, match="state 0"):
            extract_table(rec, (-1.0, 1.0))

    def test_bad_band(self):
        rec = recording({s: [0.0] for s in range(16)})
        with pytest.raises(ValueError):
            extract_table(rec, (1.0, -1.0))


class TestThresholdSweep:
    def test_paper_pipeline_arithmetic(self):
        # 14 repeats x 7 channels x 32 thresholds = 3136 tables
        assert 14 * 7 * 32 == 3136
        rng = np.random.default_rng(0)
        tables = []
        for rep in range(14):
            for ch in range(1, 8):
                rec = recording({s: list(rng.normal(0, 1, 4)) for s in range(16)}, cid=ch)
                tables.extend(threshold_sweep(rec, 32))
        assert len(tables) == 3136

    def test_single_table(self):
        rec = recording({s: [0.5] for s in range(16)})
        assert len(threshold_sweep(rec, 1)) == 1

    @given(st.integers(0, 2**32 - 1))
    def test_popcount_weakly_decreases_with_band(self, seed):
        rng = np.random.default_rng(seed)
        rec = recording({s: list(rng.normal(0, 1, 4)) for s in range(16)})
        tables = threshold_sweep(rec, 16)
        pops = [bin(t.value).count("1") for t in tables]
        assert all(a >= b for a, b in zip(pops, pops[1:]))

    def test_band_builder_spans_amplitude(self):
        rec = recording({s: [2.0 if s == 5 else 0.0] for s in range(16)})
        bands = linear_band_builder(rec, 32)
        assert bands[0][1] == pytest.approx(0.1)
        assert bands[-1][1] == pytest.approx(2.0)
        assert all(lo == -hi for lo, hi in bands)

    def test_threshold_indices_recorded(self):
        rec = recording({s: [0.5] for s in range(16)})
        tables = threshold_sweep(rec, 4)
        assert [t.threshold_index for t in tables] == [0, 1, 2, 3]


class TestSop:
    def test_constants(self):
        assert str(sop(0x0000)) == "0"
        assert str(sop(0xFFFF)) == "1"
        assert sop(0x0000).evaluate() == 0
        assert sop(0xFFFF).evaluate() == 0xFFFF

    def test_nand_form(self):
        nand = table_of(lambda a, b, c, d: not (a and b and c and d))
        expr = sop(nand)
        assert str(expr) == "A' + B' + C' + D'"
        assert expr.evaluate() == nand

    def test_and_form(self):
        andv = table_of(lambda a, b, c, d: a and b and c and d)
        expr = sop(andv)
        assert str(expr) == "ABCD"
        assert expr.evaluate() == andv

    def test_or_form(self):
        orv = table_of(lambda a, b, c, d: a or b or c or d)
        expr = sop(orv)
        assert str(expr) == "A + B + C + D"
        assert expr.evaluate() == orv

    def test_single_minterm_f6(self):
        v = table_of(lambda a, b, c, d: a and not b and c and d)
        assert str(sop(v)) == "AB'CD"

    def test_xor_like_table(self):
        v = table_of(lambda a, b, c, d: (a + b + c + d) % 2 == 1)
        expr = sop(v)
        assert expr.evaluate() == v
        assert len(expr.terms) == 8  # parity needs all 8 full minterms

    @given(st.integers(0, ALL_ONES))
    def test_roundtrip_random_tables(self, value):
        assert sop(value).evaluate() == value

    @given(st.integers(0, ALL_ONES))
    def test_cover_uses_prime_implicants_only(self, value):
        expr = sop(value)
        for mask, want in expr.terms:
            for s in range(16):
                if (s & mask) == want:
                    assert (value >> s) & 1, "term covers an off-set minterm"

    def test_accepts_table_object(self):
        t = TruthTable16(value=0x8000)
        assert str(sop(t)) == "ABCD"


class TestCensus:
    def test_copies_histogram(self):
        tables = [TruthTable16(value=0)] * 10
        c = census_functions(tables)
        assert c.histogram == {0: 10}
        assert c.unique_functions == 1
        assert c.total == 10

    def test_total_conservation(self):
        rng = np.random.default_rng(1)
        tables = [TruthTable16(value=int(v)) for v in rng.integers(0, 65536, 137)]
        c = census_functions(tables)
        assert c.total == 137

    def test_top_ranked_by_count_then_value(self):
        tables = [TruthTable16(value=v) for v in [5, 5, 5, 9, 9, 3]]
        top = census_functions(tables).top(2)
        assert top[0][0] == 5 and top[0][1] == 3
        assert top[1][0] == 9 and top[1][1] == 2

    def test_csv_format(self):
        c = FunctionCensus(histogram={0: 2, 32768: 1})
        text = census_to_csv(c)
        assert text.splitlines() == ["table_decimal,count", "0,2", "32768,1"]

    def test_top_report_carries_sop_strings(self):
        c = FunctionCensus(histogram={32768: 3, 32767: 5})
        rep = top_report(c, 2)
        assert rep["top"][0]["sop"] == "A' + B' + C' + D'"
        assert rep["top"][1]["sop"] == "ABCD"
        assert rep["unique_functions"] == 2


class TestSynthDriver:
    def _substrate(self, seed=0):
        cfg = experiments.RcSweepConfig(width=64, height=64, steps=700, seed=seed)
        graph = experiments.colony_graph_for(cfg)
        net = rcnet.build_rc(graph, "serial", seed=seed + 100, n_sources=4)
        return RcFunctionSubstrate(network=net, dt=1e-5)

    def test_rc_driver_shapes_and_determinism(self):
        sub = self._substrate()
        schedule = StateSchedule(dwell=1e-3)
        channels = sub.network.probes[:3]
        recs1 = synth_driver(sub, schedule, channels)
        recs2 = synth_driver(sub, schedule, channels)
        assert len(recs1) == 3
        for a, b in zip(recs1, recs2):
            assert np.array_equal(a.volts, b.volts)
            assert len(a.boundaries) == 17
            # every state interval holds samples
            assert all(len(ix) for ix in a.state_slices())

    def test_driver_requires_four_sources(self):
        cfg = experiments.RcSweepConfig(width=64, height=64, steps=700, seed=3)
        graph = experiments.colony_graph_for(cfg)
        net = rcnet.build_rc(graph, "serial", seed=9, n_sources=2)
        with pytest.raises(ValueError, match="4 sources"):
            RcFunctionSubstrate(network=net)

    def test_end_to_end_function_mining_counts(self):
        cfg = experiments.FunctionMiningConfig(
            repeats=2, channels=3, thresholds=5, dwell=1e-3, width=64, height=64, steps=700, seed=1
        )
        tables, census = experiments.run_function_mining(cfg)
        assert len(tables) == 2 * 3 * 5
        assert census.total == len(tables)

    def test_fhn_substrate_driver(self):
        import numpy as np

        from mycelogic.excitable import FhnParams
        from mycelogic.funcmine import FhnFunctionSubstrate
        from mycelogic.substrate import Electrode, GridTemplate

        n = 24
        template = GridTemplate(n, n, np.ones((n, n), dtype=bool))
        inputs = [Electrode((6, 6)), Electrode((6, 18)), Electrode((18, 6)), Electrode((18, 18))]
        sub = FhnFunctionSubstrate(template=template, params=FhnParams(), inputs=inputs)
        schedule = StateSchedule(dwell=50)  # iterations per state here
        channels = [Electrode((12, 12)), Electrode((12, 16))]
        recs = synth_driver(sub, schedule, channels)
        assert len(recs) == 2
        for rec in recs:
            assert len(rec.boundaries) == 17
            assert rec.boundaries[-1] == 16 * 50
            assert all(len(ix) for ix in rec.state_slices())
        # the driver is deterministic and tables extract cleanly
        t = extract_table(recs[0], (-0.05, 0.05))
        assert 0 <= t.value <= ALL_ONES

    def test_unsupported_substrate_type(self):
        with pytest.raises(TypeError):
            synth_driver(object(), StateSchedule(), [])


class TestRecordingIO:
    def test_roundtrip(self):
        rng = np.random.default_rng(5)
        recs = [
            recording({s: list(rng.normal(0, 1, 4)) for s in range(16)}, cid=cid)
            for cid in (1, 2, 3)
        ]
        text = recordings_to_csv(recs)
        sidecar = boundaries_sidecar(recs)
        back = load_recordings(text, sidecar)
        assert len(back) == 3
        for a, b in zip(recs, back):
            assert a.channel_id == b.channel_id
            assert np.allclose(a.volts, b.volts)
            assert np.allclose(a.times, b.times)
            # identical tables through the full extraction
            assert extract_table(a, (-0.5, 0.5)).value == extract_table(b, (-0.5, 0.5)).value

    def test_header_validation(self):
        with pytest.raises(ValueError):
            load_recordings("wrong,ch1\n0,1\n", {"boundaries": list(range(17))})

    def test_schedule_validation(self):
        with pytest.raises(ValueError):
            StateSchedule(dwell=0.0)
        s = StateSchedule()
        assert s.state_bits(0b1010) == (1, 0, 1, 0)
        assert s.level(1) == 5.0 and s.level(0) == -5.0
