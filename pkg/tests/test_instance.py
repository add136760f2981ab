import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import blindq as bq
from blindq.errors import EmptyInstanceError, ParameterError, ParseError


def random_instance(rng, n):
    gaps = rng.exponential(1.0, n)
    rel = np.cumsum(gaps) - gaps[0]
    return bq.Instance(rel, rng.uniform(0.1, 2.5, n))


class TestConstruction:
    def test_invariants_enforced(self):
        with pytest.raises(ParameterError):
            bq.Instance([0.0, 0.0], [1.0, 1.0])       # duplicate release
        with pytest.raises(ParameterError):
            bq.Instance([1.0, 0.5], [1.0, 1.0])       # decreasing
        with pytest.raises(ParameterError):
            bq.Instance([-1.0, 0.5], [1.0, 1.0])      # negative first release
        with pytest.raises(ParameterError):
            bq.Instance([0.0, 1.0], [1.0, 0.0])       # zero size

    def test_jobs_view(self):
        inst = bq.Instance([0.0, 1.0], [3.0, 1.0])
        assert inst.jobs == [bq.Job(1, 0.0, 3.0), bq.Job(2, 1.0, 1.0)]

    def test_immutability(self):
        inst = bq.Instance([0.0], [1.0])
        with pytest.raises(AttributeError):
            inst.releases = None
        with pytest.raises(ValueError):
            inst.sizes[0] = 2.0


class TestGenerate:
    def test_deterministic_pattern(self):
        inst = bq.generate(bq.deterministic(2.0), bq.deterministic(1.0), 3, seed=0)
        assert np.array_equal(inst.releases, [0.0, 2.0, 4.0])
        assert np.array_equal(inst.sizes, [1.0, 1.0, 1.0])
        cycles = bq.busy_periods(inst)
        assert [c.N for c in cycles] == [1, 1, 1]
        assert [c.P for c in cycles] == [1.0, 1.0, 1.0]
        assert [c.I for c in cycles] == [None, 1.0, 1.0]

    def test_zero_cycles(self):
        inst = bq.generate(bq.exponential(1.0), bq.exponential(2.0), 0, seed=0)
        assert len(inst) == 0

    def test_exact_cycle_count(self):
        inst = bq.generate(bq.exponential_mean(1.25), bq.exponential_mean(1.0),
                           500, seed=3)
        assert len(bq.busy_periods(inst)) == 500

    def test_unstable_propagates(self):
        with pytest.raises(bq.UnstableSystemError):
            bq.generate(bq.exponential(1.0), bq.exponential(1.0), 10, seed=0)

    def test_determinism(self):
        a = bq.generate(bq.exponential_mean(2.0), bq.exponential_mean(1.0), 100, seed=9)
        b = bq.generate(bq.exponential_mean(2.0), bq.exponential_mean(1.0), 100, seed=9)
        assert a == b

    def test_empirical_load(self):
        # busy fraction sum(P)/(sum(P)+sum(I)) -> rho within 3 SE at 1e4 cycles
        inst = bq.generate(bq.exponential_mean(1.25), bq.exponential_mean(1.0),
                           10_000, seed=14)
        cycles = bq.busy_periods(inst)
        p = np.array([c.P for c in cycles[1:]])
        tot = p + np.array([c.I for c in cycles[1:]])
        frac = p.sum() / tot.sum()
        resid = p - frac * tot
        se = math.sqrt(float(resid @ resid) / (len(p) - 1)) / (tot.mean() * math.sqrt(len(p)))
        assert abs(frac - 0.8) <= 3 * se


class TestBusyPeriods:
    def test_two_job_cycle(self):
        cycles = bq.busy_periods(bq.Instance([0.0, 1.0], [3.0, 1.0]))
        assert cycles == [bq.CycleRecord(1, 2, 2, 4.0, None, 0.0, 4.0)]

    def test_empty(self):
        assert bq.busy_periods(bq.Instance([], [])) == []

    def test_cycle_invariants_random(self):
        rng = np.random.default_rng(5)
        inst = random_instance(rng, 500)
        cycles = bq.busy_periods(inst)
        assert cycles[0].I is None
        assert sum(c.N for c in cycles) == len(inst)
        for c in cycles:
            assert c.P == pytest.approx(c.end - c.start, abs=0)
            assert c.N == c.last_job_id - c.first_job_id + 1
            work = float(inst.sizes[c.first_job_id - 1:c.last_job_id].sum())
            assert abs(work - c.P) < 1e-9
            if c.I is not None:
                assert c.I >= 0


class TestScaling:
    def test_exponent_examples(self):
        assert bq.scaling_exponent(bq.Instance([0.0], [0.3])) == -3
        assert 8 * 0.3 >= 2
        assert bq.scaling_exponent(bq.Instance([0.0], [2.0])) == 0
        assert bq.scaling_exponent(bq.Instance([0.0], [4.0])) == 1

    def test_exponent_guarantee_random(self):
        rng = np.random.default_rng(8)
        for _ in range(200):
            bmin = float(rng.uniform(0.001, 8.0))
            g = bq.scaling_exponent(bq.Instance([0.0], [bmin]))
            assert 2.0 ** (-g) * bmin >= 2.0

    def test_empty_instance(self):
        with pytest.raises(EmptyInstanceError):
            bq.scaling_exponent(bq.Instance([], []))

    def test_scale_identity(self):
        inst = bq.Instance([0.0, 0.5], [0.3, 0.6])
        assert bq.scale(inst, 1.0) == inst

    def test_scale_elementwise(self):
        inst = bq.scale(bq.Instance([0.0, 0.5], [0.3, 0.6]), 8.0)
        assert np.array_equal(inst.releases, [0.0, 4.0])
        assert np.array_equal(inst.sizes, [2.4, 4.8])

    def test_scale_roundtrip_power_of_two(self):
        inst = bq.Instance([0.0, 0.7, 1.9], [1.3, 0.4, 2.2])
        assert bq.scale(bq.scale(inst, 2.0), 0.5) == inst

    @pytest.mark.parametrize("factor", [0.5, 2.0, 3.7])
    def test_busy_periods_invariant_under_scale(self, factor):
        rng = np.random.default_rng(21)
        inst = random_instance(rng, 300)
        before = bq.busy_periods(inst)
        after = bq.busy_periods(bq.scale(inst, factor))
        assert [c.N for c in before] == [c.N for c in after]
        for b, a in zip(before, after):
            assert a.P == pytest.approx(b.P * factor, rel=1e-12)
            if b.I is not None:
                assert a.I == pytest.approx(b.I * factor, rel=1e-12)


class TestFileFormat:
    def test_parse_basic(self):
        inst = bq.parse(io.StringIO("# blindq-instance v1\n0 3\n1 1\n"))
        assert inst == bq.Instance([0.0, 1.0], [3.0, 1.0])

    def test_round_trip_exact(self):
        inst = bq.Instance([0.0, 0.1, 2.5000000001], [3.0, 1e-7, 2.0])
        again = bq.parse(io.StringIO(bq.serialize(inst)))
        assert again == inst

    def test_serialize_normalizes(self):
        text = "# blindq-instance v1\n0.50 1.0\n2 2.50\n"
        inst = bq.parse(io.StringIO(text))
        normalized = bq.serialize(inst)
        assert normalized == bq.serialize(bq.parse(io.StringIO(normalized)))

    def test_missing_header(self):
        with pytest.raises(ParseError) as err:
            bq.parse(io.StringIO("0 3\n1 1\n"))
        assert err.value.line == 1

    def test_duplicate_release(self):
        with pytest.raises(ParseError) as err:
            bq.parse(io.StringIO("# blindq-instance v1\n0 3\n0 1\n"))
        assert err.value.line == 3

    def test_bad_size(self):
        with pytest.raises(ParseError) as err:
            bq.parse(io.StringIO("# blindq-instance v1\n0 -3\n"))
        assert err.value.line == 2

    def test_malformed_line(self):
        with pytest.raises(ParseError) as err:
            bq.parse(io.StringIO("# blindq-instance v1\n0 3 9\n"))
        assert err.value.line == 2

    def test_file_round_trip(self, tmp_path):
        inst = bq.generate(bq.exponential(1.0), bq.exponential(2.0), 20, seed=4)
        path = tmp_path / "inst.txt"
        bq.serialize(inst, path)
        assert bq.parse(path) == inst

    @given(st.lists(
        st.tuples(st.floats(0.001, 50.0), st.floats(1e-6, 100.0)),
        min_size=1, max_size=30))
    @settings(max_examples=60, deadline=None)
    def test_round_trip_property(self, pairs):
        rel = np.cumsum([g for g, _ in pairs]) - pairs[0][0]
        inst = bq.Instance(rel, [s for _, s in pairs])
        assert bq.parse(io.StringIO(bq.serialize(inst))) == inst


class TestCyclesCsv:
    def test_columns_and_blank_idle(self):
        inst = bq.Instance([0.0, 1.0, 6.0], [3.0, 1.0, 1.0])
        text = bq.cycles_to_csv(bq.busy_periods(inst))
        lines = text.strip().split("\n")
        assert lines[0] == "cycle_index,N,P,I,start,end"
        assert lines[1].split(",")[3] == ""     # first cycle has no idle record
        assert len(lines) == 3
