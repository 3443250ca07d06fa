import pytest
from hypothesis import given, strategies as st

from chargesim.controller import AddressMapper
from chargesim.dram import DramGeometry
from chargesim.errors import ConfigError, InputError, TraceParseError
from chargesim.traces import (GENERATORS, TraceRecord, TraceSource, WorkloadSpec,
                              gen_synthetic, instruction_count, parse_trace, random_mix,
                              read_trace, serialize_trace, write_trace)

G = DramGeometry()
MAPPER = AddressMapper(G)

records = st.lists(st.builds(TraceRecord, st.integers(0, 10**6), st.sampled_from("RW"),
                             st.integers(0, G.capacity_bytes - 1)), max_size=50)


def rows_of(trace):
    return [MAPPER.map(r.address)[:4] for r in trace]


class TestParse:
    def test_read_line(self):
        assert parse_trace(["12 R 0x3fc0"]) == [TraceRecord(12, "R", 0x3FC0)]  # [TRIVIAL]

    def test_write_line(self):
        assert parse_trace(["0 W 0x0"]) == [TraceRecord(0, "W", 0)]

    def test_comments_and_blank_lines_skipped(self):
        assert parse_trace(["# header", "", "1 R 0x40", "  # note", "2 W 0x80"]) == [
            TraceRecord(1, "R", 0x40), TraceRecord(2, "W", 0x80)]

    def test_empty_is_valid(self):
        assert parse_trace([]) == []

    @pytest.mark.parametrize("line", ["1 R", "x R 0x10", "-1 R 0x10", "1 X 0x10",
                                      "1 R 10", "1 R 0xzz", "1 R 0x1 extra"])
    def test_malformed_line_reports_line_number(self, line):
        with pytest.raises(TraceParseError) as exc:
            parse_trace(["1 R 0x0", "# c", line])
        assert exc.value.lineno == 3
        assert "line 3" in str(exc.value)

    @given(records)
    def test_round_trip(self, recs):
        assert parse_trace(serialize_trace(recs).splitlines()) == recs

    def test_file_round_trip_and_format(self, tmp_path):
        recs = [TraceRecord(3, "R", 0x1000), TraceRecord(0, "W", 0xABC0)]
        path = tmp_path / "t.trace"
        write_trace(path, recs)
        assert path.read_bytes() == b"3 R 0x1000\n0 W 0xabc0\n"  # [TRIVIAL]
        assert read_trace(path) == recs

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputError):
            read_trace(tmp_path / "nope")

    def test_binary_file(self, tmp_path):
        path = tmp_path / "bin"
        path.write_bytes(b"\xff\xfe\x00")
        with pytest.raises(TraceParseError):
            read_trace(path)

    def test_instruction_count(self):
        assert instruction_count([TraceRecord(3, "R", 0), TraceRecord(5, "W", 0)]) == 10  # [DERIVED]


class TestGenerators:
    @pytest.mark.parametrize("kind", GENERATORS)
    def test_deterministic_and_sized(self, kind):
        a = gen_synthetic(kind, {"length": 500}, seed=3)
        assert a == gen_synthetic(kind, {"length": 500}, seed=3)
        assert len(a) == 500  # [TRIVIAL]
        assert all(0 <= r.address < G.capacity_bytes for r in a)

    @pytest.mark.parametrize("kind", ("random_uniform", "row_reuse", "bank_conflict"))
    def test_seed_matters(self, kind):
        assert gen_synthetic(kind, {"length": 200}, seed=1) != gen_synthetic(kind, {"length": 200}, seed=2)

    def test_stream_walks_rows_in_order(self):
        t = gen_synthetic("stream", {"length": 256, "bubbles": 0})
        assert [r.address for r in t] == [64 * i for i in range(256)]  # [DERIVED]

    def test_bank_conflict_alternates_rows_in_one_bank(self):
        t = gen_synthetic("bank_conflict", {"length": 100, "conflict_rows": 2, "bank": 5,
                                            "row_base": 10})
        locs = rows_of(t)
        assert {l[2] for l in locs} == {5}
        assert [l[3] for l in locs] == [10 + i % 2 for i in range(100)]  # [DERIVED]

    def test_row_reuse_p1_w1_revisits_prior_row(self):
        t = gen_synthetic("row_reuse", {"length": 300, "p": 1.0, "window": 1})
        locs = rows_of(t)
        assert all(loc == locs[0] for loc in locs[1:])

    def test_row_reuse_p0_is_random(self):
        t = gen_synthetic("row_reuse", {"length": 300, "p": 0.0, "rows": 65536})
        assert len(set(rows_of(t))) > 290

    def test_rows_confined_to_region(self):
        t = gen_synthetic("random_uniform", {"length": 1000, "row_base": 4096, "rows": 16})
        assert all(4096 <= l[3] < 4112 for l in rows_of(t))  # [DERIVED]

    def test_write_ratio(self):
        t = gen_synthetic("random_uniform", {"length": 2000, "write_ratio": 0.25})
        frac = sum(r.is_write for r in t) / len(t)
        assert 0.2 < frac < 0.3

    def test_bubbles_mean(self):
        t = gen_synthetic("stream", {"length": 4000, "bubbles": 10})
        assert 9.0 < sum(r.bubble_count for r in t) / len(t) < 11.0

    def test_burst_stays_in_row(self):
        t = gen_synthetic("random_uniform", {"length": 400, "burst": 4})
        locs = rows_of(t)
        assert all(locs[i] == locs[i + 1] == locs[i + 2] == locs[i + 3]
                   for i in range(0, 400, 4))

    @pytest.mark.parametrize("params", [{"p": 1.5}, {"p": -0.1}, {"length": -1},
                                        {"rows": 0}, {"nonsense": 1}, {"bank": 8},
                                        {"row_base": 65536}])
    def test_invalid_params(self, params):
        with pytest.raises(ConfigError):
            gen_synthetic("row_reuse", params)

    def test_all_problems_reported(self):
        with pytest.raises(ConfigError) as exc:
            gen_synthetic("row_reuse", {"p": 2.0, "write_ratio": -1, "length": -5})
        assert len(exc.value.problems) == 3

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            gen_synthetic("zipf")


class TestSources:
    def test_parse_generator_spec(self):
        src = TraceSource.parse("row_reuse:length=10,p=0.5")
        assert src.kind == "row_reuse" and dict(src.params) == {"length": 10, "p": 0.5}  # [TRIVIAL]
        assert TraceSource.parse(src.to_spec()) == src

    def test_parse_file_spec(self):
        assert TraceSource.parse("file:/x/y.trace").path == "/x/y.trace"

    @pytest.mark.parametrize("spec", ["bogus", "row_reuse:length", "row_reuse:p"])
    def test_bad_specs(self, spec):
        with pytest.raises(ConfigError):
            TraceSource.parse(spec)

    def test_cores_get_disjoint_rows(self):
        spec = WorkloadSpec(traces=("random_uniform:length=300,rows=64",) * 3)
        traces = spec.load(1, G)
        row_sets = [{l[3] for l in rows_of(t)} for t in traces]
        for i in range(3):
            assert all(64 * i <= r < 64 * (i + 1) for r in row_sets[i])  # [DERIVED]

    def test_seed_determines_bundle(self):
        spec = WorkloadSpec(traces=("row_reuse:length=100",) * 2)
        assert spec.load(5, G) == spec.load(5, G)
        assert spec.load(5, G) != spec.load(6, G)

    def test_workload_problems(self, tmp_path):
        spec = WorkloadSpec(traces=("row_reuse", f"file:{tmp_path}/missing"), quotas=(1,))
        assert len(spec.problems()) == 2

    def test_random_mix_deterministic(self):
        cat = ["a", "b", "c", "d"]
        assert random_mix(cat, 8, 7) == random_mix(cat, 8, 7)
        assert set(random_mix(cat, 8, 7)) <= set(cat)
