import numpy as np
import pytest

from steerkit.data import (
    DriveIndex,
    FlowParams,
    TrackSpec,
    WHEELBASE_M,
    generate_synthetic,
    load_index,
    make_sequences,
    parse_track,
    split,
)
from steerkit.errors import ContractError, ParseError

HEADER = "timestamp,camera,filename,angle,torque,speed"


def write_index(tmp_path, rows, name="index.csv", frames=True):
    lines = [HEADER] + rows
    path = tmp_path / name
    path.write_text("\n".join(lines) + "\n")
    if frames:
        names = {r.split(",")[2] for r in rows}
        for n in names:
            (tmp_path / n).write_bytes(b"P6\n8 8\n255\n" + b"\x80" * 192)
    return path


class TestLoadIndex:
    def test_empty_data_section_is_valid(self, tmp_path):
        path = write_index(tmp_path, [])
        index = load_index(path)
        assert len(index) == 0

    def test_camera_filter(self, tmp_path):
        rows = ["100,center,a.ppm,0.1,0.0,5.0",
                "100,left,a.ppm,0.1,0.0,5.0",
                "100,right,a.ppm,0.1,0.0,5.0"]
        path = write_index(tmp_path, rows)
        assert len(load_index(path, camera_filter="center")) == 1
        assert len(load_index(path, camera_filter=None)) == 3

    def test_unsorted_timestamps_sorted_count_preserved(self, tmp_path):
        rows = ["300,center,a.ppm,0.3,0.0,5.0",
                "100,center,a.ppm,0.1,0.0,5.0",
                "200,center,a.ppm,0.2,0.0,5.0"]
        index = load_index(write_index(tmp_path, rows))
        assert len(index) == 3
        assert [r.timestamp for r in index] == [100, 200, 300]
        assert [r.ordinal for r in index] == [0, 1, 2]

    def test_bad_number_reports_line(self, tmp_path):
        rows = ["100,center,a.ppm,0.1,0.0,5.0",
                "200,center,a.ppm,notanumber,0.0,5.0"]
        with pytest.raises(ParseError, match=":3"):
            load_index(write_index(tmp_path, rows))

    def test_missing_column_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("timestamp,camera,filename,angle\n")
        with pytest.raises(ParseError, match="header"):
            load_index(path)

    def test_missing_frame_rejected(self, tmp_path):
        path = write_index(tmp_path, ["100,center,gone.ppm,0.0,0.0,1.0"], frames=False)
        with pytest.raises(ParseError, match="gone.ppm"):
            load_index(path)


class TestMakeSequences:
    def _index(self, tmp_path, n):
        rows = [f"{i * 100},center,f{i}.ppm,{i * 0.01},0.0,5.0" for i in range(n)]
        return load_index(write_index(tmp_path, rows))

    def test_window_count_exact_fit(self, tmp_path):
        seqs = make_sequences(self._index(tmp_path, 5), seq_len=5, with_flow=False)
        assert len(seqs) == 1

    def test_window_count_arithmetic(self, tmp_path):
        seqs = make_sequences(self._index(tmp_path, 7), seq_len=5, stride=1, with_flow=False)
        assert len(seqs) == 3
        seqs = make_sequences(self._index(tmp_path, 10), seq_len=4, stride=2, with_flow=False)
        assert len(seqs) == (10 - 4) // 2 + 1

    def test_too_short_gives_zero_windows(self, tmp_path):
        seqs = make_sequences(self._index(tmp_path, 3), seq_len=5, with_flow=False)
        assert len(seqs) == 0

    def test_first_flow_is_zero_field(self, tmp_path):
        seqs = make_sequences(self._index(tmp_path, 4), seq_len=3, use_cache=False)
        sample = seqs[0]
        assert np.all(sample.flows[0].u == 0.0)
        assert np.all(sample.flows[0].v == 0.0)
        assert len(sample.flows) == len(sample.frames) == 3

    def test_windows_preserve_temporal_order(self, tmp_path):
        seqs = make_sequences(self._index(tmp_path, 6), seq_len=3, with_flow=False)
        for i in range(len(seqs)):
            ts = seqs[i].timestamps
            assert np.all(np.diff(ts) > 0)


class TestSplit:
    def _index(self, tmp_path, n):
        rows = [f"{i * 100},center,f{i}.ppm,0.0,0.0,5.0" for i in range(n)]
        return load_index(write_index(tmp_path, rows))

    def test_fraction(self, tmp_path):
        index = self._index(tmp_path, 100)
        train, val = split(index, 0.8)
        assert len(train) == 80 and len(val) == 20

    def test_union_is_original(self, tmp_path):
        index = self._index(tmp_path, 50)
        train, val = split(index, 0.7, seed=5)
        ordinals = sorted(r.ordinal for r in train) + sorted(r.ordinal for r in val)
        assert sorted(ordinals) == list(range(50))
        assert set(r.ordinal for r in train).isdisjoint(r.ordinal for r in val)

    def test_val_block_contiguous(self, tmp_path):
        index = self._index(tmp_path, 60)
        for seed in range(5):
            _, val = split(index, 0.75, seed=seed)
            ords = [r.ordinal for r in val]
            assert ords == list(range(ords[0], ords[0] + len(ords)))

    def test_no_window_straddles_the_cut(self, tmp_path):
        index = self._index(tmp_path, 40)
        train, val = split(index, 0.5, seed=3)
        for part in (train, val):
            seqs = make_sequences(part, seq_len=4, with_flow=False)
            for i in range(len(seqs)):
                ts = seqs[i].timestamps
                assert np.all(np.diff(ts) == 100)  # only truly adjacent rows

    def test_bad_fraction(self, tmp_path):
        index = self._index(tmp_path, 10)
        with pytest.raises(ContractError):
            split(index, 1.0)


class TestFlowCache:
    def test_cache_hit_bit_identical(self, tmp_path):
        track = parse_track("mixed", seed=1)
        csv = generate_synthetic(track, 6, tmp_path / "d")
        index = load_index(csv)
        params = FlowParams(levels=2, iters=20)
        cold = make_sequences(index, seq_len=3, flow_params=params, use_cache=True)
        first = cold[0]
        warm = make_sequences(index, seq_len=3, flow_params=params, use_cache=True)
        second = warm[0]
        for a, b in zip(first.flows[1:], second.flows[1:]):
            assert a.u.tobytes() == b.u.tobytes()
            assert a.v.tobytes() == b.v.tobytes()
        cache_dir = tmp_path / "d" / "flow_cache"
        assert len(list(cache_dir.iterdir())) == 2

    def test_cache_matches_fresh_compute(self, tmp_path):
        track = parse_track("slalom", seed=2)
        csv = generate_synthetic(track, 4, tmp_path / "d")
        index = load_index(csv)
        cached = make_sequences(index, seq_len=2, use_cache=True)[0]
        cached_again = make_sequences(index, seq_len=2, use_cache=True)[0]
        fresh = make_sequences(index, seq_len=2, use_cache=False)[0]
        assert cached_again.flows[1].u.tobytes() == fresh.flows[1].u.tobytes()
        assert cached.flows[1].v.tobytes() == fresh.flows[1].v.tobytes()


class TestSynthetic:
    def test_straight_track_zero_labels(self, tmp_path):
        csv = generate_synthetic(parse_track("straight"), 5, tmp_path)
        index = load_index(csv)
        assert all(r.angle == 0.0 for r in index)

    def test_constant_curvature_closed_form(self, tmp_path):
        track = TrackSpec(segments=[(1.0 / 50.0, 500.0)])
        csv = generate_synthetic(track, 5, tmp_path)
        index = load_index(csv)
        expected = np.arctan(WHEELBASE_M / 50.0)
        for r in index:
            assert abs(r.angle - expected) < 1e-12

    def test_same_seed_bit_identical(self, tmp_path):
        a_dir, b_dir = tmp_path / "a", tmp_path / "b"
        for d in (a_dir, b_dir):
            generate_synthetic(parse_track("mixed", seed=9), 6, d)
        for name in sorted(p.name for p in a_dir.iterdir()):
            assert (a_dir / name).read_bytes() == (b_dir / name).read_bytes()

    def test_needs_two_frames(self, tmp_path):
        with pytest.raises(ContractError):
            generate_synthetic(parse_track("straight"), 1, tmp_path)

    def test_track_dsl_parse(self):
        spec = parse_track("0.02@50,-0.03@40")
        assert spec.segments == [(0.02, 50.0), (-0.03, 40.0)]
        with pytest.raises(ContractError):
            parse_track("nonsense track")

    def test_infeasible_curvature_rejected(self):
        with pytest.raises(ContractError):
            TrackSpec(segments=[(5.0, 10.0)])

    def test_renders_distinct_curvatures_distinctly(self, tmp_path):
        from steerkit.data import render_frame
        track = parse_track("straight")
        left = render_frame(track, 0.0, 0.03).pixels
        right = render_frame(track, 0.0, -0.03).pixels
        assert not np.array_equal(left, right)
        # the bend shows up as asymmetry between left/right image halves
        diff = np.abs(left - left[:, ::-1]).mean()
        assert diff > 0.01
