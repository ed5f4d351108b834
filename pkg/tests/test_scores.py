import io

import numpy as np
import pytest

import hapstep as hs
from hapstep.errors import FormatError, IncompleteGridError
from hapstep.scores import (
    SPEEDS,
    STIMULI,
    mean_across_participants,
    read_scores,
    write_normalized,
)


def full_grid(values):
    keys = [(s, v) for s in STIMULI for v in SPEEDS]
    assert len(values) == 9
    return dict(zip(keys, values))


def one_grid(values, participant="p1", item="realism"):
    return {participant: {item: full_grid(values)}}


class TestNormalizeScores:
    def test_midpoint_formula(self):
        # min 20, max 80: a score of 50 lands exactly halfway
        grid = one_grid([20, 80, 50, 30, 40, 60, 70, 25, 35])
        norm = hs.normalize_scores(grid)["p1"]["realism"]
        assert norm[("none", 4.0)] == 0.5

    def test_all_equal_grid_maps_to_zero(self):
        norm = hs.normalize_scores(one_grid([40] * 9))["p1"]["realism"]
        assert all(v == 0.0 for v in norm.values())

    def test_endpoints_map_to_zero_and_one(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            values = rng.uniform(0, 100, size=9).tolist()
            norm = hs.normalize_scores(one_grid(values))["p1"]["realism"]
            out = list(norm.values())
            assert min(out) == 0.0
            assert max(out) == 1.0
            assert all(0.0 <= v <= 1.0 for v in out)

    def test_order_preserved(self):
        values = [10, 20, 30, 40, 50, 60, 70, 80, 90]
        norm = hs.normalize_scores(one_grid(values))["p1"]["realism"]
        out = list(norm.values())
        assert out == sorted(out)

    def test_affine_invariance(self):
        values = [10, 55, 30, 80, 20, 60, 45, 70, 35]
        shifted = [2.0 * v + 7.0 for v in values]
        a = hs.normalize_scores(one_grid(values))["p1"]["realism"]
        b = hs.normalize_scores(one_grid(shifted))["p1"]["realism"]
        for key in a:
            assert a[key] == pytest.approx(b[key], abs=1e-12)

    def test_grids_normalized_independently(self):
        scores = {"p1": {"realism": full_grid([0] * 8 + [100])},
                  "p2": {"realism": full_grid([40] * 8 + [50])}}
        norm = hs.normalize_scores(scores)
        assert norm["p1"]["realism"][("friction", 4.0)] == 1.0
        assert norm["p2"]["realism"][("friction", 4.0)] == 1.0

    def test_missing_cell_rejected(self):
        grid = one_grid(list(range(9)))
        del grid["p1"]["realism"][("friction", 4.0)]
        with pytest.raises(IncompleteGridError, match="friction"):
            hs.normalize_scores(grid)


class TestMeanAcrossParticipants:
    def test_simple_mean(self):
        scores = {"p1": {"item": full_grid([0] * 8 + [100])},
                  "p2": {"item": full_grid([0] * 8 + [50])}}
        norm = hs.normalize_scores(scores)
        mean = mean_across_participants(norm)
        assert mean["item"][("friction", 4.0)] == 1.0
        assert mean["item"][("none", 1.0)] == 0.0


CSV = "participant,item,stimulus,speed_kmh,score\n" + "".join(
    f"p1,realism,{s},{v},{10 * i}\n"
    for i, (s, v) in enumerate((s, v) for s in STIMULI for v in SPEEDS))


class TestScoresIo:
    def test_read_scores(self):
        scores = read_scores(CSV.encode())
        assert scores["p1"]["realism"][("none", 1.0)] == 0.0
        assert scores["p1"]["realism"][("friction", 4.0)] == 80.0

    def test_write_normalized_round_trip(self, tmp_path):
        scores = read_scores(CSV.encode())
        norm = hs.normalize_scores(scores)
        path = tmp_path / "out.csv"
        write_normalized(scores, norm, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "participant,item,stimulus,speed_kmh,score,normalized"
        assert len(lines) == 10
        last_cols = {float(line.rsplit(",", 1)[1]) for line in lines[1:]}
        assert {0.0, 1.0} <= last_cols

    def test_score_out_of_range_rejected(self):
        bad = "participant,item,stimulus,speed_kmh,score\np1,r,none,1.0,120\n"
        with pytest.raises(FormatError, match="outside"):
            read_scores(bad.encode())

    def test_unknown_stimulus_rejected(self):
        bad = "participant,item,stimulus,speed_kmh,score\np1,r,magnet,1.0,50\n"
        with pytest.raises(FormatError, match="stimulus"):
            read_scores(bad.encode())

    def test_missing_columns_rejected(self):
        with pytest.raises(FormatError):
            read_scores(b"participant,item\np1,r\n")

    def test_empty_body_rejected(self):
        with pytest.raises(FormatError):
            read_scores(b"participant,item,stimulus,speed_kmh,score\n")

    def test_stream_input(self):
        assert read_scores(io.StringIO(CSV))
