import numpy as np
import pytest

from longform.segments import compose_latents, plan_segments, segment_caption, trim_concat
from models.timing import PlanWindow, WindowPlan
from planning.window_planner import make_plan
from utils.errors import ConfigError, DimensionError, LayoutError

FRAME_RATE = 25.0


def untimed(total_s):
    return make_plan("rain on a tin roof", "", total_s)


def timed_plan():
    windows = [PlanWindow(0.0, 4.0, ["a"], "A"), PlanWindow(4.0, 8.0, ["b"], "B"),
               PlanWindow(8.0, 18.0, ["c"], "C")]
    return WindowPlan(total_s=18.0, windows=windows, global_caption="abc")


class TestPlanSegments:
    @pytest.mark.parametrize('total_s,count,starts', [
        (26.0, 3, [0, 200, 400]),
        (18.0, 2, [0, 200]),
        (10.1, 2, [0, 3]),
        (10.0, 1, [0]),
    ])
    def test_segment_starts(self, total_s, count, starts):
        layout = plan_segments(untimed(total_s), 10.0, 2.0, FRAME_RATE)
        assert len(layout.segments) == count
        assert [s.start_frame for s in layout.segments] == starts
        assert layout.segments[-1].end_frame == layout.total_frames

    def test_ninety_seconds(self):
        layout = plan_segments(untimed(90.0), 10.0, 2.0, FRAME_RATE)
        assert len(layout.segments) == 11
        assert layout.segments[-1].start_frame == 2000
        assert all(s.frames == 250 for s in layout.segments)

    def test_short_clip_is_a_single_short_segment(self):
        layout = plan_segments(untimed(5.0), 10.0, 2.0, FRAME_RATE)
        assert len(layout.segments) == 1 and layout.seg_frames == 125

    def test_split_frames_sit_mid_overlap(self):
        layout = plan_segments(untimed(18.0), 10.0, 2.0, FRAME_RATE)
        assert layout.split_frames() == [0, 225]
        owners = layout.owner_map()
        assert owners[224] == 0 and owners[225] == 1

    @pytest.mark.parametrize('overlap', [0.04, 0.03, 0.0, 10.0])
    def test_invalid_overlaps(self, overlap):
        with pytest.raises(ConfigError):
            plan_segments(untimed(26.0), 10.0, overlap, FRAME_RATE)

    def test_sub_plans_cover_each_segment(self):
        layout = plan_segments(timed_plan(), 10.0, 2.0, FRAME_RATE)
        first, second = layout.segments
        assert first.sub_plan.total_s == 10.0 and second.sub_plan.total_s == 10.0
        assert [w.recaption for w in first.sub_plan.windows] == ["A", "B", "C"]
        assert [w.recaption for w in second.sub_plan.windows] == ["C"]
        first.sub_plan.check_invariants()
        second.sub_plan.check_invariants()


class TestSegmentCaption:
    def test_touching_windows_are_excluded(self):
        assert segment_caption(timed_plan(), 4.0, 8.0) == "B"

    def test_captions_in_time_order(self):
        assert segment_caption(timed_plan(), 3.0, 9.0) == "A and B and C"

    def test_untimed_plan_uses_the_global_caption(self):
        assert segment_caption(untimed(20.0), 0.0, 10.0) == "rain on a tin roof"


class TestCompose:
    def test_overlap_owners(self):
        layout = plan_segments(untimed(18.0), 10.0, 2.0, FRAME_RATE)
        latents = np.zeros((2, 250, 3))
        latents[1] = 1.0
        out = compose_latents(latents, layout)
        assert np.all(out[0, :225] == 0) and np.all(out[0, 225:] == 1)
        assert np.all(out[1, :25] == 0) and np.all(out[1, 25:] == 1)

    def test_overlaps_agree_exactly_and_compose_is_idempotent(self, random_batch):
        layout = plan_segments(untimed(26.0), 10.0, 2.0, FRAME_RATE)
        out = compose_latents(random_batch((3, 250, 4)), layout)
        assert np.array_equal(out[0, 200:250], out[1, 0:50])
        assert np.array_equal(out[1, 200:250], out[2, 0:50])
        assert np.array_equal(compose_latents(out, layout), out)

    def test_right_aligned_last_segment(self, random_batch):
        layout = plan_segments(untimed(10.1), 10.0, 2.0, FRAME_RATE)
        out = compose_latents(random_batch((2, 250, 4)), layout)
        assert np.array_equal(out[0, 3:250], out[1, 0:247])

    def test_rows_beyond_the_bases_are_untouched(self, random_batch):
        layout = plan_segments(untimed(18.0), 10.0, 2.0, FRAME_RATE)
        latents = random_batch((4, 250, 2))
        out = compose_latents(latents, layout, base_indices=[0, 1])
        assert np.array_equal(out[2:], latents[2:])

    def test_errors(self, random_batch):
        layout = plan_segments(untimed(18.0), 10.0, 2.0, FRAME_RATE)
        with pytest.raises(LayoutError):
            compose_latents(random_batch((2, 250, 2)), layout, base_indices=[0])
        with pytest.raises(LayoutError):
            compose_latents(random_batch((2, 200, 2)), layout)


class TestTrimConcat:
    @pytest.mark.parametrize('total_s', [10.1, 18.0, 26.0, 33.3, 90.0])
    @pytest.mark.parametrize('overlap_s', [0.4, 2.0, 4.0])
    def test_output_length(self, total_s, overlap_s):
        layout = plan_segments(untimed(total_s), 10.0, overlap_s, FRAME_RATE)
        waveforms = [np.zeros(layout.seg_frames * 160) for _ in layout.segments]
        assert len(trim_concat(waveforms, layout, 4000)) == int(round(total_s * 4000))

    def test_each_sample_comes_from_its_owner(self):
        layout = plan_segments(untimed(18.0), 10.0, 2.0, FRAME_RATE)
        out = trim_concat([np.zeros(40000), np.ones(40000)], layout, 4000)
        assert np.all(out[:36000] == 0) and np.all(out[36000:] == 1)
        assert out.shape == (72000,)

    def test_wrong_segment_lengths(self):
        layout = plan_segments(untimed(18.0), 10.0, 2.0, FRAME_RATE)
        with pytest.raises(DimensionError):
            trim_concat([np.zeros(40000), np.zeros(39999)], layout, 4000)
        with pytest.raises(DimensionError):
            trim_concat([np.zeros(40000)], layout, 4000)
