import logging
import os

import numpy as np
import pytest

from oracles import mean_tensors_bruteforce
from trainlab.checkpoints import (
    AveragingWindow,
    Checkpoint,
    CheckpointFormatError,
    average_checkpoints,
    read_checkpoint,
    select_window,
    watch_and_average,
    write_checkpoint,
)


def random_checkpoint(rng, step=0, shapes=None, dtype=np.float32):
    shapes = shapes or {"w": (3, 4), "b": (4,)}
    return Checkpoint(
        step=step,
        tensors={name: rng.standard_normal(shape).astype(dtype) for name, shape in shapes.items()},
    )


class TestContainerFormat:
    def test_round_trip_is_bit_identical(self, tmp_path):
        rng = np.random.default_rng(0)
        ckpt = Checkpoint(
            step=1234,
            tensors={
                "layer/weights": rng.standard_normal((5, 3)).astype(np.float32),
                "layer/bias_f64": rng.standard_normal((7,)),
                "scalar": np.array(3.25, dtype=np.float32),
            },
        )
        path = tmp_path / "c.tlck"
        write_checkpoint(ckpt, path)
        loaded = read_checkpoint(path)
        assert loaded.step == 1234
        assert list(loaded.tensors) == list(ckpt.tensors)
        for name, arr in ckpt.tensors.items():
            got = loaded.tensors[name]
            assert got.dtype == arr.dtype
            assert got.shape == arr.shape
            assert got.tobytes() == arr.tobytes()

    def test_truncated_file_names_the_tensor(self, tmp_path):
        ckpt = Checkpoint(step=1, tensors={"alpha": np.ones((4, 4), dtype=np.float32)})
        path = tmp_path / "c.tlck"
        write_checkpoint(ckpt, path)
        data = path.read_bytes()
        path.write_bytes(data[:-8])
        with pytest.raises(CheckpointFormatError, match="alpha"):
            read_checkpoint(path)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "c.tlck"
        path.write_bytes(b"NOPE" + b"\x00" * 32)
        with pytest.raises(CheckpointFormatError, match="magic"):
            read_checkpoint(path)

    def test_zero_tensor_checkpoint_rejected(self):
        with pytest.raises(ValueError):
            Checkpoint(step=1, tensors={})

    def test_non_float_dtype_rejected(self):
        with pytest.raises(ValueError):
            Checkpoint(step=1, tensors={"x": np.ones(3, dtype=np.int32)})

    def test_unicode_tensor_names_survive(self, tmp_path):
        ckpt = Checkpoint(step=7, tensors={"vrstva/váhy": np.ones(2, dtype=np.float64)})
        path = tmp_path / "c.tlck"
        write_checkpoint(ckpt, path)
        assert "vrstva/váhy" in read_checkpoint(path).tensors


class TestAverageCheckpoints:
    def test_idempotent_on_copies(self):
        rng = np.random.default_rng(1)
        ckpt = random_checkpoint(rng, step=10)
        avg = average_checkpoints([ckpt, ckpt, ckpt])
        for name, arr in ckpt.tensors.items():
            np.testing.assert_array_equal(avg.tensors[name], arr)

    def test_two_checkpoint_arithmetic(self):
        a = Checkpoint(step=1, tensors={"t": np.array([1.0, 3.0], dtype=np.float32)})
        b = Checkpoint(step=2, tensors={"t": np.array([3.0, 5.0], dtype=np.float32)})
        avg = average_checkpoints([a, b])
        np.testing.assert_array_equal(avg.tensors["t"], np.array([2.0, 4.0], dtype=np.float32))
        assert avg.step == 2

    def test_matches_bruteforce_mean(self):
        rng = np.random.default_rng(2)
        ckpts = [random_checkpoint(rng, step=i, dtype=np.float64) for i in range(5)]
        avg = average_checkpoints(ckpts)
        for name in ckpts[0].tensors:
            expected = mean_tensors_bruteforce(
                [c.tensors[name].ravel().tolist() for c in ckpts]
            )
            np.testing.assert_allclose(avg.tensors[name].ravel(), expected, rtol=1e-12)

    def test_permutation_invariant(self):
        rng = np.random.default_rng(3)
        ckpts = [random_checkpoint(rng, step=i) for i in range(4)]
        a = average_checkpoints(ckpts)
        b = average_checkpoints(ckpts[::-1])
        for name in a.tensors:
            np.testing.assert_allclose(a.tensors[name], b.tensors[name], rtol=1e-12)

    def test_linearity_under_perturbation(self):
        rng = np.random.default_rng(4)
        base = random_checkpoint(rng, step=5, dtype=np.float64)
        delta = {name: rng.standard_normal(arr.shape) for name, arr in base.tensors.items()}
        shifted = Checkpoint(
            step=6, tensors={n: base.tensors[n] + delta[n] for n in base.tensors}
        )
        avg = average_checkpoints([base, shifted])
        for name in base.tensors:
            np.testing.assert_allclose(
                avg.tensors[name], base.tensors[name] + delta[name] / 2, rtol=1e-12
            )

    def test_forked_runs_average_like_same_run(self):
        # same schema, independently diverged values
        rng = np.random.default_rng(5)
        fork_a = random_checkpoint(rng, step=100)
        fork_b = Checkpoint(
            step=100,
            tensors={n: rng.standard_normal(a.shape).astype(a.dtype) for n, a in fork_a.tensors.items()},
        )
        avg = average_checkpoints([fork_a, fork_b])
        for name in fork_a.tensors:
            manual = (
                fork_a.tensors[name].astype(np.float64) + fork_b.tensors[name].astype(np.float64)
            ) / 2
            np.testing.assert_allclose(avg.tensors[name], manual.astype(np.float32), rtol=1e-12)

    def test_accumulation_is_double_precision(self):
        # a million f32 copies of 0.1 must average back to f32(0.1) exactly
        ckpt = Checkpoint(step=1, tensors={"x": np.array([0.1], dtype=np.float32)})
        avg = average_checkpoints([ckpt] * 10**6)
        assert avg.tensors["x"][0] == np.float32(0.1)

    def test_schema_mismatch_reported_per_tensor(self):
        a = Checkpoint(step=1, tensors={"t": np.ones(2, dtype=np.float32)})
        b = Checkpoint(step=2, tensors={"t": np.ones(3, dtype=np.float32)})
        with pytest.raises(ValueError, match="'t'"):
            average_checkpoints([a, b])
        c = Checkpoint(step=2, tensors={"u": np.ones(2, dtype=np.float32)})
        with pytest.raises(ValueError, match="names differ"):
            average_checkpoints([a, c])
        d = Checkpoint(step=2, tensors={"t": np.ones(2, dtype=np.float64)})
        with pytest.raises(ValueError, match="dtype"):
            average_checkpoints([a, d])

    def test_empty_list_rejected(self):
        with pytest.raises(ValueError):
            average_checkpoints([])


class TestSelectWindow:
    def test_ten_minute_saves_thinned_to_hourly(self):
        # 20 checkpoints every 10 minutes; hourly thinning leaves every 6th,
        # and only 4 of them fit the spacing
        listing = [(f"ck-{i}", i * 100, i * 600.0) for i in range(20)]
        window = AveragingWindow(window_size=8, min_interval=3600)
        assert select_window(listing, window) == ["ck-1", "ck-7", "ck-13", "ck-19"]

    def test_hourly_saves_all_fit(self):
        listing = [(f"ck-{i}", i, i * 3600.0) for i in range(8)]
        window = AveragingWindow(window_size=8, min_interval=3600)
        assert select_window(listing, window) == [f"ck-{i}" for i in range(8)]

    def test_window_of_one_takes_the_newest(self):
        listing = [(f"ck-{i}", i, i * 3600.0) for i in range(5)]
        assert select_window(listing, AveragingWindow(window_size=1)) == ["ck-4"]

    def test_empty_listing_rejected(self):
        with pytest.raises(ValueError):
            select_window([], AveragingWindow())


class FakeTimeline:
    """Simulated clock: sleeping advances time and runs scheduled actions."""

    def __init__(self):
        self.now = 0.0
        self.scheduled = []

    def at(self, when, action):
        self.scheduled.append((when, action))

    def clock(self):
        return self.now

    def sleep(self, seconds):
        self.now += seconds
        for when, action in sorted(self.scheduled):
            if when <= self.now:
                action()
                self.scheduled.remove((when, action))


def drop_checkpoint(directory, name, step, value, mtime):
    ckpt = Checkpoint(step=step, tensors={"x": np.array([value], dtype=np.float64)})
    path = directory / name
    write_checkpoint(ckpt, path)
    os.utime(path, (mtime, mtime))


class TestWatchAndAverage:
    def test_emits_growing_then_sliding_windows(self, tmp_path):
        timeline = FakeTimeline()
        timeline.at(5, lambda: drop_checkpoint(tmp_path, "a.tlck", 1, 10.0, 5))
        timeline.at(65, lambda: drop_checkpoint(tmp_path, "b.tlck", 2, 20.0, 65))
        timeline.at(125, lambda: drop_checkpoint(tmp_path, "c.tlck", 3, 30.0, 125))
        emitted = list(
            watch_and_average(
                tmp_path,
                AveragingWindow(window_size=2, min_interval=0),
                poll_interval=60,
                patience=200,
                clock=timeline.clock,
                sleep=timeline.sleep,
            )
        )
        # window contents over time: {1}, {1,2}, {2,3}
        assert [read_checkpoint(p).step for p in emitted] == [1, 2, 3]
        values = [read_checkpoint(p).tensors["x"][0] for p in emitted]
        assert values == [10.0, 15.0, 25.0]
        assert all(p.parent == tmp_path / "averaged" for p in emitted)

    def test_empty_directory_exits_cleanly_after_patience(self, tmp_path):
        timeline = FakeTimeline()
        emitted = list(
            watch_and_average(
                tmp_path,
                AveragingWindow(window_size=2, min_interval=0),
                poll_interval=10,
                patience=50,
                clock=timeline.clock,
                sleep=timeline.sleep,
            )
        )
        assert emitted == []
        assert timeline.now >= 50

    def test_corrupt_checkpoint_is_skipped_with_one_warning(self, tmp_path, caplog):
        timeline = FakeTimeline()
        timeline.at(5, lambda: drop_checkpoint(tmp_path, "a.tlck", 1, 10.0, 5))

        def drop_garbage():
            path = tmp_path / "bad.tlck"
            path.write_bytes(b"garbage")
            os.utime(path, (30, 30))

        timeline.at(30, drop_garbage)
        timeline.at(65, lambda: drop_checkpoint(tmp_path, "b.tlck", 2, 20.0, 65))
        with caplog.at_level(logging.WARNING, logger="trainlab.checkpoints"):
            emitted = list(
                watch_and_average(
                    tmp_path,
                    AveragingWindow(window_size=2, min_interval=0),
                    poll_interval=60,
                    patience=150,
                    clock=timeline.clock,
                    sleep=timeline.sleep,
                )
            )
        assert [read_checkpoint(p).step for p in emitted] == [1, 2]
        skip_warnings = [r for r in caplog.records if "bad.tlck" in r.getMessage()]
        assert len(skip_warnings) == 1

    def test_missing_directory_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            next(watch_and_average(tmp_path / "nope", AveragingWindow()))
