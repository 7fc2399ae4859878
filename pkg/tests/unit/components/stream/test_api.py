"""Tests for patch grids, sequence sources and the fixation/saccade stream."""

import logging

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from components.stream.api import (
    FixationSaccadeStream,
    NegativeSampler,
    PatchGrid,
    build_sources,
    fixation_saccade_stream,
    patchify,
    strips,
)
from components.stream.dataset import Dataset, Sample, synthetic_sequence_dataset
from core.exceptions import DimensionError, InputError


def constant_dataset(n_samples, steps=8, dim=3):
    """Samples whose every value equals the sample id."""
    return Dataset(
        [Sample(i, np.full((steps, dim), float(i), dtype=np.float32), i % 2) for i in range(n_samples)]
    )


class TestPatchify:
    """Test cases for patch grids."""

    def test_stl_grid(self):
        """96×96 with patch 16, stride 8 gives 11 columns of 11 patches."""
        columns = patchify(np.zeros((1, 96, 96)), PatchGrid(16, 8))
        assert len(columns) == 11
        assert all(len(column) == 11 for column in columns)
        assert columns[0][0].shape == (1, 16, 16)

    def test_quadrants(self):
        """Non-overlapping 16×16 patches of a 32×32 image are its quadrants, column-major."""
        image = np.arange(32 * 32, dtype=np.float64).reshape(1, 32, 32)
        columns = patchify(image, PatchGrid(16, 16))
        assert_array_equal(columns[0][0], image[:, :16, :16])
        assert_array_equal(columns[0][1], image[:, 16:, :16])
        assert_array_equal(columns[1][0], image[:, :16, 16:])
        assert_array_equal(columns[1][1], image[:, 16:, 16:])

    def test_direct_slices(self):
        """64×64 with patch 16, stride 8 gives 7×7 patches equal to direct slices."""
        image = np.random.default_rng(0).normal(size=(2, 64, 64))
        columns = patchify(image, PatchGrid(16, 8))
        assert len(columns) == 7 and len(columns[3]) == 7
        assert_array_equal(columns[3][5], image[:, 40:56, 24:40])

    def test_reconstruction(self):
        """With stride == patch size the patches tile the image exactly."""
        image = np.random.default_rng(1).normal(size=(3, 24, 16))
        columns = patchify(image, PatchGrid(8, 8))
        rebuilt = np.concatenate([np.concatenate(column, axis=1) for column in columns], axis=2)
        assert_array_equal(rebuilt, image)

    def test_non_integral_grid(self):
        """A grid that does not tile the image raises DimensionError."""
        with pytest.raises(DimensionError):
            patchify(np.zeros((1, 30, 30)), PatchGrid(16, 8))

    def test_strips_span_full_width(self):
        """Column pooling turns each patch row into a full-width strip."""
        out = strips(np.zeros((1, 32, 24)), PatchGrid(16, 8))
        assert len(out) == 3
        assert out[0].shape == (1, 16, 24)


class TestBuildSources:
    """Test cases for turning samples into sequences."""

    def test_image_columns(self):
        """Each image column becomes its own source."""
        dataset = Dataset([Sample(4, np.zeros((1, 32, 32)), 2)])
        sources = build_sources(dataset, PatchGrid(16, 16))
        assert [s.column for s in sources] == [0, 1]
        assert all(s.sample_id == 4 and s.label == 2 and len(s) == 2 for s in sources)

    def test_image_needs_grid(self):
        """Images without a grid are rejected."""
        with pytest.raises(InputError):
            build_sources(Dataset([Sample(0, np.zeros((1, 8, 8)))]))

    def test_sequence_frames(self):
        """A T×D sample yields one source of T frames."""
        sources = build_sources(constant_dataset(2, steps=5))
        assert len(sources) == 2 and len(sources[1]) == 5
        assert_array_equal(sources[1].frames[0], np.ones(3))


class TestFixationSaccadeStream:
    """Test cases for the fixation/saccade protocol."""

    def test_first_event_is_fixation(self):
        """The stream starts with y = +1."""
        events = fixation_saccade_stream(constant_dataset(4), 1.0, 3, rng_seed=0)
        assert events[0].y == 1 and events[0].t == 0

    def test_label_invariant(self):
        """y = -1 exactly when the source id changes."""
        events = fixation_saccade_stream(constant_dataset(5), 0.3, 2000, rng_seed=1)
        for prev, event in zip(events, events[1:]):
            assert (event.y == -1) == (event.source_id != prev.source_id)
            assert_array_equal(event.x, np.full(3, float(event.source_id)))

    def test_never_switch_only_advances(self):
        """With p_switch = 0 the stream only advances or saccades at sequence ends."""
        stream = FixationSaccadeStream(build_sources(constant_dataset(3, steps=6)), 0.0, rng_seed=2)
        events = stream.take(200)
        for prev, event in zip(events, events[1:]):
            if event.y == 1:
                assert event.source_id == prev.source_id
                assert event.position == prev.position + 1
            else:
                assert prev.position == 5
        assert stream.saccades == stream.forced_saccades > 0

    def test_always_switch(self):
        """With p_switch = 1 every event after the first is a saccade."""
        events = fixation_saccade_stream(constant_dataset(3), 1.0, 50, rng_seed=3)
        assert all(event.y == -1 for event in events[1:])

    def test_single_step_sequences(self):
        """One-frame sequences make every later event a saccade."""
        dataset = synthetic_sequence_dataset(2, 4, 1, 0.1, 0, samples_per_class=2)
        events = fixation_saccade_stream(dataset, 0.0, 20, rng_seed=4)
        assert all(event.y == -1 for event in events[1:])

    def test_switch_rate(self):
        """At p_switch = 0.5 the voluntary switch rate is 0.5 ± 0.02."""
        stream = FixationSaccadeStream(build_sources(constant_dataset(10, steps=32)), 0.5, rng_seed=5)
        n = 10_000
        stream.take(n)
        rate = (stream.saccades - stream.forced_saccades) / (n - 1)
        assert abs(rate - 0.5) <= 0.02

    def test_deterministic(self):
        """Identical seeds give identical streams."""
        dataset = synthetic_sequence_dataset(3, 4, 8, 0.1, 0, samples_per_class=2)
        a = fixation_saccade_stream(dataset, 0.5, 100, rng_seed=6)
        b = fixation_saccade_stream(dataset, 0.5, 100, rng_seed=6)
        assert [(e.source_id, e.position, e.y) for e in a] == [(e.source_id, e.position, e.y) for e in b]
        assert all(np.array_equal(x.x, y.x) for x, y in zip(a, b))

    def test_single_sample_stays_fixation(self, caplog):
        """A one-sample dataset restarts its own sequence with y = +1."""
        with caplog.at_level(logging.WARNING):
            events = fixation_saccade_stream(constant_dataset(1, steps=3), 0.5, 30, rng_seed=7)
        assert all(event.y == 1 and event.source_id == 0 for event in events)
        assert "single sample" in caplog.text

    def test_empty_dataset(self):
        """An empty dataset raises InputError."""
        with pytest.raises(InputError):
            fixation_saccade_stream(Dataset([]), 0.5, 10, rng_seed=0)

    def test_probability_range(self):
        """p_switch outside [0, 1] raises InputError."""
        with pytest.raises(InputError):
            fixation_saccade_stream(constant_dataset(2), 1.5, 10, rng_seed=0)


class TestNegativeSampler:
    """Test cases for synchronous negative sampling."""

    def test_excludes_current_sample(self):
        """Negatives never come from the excluded sample."""
        sampler = NegativeSampler(build_sources(constant_dataset(4)), np.random.default_rng(0))
        frames = sampler.draw(200, exclude_sample_id=2)
        assert len(frames) == 200
        assert all(frame[0] != 2.0 for frame in frames)

    def test_needs_two_samples(self):
        """A single sample cannot provide negatives."""
        with pytest.raises(InputError):
            NegativeSampler(build_sources(constant_dataset(1)), np.random.default_rng(0))
