"""Channel pruning, epoch segmentation, and feature-vector geometry."""
import numpy as np
import pytest

from p300loop import core, features, scheduler, subject


def _record_with_nans(fractions, n=1000):
    """One channel per requested NaN fraction."""
    labels = tuple(f"C{i}" for i in range(len(fractions)))
    rng = np.random.default_rng(0)
    samples = rng.normal(size=(len(fractions), n))
    for row, frac in enumerate(fractions):
        n_bad = int(round(frac * n))
        if n_bad:
            samples[row, rng.choice(n, n_bad, replace=False)] = np.nan
    return core.EegRecord(core.ChannelSet(labels), 128.0, samples)


class TestEpochWindow:
    def test_defaults(self):
        w = features.EpochWindow()
        assert w.start_offset == 0
        assert w.length == 65

    def test_length_validated(self):
        with pytest.raises(ValueError):
            features.EpochWindow(length=0)


class TestPruneChannels:
    def test_drops_only_channels_over_threshold(self):
        rec = _record_with_nans([0.0, 0.02, 0.2])
        pruned, dropped = features.prune_channels(rec, nan_threshold=0.05)
        assert dropped == ["C2"]
        assert tuple(pruned.channels) == ("C0", "C1")
        assert not np.isnan(pruned.samples).any()

    def test_residual_nans_interpolated_linearly(self):
        samples = np.array([[0.0, np.nan, 2.0, 3.0, np.nan, 5.0]])
        rec = core.EegRecord(core.ChannelSet(("A",)), 128.0, samples)
        pruned, dropped = features.prune_channels(rec, nan_threshold=0.5)
        assert dropped == []
        np.testing.assert_allclose(pruned.samples[0], [0, 1, 2, 3, 4, 5])

    def test_all_channels_bad_rejected(self):
        rec = _record_with_nans([0.5, 0.6])
        with pytest.raises(ValueError):
            features.prune_channels(rec, nan_threshold=0.05)

    def test_default_pipeline_drops_the_corrupted_channel(self, training_record):
        pruned, dropped = features.prune_channels(training_record)
        assert dropped == ["FC5"]
        assert len(pruned.channels) == 13
        assert "FC5" not in pruned.channels

    def test_markers_carried_over(self, training_record):
        pruned, _ = features.prune_channels(training_record)
        assert pruned.markers == training_record.markers


class TestSegment:
    def _record(self, n=2000):
        samples = np.tile(np.arange(n, dtype=float), (2, 1))
        return core.EegRecord(core.ChannelSet(("A", "B")), 128.0, samples)

    def test_window_columns(self):
        rec = self._record()
        ev = core.StimulusEvent(image_id=0, onset_sample=1000, run_index=0,
                                session_index=0, is_target=True)
        epochs = features.segment(rec, [ev])
        assert len(epochs) == 1
        epoch, back = epochs[0]
        assert back == ev
        assert epoch.shape == (2, 65)
        # an onset at sample 1000 spans columns 1000..1064 inclusive
        assert epoch[0, 0] == 1000.0
        assert epoch[0, -1] == 1064.0

    def test_start_offset_shifts_window(self):
        rec = self._record()
        ev = core.StimulusEvent(image_id=0, onset_sample=1000, run_index=0,
                                session_index=0, is_target=True)
        window = features.EpochWindow(start_offset=13, length=10)
        (epoch, _), = features.segment(rec, [ev], window)
        assert epoch[0, 0] == 1013.0

    def test_events_default_to_markers(self):
        rec = self._record()
        ev = core.StimulusEvent(image_id=3, onset_sample=500, run_index=0,
                                session_index=0, is_target=False)
        rec = rec.with_markers([ev])
        epochs = features.segment(rec)
        assert len(epochs) == 1
        assert epochs[0][1].image_id == 3

    def test_window_overrun_is_descriptive(self):
        rec = self._record(n=1030)
        ev = core.StimulusEvent(image_id=2, onset_sample=1000, run_index=1,
                                session_index=4, is_target=False)
        with pytest.raises(IndexError, match="session 4"):
            features.segment(rec, [ev])


class TestFeatureVector:
    def test_row_major_order_1x3(self):
        epoch = np.array([[1.0, 2.0, 3.0]])
        np.testing.assert_array_equal(features.build_feature_vector(epoch),
                                      [1.0, 2.0, 3.0])

    def test_row_major_order_2x2(self):
        epoch = np.array([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_array_equal(features.build_feature_vector(epoch),
                                      [1.0, 2.0, 3.0, 4.0])

    def test_round_trip(self):
        rng = np.random.default_rng(1)
        epoch = rng.normal(size=(13, 65))
        vec = features.build_feature_vector(epoch)
        assert vec.shape == (845,)
        np.testing.assert_array_equal(features.epoch_from_vector(vec, 13), epoch)

    def test_vector_is_a_copy(self):
        epoch = np.zeros((2, 2))
        vec = features.build_feature_vector(epoch)
        vec[0] = 9.0
        assert epoch[0, 0] == 0.0

    def test_validation(self):
        with pytest.raises(ValueError):
            features.build_feature_vector(np.zeros(5))
        with pytest.raises(ValueError):
            features.epoch_from_vector(np.zeros(5), 2)


class TestDatasetFromScenario:
    def test_default_geometry(self, training_dataset):
        assert training_dataset.vectors.shape == (864, 845)
        assert training_dataset.n_targets == 72
        assert len(training_dataset.channels) == 13
        assert training_dataset.window.length == 65
        assert training_dataset.feature_size == 13 * 65

    def test_labels_follow_schedule(self, training_dataset, training_schedule):
        for (run, sess, img), label in zip(training_dataset.provenance,
                                           training_dataset.labels):
            assert label == (img == training_schedule.session_targets[sess])

    def test_events_can_come_from_markers(self, training_record,
                                          training_dataset):
        from_markers = features.dataset_from_scenario(training_record)
        np.testing.assert_array_equal(from_markers.vectors,
                                      training_dataset.vectors)

    def test_unlabelled_events_rejected(self):
        t = scheduler.TimingConfig(sessions_per_scenario=1, runs_per_session=1)
        blind = scheduler.build_online_trial_schedule(
            t, n_trials=1, rng=np.random.default_rng(0))
        params = subject.SubjectParams(seed=0, nan_fraction=0.0)
        rec = subject.simulate_subject(subject.with_targets(blind, 0), params)
        rec = rec.with_markers(blind.events)
        with pytest.raises(ValueError):
            features.dataset_from_scenario(rec)

    def test_empty_events_rejected(self):
        rec = core.EegRecord(core.ChannelSet(("A",)), 128.0, np.zeros((1, 100)))
        with pytest.raises(ValueError):
            features.dataset_from_scenario(rec)

    def test_filtering_actually_ran(self, training_record, training_dataset):
        # raw epochs contain the ~10 uV background; filtered features are
        # small and never NaN despite the corrupted channel upstream
        assert not np.isnan(training_dataset.vectors).any()
        raw_std = np.nanstd(training_record.samples)
        assert training_dataset.vectors.std() < raw_std

    def test_dataset_invariants(self):
        with pytest.raises(ValueError):
            features.LabeledDataset(vectors=np.zeros((2, 4)),
                                    labels=np.array([True]),
                                    provenance=((0, 0, 0), (0, 0, 1)))
        with pytest.raises(ValueError):
            features.LabeledDataset(vectors=np.zeros((1, 4)),
                                    labels=np.array([True]),
                                    provenance=((0, 0, 0),),
                                    channels=core.ChannelSet(("A", "B")),
                                    window=features.EpochWindow(length=3))


class TestExportTable:
    def test_header_and_one_row(self):
        dataset = features.LabeledDataset(
            vectors=np.array([[0.25, -1.5]]), labels=np.array([True]),
            provenance=((2, 1, 7),))
        table = features.export_table(dataset)
        lines = table.splitlines()
        assert lines[0] == "run\tsession\timage_id\tlabel\tf0\tf1"
        assert lines[1] == "2\t1\t7\t1\t0.25\t-1.5"

    def test_values_round_trip_exactly(self):
        rng = np.random.default_rng(5)
        dataset = features.LabeledDataset(
            vectors=rng.normal(size=(3, 4)), labels=np.array([True, False, True]),
            provenance=((0, 0, 0), (0, 0, 1), (0, 0, 2)))
        lines = features.export_table(dataset).splitlines()[1:]
        parsed = np.array([[float(v) for v in line.split("\t")[4:]]
                           for line in lines])
        np.testing.assert_array_equal(parsed, dataset.vectors)
