import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ecogcar.dataset import (
    Dataset,
    MovementClass,
    SynthConfig,
    Trial,
    bootstrap_resample,
    load_dataset,
    save_dataset,
    split_half,
    synthesize_dataset,
)


def small_config(**kw):
    defaults = dict(
        counts={MovementClass.RTR: 4, MovementClass.RTL: 3, MovementClass.WF: 5},
        channels=3,
        sampling_rate=200.0,
        trial_duration_s=6.0,
        onset_time_s=3.0,
        seed=1,
    )
    defaults.update(kw)
    return SynthConfig(**defaults)


class TestTrialInvariants:
    def test_onset_must_be_inside(self):
        with pytest.raises(ValueError, match="onset outside trial"):
            Trial("t0", MovementClass.RTR, np.zeros((2, 10)), onset_index=10)
        with pytest.raises(ValueError, match="onset outside trial"):
            Trial("t0", MovementClass.RTR, np.zeros((2, 10)), onset_index=0)

    def test_other_not_a_label(self):
        with pytest.raises(ValueError, match="OTHER"):
            Trial("t0", MovementClass.OTHER, np.zeros((2, 10)), onset_index=5)

    def test_samples_must_be_2d(self):
        with pytest.raises(ValueError, match="2-D"):
            Trial("t0", MovementClass.RTR, np.zeros(10), onset_index=5)


class TestSynthesize:
    def test_paper_trial_counts(self):
        ds = synthesize_dataset(SynthConfig(seed=0))
        counts = ds.class_counts()
        assert counts[MovementClass.RTR] == 25
        assert counts[MovementClass.RTL] == 23
        assert counts[MovementClass.WF] == 27
        assert len(ds.trials) == 75

    def test_deterministic_per_seed(self):
        a = synthesize_dataset(small_config(seed=9))
        b = synthesize_dataset(small_config(seed=9))
        assert [t.trial_id for t in a.trials] == [t.trial_id for t in b.trials]
        for ta, tb in zip(a.trials, b.trials):
            assert np.array_equal(ta.samples, tb.samples)

    def test_different_seeds_differ(self):
        a = synthesize_dataset(small_config(seed=1))
        b = synthesize_dataset(small_config(seed=2))
        assert not np.array_equal(a.trials[0].samples, b.trials[0].samples)

    def test_invalid_config_rejected(self):
        with pytest.raises(ValueError):
            synthesize_dataset(small_config(onset_time_s=7.0))
        with pytest.raises(ValueError):
            synthesize_dataset(small_config(erd_depth=-1.5))
        with pytest.raises(ValueError):
            synthesize_dataset(small_config(snr=-1.0))

    @settings(max_examples=15, deadline=None)
    @given(
        seed=st.integers(0, 2**31),
        channels=st.integers(1, 6),
        snr=st.floats(0.0, 8.0),
        depth=st.floats(-1.0, 1.0),
        onset_frac=st.floats(0.3, 0.8),
    )
    def test_output_always_valid(self, seed, channels, snr, depth, onset_frac):
        cfg = small_config(
            counts={MovementClass.RTR: 2, MovementClass.RTL: 2, MovementClass.WF: 2},
            channels=channels,
            snr=snr,
            erd_depth=depth,
            onset_time_s=6.0 * onset_frac,
            seed=seed,
        )
        ds = synthesize_dataset(cfg)
        ds.validate()  # every invariant holds for any valid config
        assert len(ds.trials) == 6


class TestRoundTrip:
    def test_save_load_bit_identical(self, tmp_path):
        ds = synthesize_dataset(small_config())
        save_dataset(ds, tmp_path / "ds")
        loaded = load_dataset(tmp_path / "ds")
        assert loaded.sampling_rate == ds.sampling_rate
        assert loaded.channel_names == ds.channel_names
        assert [t.trial_id for t in loaded.trials] == [t.trial_id for t in ds.trials]
        for ta, tb in zip(ds.trials, loaded.trials):
            assert ta.label is tb.label
            assert ta.onset_index == tb.onset_index
            assert np.array_equal(ta.samples, tb.samples)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="manifest"):
            load_dataset(tmp_path)

    def test_nan_cell_named(self, tmp_path):
        ds = synthesize_dataset(small_config())
        root = save_dataset(ds, tmp_path / "ds")
        victim = root / f"{ds.trials[1].trial_id}.csv"
        rows = victim.read_text().splitlines()
        cells = rows[4].split(",")
        cells[2] = "nan"
        rows[4] = ",".join(cells)
        victim.write_text("\n".join(rows) + "\n")
        with pytest.raises(ValueError, match=r"row 4, column 2"):
            load_dataset(root)

    def test_onset_at_trial_length(self, tmp_path):
        import json

        ds = synthesize_dataset(small_config())
        root = save_dataset(ds, tmp_path / "ds")
        manifest = json.loads((root / "manifest.json").read_text())
        manifest["trials"][0]["onset_index"] = ds.n_samples
        (root / "manifest.json").write_text(json.dumps(manifest))
        with pytest.raises(ValueError, match="onset outside trial"):
            load_dataset(root)

    def test_duplicate_trial_id(self, tmp_path):
        import json

        ds = synthesize_dataset(small_config())
        root = save_dataset(ds, tmp_path / "ds")
        manifest = json.loads((root / "manifest.json").read_text())
        manifest["trials"][1] = manifest["trials"][0]
        (root / "manifest.json").write_text(json.dumps(manifest))
        with pytest.raises(ValueError, match="duplicate trial_id"):
            load_dataset(root)

    def test_channel_mismatch(self, tmp_path):
        import json

        ds = synthesize_dataset(small_config())
        root = save_dataset(ds, tmp_path / "ds")
        manifest = json.loads((root / "manifest.json").read_text())
        manifest["channel_names"] = ["a", "b"]  # files carry 3 columns
        (root / "manifest.json").write_text(json.dumps(manifest))
        with pytest.raises(ValueError, match="channels"):
            load_dataset(root)


class TestSplitHalf:
    def test_odd_count_favors_train(self):
        ds = synthesize_dataset(SynthConfig(seed=3))
        train, test = split_half(ds, seed=0)
        tc, sc = train.class_counts(), test.class_counts()
        assert (tc[MovementClass.RTR], sc[MovementClass.RTR]) == (13, 12)
        assert (tc[MovementClass.RTL], sc[MovementClass.RTL]) == (12, 11)
        assert (tc[MovementClass.WF], sc[MovementClass.WF]) == (14, 13)

    def test_partition(self):
        ds = synthesize_dataset(small_config())
        train, test = split_half(ds, seed=5)
        train_ids = {t.trial_id for t in train.trials}
        test_ids = {t.trial_id for t in test.trials}
        assert train_ids.isdisjoint(test_ids)
        assert train_ids | test_ids == {t.trial_id for t in ds.trials}

    def test_seeds_give_distinct_partitions(self):
        ds = synthesize_dataset(SynthConfig(seed=3))
        partitions = set()
        sizes = set()
        for seed in range(20):
            train, _ = split_half(ds, seed)
            partitions.add(frozenset(t.trial_id for t in train.trials))
            sizes.add(tuple(sorted((c.value, n) for c, n in train.class_counts().items())))
        assert len(partitions) >= 19
        assert len(sizes) == 1  # per-class sizes identical across seeds

    def test_deterministic_per_seed(self):
        ds = synthesize_dataset(small_config())
        a1, _ = split_half(ds, seed=7)
        a2, _ = split_half(ds, seed=7)
        assert [t.trial_id for t in a1.trials] == [t.trial_id for t in a2.trials]

    def test_class_below_two_rejected(self):
        cfg = small_config(
            counts={MovementClass.RTR: 1, MovementClass.RTL: 2, MovementClass.WF: 2}
        )
        ds = synthesize_dataset(cfg)
        with pytest.raises(ValueError, match="at least 2"):
            split_half(ds, seed=0)


class TestBootstrap:
    def test_n_zero(self):
        assert bootstrap_resample([], 0, seed=0) == []

    def test_empty_source_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            bootstrap_resample([], 3, seed=0)

    def test_single_source(self):
        ds = synthesize_dataset(small_config())
        out = bootstrap_resample([ds.trials[0]], 5, seed=0)
        assert len(out) == 5
        ids = {t.trial_id for t in out}
        assert len(ids) == 5  # fresh unique ids
        for t in out:
            assert ds.trials[0].trial_id in t.trial_id  # source recorded
            assert np.array_equal(t.samples, ds.trials[0].samples)

    def test_resamples_are_source_copies(self):
        ds = synthesize_dataset(small_config())
        originals = {t.samples.tobytes() for t in ds.trials}
        for t in bootstrap_resample(ds.trials, 40, seed=3):
            assert t.samples.tobytes() in originals

    def test_replicate_mean_matches_source_mean(self):
        # Monte Carlo oracle: the bootstrap mean of per-trial mean voltage
        # estimates the empirical mean of the source trials.
        ds = synthesize_dataset(small_config(seed=12))
        per_trial = np.array([t.samples.mean() for t in ds.trials])
        emp_mean, emp_sd = per_trial.mean(), per_trial.std(ddof=1)
        reps = bootstrap_resample(ds.trials, 1000, seed=4)
        boot = np.mean([t.samples.mean() for t in reps])
        se = emp_sd / np.sqrt(len(per_trial))
        assert abs(boot - emp_mean) <= 3 * se

    def test_deterministic(self):
        ds = synthesize_dataset(small_config())
        a = bootstrap_resample(ds.trials, 10, seed=2)
        b = bootstrap_resample(ds.trials, 10, seed=2)
        assert [t.trial_id for t in a] == [t.trial_id for t in b]
