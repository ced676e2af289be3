"""Dataset loading, synthetic generation, partitioning, splitting."""

import struct

import numpy as np
import pytest

from fedsim import (
    Batch,
    DataError,
    FormatError,
    ModelSpec,
    PartitionError,
    Shard,
    accuracy,
    gradient,
    load_csv,
    load_idx,
    param_count,
    shard_two_class,
    synth_classes,
    train_test_split,
)


def write_idx_pair(tmp_path, pixels, labels, image_magic=0x803, label_magic=0x801,
                   tag=""):
    """pixels: (n, rows, cols) uint8 array."""
    n, rows, cols = pixels.shape
    images_path = tmp_path / f"images{tag}.idx"
    labels_path = tmp_path / f"labels{tag}.idx"
    with open(images_path, "wb") as f:
        f.write(struct.pack(">IIII", image_magic, n, rows, cols))
        f.write(pixels.astype(np.uint8).tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">II", label_magic, len(labels)))
        f.write(np.asarray(labels, dtype=np.uint8).tobytes())
    return images_path, labels_path


class TestLoadIdx:
    def test_three_image_round_trip(self, tmp_path):
        pixels = np.arange(12, dtype=np.uint8).reshape(3, 2, 2)
        ip, lp = write_idx_pair(tmp_path, pixels, [1, 0, 2])
        shard = load_idx(ip, lp)
        assert len(shard) == 3
        assert shard.features.shape == (3, 4)
        np.testing.assert_array_equal(shard.labels, [1, 0, 2])

    def test_pixel_255_scales_to_one(self, tmp_path):
        pixels = np.full((1, 1, 1), 255, dtype=np.uint8)
        ip, lp = write_idx_pair(tmp_path, pixels, [0])
        shard = load_idx(ip, lp)
        assert shard.features[0, 0] == 1.0

    def test_only_published_magics_accepted(self, tmp_path):
        pixels = np.zeros((1, 2, 2), dtype=np.uint8)
        ip, lp = write_idx_pair(tmp_path, pixels, [0])
        assert len(load_idx(ip, lp)) == 1  # 0x803 / 0x801 accepted
        bad_ip, _ = write_idx_pair(tmp_path, pixels, [0], image_magic=0x804, tag="bi")
        with pytest.raises(FormatError, match="magic"):
            load_idx(bad_ip, lp)
        _, bad_lp = write_idx_pair(tmp_path, pixels, [0], label_magic=0x802, tag="bl")
        with pytest.raises(FormatError, match="magic"):
            load_idx(ip, bad_lp)

    def test_truncated_file_rejected(self, tmp_path):
        pixels = np.zeros((2, 2, 2), dtype=np.uint8)
        ip, lp = write_idx_pair(tmp_path, pixels, [0, 1])
        with open(ip, "r+b") as f:
            f.truncate(18)  # header + 2 of 8 pixel bytes
        with pytest.raises(FormatError, match="pixel bytes"):
            load_idx(ip, lp)

    def test_count_mismatch_rejected(self, tmp_path):
        pixels = np.zeros((2, 2, 2), dtype=np.uint8)
        ip, _ = write_idx_pair(tmp_path, pixels, [0, 1])
        _, lp3 = write_idx_pair(
            tmp_path, np.zeros((3, 2, 2), dtype=np.uint8), [0, 1, 2], tag="3"
        )
        with pytest.raises(FormatError, match="count"):
            load_idx(ip, lp3)


class TestLoadCsv:
    def test_header_and_label_column(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("f0,label,f1\n0.5,1,2.0\n1.5,0,3.0\n")
        shard = load_csv(path)
        np.testing.assert_array_equal(shard.labels, [1, 0])
        np.testing.assert_allclose(shard.features, [[0.5, 2.0], [1.5, 3.0]])

    def test_missing_label_column(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(FormatError, match="label"):
            load_csv(path)


class TestSynthClasses:
    def test_row_count(self):
        shard = synth_classes(2, 100, 5, 3.0, np.random.default_rng(0))
        assert len(shard) == 200
        assert shard.features.shape == (200, 5)

    def test_deterministic_per_seed(self):
        a = synth_classes(3, 10, 4, 2.0, np.random.default_rng(9))
        b = synth_classes(3, 10, 4, 2.0, np.random.default_rng(9))
        assert a.features.tobytes() == b.features.tobytes()

    def test_zero_separation_means_identical_class_distributions(self):
        shard = synth_classes(4, 50, 3, 0.0, np.random.default_rng(1))
        # all class means coincide at the origin, so per-class sample means agree
        per_class = [shard.features[shard.labels == c].mean(axis=0) for c in range(4)]
        for m in per_class:
            assert np.linalg.norm(m) < 1.0  # pure noise around a shared center

    def test_large_separation_centrally_trainable(self):
        # oracle: centralized full-batch training reaches > 0.99 accuracy
        shard = synth_classes(2, 150, 4, 10.0, np.random.default_rng(2))
        model = ModelSpec("logistic-regression", 4, 2, weight_decay=0.0)
        w = np.zeros(param_count(model))
        batch = Batch(shard.features, shard.labels)
        for _ in range(200):
            w = w - 0.5 * gradient(model, w, batch)
        assert accuracy(model, w, shard) > 0.99


def check_plan_invariants(plan, dataset, num_clients, classes_per_client):
    """Brute-force set checks: disjoint, covering, exact label spread."""
    seen = set()
    for idx in plan.assignments:
        as_set = set(int(i) for i in idx)
        assert len(as_set) == len(idx)
        assert not (seen & as_set)
        seen |= as_set
    assert seen == set(range(len(dataset)))
    for idx in plan.assignments:
        assert len(set(dataset.labels[idx].tolist())) == classes_per_client
    sizes = [len(idx) for idx in plan.assignments]
    assert max(sizes) - min(sizes) <= classes_per_client
    assert len(plan.assignments) == num_clients


class TestShardTwoClass:
    def make_balanced(self, num_classes, per_class, rng):
        return synth_classes(num_classes, per_class, 3, 1.0, rng)

    def test_reference_setting_100_clients_10_classes(self):
        rng = np.random.default_rng(3)
        dataset = self.make_balanced(10, 60, rng)  # 600 samples
        plan = shard_two_class(dataset, 100, 2, rng)
        check_plan_invariants(plan, dataset, 100, 2)

    def test_single_client_holds_everything(self):
        rng = np.random.default_rng(4)
        dataset = self.make_balanced(2, 10, rng)
        plan = shard_two_class(dataset, 1, 2, rng)
        assert len(plan.assignments) == 1
        np.testing.assert_array_equal(np.sort(plan.assignments[0]), np.arange(20))

    def test_deterministic_per_seed(self):
        dataset = self.make_balanced(4, 30, np.random.default_rng(5))
        a = shard_two_class(dataset, 6, 2, np.random.default_rng(77))
        b = shard_two_class(dataset, 6, 2, np.random.default_rng(77))
        for x, y in zip(a.assignments, b.assignments):
            np.testing.assert_array_equal(x, y)

    def test_too_many_blocks_for_samples(self):
        dataset = self.make_balanced(2, 3, np.random.default_rng(6))  # 6 samples
        with pytest.raises(PartitionError):
            shard_two_class(dataset, 5, 2, np.random.default_rng(0))

    def test_more_labels_than_blocks(self):
        dataset = self.make_balanced(5, 10, np.random.default_rng(7))
        with pytest.raises(PartitionError):
            shard_two_class(dataset, 2, 2, np.random.default_rng(0))

    def test_fewer_labels_than_classes_per_client(self):
        dataset = self.make_balanced(2, 10, np.random.default_rng(8))
        with pytest.raises(PartitionError):
            shard_two_class(dataset, 2, 3, np.random.default_rng(0))

    @pytest.mark.parametrize("trial", range(25))
    def test_randomized_invariant_suite(self, trial):
        # balanced-ish datasets whose label count divides the block count,
        # the regime where near-even shard sizes are achievable
        rng = np.random.default_rng(1000 + trial)
        classes_per_client = int(rng.integers(1, 4))
        num_labels = int(rng.integers(classes_per_client, 7))
        # pick num_clients so num_labels divides num_clients * classes_per_client
        num_clients = int(rng.integers(1, 8)) * num_labels
        per_class = int(rng.integers(num_clients * classes_per_client // num_labels, 40))
        dataset = self.make_balanced(num_labels, per_class, rng)
        plan = shard_two_class(dataset, num_clients, classes_per_client, rng)
        check_plan_invariants(plan, dataset, num_clients, classes_per_client)


class TestTrainTestSplit:
    def test_sizes_eight_two(self):
        rng = np.random.default_rng(11)
        shard = Shard(rng.normal(size=(10, 2)), np.array([0, 1] * 5))
        train, test = train_test_split(shard, 0.2, rng)
        assert (len(train), len(test)) == (8, 2)

    def test_union_and_disjointness(self):
        rng = np.random.default_rng(12)
        shard = Shard(rng.normal(size=(23, 3)), rng.integers(0, 3, size=23))
        train, test = train_test_split(shard, 0.3, rng)
        rows = {tuple(r) for r in shard.features}
        split_rows = [tuple(r) for r in np.vstack([train.features, test.features])]
        assert len(split_rows) == 23
        assert set(split_rows) == rows

    def test_stratification_within_one_sample(self):
        rng = np.random.default_rng(13)
        labels = np.repeat([0, 1, 2], [30, 20, 10])
        shard = Shard(rng.normal(size=(60, 2)), labels)
        _, test = train_test_split(shard, 0.25, rng)
        n_test = len(test)
        for lab, n_lab in [(0, 30), (1, 20), (2, 10)]:
            got = int(np.sum(test.labels == lab))
            ideal = n_lab * n_test / 60
            assert abs(got - ideal) <= 1

    def test_too_small_shard_raises(self):
        shard = Shard(np.zeros((1, 2)), np.array([0]))
        with pytest.raises(DataError):
            train_test_split(shard, 0.5, np.random.default_rng(0))
        ten = Shard(np.zeros((10, 2)), np.zeros(10, dtype=int))
        with pytest.raises(DataError):
            train_test_split(ten, 0.96, np.random.default_rng(0))  # empty train side
