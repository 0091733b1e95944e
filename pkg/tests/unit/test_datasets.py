import numpy as np
import pytest

from aot.errors import DatasetFormatError, InvalidInputError
from aot.models.dataset import Dataset, DatasetConfig, NormalizationRecord
from aot.services.datasets import (
    build_dataset,
    get_all_generator_definitions,
    load_csv,
    normalize,
    run_generator,
    split,
    write_csv,
)
from aot.services.datasets.generators import checkerboard_cells, circle_means

pytestmark = pytest.mark.unit


def test_registry_lists_every_generator():
    names = {d["name"] for d in get_all_generator_definitions()}
    assert {"mixture", "ring", "checkerboard", "gaussian", "point_mass"} <= names
    labeled = {d["name"] for d in get_all_generator_definitions() if d["labeled"]}
    assert labeled == {"mixture", "checkerboard"}


def test_unknown_generator_and_parameters():
    rng = np.random.default_rng(0)
    with pytest.raises(InvalidInputError) as info:
        run_generator("banana", 10, rng, {})
    assert info.value.field == "generator"
    with pytest.raises(InvalidInputError) as info:
        run_generator("ring", 10, rng, {"sides": 3})
    assert info.value.field == "params"


@pytest.mark.parametrize("name", ["mixture", "ring", "checkerboard", "gaussian"])
def test_generators_are_seeded(name):
    a = run_generator(name, 200, np.random.default_rng(9), {})
    b = run_generator(name, 200, np.random.default_rng(9), {})
    c = run_generator(name, 200, np.random.default_rng(10), {})
    assert a.size == 200
    np.testing.assert_array_equal(a.points, b.points)
    assert not np.array_equal(a.points, c.points)


def test_mixture_modes_and_labels():
    dataset = run_generator("mixture", 4000, np.random.default_rng(1), {"k_modes": 4})
    assert dataset.class_count == 4
    centres = circle_means(4)
    np.testing.assert_allclose(centres[0], [2.0, 0.0])
    for k in range(4):
        members = dataset.points[dataset.labels == k]
        assert 850 < members.shape[0] < 1150
        np.testing.assert_allclose(members.mean(axis=0), centres[k], atol=0.05)


def test_mixture_rejects_inconsistent_means():
    with pytest.raises(InvalidInputError):
        run_generator(
            "mixture", 10, np.random.default_rng(0), {"k_modes": 3, "means": [[0, 0]]}
        )


def test_ring_radius():
    dataset = run_generator("ring", 2000, np.random.default_rng(2), {"std": 0.01})
    radii = np.linalg.norm(dataset.points, axis=1)
    assert abs(radii.mean() - 2.0) < 0.01
    assert dataset.labels is None


def test_checkerboard_points_fall_in_permitted_cells():
    dataset = run_generator("checkerboard", 1000, np.random.default_rng(3), {})
    cells = checkerboard_cells(4)
    assert dataset.class_count == cells.shape[0] == 8
    index = np.floor(dataset.points + 2.0).astype(int)
    np.testing.assert_array_equal(index, cells[dataset.labels])
    assert np.all(index.sum(axis=1) % 2 == 0)


def test_csv_round_trip_is_exact(tmp_path, rng):
    points = rng.standard_normal((20, 3)) * 1e3
    labels = rng.integers(0, 4, size=20)
    path = tmp_path / "data.csv"
    write_csv(path, points, labels)
    loaded = load_csv(path)
    np.testing.assert_array_equal(loaded.points, points)
    np.testing.assert_array_equal(loaded.labels, labels)
    assert loaded.class_count == labels.max() + 1


def test_csv_without_labels(tmp_path):
    path = tmp_path / "plain.csv"
    path.write_text("a,b\n1,2\n\n3.5,-4e-3\n")
    loaded = load_csv(path)
    assert loaded.labels is None
    np.testing.assert_array_equal(loaded.points, [[1.0, 2.0], [3.5, -4e-3]])


@pytest.mark.parametrize(
    "text, line",
    [
        ("", 1),
        ("x0,x1\n", 2),
        ("x0,x1\n1,2\n3\n", 3),
        ("x0,x1\n1,2\n3,abc\n", 3),
        ("x0,x1\n1,nan\n", 2),
        ("x0,x1,label\n1,2,0\n1,2,0.5\n", 3),
        ("x0,x1,label\n1,2,-1\n", 2),
        ("label,x0\n0,1\n", 1),
    ],
)
def test_csv_errors_name_the_line(tmp_path, text, line):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(DatasetFormatError) as info:
        load_csv(path)
    assert info.value.line == line
    assert str(info.value).startswith(f"line {line}:")
    assert info.value.field == "path"


def test_missing_csv_is_a_format_error(tmp_path):
    with pytest.raises(DatasetFormatError):
        load_csv(tmp_path / "missing.csv")


def test_normalize_standardises_and_inverts(rng):
    raw = Dataset(points=rng.normal([5.0, -3.0], [2.0, 0.1], size=(500, 2)))
    normalised = normalize(raw, 0.5)
    np.testing.assert_allclose(normalised.points.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(normalised.points.std(axis=0), 0.5, rtol=1e-12)
    np.testing.assert_allclose(
        normalised.denormalize(normalised.points), raw.points, rtol=1e-12
    )


def test_normalize_composes_records(rng):
    raw = Dataset(points=rng.normal(3.0, 2.0, size=(100, 2)))
    twice = normalize(normalize(raw, 0.5), 1.0)
    np.testing.assert_allclose(twice.denormalize(twice.points), raw.points)


def test_normalize_leaves_flat_dimensions_unscaled():
    raw = Dataset(points=[[1.0, 4.0], [3.0, 4.0]])
    normalised = normalize(raw)
    np.testing.assert_array_equal(normalised.normalization.scale[1], 1.0)
    np.testing.assert_array_equal(normalised.points[:, 1], [0.0, 0.0])


def test_normalize_rejects_bad_target():
    with pytest.raises(InvalidInputError):
        normalize(Dataset(points=[[0.0], [1.0]]), 0.0)


def test_split_is_seeded_and_disjoint(rng):
    dataset = Dataset(
        points=np.arange(40.0).reshape(20, 2),
        labels=np.arange(20) % 2,
        class_count=2,
    )
    train, held = split(dataset, 0.25, np.random.default_rng(5))
    again, _ = split(dataset, 0.25, np.random.default_rng(5))
    assert (train.size, held.size) == (15, 5)
    np.testing.assert_array_equal(train.points, again.points)
    combined = np.sort(np.concatenate([train.points[:, 0], held.points[:, 0]]))
    np.testing.assert_array_equal(combined, dataset.points[:, 0])
    np.testing.assert_array_equal(held.labels, (held.points[:, 0] / 2).astype(int) % 2)


@pytest.mark.parametrize("held_out", [0.0, 1.0, 0.01])
def test_split_rejects_empty_parts(held_out):
    dataset = Dataset(points=np.zeros((10, 2)))
    with pytest.raises(InvalidInputError):
        split(dataset, held_out, np.random.default_rng(0))


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(points=[1.0, 2.0])
    with pytest.raises(ValueError):
        Dataset(points=[[np.inf, 0.0]])
    with pytest.raises(ValueError):
        Dataset(points=[[0.0], [1.0]], labels=[0, 2], class_count=2)
    with pytest.raises(ValueError):
        NormalizationRecord(shift=[0.0], scale=[0.0])


def test_build_dataset_from_generator_and_csv(tmp_path):
    config = DatasetConfig(generator="ring", count=64)
    dataset = build_dataset(config, np.random.default_rng(0))
    assert dataset.size == 64
    assert dataset.normalization is not None
    np.testing.assert_allclose(dataset.points.std(axis=0), 0.5)

    path = tmp_path / "points.csv"
    write_csv(path, np.array([[1.0, 2.0], [3.0, 5.0]]))
    raw = build_dataset(
        DatasetConfig(csv=str(path), normalize=False), np.random.default_rng(0)
    )
    np.testing.assert_array_equal(raw.points, [[1.0, 2.0], [3.0, 5.0]])
    assert raw.normalization is None


def test_dataset_config_rejects_unknown_keys():
    with pytest.raises(ValueError):
        DatasetConfig(generator="ring", size=3)
