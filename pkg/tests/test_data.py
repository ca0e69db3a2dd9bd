import numpy as np
import pytest

from memo_qcd.data import (
    GENERATORS,
    Dataset,
    DatasetFormatException,
    ScaleTransform,
    concentric_circles,
    gaussian_blobs,
    generate,
    read_csv,
    scale_to_interval,
    spirals,
    two_moons,
    write_csv,
)


def test_two_moons_lies_on_arcs():
    """Test that noise-free moons lie on their half circles."""
    points = two_moons(n=101, noise_sd=0.0, seed=0).points
    outer = np.abs(np.hypot(points[:, 0], points[:, 1]) - 1.0)
    inner = np.abs(np.hypot(points[:, 0] - 1.0, points[:, 1] - 0.5) - 1.0)

    assert points.shape == (101, 2)
    assert np.all(np.minimum(outer, inner) < 1e-12)
    assert np.sum(outer < 1e-12) >= 50


def test_generators_are_reproducible():
    """Test seeding and sizes of every generator."""
    for name in GENERATORS:
        first = generate(name, 50, seed=4)
        assert first.n == 50
        assert first.d == 2
        assert first == generate(name, 50, seed=4)
        assert first.generator == name
        assert first.seed == 4
        assert first != generate(name, 50, seed=5)


def test_concentric_circles_radii():
    """Test the radii of noise-free circles."""
    points = concentric_circles(n=40, noise_sd=0.0).points
    radii = np.hypot(points[:, 0], points[:, 1])
    assert np.all(np.minimum(np.abs(radii - 0.5), np.abs(radii - 1.0)) < 1e-12)


def test_gaussian_blobs():
    """Test blob placement."""
    points = gaussian_blobs(n=30, centers=[(1.0, 2.0)], sd=0.0).points
    np.testing.assert_allclose(points, np.tile([1.0, 2.0], (30, 1)))

    three_d = gaussian_blobs(n=10, centers=[(0, 0, 0), (5, 5, 5)], sd=0.1)
    assert three_d.d == 3
    with pytest.raises(ValueError):
        gaussian_blobs(n=10, centers=[(0, 0, 0, 0, 0)])


def test_spirals_are_point_symmetric():
    """Test that the two noise-free arms are reflections of each other."""
    points = spirals(n=20, noise_sd=0.0).points
    order = np.lexsort(points.T)
    mirrored = -points
    np.testing.assert_allclose(points[order], mirrored[np.lexsort(mirrored.T)], atol=1e-12)


def test_generator_validation():
    """Test rejected generator inputs."""
    with pytest.raises(ValueError):
        two_moons(n=1)
    with pytest.raises(ValueError):
        two_moons(n=10, noise_sd=-1.0)
    with pytest.raises(ValueError):
        generate("swiss-roll", 10)


def test_dataset_validation():
    """Test dataset construction."""
    assert Dataset([1.0, 2.0]).d == 1
    with pytest.raises(ValueError):
        Dataset([[1.0, np.nan]])
    with pytest.raises(ValueError):
        Dataset(np.zeros((2, 2, 2)))
    with pytest.raises(ValueError):
        Dataset(np.zeros((0, 2))).bounds()


def test_scale_to_interval(rng):
    """Test min-max scaling and its inverse."""
    dataset = Dataset(rng.normal(size=(50, 2)) * [3.0, 0.1] + [10.0, -2.0])
    scaled = scale_to_interval(dataset, -3.0, 3.0)
    low, high = scaled.bounds()

    np.testing.assert_array_equal(low, [-3.0, -3.0])
    np.testing.assert_array_equal(high, [3.0, 3.0])
    np.testing.assert_allclose(scaled.raw_points(), dataset.points, atol=1e-12)
    np.testing.assert_allclose(scaled.scale_transform.inverse(scaled.points), dataset.points, atol=1e-12)


def test_scaling_is_not_compounded(rng):
    """Test that rescaling starts from the original data."""
    dataset = Dataset(rng.uniform(5, 7, size=(20, 1)))
    twice = scale_to_interval(scale_to_interval(dataset, 0.0, 1.0), -3.0, 3.0)
    np.testing.assert_allclose(twice.scale_transform.low, dataset.points.min(axis=0))
    np.testing.assert_allclose(twice.raw_points(), dataset.points, atol=1e-12)


def test_scaling_data_spanning_the_interval():
    """Test that data already spanning the interval is left in place."""
    points = np.array([[-3.0], [-1.0], [0.5], [3.0]])
    np.testing.assert_allclose(scale_to_interval(Dataset(points), -3.0, 3.0).points, points, atol=1e-12)


def test_scaling_zero_spread():
    """Test that a constant dimension maps onto the midpoint with a warning."""
    dataset = Dataset([[1.0, 0.0], [1.0, 2.0]])
    with pytest.warns(UserWarning, match="zero spread"):
        scaled = scale_to_interval(dataset, -3.0, 3.0)
    np.testing.assert_allclose(scaled.points[:, 0], 0.0)
    np.testing.assert_allclose(scaled.points[:, 1], [-3.0, 3.0])


def test_scale_transform_serialization():
    """Test the dictionary form of a transform."""
    transform = ScaleTransform([0.0, 1.0], [2.0, 3.0], -1.0, 1.0)
    restored = ScaleTransform.from_dict(transform.to_dict())
    np.testing.assert_array_equal(restored.low, transform.low)
    np.testing.assert_allclose(restored.apply([[1.0, 2.0]]), [[0.0, 0.0]])
    with pytest.raises(ValueError):
        ScaleTransform([1.0], [0.0], -1.0, 1.0)


def test_csv_round_trip(tmp_path):
    """Test that written datasets are read back exactly."""
    dataset = two_moons(n=30, seed=8)
    path = tmp_path / "moons.csv"
    write_csv(dataset, path)

    assert path.read_text().splitlines()[0] == "# d=2 generator=two-moons seed=8"
    restored = read_csv(path)
    assert restored == dataset
    assert restored.generator == "two-moons"
    assert restored.seed == 8


def test_read_csv_without_header(tmp_path):
    """Test a plain numeric file."""
    path = tmp_path / "plain.csv"
    path.write_text("1.5, 2\n-3,4e-1\n")
    dataset = read_csv(path)
    np.testing.assert_array_equal(dataset.points, [[1.5, 2.0], [-3.0, 0.4]])
    assert dataset.generator is None


@pytest.mark.parametrize(
    "content, message",
    [
        ("1,2\n3\n", "data row 2, column 2"),
        ("1,2\n3,4,5\n", "line 2"),
        ("1,2\n3,abc\n", '"abc" is not a finite number'),
        ("1,2\ninf,4\n", "data row 2, column 1"),
        ("", "no data points"),
        ("# d=2\n", "no data points"),
        ("# d=3\n1,2\n", "declares d=3"),
    ],
)
def test_read_csv_errors(tmp_path, content, message):
    """Test that malformed files name the offending row."""
    path = tmp_path / "broken.csv"
    path.write_text(content)
    with pytest.raises(DatasetFormatException, match=message):
        read_csv(path)
