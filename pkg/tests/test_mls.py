import math

import numpy as np
import pytest

from scatterqual.cover import GoodCover
from scatterqual.distance import NormEstimate
from scatterqual.domain import ConvexDomain
from scatterqual.errors import InputError, NumericalFailure
from scatterqual.families import grid_points, random_points
from scatterqual.mls import (
    MLSOperator,
    approximate,
    lq_error,
    mls_weights,
    poly_dim,
    wendland,
)
from scatterqual.points import PointSet
from scatterqual.tables import loglog_slope
from scatterqual.testfunctions import polynomial, sine_product


@pytest.fixture(scope="module")
def square():
    return ConvexDomain.unit_cube(2)


@pytest.fixture(scope="module")
def scattered(square):
    return random_points(square, 600, np.random.SeedSequence(7))


def test_wendland_profile():
    assert wendland(0.0) == 1.0
    assert wendland(1.0) == 0.0
    assert wendland(1.5) == 0.0
    assert wendland(0.5) == pytest.approx(0.0625 * 3.0)


def test_poly_dim():
    assert [poly_dim(2, m) for m in range(4)] == [1, 3, 6, 10]
    assert poly_dim(3, 2) == 10


@pytest.mark.parametrize("degree", [0, 1, 2, 3])
def test_partition_of_unity_and_reproduction(scattered, degree):
    Y = np.random.default_rng(1).uniform(0.05, 0.95, size=(300, 2))
    op = MLSOperator(scattered, degree=degree)
    W, deg, _, failed = op.weight_matrix(Y, 0.15)
    assert not failed.any() and np.all(deg == degree)
    assert np.max(np.abs(np.asarray(W.sum(axis=1)).ravel() - 1.0)) < 1e-10
    X = scattered.points
    for k in range(1, degree + 1):
        for a in range(k + 1):
            mono = lambda Z: Z[:, 0] ** a * Z[:, 1] ** (k - a)
            assert np.max(np.abs(W @ mono(X) - mono(Y))) < 1e-9


def test_weights_are_local(scattered):
    y = np.array([0.4, 0.6])
    lw = mls_weights(y, scattered, 2, 0.12)
    dist = np.linalg.norm(scattered.points[lw.indices] - y, axis=1)
    assert np.all(dist < lw.radius)
    assert lw.dense().shape == (scattered.n,)
    assert lw.lebesgue >= 1.0 - 1e-12


def test_single_point_weights_match_matrix(scattered):
    Y = np.array([[0.3, 0.3], [0.7, 0.2]])
    op = MLSOperator(scattered, degree=2)
    W = op.weight_matrix(Y, 0.15)[0].toarray()
    for i, y in enumerate(Y):
        assert np.allclose(mls_weights(y, scattered, 2, 0.15, operator=op).dense(), W[i], atol=1e-14)


def test_radius_grows_before_degree_drops(square):
    P = grid_points(square, 400)
    op = MLSOperator(P, degree=2)
    # radius below the spacing: too few neighbours for a quadratic
    W, deg, rad, failed = op.weight_matrix(np.array([[0.5, 0.5]]), 0.03)
    assert not failed[0] and deg[0] == 2 and rad[0] > 0.03


def test_collinear_points_fall_back_to_constants():
    t = np.linspace(0, 1, 30)
    P = PointSet(np.column_stack([t, np.full_like(t, 0.5)]))
    op = MLSOperator(P, degree=2)
    W, deg, _, failed = op.weight_matrix(np.array([[0.5, 0.7]]), 0.4)
    # one direction is never resolved, so only the constant fit survives
    assert not failed[0] and deg[0] == 0
    assert W.sum() == pytest.approx(1.0, abs=1e-12)


def test_isolated_point_raises():
    P = PointSet(np.array([[0.0, 0.0]]))
    with pytest.raises(NumericalFailure, match="isolated"):
        mls_weights([1.0, 1.0], P, 1, 0.1)


def test_isolated_rows_reported_not_raised():
    P = PointSet(np.array([[0.0, 0.0]]))
    res = approximate(lambda X: X[:, 0], P, np.array([[1.0, 1.0], [0.01, 0.0]]),
                      covering=NormEstimate(0.02, 0.02, 0.02, "test", math.inf), degree=0)
    assert res.n_failed == 1 and np.isnan(res.values[0]) and res.values[1] == 0.0


def test_input_validation(scattered, square):
    op = MLSOperator(scattered)
    with pytest.raises(InputError):
        op.weight_matrix(np.zeros((1, 3)), 0.1)
    with pytest.raises(InputError):
        op.weight_matrix(np.zeros((1, 2)), 0.0)
    with pytest.raises(InputError):
        MLSOperator(scattered, degree=-1)
    with pytest.raises(InputError):
        approximate(np.sin, scattered, np.zeros((1, 2)), "nearest", domain=square)
    with pytest.raises(InputError):
        approximate(np.sin, scattered, np.zeros((1, 2)), "global")
    with pytest.raises(InputError):
        approximate(np.sin, scattered, np.zeros((1, 2)), "good-cover")


def test_linear_function_has_zero_error(square, scattered):
    f = polynomial({(1, 0): 3.0, (0, 1): -2.0, (0, 0): 7.0}, 2)
    approx = lambda Y: approximate(f, scattered, Y, domain=square, degree=1).values
    for q in (1.0, 2.0, math.inf):
        assert lq_error(f, approx, square, q, 1 / 64).value < 1e-10


def test_l1_below_linf_times_volume(square, scattered):
    f = sine_product(2)
    approx = lambda Y: approximate(f, scattered, Y, domain=square).values
    e1 = lq_error(f, approx, square, 1.0, 1 / 64)
    einf = lq_error(f, approx, square, math.inf, 1 / 64)
    assert e1.value / square.volume() <= einf.value
    assert e1.method == "grid" and e1.refined is not None


def test_smooth_rate_on_grids(square):
    f = sine_product(2)
    hs, errs = [], []
    for k in (16, 32, 64):
        P = grid_points(square, k * k)
        approx = lambda Y: approximate(f, P, Y, domain=square, degree=2).values
        hs.append(1.0 / k)
        errs.append(lq_error(f, approx, square, math.inf, 1 / (4 * k)).value)
    assert loglog_slope(hs, errs).slope == pytest.approx(3.0, rel=0.15)


def test_lebesgue_constant_bounded_on_grids(square):
    Y = np.random.default_rng(0).uniform(size=(2000, 2))
    lebs = []
    for k in (16, 32, 64):
        res = approximate(sine_product(2), grid_points(square, k * k), Y, domain=square)
        lebs.append(res.lebesgue.max())
    assert max(lebs) < 10 and max(lebs) / min(lebs) < 1.5


def test_thread_count_does_not_change_results(scattered):
    Y = np.random.default_rng(2).uniform(size=(9000, 2))
    op = MLSOperator(scattered, degree=2)
    W1 = op.weight_matrix(Y, 0.12, threads=1)[0]
    W4 = op.weight_matrix(Y, 0.12, threads=4)[0]
    assert (W1 != W4).nnz == 0


def test_equal_radius_cover_matches_global(square, scattered):
    cover = GoodCover(centers=np.array([[0.5, 0.5]]), radii=np.array([1.0]), c=0.5,
                      multiplicity_observed=1, candidates=np.array([[0.5, 0.5]]))
    cov = NormEstimate(0.05, 0.04, 0.5 * 1.0, "test", math.inf)
    Y = np.random.default_rng(3).uniform(size=(200, 2))
    f = sine_product(2)
    a = approximate(f, scattered, Y, "global", covering=cov, support_factor=0.2)
    b = approximate(f, scattered, Y, "good-cover", cover=cover, support_factor=0.2)
    assert np.array_equal(a.values, b.values)
