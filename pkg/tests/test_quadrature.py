import math
import warnings

import numpy as np
import pytest
from scipy import integrate

from scatterqual.domain import ConvexDomain
from scatterqual.errors import InputError
from scatterqual.quadrature import (
    IntegrationSpec,
    Kernel,
    equal_weights,
    gram,
    initial_error_sq,
    kernel_embedding,
    quadrature_rule,
    wce_squared,
    worst_case_error,
)

UNIT = ConvexDomain.box([0.0], [1.0])


def test_kernel_validation():
    with pytest.raises(InputError):
        Kernel(1.0)
    with pytest.raises(InputError):
        Kernel(0.5, lengthscale=0.0)
    assert Kernel.for_sobolev(1, 1).nu == 0.5
    assert Kernel.for_sobolev(2, 1).nu == 1.5
    with pytest.raises(InputError):
        Kernel.for_sobolev(2, 2)


def test_gram_examples():
    k = Kernel(0.5)
    assert np.array_equal(gram(np.array([[0.3]]), k).matrix, [[1.0]])
    G = gram(np.array([[0.0], [1.0]]), k)
    assert G.matrix[0, 1] == pytest.approx(math.exp(-1.0), abs=1e-15)
    assert G.jitter == 0.0


@pytest.mark.parametrize("nu", [0.5, 1.5, 2.5])
def test_gram_symmetric_positive_definite(nu):
    P = np.random.default_rng(0).uniform(size=(40, 2))
    G = gram(P, Kernel(nu, 1.0, 2)).matrix
    assert np.array_equal(G, G.T)
    assert np.linalg.eigvalsh(G).min() > 0


def test_single_point_closed_forms():
    rule = quadrature_rule(UNIT, np.array([[0.5]]), Kernel(0.5))
    w_star = 2 - 2 * math.exp(-0.5)
    assert rule.weights[0] == pytest.approx(w_star, abs=1e-12)
    assert rule.initial_error_sq == pytest.approx(2 / math.e, abs=1e-14)
    wce, raw = worst_case_error(rule, return_raw=True)
    assert raw == pytest.approx(2 / math.e - w_star**2, abs=1e-12)
    assert wce == pytest.approx(math.sqrt(2 / math.e - w_star**2), abs=1e-12)


@pytest.mark.parametrize("nu", [0.5, 1.5])
def test_closed_forms_match_numerical_integration(nu):
    k = Kernel(nu, 0.7)
    P = np.array([[0.0], [0.2], [0.9]])
    b = kernel_embedding(UNIT, P, k)
    for x, bx in zip(P[:, 0], b):
        ref = integrate.quad(lambda t: k.radial(abs(t - x)), 0, 1, points=[x], epsabs=1e-14)[0]
        assert bx == pytest.approx(ref, rel=1e-10)
    c = initial_error_sq(UNIT, k)
    ref = integrate.dblquad(lambda y, x: k.radial(abs(x - y)), 0, 1, 0, 1, epsabs=1e-13)[0]
    assert c == pytest.approx(ref, rel=1e-8)


@pytest.mark.parametrize("nu", [0.5, 1.5])
def test_qmc_agrees_with_closed_form(nu):
    k = Kernel(nu)
    P = np.linspace(0, 1, 7)[:, None]
    spec = IntegrationSpec(closed_form=False)
    b_qmc, disc = kernel_embedding(UNIT, P, k, spec, return_discrepancy=True)
    assert np.allclose(b_qmc, kernel_embedding(UNIT, P, k), atol=1e-6)
    assert disc < 1e-5
    assert initial_error_sq(UNIT, k, spec) == pytest.approx(initial_error_sq(UNIT, k), abs=1e-5)


def test_qmc_is_seeded():
    dom = ConvexDomain.unit_cube(2)
    k = Kernel(1.5, 1.0, 2)
    P = np.array([[0.2, 0.3]])
    a = kernel_embedding(dom, P, k, IntegrationSpec(10, seed=3))
    b = kernel_embedding(dom, P, k, IntegrationSpec(10, seed=3))
    c = kernel_embedding(dom, P, k, IntegrationSpec(10, seed=4))
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_dimension_mismatch():
    with pytest.raises(InputError):
        kernel_embedding(UNIT, np.zeros((1, 2)), Kernel(0.5, 1.0, 2))


@pytest.fixture(scope="module")
def rule():
    P = np.random.default_rng(3).uniform(size=(25, 1))
    return quadrature_rule(UNIT, P, Kernel(0.5))


def test_optimal_weights_identity(rule):
    w = rule.weights
    assert rule.residual < 1e-10
    assert wce_squared(rule, w) == pytest.approx(rule.initial_error_sq - w @ rule.embedding, abs=1e-10)


def test_optimal_weights_beat_perturbations(rule):
    best = worst_case_error(rule)
    rng = np.random.default_rng(0)
    for _ in range(20):
        assert worst_case_error(rule, rule.weights + 1e-3 * rng.standard_normal(rule.weights.size)) >= best
    assert worst_case_error(rule, equal_weights(rule, 1.0)) >= best


def test_wrong_weight_length(rule):
    with pytest.raises(InputError):
        wce_squared(rule, np.ones(3))


def test_permutation_invariance():
    P = np.random.default_rng(4).uniform(size=(30, 1))
    k = Kernel(1.5)
    a = worst_case_error(quadrature_rule(UNIT, P, k))
    b = worst_case_error(quadrature_rule(UNIT, P[::-1], k))
    assert a == pytest.approx(b, abs=1e-10)


def test_adding_points_does_not_increase_error():
    P = np.random.default_rng(5).uniform(size=(60, 1))
    k = Kernel(0.5)
    errs = [worst_case_error(quadrature_rule(UNIT, P[:m], k)) for m in (5, 10, 20, 40, 60)]
    assert all(b <= a + 1e-12 for a, b in zip(errs, errs[1:]))


def test_duplicates_collapse_with_warning():
    P = np.array([[0.2], [0.5], [0.2]])
    with pytest.warns(RuntimeWarning, match="duplicate"):
        rule = quadrature_rule(UNIT, P, Kernel(0.5))
    assert rule.points.shape[0] == 2


def test_near_duplicates_get_jitter():
    P = np.array([[0.5], [0.5 + 1e-15], [0.7]])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        G = gram(P, Kernel(2.5))
    assert G.jitter > 0
    rule = quadrature_rule(UNIT, P, Kernel(2.5))
    assert rule.jitter == G.jitter
    assert math.isfinite(worst_case_error(rule))
