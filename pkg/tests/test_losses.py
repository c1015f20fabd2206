import numpy as np
import pytest

from conftest import LEVEL_FACTOR, central_difference, random_template, rel_error
from sif3d.core import Template
from sif3d.errors import InvalidInputError
from sif3d.losses import LossWeights, loss_centers, loss_near_surface, loss_total, loss_uniform
from sif3d.sampling import LabeledSamples

BOX = (np.full(3, -0.5), np.full(3, 0.5))


def batch(rng, m=200):
    return LabeledSamples(rng.uniform(-0.5, 0.5, (m, 3)), (rng.random(m) < 0.4).astype(np.uint8))


def fd_check(template, fn, h):
    theta = template.to_vector()
    return central_difference(lambda v: fn(Template.from_vector(v, template.isolevel)), theta, h)


def test_loss_zero_for_perfect_classification():
    t = Template([-1e4], [[0, 0, 0]], [[0.05] * 3])
    s = LabeledSamples([[0, 0, 0], [0.01, 0, 0], [0.45, 0.45, 0.45]], [0, 0, 1])
    # inside: G = sigmoid(100 * (F + 0.07)) with F ~ -1e4; outside: F ~ 0 gives G = sigmoid(7)
    value, _ = loss_uniform(t, s)
    assert value == pytest.approx((1 - 1 / (1 + np.exp(-7.0))) ** 2 / 3, rel=1e-9)
    assert value < 1e-6


def test_loss_at_level_set_is_quarter_weighted():
    rho = 0.1
    t = Template([-1.0], [[0, 0, 0]], [[rho] * 3])
    r = LEVEL_FACTOR * rho
    dirs = np.eye(3)
    pts = np.vstack([dirs * r, -dirs * r])
    labels = np.array([0, 0, 0, 0, 1, 1])
    value, _ = loss_uniform(t, LabeledSamples(pts, labels))
    assert value == pytest.approx((4 * 10 * 0.25 + 2 * 0.25) / 6, rel=1e-9)


def test_near_surface_loss_has_same_form(rng):
    t = random_template(rng, 4)
    s = batch(rng)
    assert loss_near_surface(t, s)[0] == loss_uniform(t, s)[0]


@pytest.mark.parametrize("alpha, h", [(10.0, 1e-4), (100.0, 1e-6)])
def test_uniform_gradient_matches_finite_differences(rng, alpha, h):
    w = LossWeights(alpha=alpha)
    t = random_template(rng, 5)
    s = batch(rng)
    _, g = loss_uniform(t, s, w)
    assert rel_error(g, fd_check(t, lambda x: loss_uniform(x, s, w)[0], h)) < 1e-5


def test_finite_difference_error_shrinks_quadratically(rng):
    t = random_template(rng, 5)
    s = batch(rng)
    _, g = loss_uniform(t, s)
    errs = [rel_error(g, fd_check(t, lambda x: loss_uniform(x, s)[0], h)) for h in (1e-4, 1e-5)]
    # central differences: error ratio about 100 for a 10x step reduction
    assert errs[1] < errs[0] / 30


def test_center_loss_outside_box_value():
    t = Template([-1.0], [[0.7, 0.0, 0.0]], [[0.05] * 3])
    value, _ = loss_centers(t, BOX)
    assert value == pytest.approx(0.01 * 0.2 ** 2, rel=1e-12)


def test_center_loss_below_lower_face_is_penalized_too():
    t = Template([-1.0], [[0.0, -0.8, 0.0]], [[0.05] * 3])
    value, g = loss_centers(t, BOX)
    assert value == pytest.approx(0.01 * 0.3 ** 2, rel=1e-12)
    assert g[2] < 0  # descent moves the center up, back into the box


def test_center_loss_zero_deep_inside():
    t = Template([-1e3, -1e3], [[0, 0, 0], [0.1, 0, 0]], [[0.1] * 3] * 2)
    value, _ = loss_centers(t, BOX)
    assert value < 1e-20


@pytest.mark.parametrize("alpha, h", [(10.0, 1e-4), (100.0, 1e-6)])
def test_center_gradient_matches_finite_differences(rng, alpha, h):
    w = LossWeights(alpha=alpha)
    t = random_template(rng, 6, spread=0.6)
    assert np.any(np.abs(t.centers) > 0.5)  # exercise both branches
    _, g = loss_centers(t, BOX, w)
    assert rel_error(g, fd_check(t, lambda x: loss_centers(x, BOX, w)[0], h)) < 1e-5


def test_total_gradient_matches_finite_differences(rng):
    w = LossWeights(alpha=10.0)
    t = random_template(rng, 6, spread=0.55)
    u, s = batch(rng), batch(rng)
    g = loss_total(t, u, s, BOX, w).grad
    assert rel_error(g, fd_check(t, lambda x: loss_total(x, u, s, BOX, w).total, 1e-4)) < 1e-5


def test_total_is_weighted_sum(rng):
    t = random_template(rng, 4)
    u, s = batch(rng), batch(rng)
    r = loss_total(t, u, s, BOX)
    assert r.total == pytest.approx(1.0 * r.l_u + 0.1 * r.l_s + r.l_c, rel=1e-12)
    assert r.per_term == (r.l_u, r.l_s, r.l_c)
    r0 = loss_total(t, u, s, BOX, LossWeights(w_s=0.0))
    assert r0.total == pytest.approx(r0.l_u + r0.l_c, rel=1e-12)


def test_doubling_uniform_weight_doubles_its_contribution(rng):
    t = random_template(rng, 4)
    u, s = batch(rng), batch(rng)
    a = loss_total(t, u, s, BOX, LossWeights(w_s=0.0, w_a=0.0, w_b=0.0))
    b = loss_total(t, u, s, BOX, LossWeights(w_u=2.0, w_s=0.0, w_a=0.0, w_b=0.0))
    assert b.total == pytest.approx(2 * a.total, rel=1e-14)
    np.testing.assert_allclose(b.grad, 2 * a.grad, rtol=1e-14)


def test_loss_is_order_invariant(rng):
    t = random_template(rng, 4)
    s = batch(rng, 500)
    perm = rng.permutation(500)
    a, _ = loss_uniform(t, s)
    b, _ = loss_uniform(t, s.take(perm))
    assert abs(a - b) <= 1e-12 * abs(a)


def test_terms_non_negative(rng):
    for _ in range(5):
        t = random_template(rng, 3, spread=0.7)
        r = loss_total(t, batch(rng), batch(rng), BOX)
        assert min(r.l_u, r.l_s, r.l_c, r.total) >= 0


def test_weight_validation():
    with pytest.raises(InvalidInputError):
        LossWeights(w_u=-1.0)
    with pytest.raises(InvalidInputError):
        LossWeights(alpha=0.0)
    with pytest.raises(InvalidInputError):
        loss_uniform(Template([-1.0], [[0, 0, 0]], [[1, 1, 1]]), LabeledSamples(np.zeros((0, 3)), []))
    with pytest.raises(InvalidInputError):
        loss_centers(Template([-1.0], [[0, 0, 0]], [[1, 1, 1]]), (np.ones(3), np.zeros(3)))
