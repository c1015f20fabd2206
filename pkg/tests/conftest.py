import numpy as np
import pytest

from sif3d.core import Template
from sif3d.fitter import FitConfig, classification_accuracy, fit
from sif3d.synthetic import SphereUnion, box_mesh, icosphere

# analytic level-set radius factor for a single element at isolevel -0.07
LEVEL_FACTOR = np.sqrt(2.0 * np.log(1.0 / 0.07))


def random_template(rng, n, spread=0.35, rmin=0.04, rmax=0.15):
    return Template(
        -np.exp(rng.normal(0.0, 0.4, n)),
        rng.uniform(-spread, spread, (n, 3)),
        rng.uniform(rmin, rmax, (n, 3)),
    )


def central_difference(fn, theta, h):
    g = np.empty_like(theta)
    for k in range(len(theta)):
        up = theta.copy()
        dn = theta.copy()
        up[k] += h
        dn[k] -= h
        g[k] = (fn(up) - fn(dn)) / (2 * h)
    return g


def rel_error(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def cube_mesh():
    return box_mesh((-0.25,) * 3, (0.25,) * 3)


@pytest.fixture(scope="session")
def sphere_mesh():
    return icosphere(0.4, 4)


# -- fitted fixtures, shared because each fit takes seconds ----------------------

DIAGONAL_SPHERES = SphereUnion([(-0.25, -0.25, -0.25), (0.25, 0.25, 0.25)], [0.2, 0.2])
AXIS_SPHERES = SphereUnion([(-0.25, 0.0, 0.0), (0.25, 0.0, 0.0)], [0.2, 0.2])


def _fit_shape(shape, elements, steps, seed):
    bbox = shape.bbox()
    uniform = shape.uniform_samples(bbox, 100_000, 1)
    near = shape.near_surface_samples(100_000, 0.1, 2)
    held_out = shape.uniform_samples(bbox, 100_000, 3)
    template, trace = fit(uniform, near, bbox, FitConfig(elements=elements, steps=steps, seed=seed, log_every=250))
    return {
        "template": template, "trace": trace, "bbox": bbox,
        "accuracy": classification_accuracy(template, held_out),
    }


@pytest.fixture(scope="session")
def diagonal_fit():
    import time

    t0 = time.perf_counter()
    out = _fit_shape(DIAGONAL_SPHERES, 8, 5000, 0)
    out["seconds"] = time.perf_counter() - t0
    return out


@pytest.fixture(scope="session")
def axis_fit():
    return _fit_shape(AXIS_SPHERES, 8, 5000, 0)
