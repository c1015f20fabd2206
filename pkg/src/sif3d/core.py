"""Structured implicit representation: a sum of scaled axis-aligned Gaussians.

A template with N elements defines

    F(x) = sum_i c_i * exp(-sum_d (p_id - x_d)^2 / (2 r_id^2))

with every c_i < 0, so F < 0 everywhere. The surface is the level set
F(x) = isolevel; points with F(x) > isolevel are outside.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _field_kernels as _k
from .errors import InvalidInputError, ParseError

DEFAULT_ISOLEVEL = -0.07
DEFAULT_ALPHA = 100.0
RADIUS_FLOOR = 1e-4
PARAMS_PER_ELEMENT = 7
FORMAT_VERSION = 1


def _as_point(x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (3,):
        raise InvalidInputError(f"expected 3-vectors, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("query coordinates must be finite")
    return x


def _sigmoid(z):
    # split by sign so neither branch overflows
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass(frozen=True)
class ShapeElement:
    c: float
    p: tuple
    r: tuple

    def __post_init__(self):
        p = tuple(float(v) for v in self.p)
        r = tuple(float(v) for v in self.r)
        if len(p) != 3 or len(r) != 3:
            raise InvalidInputError("center and radii must be 3-vectors")
        c = float(self.c)
        if not (c < 0.0 and math.isfinite(c)):
            raise InvalidInputError(f"element constant must be finite and negative, got {c}")
        if not all(v > 0.0 and math.isfinite(v) for v in r):
            raise InvalidInputError(f"element radii must be finite and positive, got {r}")
        if not all(math.isfinite(v) for v in p):
            raise InvalidInputError("element center must be finite")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "r", r)

    def to_vector(self):
        return np.array((self.c,) + self.p + self.r)


class Template:
    """N shape elements plus the isolevel, stored as parallel arrays.

    The flat parameter vector lays out each element as
    (c, p_x, p_y, p_z, r_x, r_y, r_z).
    """

    __slots__ = ("constants", "centers", "radii", "isolevel")

    def __init__(self, constants, centers, radii, isolevel=DEFAULT_ISOLEVEL):
        constants = np.array(constants, dtype=float).reshape(-1)
        centers = np.array(centers, dtype=float).reshape(-1, 3)
        radii = np.array(radii, dtype=float).reshape(-1, 3)
        n = constants.shape[0]
        if n < 1:
            raise InvalidInputError("a template needs at least one element")
        if centers.shape[0] != n or radii.shape[0] != n:
            raise InvalidInputError("constants, centers and radii disagree on the element count")
        if not np.all(np.isfinite(constants)) or not np.all(constants < 0):
            raise InvalidInputError("all element constants must be finite and negative")
        if not np.all(np.isfinite(radii)) or not np.all(radii > 0):
            raise InvalidInputError("all element radii must be finite and positive")
        if not np.all(np.isfinite(centers)):
            raise InvalidInputError("element centers must be finite")
        isolevel = float(isolevel)
        if not isolevel < 0:
            raise InvalidInputError(f"isolevel must be negative, got {isolevel}")
        for a in (constants, centers, radii):
            a.flags.writeable = False
        self.constants = constants
        self.centers = centers
        self.radii = radii
        self.isolevel = isolevel

    # construction ---------------------------------------------------------

    @classmethod
    def from_elements(cls, elements, isolevel=DEFAULT_ISOLEVEL):
        elements = list(elements)
        if not elements:
            raise InvalidInputError("a template needs at least one element")
        return cls(
            [e.c for e in elements],
            [e.p for e in elements],
            [e.r for e in elements],
            isolevel,
        )

    @classmethod
    def from_vector(cls, theta, isolevel=DEFAULT_ISOLEVEL):
        theta = np.asarray(theta, dtype=float)
        if theta.ndim != 1 or theta.size % PARAMS_PER_ELEMENT or theta.size == 0:
            raise InvalidInputError(f"parameter vector length {theta.size} is not a positive multiple of 7")
        blocks = theta.reshape(-1, PARAMS_PER_ELEMENT)
        return cls(blocks[:, 0], blocks[:, 1:4], blocks[:, 4:7], isolevel)

    def to_vector(self):
        return np.concatenate([self.constants[:, None], self.centers, self.radii], axis=1).reshape(-1)

    @property
    def n_elements(self):
        return self.constants.shape[0]

    def __len__(self):
        return self.n_elements

    @property
    def elements(self):
        return [
            ShapeElement(c, tuple(p), tuple(r))
            for c, p, r in zip(self.constants, self.centers, self.radii)
        ]

    def with_isolevel(self, isolevel):
        return Template(self.constants, self.centers, self.radii, isolevel)

    def translated(self, offset):
        return Template(self.constants, self.centers + np.asarray(offset, dtype=float), self.radii, self.isolevel)

    def __eq__(self, other):
        if not isinstance(other, Template):
            return NotImplemented
        return (
            self.isolevel == other.isolevel
            and np.array_equal(self.constants, other.constants)
            and np.array_equal(self.centers, other.centers)
            and np.array_equal(self.radii, other.radii)
        )

    def __repr__(self):
        return f"Template(n_elements={self.n_elements}, isolevel={self.isolevel})"

    # unconstrained encoding used by the optimizer --------------------------

    def to_unconstrained(self):
        """Map to (log|c|, p, log(r - floor)) per element, shape (N, 7).

        Radii at or below the floor are nudged just above it.
        """
        u = np.empty((self.n_elements, PARAMS_PER_ELEMENT))
        u[:, 0] = np.log(-self.constants)
        u[:, 1:4] = self.centers
        u[:, 4:7] = np.log(np.maximum(self.radii - RADIUS_FLOOR, 1e-12))
        return u

    @classmethod
    def from_unconstrained(cls, u, isolevel=DEFAULT_ISOLEVEL):
        u = np.asarray(u, dtype=float).reshape(-1, PARAMS_PER_ELEMENT)
        return cls(-np.exp(u[:, 0]), u[:, 1:4], RADIUS_FLOOR + np.exp(u[:, 4:7]), isolevel)

    def unconstrained_jacobian(self):
        """Diagonal of d(theta)/d(u) in the (N, 7) layout."""
        jac = np.ones((self.n_elements, PARAMS_PER_ELEMENT))
        jac[:, 0] = self.constants
        jac[:, 4:7] = self.radii - RADIUS_FLOOR
        return jac


@dataclass(frozen=True)
class FieldSample:
    value: float
    grad_position: np.ndarray
    grad_params: np.ndarray | None = None


# -- evaluation ---------------------------------------------------------------


def eval_element(element, x):
    """Value of one element at ``x``; accepts a point or an (M, 3) array."""
    x = _as_point(x)
    d = (np.asarray(element.p) - x) / np.asarray(element.r)
    val = element.c * np.exp(-0.5 * np.sum(d * d, axis=-1))
    return float(val) if np.ndim(val) == 0 else val


def eval_template(template, x):
    x = _as_point(x)
    pts = np.ascontiguousarray(x.reshape(-1, 3))
    vals = _k.field_values(pts, template.constants, template.centers, template.radii)
    return float(vals[0]) if x.ndim == 1 else vals.reshape(x.shape[:-1])


def classify_hard(template, x):
    """1 where the point is outside (F > isolevel), else 0."""
    vals = eval_template(template, x)
    out = (np.asarray(vals) > template.isolevel).astype(np.uint8)
    return int(out) if np.ndim(vals) == 0 else out


def classify_soft(template, x, alpha=DEFAULT_ALPHA):
    if not alpha > 0:
        raise InvalidInputError("alpha must be positive")
    vals = eval_template(template, x)
    g = _sigmoid(alpha * (np.asarray(vals, dtype=float) - template.isolevel))
    return float(g) if np.ndim(vals) == 0 else g


def grad_element(element, x):
    """Return (d f / d theta (7,), d f / d x (3,)) for a single point."""
    x = _as_point(x)
    p = np.asarray(element.p)
    r = np.asarray(element.r)
    e = x - p
    f = element.c * math.exp(-0.5 * float(np.sum((e / r) ** 2)))
    dp = f * e / (r * r)
    dtheta = np.empty(PARAMS_PER_ELEMENT)
    dtheta[0] = f / element.c
    dtheta[1:4] = dp
    dtheta[4:7] = f * e * e / (r * r * r)
    return dtheta, -dp


def grad_template(template, x, params=True):
    x = _as_point(x).reshape(1, 3)
    vals, pos = _k.position_grad(x, template.constants, template.centers, template.radii)
    gp = None
    if params:
        gp = _k.weighted_param_grad(
            x, np.ones(1), template.constants, template.centers, template.radii
        ).reshape(-1)
    return FieldSample(float(vals[0]), pos[0].copy(), gp)


# -- file format ----------------------------------------------------------------


def template_to_dict(template):
    return {
        "version": FORMAT_VERSION,
        "isolevel": template.isolevel,
        "elements": [
            {"c": float(c), "p": [float(v) for v in p], "r": [float(v) for v in r]}
            for c, p, r in zip(template.constants, template.centers, template.radii)
        ],
    }


def template_from_dict(doc):
    try:
        version = doc["version"]
        if version != FORMAT_VERSION:
            raise ParseError(f"unsupported template version {version!r}")
        elements = [ShapeElement(e["c"], e["p"], e["r"]) for e in doc["elements"]]
        return Template.from_elements(elements, doc["isolevel"])
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed template document: {exc}") from exc


def save_template(template, path):
    # json writes floats with repr, which round-trips float64 exactly
    text = json.dumps(template_to_dict(template), indent=1)
    Path(path).write_text(text + "\n")


def load_template(path):
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not a template document ({exc})") from exc
    return template_from_dict(doc)
