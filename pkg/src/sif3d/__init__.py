"""Structured implicit functions: shape templates built from scaled
anisotropic Gaussians, fitted to meshes by gradient descent."""

from .analysis import (
    CorrespondenceMap,
    FScore,
    TemplateCoordinates,
    correspond,
    f_score,
    f_score_detail,
    interpolate,
    template_coordinates,
)
from .core import (
    DEFAULT_ISOLEVEL,
    FieldSample,
    ShapeElement,
    Template,
    classify_hard,
    classify_soft,
    eval_element,
    eval_template,
    grad_element,
    grad_template,
    load_template,
    save_template,
)
from .errors import (
    EmptyMeshError,
    InvalidInputError,
    MeshParseError,
    NumericalError,
    ParseError,
    SifError,
)
from .fitter import FitConfig, FitTrace, classification_accuracy, fit, init_template
from .isosurface import ScalarField, accumulate_field, extract, filter_components, influence_bounds, marching_cubes
from .losses import LossReport, LossWeights, loss_centers, loss_near_surface, loss_total, loss_uniform
from .mesh import NormalizeTransform, TriangleMesh, load_mesh, normalize_mesh, save_mesh
from .query import MeshQuery
from .sampling import (
    LabeledSamples,
    SurfaceSamples,
    read_samples,
    sample_near_surface,
    sample_surface,
    sample_uniform,
    write_samples,
)
from .voxel import VoxelGrid, extract_watertight, voxelize_and_fill

__version__ = "0.1.0"
