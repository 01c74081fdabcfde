import numpy as np
import pytest

from core.field_model import DesignLaw, Domain, FieldSpec, Sheet, SurfaceDataset
from core.parametric import ConstantHurst, ConstantNoise, identity_deformation


@pytest.fixture
def domain():
    return Domain(1.0, 2.0, 1.0, 2.0)


@pytest.fixture
def make_field():
    """Builds a FieldSpec with constant exponents; identity deformation by default."""

    def build(h1=0.5, h2=0.5, deformation=None, sigma=0.0, design=None, m=100.0):
        return FieldSpec(
            eta1=ConstantHurst(h1),
            eta2=ConstantHurst(h2),
            deformation=deformation or identity_deformation(),
            sigma_fn=ConstantNoise(sigma),
            design=design or DesignLaw("common-grid", grid_shape=(10, 10)),
            mean_points_m=m,
        )

    return build


@pytest.fixture
def make_dataset(domain):
    """Dataset of sheets sharing one point set, values given row by row."""

    def build(points, values, sigma=None):
        pts = np.asarray(points, dtype=float)
        pts.flags.writeable = False
        rows = np.atleast_2d(np.asarray(values, dtype=float))
        return SurfaceDataset(tuple(Sheet(j, pts, row) for j, row in enumerate(rows)), domain, sigma)

    return build
