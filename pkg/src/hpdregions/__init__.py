"""Bayesian credible regions for qubit tomography from sequential Monte Carlo."""
from .geometry import (
    Ellipsoid,
    chi2_quantile,
    convex_hull_2d,
    ellipsoid_contains,
    ellipsoid_volume,
    mvee,
    project_ellipsoid,
)
from .inference import (
    ParticleCloud,
    ResampleConfig,
    bayes_update,
    effective_sample_size,
    init_cloud,
    maybe_resample,
    posterior_covariance,
    posterior_mean,
)
from .models import Datum, Model, diagonal_model, qubit_model, rebit_model
from .regions import (
    RegionEstimate,
    RegionKind,
    clustered_region,
    dbscan,
    hpd_particle_set,
    marginal_region,
    mvee_region,
    pce_region,
    region_contains,
    region_volume,
)

__version__ = "0.1.0"
