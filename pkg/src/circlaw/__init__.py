"""Ginibre spectra against the circular law: spiral-lattice couplings,
certified Wasserstein distances and determinantal counting statistics."""
from .kernels import BACKEND
from .measures import (
    Annulus,
    Disc,
    DiscComplement,
    DiscreteMeasure,
    DomainError,
    InitialSegment,
    Sector,
    Spectrum,
    count_in_region,
    region_area,
    region_contains,
)
from .sampler import sample_disc_count, sample_ginibre, sample_radii_oracle, sample_spectrum, spectrum
from .spiral import (
    build_reference_measure,
    choose_m,
    lattice_index,
    predicted_location,
    quantization_error_bound,
    sort_spectrum_spiral,
    spiral_compare,
    spiral_coupling_cost,
)
from .dpp import (
    bernoulli_profile,
    expected_count,
    expected_count_outside,
    kernel,
    tv_mean_vs_uniform,
    var_quadrature,
)
from .transport import (
    quantization_lower_bound,
    w1_duality_check,
    wasserstein_assignment,
    wasserstein_flow,
    wasserstein_to_uniform,
)

__version__ = "0.1.0"
