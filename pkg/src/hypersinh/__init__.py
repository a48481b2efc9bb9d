"""Pseudo-spectral simulator and Monte Carlo verification harness for the
truncated renormalized hyperbolic sinh-Gordon and Liouville models on the
2-torus."""

__version__ = "0.1.0"

from .grid import (  # noqa: F401
    Projector,
    RealField,
    SpectralField,
    TorusGrid,
    apply_projector,
    bracket,
    forward_dft,
    get_grid,
    inverse_dft,
    kg_bracket,
    make_projector,
    read_field,
    sobolev_norm,
    write_field,
)
from .randfields import (  # noqa: F401
    RenormConstants,
    RngStream,
    compute_sigma_N,
    sample_mu1_pair,
    white_noise_increment,
)
from .propagators import (  # noqa: F401
    ModeMatrix,
    StatePair,
    diff_smoothing_ratio,
    evolve_psi,
    kg_multiplier,
    mode_matrix,
    wave_multiplier,
)
from .gmc import (  # noqa: F401
    GmcField,
    Region,
    ThetaPath,
    annulus,
    ball,
    covariance_estimate,
    full_torus,
    gmc_field,
    gmc_measure,
    hermite,
    wick_power,
)
from .modified_gmc import ModKernelParams, kernel_K, modified_gmc, modified_gmc_field  # noqa: F401
from .kernels import check_kernel_bounds, frac_laplacian, kstar_mollified, wave_kernel  # noqa: F401
from .anisotropic import SpaceTimeField, embedding_check, lambda_norm  # noqa: F401
from .dynamics import EnhancedData, Flow, ModelParams, energy, remainder_v, simulate_path, step, xy_decompose  # noqa: F401
from .gibbs import GibbsSample, density_RN, invariance_test, sample_gibbs, uniform_bounds_experiment  # noqa: F401
from .montecarlo import MCEstimate, PowerLawFit, fit_power_law, run_ensemble  # noqa: F401
