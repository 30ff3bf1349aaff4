"""Boolean continuum percolation on Ginibre eigenvalues, GAF zeros and Poisson points."""
from ._version import __version__
from .boolean_graph import (
    ClusterLabeling,
    build_clusters,
    count_annulus_crossing_clusters,
    edge_to_edge_crossing,
    origin_connected_to_box,
)
from .config import ExperimentConfig, validate_config
from .estimators import (
    DiskRegion,
    MCEstimate,
    RcEstimate,
    SquareChain,
    estimate_critical_radius,
    estimate_crossing_prob,
    estimate_field_min_tail,
    estimate_hole_probability,
    estimate_overcrowding_probability,
    estimate_uniqueness_curve,
    fit_exponential_decay,
)
from .gaf import GafPolynomial, evaluate_normalized_gaf, find_polynomial_roots
from .lattice import (
    OccupancyGrid,
    exists_empty_circuit,
    find_k_full_lattice_path,
    occupancy,
    verify_discr1,
    verify_discr2,
)
from .pointconfig import PointConfig, Window
from .runner import emit_plot_data, run_experiment
from .sampler import SamplerSpec, sample, sample_gaf_zeros, sample_ginibre, sample_poisson
