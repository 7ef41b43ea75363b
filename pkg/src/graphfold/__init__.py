"""Folding-sensor simulation and recovery for continuous-time graph signals.

Build a weighted graph, take its low-frequency Laplacian eigenbasis,
generate doubly-bandlimited signals, fold their Nyquist samples the way a
self-reset ADC would, and recover the originals: exactly by bounded integer
search on small instances, or at scale through a center-based sparse
reparameterization solved as an L1 program.
"""

from .errors import GraphFoldError
from .graphs import (
    WeightedGraph,
    build_graph,
    complete_graph,
    grid_graph,
    laplacian,
    path_graph,
    random_weighted_model,
    read_edge_list,
    standard_topology,
    write_edge_list,
)
from .image import (
    ImageRaster,
    dct_grid_basis,
    fold_image,
    read_ppm,
    recover_image,
    synthetic_lowpass,
    unfold_image,
    write_ppm,
)
from .partition import (
    Partition,
    admissible_partition,
    ball,
    folding_sparsity,
    greedy_cover,
    partition_complexity,
    variation_matrix,
)
from .recovery import (
    AffineSubstitution,
    LinearSystem,
    assemble_system,
    epsilon_search,
    exact_recover,
    folding_increments,
    integrate_time,
    majority_vote,
    sparse_recover,
    sparse_recover_noisy,
    substitute,
)
from .signals import (
    FoldedObservation,
    GraphTimeSignal,
    SampledSignal,
    SpectralBounds,
    add_noise_refold,
    evaluate,
    evaluate_snapshot,
    fold,
    fold_signal,
    generate_signal,
    inverse_kf_bounds,
    sample_time,
    sinc_interpolate,
    unfold,
)
from .solver import (
    exhaustive_integer_l1,
    solve_l1_eq,
    solve_lasso,
    solve_lasso_eq,
)
from .spectral import (
    EigenBasis,
    SampleDesign,
    eigenbasis,
    find_integer_relation,
    property_harness,
    select_invertible_sample,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
