"""heisenbath: Heisenberg-picture dynamics of finite-dimensional open quantum systems.

Image-operator families carry the complete Heisenberg information of a
system observable; this package evolves them exactly, expands them
perturbatively in the system-bath coupling through time-ordered kernels and
super-operators, deforms the operator product to reproduce multi-time
correlations from one-point data, and takes the Markovian limit to an
adjoint Lindblad-form generator.  Every perturbative path is checked
against an embedded exact brute-force oracle.
"""

from ._blockops import BACKEND
from .spaces import (
    Constants,
    DensityMatrix,
    OperatorMatrix,
    Space,
    SpaceTag,
    TimeGrid,
    bath_operator,
    commutator,
    full_operator,
    matrix_exponential_unitary,
    partial_trace_bath,
    system_operator,
    tensor_product,
    weighted_bath_trace,
)
from .model import ModelSpec, make_model
from .oracle import (
    expectation,
    heisenberg_evolve_exact,
    image_extract_exact,
    npoint_reduced_exact,
    total_hamiltonian,
)
from .images import (
    ImageFamily,
    ProjectionMap,
    compose_images,
    contract_with_bath,
    evolve_images_exact,
    from_image_family,
    to_image_family,
)
from .dyson import (
    InteractionFrame,
    KernelSet,
    compute_kernels,
    dyson_propagator,
    image_first_order,
    interaction_hamiltonian_images,
)
from .superop import (
    OnePointTrajectory,
    SeriesTruncation,
    apply_P_S,
    apply_P_ab,
    image_from_one_point,
    invert_one_point,
    one_point_operator,
    one_point_rhs,
    star_product,
)
from .npoint import (
    EvenPartition,
    assemble_partition_term,
    decompose_3pt,
    enumerate_even_partitions,
    expand_image_by_partitions,
    irreducible_2pt,
)
from .markov import (
    BohrDecomposition,
    InteractionDecomposition,
    MarkovReport,
    SpectralCoefficients,
    bohr_decomposition,
    check_markov_assumptions,
    decompose_interaction,
    evolve_lindblad,
    lindblad_rhs,
    spectral_coefficients,
)
from .presets import PRESETS, dephasing_bath, two_qubit

__version__ = "0.1.0"
