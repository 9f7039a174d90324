"""Momentum-space eigensets of single-active-electron atoms and
split-operator strong-field propagation built on them."""
from .eigensolver import (
    Eigenset,
    EigensetL,
    assemble_hamiltonian,
    build_eigenset,
    diagonalize_symmetric,
    load_eigenset,
    rms_deviation,
    save_eigenset,
)
from .grid import MappingParams, RadialGrid, build_grid, chebyshev_nodes, radial_integrate
from .kernel import (
    KernelBlock,
    KernelRule,
    PotentialModel,
    a_l,
    b_l,
    build_kernel_block,
    kernel_parts,
)
from .propagator import (
    HalfstepMatrices,
    Wavepacket,
    apply_field_free_halfstep,
    apply_interaction,
    build_halfstep_matrices,
    propagate,
)
from .pulse import PulseConfig, convert_units, electric_field, vector_potential
from .spectra import (
    ContinuumPacket,
    ati_spectrum,
    interpolate_radial,
    ionization_probability,
    pad,
    project_out_bound,
)

__version__ = "0.1.0"
