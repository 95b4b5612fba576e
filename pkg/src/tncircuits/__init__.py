"""Arithmetic circuits, their tensor-network equivalents, and entanglement."""

from .kernels import BACKEND
from .tensor import (
    Partition, contract, delta_tensor, dematricize, entanglement_entropy, matricize,
    schmidt_rank,
)
from .network import (
    DupGroups, NetworkBuilder, TensorNetwork, attach_dup_deltas, contract_network, dup,
    dup_via_deltas, no_cloning_witness,
)
from .circuits import (
    ConvCircuit, ConvSpec, ConvWeights, ProductCircuit, ProductSpec, ProductWeights,
    RacCircuit, RacSpec, RacWeights, cac_forward, materialize, param_count, rac_forward,
    total_receptive_field, total_stride,
)
from .builders import (
    BuiltNetwork, mps_from_rac, recursive_mps_from_rac, recursive_tree_from_cac,
    tree_tn_from_cac,
)

__version__ = "0.1.0"
