from .convolution import TriadTable, convective_product
from .system import (
    BetaMatrices,
    DirectSystem,
    GalerkinState,
    GridDirectSystem,
    LiftedSystem,
    ResidualReport,
    config_fingerprint,
    equivalence_error,
)
from .tensor import BlockTensor, TrilinearTensor, assemble_blocks, assemble_trilinear, mode_triads

__all__ = [
    "BetaMatrices", "DirectSystem", "GalerkinState", "GridDirectSystem", "LiftedSystem",
    "BlockTensor", "ResidualReport", "TriadTable", "TrilinearTensor", "assemble_blocks", "assemble_trilinear", "config_fingerprint",
    "convective_product", "equivalence_error", "mode_triads",
]
