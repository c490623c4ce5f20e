"""Out-of-time-ordered correlators for Z3 parafermion chains.

The package is organized bottom-up: `algebra` holds the clock-matrix
operator strings and parafermion constructions, `models` the chain
Hamiltonians and Trotter gate layers, `ed` the dense reference backend,
`mpo` the charge-blocked matrix product operator engine, `otoc` the
correlator drivers, and `analysis` the wavefront / velocity / spectral
post-processing.  `cli` exposes all of it as subcommands.
"""

from paraotoc.algebra import (
    CLOCK,
    OMEGA,
    SHIFT,
    OperatorString,
    dual_parafermion,
    parafermion,
    parity_string,
)
from paraotoc.analysis import (
    ButterflyFit,
    ZeroModeProfile,
    butterfly_fit,
    grid_butterfly,
    symmetry_residual,
    wavefront_times,
    zero_mode_profile,
)
from paraotoc.errors import ConfigError, NumericalError, ParaotocError
from paraotoc.models import AlternatingChain, HoppingChain
from paraotoc.mpo import Mpo, load_mpo, save_mpo
from paraotoc.otoc import (
    LightConeGrid,
    OtocRequest,
    OtocSeries,
    lightcone_scan,
    run_otoc,
    squared_commutator,
)

__version__ = "0.1.0"

__all__ = [
    "AlternatingChain",
    "ButterflyFit",
    "CLOCK",
    "ConfigError",
    "HoppingChain",
    "LightConeGrid",
    "Mpo",
    "NumericalError",
    "OMEGA",
    "OperatorString",
    "OtocRequest",
    "OtocSeries",
    "ParaotocError",
    "SHIFT",
    "ZeroModeProfile",
    "butterfly_fit",
    "dual_parafermion",
    "grid_butterfly",
    "lightcone_scan",
    "load_mpo",
    "parafermion",
    "parity_string",
    "run_otoc",
    "save_mpo",
    "squared_commutator",
    "symmetry_residual",
    "wavefront_times",
    "zero_mode_profile",
    "__version__",
]
