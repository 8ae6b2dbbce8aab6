"""Conservative RBF elastic energy models from homogenized 2D
microstructure data.

The energy over Voigt Green strain combines stress/stiffness offsets
with radial-basis gradient and Hessian interpolants; stress and
tangent stiffness are its analytic derivatives, so fitted stress
fields are conservative by construction.  Training triples come from
periodic finite-element homogenization of parametric tiles under the
directional-stretch protocol.
"""

from .backend import backend_name, max_threads
from .errors import (AllIllConditioned, ConservolastError, DegenerateData,
                     DuplicateCenters, ElementInversion, IllConditioned,
                     MeshingFailed, NoBracket, NoMinimum, NonConverged,
                     SingularReducedHessian)
from .fit import (FitConfig, FitReport, TrainingSample, greedy_fit,
                  kmeans_centers, rms_normalizers, solve_coefficients,
                  sweep_radius)
from .homogenize import (EquilibriumState, MacroDeformation, SamplingGrid,
                         equilibrate, generate_training_data,
                         homogenized_stiffness, homogenized_stress,
                         macro_from_green, orthogonal_stretch_search)
from .kernels import FAMILIES, Kernel, RadialVector
from .material import NeoHookean
from .model import (EnergyModel, energy, energy_many, green_strain,
                    recompute_stress_offset, stiffness, stiffness_many,
                    stress, stress_many, work_integral)
from .tiles import TILE_FAMILIES, Tile, TileSpec, make_tile
from .validate import (ValidationReport, coarse_simulate, error_table,
                       extrapolation_experiment, orthogonal_validation,
                       quad_mesh)

__version__ = "0.1.0"
