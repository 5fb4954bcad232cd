"""Potentials of curl-free vector fields on star-shaped domains and ball
covers, built from the Bogovskii operator and its adjoint."""

import os as _os

# BLAS reads its thread count when numpy is first imported
_threads = _os.environ.get("CURLFREE_THREADS", "").strip()
if _threads.isdigit() and int(_threads) > 0:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError, ConvergenceError, CurlfreeError, DomainError, EvaluationError, ExprError,
    GeometryError, PreconditionError,
)
from .geometry import (  # noqa: E402
    Annulus, Ball, Box, Chain, Cover, StarDomain, Union, build_cover, find_chain, lens_ball,
    ray_ball_interval, support_hull_test,
)
from .mollify import Mollifier, delta_sequence, make_bump, mollify_field, mollify_homotopy, scale_field  # noqa: E402
from .operators import (  # noqa: E402
    BogovskiiOp, bogovskii_apply, derham_local_functional, duality_residual, pair_with_b,
    potential_apply,
)
from .potential import (  # noqa: E402
    chain_divergence_transport, compact_support_potential, glue_potentials, local_potential,
    rough_local_potential,
)
from .quadrature import QuadratureRule  # noqa: E402
from .homotopy import (  # noqa: E402
    ConstantHomotopy, GridHomotopy, Path, StraightLineHomotopy, homotopy_invariance_check,
    line_integral, smoothing_convergence,
)
