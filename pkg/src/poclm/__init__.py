"""Proportional odds cumulative logit models with monotonicity constraints on ordinal predictors.

Fit unconstrained and monotone-constrained maximum likelihood estimates,
build profile-likelihood confidence regions, test for no effect,
monotonicity and direction, and run Monte Carlo coverage experiments.
"""

from .model import *  # noqa: F401,F403
from .model import __all__ as _model_all
from .estimation import *  # noqa: F401,F403
from .estimation import __all__ as _estimation_all
from .inference import *  # noqa: F401,F403
from .inference import __all__ as _inference_all
from .simulation import *  # noqa: F401,F403
from .simulation import __all__ as _simulation_all
from .datasets import *  # noqa: F401,F403
from .datasets import __all__ as _datasets_all

__version__ = "0.1.0"

__all__ = [*_model_all, *_estimation_all, *_inference_all, *_simulation_all, *_datasets_all]
