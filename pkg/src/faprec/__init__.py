"""Linear precoding for correlated MIMO channels with finite-alphabet inputs.

The package designs precoders from statistical channel knowledge by
maximizing a closed-form lower bound on the average mutual information,
and ships the Monte Carlo machinery needed to check the designs.
"""

from faprec.errors import ConfigError, PreconditionError, SizeError
from faprec.constellation import (
    Constellation,
    DifferenceSet,
    SymbolVectorSet,
    difference_set,
    enumerate_vectors,
    make_constellation,
    parse_modulation,
)
from faprec.channel import (
    ChannelStatistics,
    eigendecompose,
    exp_correlation,
    sample_channel,
    sample_reduced_channel,
)
from faprec.infotheory import (
    BoundContext,
    MIEstimate,
    average_mi,
    grad_lambda,
    grad_unitary,
    instantaneous_mi,
    lower_bound,
    lower_bound_shifted,
    min_distance,
)
from faprec.optim import (
    OptimizerReport,
    Precoder,
    SolverOptions,
    assemble_precoder,
    optimize_power,
    optimize_unitary,
    project_simplex,
    stiefel_step,
    two_step,
)
from faprec.baselines import (
    GaussianInputCovariance,
    beamforming,
    ergodic_gaussian_capacity,
    gaussian_capacity_precoder,
    no_precoding,
)

__version__ = "0.1.0"
