"""Two-node network engines.

Engine A (`cascade`): delayed cascaded master equation for strictly
unidirectional transfer, Bell-state generation and tomography inputs.

Engine B (`field`): single-excitation discretized-field evolution for
reflections, revivals, bidirectional emission and interferometry.
"""

from phononlab.netsim.params import (  # noqa: F401
    ChannelParams,
    NodeParams,
    Trajectory,
    TopologyError,
)
from phononlab.netsim.cascade import run_cascaded, CascadeResult  # noqa: F401
from phononlab.netsim.field import (  # noqa: F401
    FieldState,
    SingleExcitationResult,
    run_single_excitation,
)
