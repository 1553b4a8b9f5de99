"""Average age of information for prioritised streams on a preemptive server.

Exact ages come from a closed form (waiting-room discipline) and from a
generic SHS solver (both disciplines); a discrete-event simulator gives
independent statistical estimates.
"""

from .analysis import find_crossing, find_optimum, total_age_curve
from .closed_form import a_sequence, stationary_distribution, total_wq_age, wq_age
from .errors import (
    AoIError,
    BracketError,
    InvalidConfig,
    InvalidModel,
    MultipleCrossings,
    NoSignChange,
    SingularChain,
    SingularSystem,
)
from .models import AgeReport, Discipline, SystemConfig, build_nq_chain, build_wq_chain, shs_report
from .shs import ShsModel, ShsSolution, Transition, average_age, solve_correlations, solve_stationary
from .simulator import SimConfig, SimEstimate, simulate, sweep_simulate

__version__ = "0.1.0"
