"""Interference alignment by the choice of releasing and sampling times in
three-user molecular interference channels, with reaction-based cancellation
of the aligned interference."""

__version__ = "0.1.0"

from .alignment import (
    BeamformingSet,
    ConditionReport,
    MeanSignals,
    beamforming,
    check_conditions,
    check_conditions_special,
    mean_signals,
)
from .asymptotic import (
    AsymptoticConfig,
    DiagonalChannelStack,
    build_beamforming,
    dof,
    verify_alignment,
)
from .detection import (
    analytic_pe_reaction,
    build_reaction,
    build_zf,
    isi_decision_rules,
    map_decide,
    zf_gaussian_pe,
)
from .errors import (
    DegenerateChannelError,
    DomainError,
    InfeasibleError,
    InfeasiblePointError,
    InfeasibleRegionError,
    InfeasibleScheduleError,
    MoliaError,
    ScenarioError,
)
from .io import load_scenario, load_times, preset_times
from .model import ChannelSet, Scenario, TimingSchedule, channel_set, green, impulse_response
from .montecarlo import ErrorReport, SimConfig, simulate
from .reaction import Lemma2Region, lemma2_region, lemma2_times, reaction_residuals
from .search import SearchSpec, objective_pe, optimize, snap
