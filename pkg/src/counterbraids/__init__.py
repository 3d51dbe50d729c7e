"""Counter braids: encoding, message-passing decoding and density-evolution analysis."""

__version__ = "0.1.0"

from .coupled import (CoupledState, CouplingMatrix, coupled_de_step, coupled_threshold,
                      modified_coupled_de_step, modified_threshold, run_coupled)
from .decoder import DecodeResult, bp_decode, layered_decode, peel_decode
from .degree_model import (EnsembleParams, counter_map, counter_map_integral, counter_map_prime, flow_map,
                           poisson_edge_dist, potential, potential_slope)
from .exceptions import (BracketError, CapacityError, ConsistencyError, CounterBraidError, DomainError,
                         NumericalError)
from .graph import (BraidGraph, CounterState, CoupledLayout, LayerGraph, build_coupled, build_single_layer,
                    build_two_layer, encode, read_graph, sample_flows, write_graph)
from .study import ThresholdReport, Tolerances, gap_study, threshold_cell
from .uncoupled import (ExitCurve, FixedPointResult, PotentialLandscape, area_threshold, bp_threshold_beta,
                        bp_threshold_eps, de_fixed_point, de_two_step, ebp_exit_curve, potential_threshold,
                        residual_exit_curve)

__all__ = [name for name in dir() if not name.startswith("_")]
