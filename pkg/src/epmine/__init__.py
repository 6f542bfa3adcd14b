"""Educational process mining: LMS log preprocessing, Inductive Miner
discovery, token-replay fitness and DOT rendering."""

__version__ = "0.1.0"

from .conformance import FitnessReport, ReplayCounts, fitness, fitness_table, replay_trace
from .discovery import build_dfg, discover, discover_infrequent
from .log import Event, EventLog, Trace, log_stats
from .petri import WorkflowNet, check_soundness, tree_to_net
from .tree import language, parse_tree, to_text
from .xes import read_xes, write_xes

__all__ = [
    "Event", "EventLog", "FitnessReport", "ReplayCounts", "Trace", "WorkflowNet", "build_dfg",
    "check_soundness", "discover", "discover_infrequent", "fitness", "fitness_table", "language",
    "log_stats", "parse_tree", "read_xes", "replay_trace", "to_text", "tree_to_net", "write_xes",
]
