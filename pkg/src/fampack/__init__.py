"""Fractional and integer F-packings of graphs, plus a randomized near-optimal packer."""

from .copies import Copy, CopyIndex, automorphism_count, enumerate_partite_copies, enumerate_unlabeled_copies
from .exact import ExactResult, IntegerPacking, exact_packing, greedy_packing, verify_integer_packing
from .graph import Family, Graph, VertexPartition, equitable_partition, named_pattern, parse_graph, refine_partition
from .lp import FractionalPacking, LPResult, solve_fractional_packing, verify_fractional
from .pipeline import PipelineConfig, PipelineReport, compute_constants, run_pipeline

__version__ = "0.1.0"
