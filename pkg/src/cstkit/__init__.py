"""Counterfactual situation testing for auditing classifier decisions."""
from .detection import (AuditConfig, DiscriminationReport, decide, negative_rate, run_cf,
                        run_cst, run_cst_grid, run_st, run_st_grid, wald_ci)
from .metric import (Attribute, AttributeSchema, DistanceContext, attribute_ranges,
                     per_attribute_distance, tuple_distance)
from .neighborhood import (NeighborSet, SearchSpaces, build_groups, get_top_k,
                           partition_search_spaces)
from .scm import (Assignment, LatentRecord, NodeSpec, NoiseSpec, Penalty, Scm,
                  ThresholdClassifier, abduct, fit_linear_anm, generate_counterfactual_dataset,
                  intervene, predict, sample_dataset, topological_order, validate_scm)

__version__ = "0.1.0"
