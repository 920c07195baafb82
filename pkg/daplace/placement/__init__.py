from daplace.placement.bilevel import (BilevelAdjoint, BilevelProblem, PlacementVector,
                                       UpperConfig, solve_bilevel_adjoint, upper_cost,
                                       upper_gradient)
from daplace.placement.classify import (band_counts_sigma, band_counts_w, classify_and_binarize,
                                        placement_labels)
from daplace.placement.optimizer import IterationRecord, PlacementResult, optimize_placement
from daplace.placement.projected_bfgs import (KKTMultipliers, armijo_project, epsilon_active_set,
                                              kkt_extract, reduced_bfgs_update, search_direction)
