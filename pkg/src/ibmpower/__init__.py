"""Iterated Brownian motion: skeletal walks, weighted power variations, and their limits."""
from __future__ import annotations

from .gaussian_paths import (FinePath, ResourceLimitError, RngStream, SpatialField, Streams,
                             Substream, refine_bridge, sample_fine_path, sample_spatial_field)
from .hermite import (HermiteDecomposition, Poly, decompose, gaussian_moment, hermite_poly,
                      variance_of)
from .skeleton import (CrossingTally, DoubledTally, DyadicLevel, EmbeddedWalk,
                       IncompleteSkeletonError, coupled_walk, extract_walk, simulate_walk,
                       skeletal_local_time, tally_crossings, tally_doubled, terminal_indices)
from .variations import (Section2Spec, VariationSpec, j_gaussian, j_one_sided,
                         j_tilde_one_sided, m_blocks, s_space_sum, s_sum, v_space_sum,
                         v_time_sum)
from .weights import REGISTRY_NAMES, WeightFunction, registry_get

__version__ = "0.1.0"
