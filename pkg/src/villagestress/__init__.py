"""Village spatial stress indices (SGI, SREI, WI, AII) and typology tools."""
from ._backend import BACKEND
from .classify import (StressMatrix, adjusted_rand_index, cluster_villages, cross_tab,
                       cut_tree, hclust_average, lda_classify, lda_fit, mahalanobis_matrix,
                       scan_k, silhouette, standardize)
from .errors import InputError, NumericalError, VillageStressError
from .indices import (CropSystem, SurfaceComposition, VillageIndices, assemble_stress_table,
                      compute_aii, compute_sgi, compute_srei, compute_wi)
from .raster import (RasterGrid, SolarParams, ZoneMask, daily_insolation, read_ascii_grid,
                     slope_degrees, zone_fraction_above)
from .stats import (SummaryGroup, anova_from_summary, anova_oneway, correlation_report, f_tail,
                    pearson_p, pearson_r, vif)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "StressMatrix", "adjusted_rand_index", "cluster_villages", "cross_tab",
    "cut_tree", "hclust_average", "lda_classify", "lda_fit", "mahalanobis_matrix", "scan_k",
    "silhouette", "standardize", "InputError", "NumericalError", "VillageStressError",
    "CropSystem", "SurfaceComposition", "VillageIndices", "assemble_stress_table",
    "compute_aii", "compute_sgi", "compute_srei", "compute_wi", "RasterGrid", "SolarParams",
    "ZoneMask", "daily_insolation", "read_ascii_grid", "slope_degrees", "zone_fraction_above",
    "SummaryGroup", "anova_from_summary", "anova_oneway", "correlation_report", "f_tail",
    "pearson_p", "pearson_r", "vif",
]
