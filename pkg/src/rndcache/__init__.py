"""Miss probabilities of RND, FIFO and LRU caches and cache networks under IRM traffic."""
from .errors import ConfigError, NoRootError, PrecisionError
from .popularity import (PopularityDistribution, make_explicit, make_geometric, make_zipf,
                         miss_filtered, power_sum, sample)
from .single import (AsymptoticEstimate, SaddlePoint, miss_rate_asymptotic, miss_rate_exact,
                     miss_rate_geometric, miss_rate_lru_light_tail, miss_rate_zipf_closed,
                     miss_rates_exact, per_object_miss_asymptotic, per_object_miss_curve,
                     per_object_miss_exact, per_object_miss_saddle, prefactor_lru,
                     prefactor_rnd, saddle_point)
from .symmetric import SymmetricCoefficients, symmetric_coefficients

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "NoRootError", "PrecisionError", "PopularityDistribution", "make_zipf",
    "make_geometric", "make_explicit", "sample", "miss_filtered", "power_sum",
    "SymmetricCoefficients", "symmetric_coefficients", "AsymptoticEstimate", "SaddlePoint",
    "miss_rate_exact", "miss_rates_exact", "per_object_miss_exact", "per_object_miss_curve",
    "miss_rate_geometric", "miss_rate_zipf_closed", "prefactor_rnd", "prefactor_lru",
    "miss_rate_asymptotic", "per_object_miss_asymptotic", "miss_rate_lru_light_tail",
    "saddle_point", "per_object_miss_saddle",
]
