"""Near-repeat / near-reaction analysis of geolocated event catalogs.

Pipeline: ingest and classify events (:mod:`nearwave.catalog`), cluster
locations (:mod:`nearwave.cluster`), enumerate fixed-window latent-time pairs
(:mod:`nearwave.pairs`), compare binned panels with the random-event null and
correlate mirror panels (:mod:`nearwave.stats`). :mod:`nearwave.synth`
generates catalogs with known structure.
"""

from .catalog import (AffiliationRule, ClassifiedCatalog, CsvSchema, Event, classify,
                      filter_era, identity_rules, ingest_csv, load_affiliations)
from .cluster import ClusterModel, ElbowCurve, assign_by_spread, elbow_select, kmeans
from .geo import (EARTH, EarthModel, GeoPoint, great_circle_distance, haversine_km, rms_spread,
                  spherical_centroid)
from .pairs import (LatentPair, PairFilter, PairTable, WindowSpec, enumerate_pairs,
                    pair_sufficiency, provoked_subset)
from .stats import (CorrelationResult, EntropySeries, PanelHistogram, REHDistribution,
                    bin_panel, kld, kld_distance_scan, reaction_correlation, reh,
                    wave_regression)
from .synth import ExcitationSpec, PoissonSpec, Region, gen_excited, gen_poisson

__version__ = "0.1.0"
