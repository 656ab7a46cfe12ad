"""
Choosing the number of clusters
===============================

Twelve Gaussian blobs, about 3000 km apart, are clustered with geodesic
k-means for k = 1..16. The elbow rule picks the smallest k after which the
relative drop in RMS distance stays under 7.5 %.
"""

from nearwave import GeoPoint, assign_by_spread, elbow_select
from nearwave.synth import destination
import numpy as np

centers = [GeoPoint(lon, lat) for lat in (-27.0, 0.0, 27.0) for lon in (0.0, 31.0, 62.0, 93.0)]
rng = np.random.default_rng(0)
points = []
for c in centers:
    r = rng.normal(size=(200, 2)) * 60.0
    lat, lon = destination(np.full(200, c.lat), np.full(200, c.lon),
                           np.hypot(r[:, 0], r[:, 1]), np.arctan2(r[:, 1], r[:, 0]))
    points += [GeoPoint(float(b), float(a)) for a, b in zip(lat, lon)]

curve = elbow_select(points, k_max=15, threshold=0.075, seed=0, restarts=8)
print("  k   dbar km    I_k")
for row in curve.table():
    imp = "" if row["I_k"] is None else f"{row['I_k']:.3f}"
    print(f"{row['k']:3d}  {row['dbar_km']:8.1f}  {imp}")
print("k* =", curve.k_star, "(elbow found)" if curve.elbow_found else "(no elbow)")

# events of a class left out of the clustering join a cluster only within 3 spreads
model = curve.models[curve.k_star]
extra = [("near", GeoPoint(0.5, 0.3)), ("far", GeoPoint(-60.0, -40.0))]
print(assign_by_spread(model, extra))
