"""
Great-circle distances on a 6373 km sphere
==========================================

Every spatial threshold in the pipeline is a great-circle distance. This
script compares the library against the textbook asin form and shows the
cap that defines a "near" pair.
"""

import numpy as np

from nearwave import EARTH, GeoPoint, great_circle_distance, haversine_km

baghdad = GeoPoint(lon=44.37, lat=33.31)
mosul = GeoPoint(lon=43.13, lat=36.34)
mogadishu = GeoPoint(lon=45.32, lat=2.05)

for name, p in [("Mosul", mosul), ("Mogadishu", mogadishu)]:
    print(f"Baghdad -> {name}: {great_circle_distance(baghdad, p):8.1f} km")

# half the circumference: the largest possible separation
print("antipode:", great_circle_distance(GeoPoint(0, 0), GeoPoint(180, 0)), "km")
print("pi * R  :", np.pi * EARTH.radius_km, "km")

# vectorised form agrees with the asin haversine on random pairs
rng = np.random.default_rng(0)
lat1, lat2 = np.degrees(np.arcsin(rng.uniform(-1, 1, (2, 5))))
lon1, lon2 = rng.uniform(-180, 180, (2, 5))
h = (np.sin(np.radians(lat2 - lat1) / 2) ** 2
     + np.cos(np.radians(lat1)) * np.cos(np.radians(lat2)) * np.sin(np.radians(lon2 - lon1) / 2) ** 2)
asin_km = 2 * EARTH.radius_km * np.arcsin(np.sqrt(h))
print(np.column_stack([haversine_km(lat1, lon1, lat2, lon2), asin_km]).round(6))
