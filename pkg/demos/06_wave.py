"""
Speed of a spreading front
==========================

Given the first event date of each cluster and the cluster's distance from
an origin, least squares gives a spread speed in km per year; the p-value
comes from the Student t distribution with n - 2 degrees of freedom.
"""

import datetime as dt

import numpy as np

from nearwave import wave_regression

rng = np.random.default_rng(3)
start = dt.date(2013, 4, 1)
years = np.sort(rng.uniform(0, 3, 10))
km = 2400 * years * (1 + 0.1 * rng.normal(size=10))
points = [(f"c{i}", start + dt.timedelta(days=round(y * 365.25)), d)
          for i, (y, d) in enumerate(zip(years, km))]
for label, day, d in points:
    print(f"{label:4s} {day}  {d:7.0f} km")

fit = wave_regression(points)
print(f"\nslope {fit.slope_km_per_year:.0f} km/yr, r = {fit.r:.3f}, p = {fit.p:.2g}")

# scrambling the dates destroys the trend
shuffled = [(c, d, k) for (c, _, k), (_, d, _) in zip(points, rng.permutation(points))]
fit = wave_regression(shuffled)
print(f"shuffled: slope {fit.slope_km_per_year:.0f} km/yr, r = {fit.r:.3f}, p = {fit.p:.2g}")
