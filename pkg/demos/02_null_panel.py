"""
The random-event null
=====================

Events scattered uniformly in time and space produce latent times that
follow the triangular null P(t) = 2(w - t) / (w (w - 1)). A homogeneous
Poisson catalog should therefore give a KLD close to zero.
"""

import datetime as dt

import numpy as np

from nearwave import (GeoPoint, PairFilter, PoissonSpec, Region, WindowSpec, bin_panel, classify,
                      enumerate_pairs, gen_poisson, identity_rules, kld, reh)

# the null for a one-week window: Monday-Tuesday style pairs dominate
week = reh(7)
print("w = 7:", [str(week.exact(t)) for t in range(1, 8)])

start = dt.date(2014, 2, 2)
spec = PoissonSpec(rate=6.0, region=Region(GeoPoint(44, 33), 600.0),
                   start=start, end=start + dt.timedelta(days=6 * 308 - 1))
events = gen_poisson(spec, seed=0)
catalog = classify(events, identity_rules(events), fallback_label="L")
print(len(events), "events")

# six 44-week windows, pairs closer than 20 km
pairs = enumerate_pairs(catalog, WindowSpec(start, 44, 6), PairFilter("A", "A", max_km=20))
panel = bin_panel(pairs, 308, 14)
print(panel.pair_count, "pairs")

print(" days      p_hat   p_reh")
for (a, b), ph, p in zip(panel.edges[:6], panel.p_hat, panel.p_reh):
    print(f"{a:3d}-{b:3d}  {ph:.4f}  {p:.4f}")
print("KLD =", round(kld(panel).kld, 5))

# per-bin deviations in units of the multinomial standard error
z = (panel.p_hat - panel.p_reh) / np.sqrt(panel.p_reh * (1 - panel.p_reh) / panel.pair_count)
print("max |z| =", np.abs(z).max().round(2))
