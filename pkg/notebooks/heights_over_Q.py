# %% [markdown]
# # Canonical heights over Q
#
# Two independent routes to the canonical height of a rational point: the
# limit of naive heights along the doubling orbit, and a sum of local heights
# over the archimedean place and the bad primes. They should agree to the
# oracle's certified error.

# %%
from fractions import Fraction

from heightlab.elliptic_core import CurvePoint, WeierstrassCurve, mul_point
from heightlab.heights_q import canonical_height_local_sum, canonical_height_oracle

E = WeierstrassCurve.rational([0, 0, 1, -1, 0])  # 37a1
P = CurvePoint(Fraction(0), Fraction(0))

# %% [markdown]
# The oracle converges quickly; the depth-10 and depth-12 values already
# differ by far less than the certified error bound.

# %%
for depth in (4, 8, 10, 12):
    h = canonical_height_oracle(E, P.x, depth)
    print(f"depth {depth:2d}: {h.value:.10f}  +/- {h.certified_error:.1e}")

# %%
ls = canonical_height_local_sum(E, P)
print("local sum:", f"{ls.value:.10f}")
for lh in ls.per_place:
    print(f"  {lh.place.label():>5}: {lh.value:+.10f}")

# %% [markdown]
# This normalization is half of the one used by most tables, so the familiar
# value 0.0511114 shows up as 2 * h.

# %%
print("2 * h =", round(2 * ls.value, 7))

# %% [markdown]
# Quadraticity: h(nP) = n^2 h(P).

# %%
for n in (2, 3, 5):
    hn = canonical_height_local_sum(E, mul_point(E, n, P)).value
    print(n, f"{hn / ls.value:.8f}")
