# %% [markdown]
# # Small heights along a real direction
#
# X = P2 + phi * P3 is not a section, but the pairing still extends to it.
# Torsion parameters of the Fibonacci approximants F_n P2 + F_{n+1} P3 give
# fibers where h_X collapses towards zero.

# %%
from heightlab.function_field import RealPoint
from heightlab.lab.fixtures import section_fixture
from heightlab.torsion_search import fibonacci_approximants, small_sequence

b = section_fixture("legendre-rank2")
phi = (1 + 5 ** 0.5) / 2
X = RealPoint(b.lifted, [1.0, phi], gram=b.gram)

# %%
apps = fibonacci_approximants(8)
print(apps[-1])  # the last term has to point close to (1, phi)

# %%
rows = small_sequence(X, apps, (1.05, 5.0, -1.0, 1.0), cover=b.cover, base_sections=b.base)
for r in rows:
    h = "-" if r.h_X is None else f"{r.h_X:.3e}"
    print(r.n, r.coeffs, r.N, h, r.method)
