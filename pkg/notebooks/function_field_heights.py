# %% [markdown]
# # Heights over Q(t) on the Legendre family
#
# y^2 = x(x - 1)(x - t). The x-coordinate x = 2 is not a section over Q(t)
# itself, but it becomes one after adjoining sqrt(2(2 - t)). Its height is an
# exact rational, read off from a divisor on the t-line.

# %%
from heightlab.exact_arith import RatFunc
from heightlab.function_field import (Section, divisor_of_section, geometric_height_oracle,
                                      gram_matrix, keyiso_degrees)
from heightlab.lab.fixtures import legendre, section_fixture

L = legendre()
P2 = Section(L, RatFunc.const(2), None, "P2")

# %%
for d in (1, 3, 5):
    print(d, geometric_height_oracle(P2, d).value)

# %% [markdown]
# The divisor spreads the height over the singular fibers; its degree is the height.

# %%
D = divisor_of_section(P2)
for place in D.support():
    print(f"{place.label():>8}: {D.coefficient(place)}")
print("degree:", D.degree())

# %% [markdown]
# On a common degree-4 cover both x = 2 and x = 3 are genuine sections and
# their Neron-Tate Gram matrix is the identity.

# %%
b = section_fixture("legendre-rank2")
print(gram_matrix(b.lifted))
print(keyiso_degrees(*b.lifted, 2, -1))
