# %% [markdown]
# # Where does a section become torsion?
#
# For a non-torsion section P the parameters t where P(t) is torsion are
# exactly the preimages of rational points of the Betti map. We find them by
# Newton iteration on the Betti defect, then re-verify the rational ones
# exactly.

# %%
from heightlab.lab.experiments import equidist_experiment
from heightlab.lab.fixtures import section_fixture
from heightlab.specialization import fiber_height
from heightlab.torsion_search import find_torsion_params

x2 = section_fixture("legendre-x2")
window = (1.05, 5.0, -1.0, 1.0)

# %%
for N in (2, 4):
    hits = find_torsion_params(x2.lifted, N, window, cover=x2.cover)
    exact = sorted({str(h.rational_t) for h in hits if h.exact})
    print(f"N = {N}: {len(hits)} hits, exact rational {exact}")

# %% [markdown]
# At those rational parameters the fiber height really is zero.

# %%
from fractions import Fraction

for t0 in (Fraction(2), Fraction(4), Fraction(4, 3)):
    print(t0, f"{fiber_height(x2.base, t0).value:.2e}")

# %% [markdown]
# As N grows, torsion parameters of order <= N spread out like the curvature
# measure of the section. The box discrepancy shrinks. This takes a minute
# or two.

# %%
rep = equidist_experiment(x2, Ns=(6, 12, 24), window=window, threads=4)
for row in rep["rows"]:
    print(row["N"], row["hits"], round(row["discrepancy"], 3))
