"""dpplab: a numerical laboratory for discrete dynamic programming equations
with symmetric measure families, extremal operators, and the associated
regularity machinery (envelope/contact estimates, barriers, stopped dyadic
decomposition, level-set decay, oscillation and Harnack-type experiments)."""

__version__ = "0.1.0"
