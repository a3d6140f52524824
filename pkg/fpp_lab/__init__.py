"""
fpp_lab - a desk-scale laboratory for first-passage percolation on Z^d.

Modules:
- lattice: points, edges, norms, hyperplanes and region predicates
- weights: seed-deterministic passage-time fields and moment utilities
- paths: shortest-path sweeps over the implicit weighted lattice
- shells: white shells around lattice points
- regen: regeneration structure along cylinders
- deviations: time-constant estimators, tail and deviation-set statistics
- runner / cli: experiment harness and command line
"""

__version__ = "0.3.0"
