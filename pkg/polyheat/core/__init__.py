"""Numerical core: special functions, grids, Orlicz norms, kernels, semigroup, solver and decay."""
