"""Factor-graph models of constraint, clustering and permutation problems."""
