"""Cauchy data spaces and orthogonalized Calderon projections at desk scale."""
