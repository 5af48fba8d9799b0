"""Symmetry-blocked spectra, sector gaps and microcanonical OTOCs of two-level boson models."""
from .analysis import (
    LevelPair,
    correlation_diagram,
    fit_gap,
    gap_vs_N,
    gap_vs_xi,
    level_gap,
    meanfield_critical_energy,
)
from .eigensolver import PrecisionConfig, eig_values, eig_vectors
from .models import ModelInstance, SectorLabel, build_block, critical_xi, sector_list

__all__ = [
    "LevelPair", "ModelInstance", "PrecisionConfig", "SectorLabel", "build_block",
    "correlation_diagram", "critical_xi", "eig_values", "eig_vectors", "fit_gap",
    "gap_vs_N", "gap_vs_xi", "level_gap", "meanfield_critical_energy", "sector_list",
]
