"""Logit-lens language profiles."""

from .probe import LayerLanguageProfile, LensMode, language_profile, lens_distributions, output_distribution
from .suite import ProfileSuite, profile_suite, write_suite

__all__ = [
    "LayerLanguageProfile",
    "LensMode",
    "ProfileSuite",
    "language_profile",
    "lens_distributions",
    "output_distribution",
    "profile_suite",
    "write_suite",
]
