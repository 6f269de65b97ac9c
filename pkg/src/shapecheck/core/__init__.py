"""Domain types, distances and class membership."""

from .models import ClassId, ClassKind, Decision, Pmf, SampleCounts, TestVerdict
from .distances import chi2_distance, chi2_tensor, kolmogorov_distance, subset_mask, tv_distance
from .membership import MEMBERSHIP_TOL, is_member, tail_mass
from .io import dump_counts, dump_pmf, load_counts, load_pmf

__all__ = [
    "Pmf",
    "SampleCounts",
    "ClassId",
    "ClassKind",
    "Decision",
    "TestVerdict",
    "tv_distance",
    "chi2_distance",
    "kolmogorov_distance",
    "chi2_tensor",
    "subset_mask",
    "is_member",
    "tail_mass",
    "MEMBERSHIP_TOL",
    "load_pmf",
    "dump_pmf",
    "load_counts",
    "dump_counts",
]
