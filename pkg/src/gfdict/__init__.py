"""Static one-sided-error dictionaries and membership filters over GF(2^k)."""

from __future__ import annotations

from .core_dict import BuildReport, CoreDict, build_core, query_core
from .errors import (
    BuildFailed, CorruptFile, DuplicateKey, GFDictError, NoGoodFunction, NotAMembershipFilter,
    Singular, SystemTooLarge, ValueOutOfRange,
)
from .field import FieldSpec, default_spec, fe_add, fe_inv, fe_mul
from .member import MemberFilter, fpr_measure, member_build, member_query
from .tiered_dict import LayoutParams, TieredDict, build_tiered, plan_layout, query_tiered

__version__ = "0.1.0"

__all__ = [
    "BuildReport", "CoreDict", "build_core", "query_core",
    "BuildFailed", "CorruptFile", "DuplicateKey", "GFDictError", "NoGoodFunction",
    "NotAMembershipFilter", "Singular", "SystemTooLarge", "ValueOutOfRange",
    "FieldSpec", "default_spec", "fe_add", "fe_inv", "fe_mul",
    "MemberFilter", "fpr_measure", "member_build", "member_query",
    "LayoutParams", "TieredDict", "build_tiered", "plan_layout", "query_tiered",
]
