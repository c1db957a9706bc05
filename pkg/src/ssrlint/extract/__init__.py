"""Role extraction: which state variables and functions play which staking role."""

from __future__ import annotations

from .heuristic import extract_heuristic
from .info import FUNC_ROLES, VAR_ROLES, FuncRole, StakingInfo
from .llm import LlmConfig, extract_llm
from .refine import refine_roles

__all__ = [
    "FUNC_ROLES",
    "VAR_ROLES",
    "FuncRole",
    "LlmConfig",
    "StakingInfo",
    "extract_heuristic",
    "extract_llm",
    "refine_roles",
]
