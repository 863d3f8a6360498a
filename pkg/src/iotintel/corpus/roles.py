"""Loading user role profiles, including the five bundled archetypes."""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from iotintel.corpus.types import BUILTIN_ROLES, RoleProfile


def load_role(path: str | Path) -> RoleProfile:
    with open(path, encoding="utf-8") as fh:
        return RoleProfile.from_dict(json.load(fh))


def builtin_roles() -> dict[str, RoleProfile]:
    """The bundled role profiles, keyed by role name."""
    root = resources.files("iotintel").joinpath("data/roles")
    out: dict[str, RoleProfile] = {}
    for role in BUILTIN_ROLES:
        text = root.joinpath(f"{role}.json").read_text(encoding="utf-8")
        profile = RoleProfile.from_dict(json.loads(text))
        out[profile.role] = profile
    return out


def get_role(role: str) -> RoleProfile:
    roles = builtin_roles()
    if role not in roles:
        known = ", ".join(sorted(roles))
        raise KeyError(f"unknown role {role!r}; bundled roles: {known}")
    return roles[role]
