"""Problem data: physical parameters, penalty weights, and profile descriptions.

A :class:`ProblemSpec` collects everything that defines one control problem
instance: the horizon ``T``, the Robin coefficient ``alpha``, the Tikhonov
weight ``nu``, the sparse weight ``mu``, the control box ``[a, b]`` with
``a < 0 < b``, the desired terminal profile, the way the control enters the
equation (boundary flux or separable distributed source), an optional initial
profile, and the discretization sizes (``modes`` retained in the cosine
expansion, ``grid_cells`` of the piecewise-constant control).

Spatial profiles (target, distributed-control shape, initial state) are small
declarative records so they can round-trip through JSON configs.  ``mode``
profiles depend on the eigenbasis and therefore take it as an argument at
evaluation time.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np


class ConfigError(ValueError):
    """Invalid problem or config data; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        self.field_name = field_name
        super().__init__(f"{field_name}: {message}")


PROFILE_KINDS = ("constant", "mode", "polynomial", "table")


@dataclass(frozen=True)
class Profile:
    """Declarative spatial profile on [0, 1].

    kind:
        ``constant``    value
        ``mode``        scale * cos(rho_index * x); needs an eigenbasis
        ``polynomial``  coeffs[0] + coeffs[1]*x + ...
        ``table``       piecewise-linear through (xs, ys)
    """

    kind: str
    value: float = 0.0
    index: int = 1
    scale: float = 1.0
    coeffs: tuple = ()
    xs: tuple = ()
    ys: tuple = ()

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ConfigError("profile.kind", f"unknown kind {self.kind!r}")
        if self.kind == "polynomial" and len(self.coeffs) == 0:
            raise ConfigError("profile.coeffs", "polynomial needs coefficients")
        if self.kind == "table":
            if len(self.xs) != len(self.ys) or len(self.xs) < 2:
                raise ConfigError("profile.table", "needs xs/ys of equal length >= 2")
            if list(self.xs) != sorted(self.xs):
                raise ConfigError("profile.xs", "table abscissae must increase")

    def evaluator(self, basis=None) -> Callable[[np.ndarray], np.ndarray]:
        """Return a vectorized callable x -> profile(x)."""
        if self.kind == "constant":
            c = float(self.value)
            return lambda x: np.full_like(np.asarray(x, dtype=float), c)
        if self.kind == "mode":
            if basis is None:
                raise ConfigError("profile.mode", "mode profile needs an eigenbasis")
            if not (1 <= self.index <= basis.count):
                raise ConfigError(
                    "profile.index", f"mode index {self.index} outside 1..{basis.count}"
                )
            rho = basis.rhos[self.index - 1]
            s = float(self.scale)
            return lambda x: s * np.cos(rho * np.asarray(x, dtype=float))
        if self.kind == "polynomial":
            coeffs = np.asarray(self.coeffs, dtype=float)
            return lambda x: np.polynomial.polynomial.polyval(
                np.asarray(x, dtype=float), coeffs
            )
        xs = np.asarray(self.xs, dtype=float)
        ys = np.asarray(self.ys, dtype=float)
        return lambda x: np.interp(np.asarray(x, dtype=float), xs, ys)

    def breakpoints(self) -> Sequence[float]:
        """Interior abscissae where the profile is not smooth."""
        if self.kind == "table":
            return [x for x in self.xs if 0.0 < x < 1.0]
        return []

    @staticmethod
    def from_dict(data: dict, where: str = "profile") -> "Profile":
        if not isinstance(data, dict) or "kind" not in data:
            raise ConfigError(where, "profile must be an object with a 'kind' key")
        kind = data["kind"]
        try:
            if kind == "constant":
                return Profile(kind="constant", value=float(data["value"]))
            if kind == "mode":
                return Profile(
                    kind="mode",
                    index=int(data["index"]),
                    scale=float(data.get("scale", 1.0)),
                )
            if kind == "polynomial":
                return Profile(kind="polynomial", coeffs=tuple(map(float, data["coeffs"])))
            if kind == "table":
                return Profile(
                    kind="table",
                    xs=tuple(map(float, data["x"])),
                    ys=tuple(map(float, data["y"])),
                )
        except KeyError as exc:
            raise ConfigError(f"{where}.{exc.args[0]}", "missing required key") from exc
        raise ConfigError(f"{where}.kind", f"unknown kind {kind!r}")

    def to_dict(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "value": self.value}
        if self.kind == "mode":
            return {"kind": "mode", "index": self.index, "scale": self.scale}
        if self.kind == "polynomial":
            return {"kind": "polynomial", "coeffs": list(self.coeffs)}
        return {"kind": "table", "x": list(self.xs), "y": list(self.ys)}


@dataclass(frozen=True)
class ControlShapeSpec:
    """How the control enters the state equation.

    ``boundary``: through the Robin condition at x=1 (mode factor cos(rho_n)).
    ``distributed``: a separable source e(x)u(t); ``profile`` describes e.
    """

    kind: str = "boundary"
    profile: Optional[Profile] = None

    def __post_init__(self):
        if self.kind not in ("boundary", "distributed"):
            raise ConfigError("control_shape.kind", f"unknown kind {self.kind!r}")
        if self.kind == "distributed" and self.profile is None:
            raise ConfigError("control_shape.profile", "distributed shape needs e(x)")

    @staticmethod
    def from_dict(data: dict) -> "ControlShapeSpec":
        if isinstance(data, str):
            data = {"kind": data}
        if not isinstance(data, dict) or "kind" not in data:
            raise ConfigError("control_shape", "must be 'boundary' or an object")
        if data["kind"] == "boundary":
            return ControlShapeSpec(kind="boundary")
        profile = Profile.from_dict(data.get("profile"), "control_shape.profile")
        return ControlShapeSpec(kind="distributed", profile=profile)

    def to_dict(self) -> dict:
        if self.kind == "boundary":
            return {"kind": "boundary"}
        return {"kind": "distributed", "profile": self.profile.to_dict()}


@dataclass(frozen=True)
class ProblemSpec:
    """One instance of the sparse boundary-control problem."""

    T: float = 1.0
    alpha: float = 1.0
    nu: float = 0.0
    mu: float = 0.1
    a: float = -1.0
    b: float = 1.0
    target: Profile = field(default_factory=lambda: Profile(kind="constant", value=0.0))
    control_shape: ControlShapeSpec = field(default_factory=ControlShapeSpec)
    y0: Optional[Profile] = None
    modes: int = 64
    grid_cells: int = 64

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not self.T > 0:
            raise ConfigError("T", f"horizon must be positive, got {self.T}")
        if self.alpha < 0:
            raise ConfigError("alpha", f"Robin coefficient must be >= 0, got {self.alpha}")
        if self.nu < 0:
            raise ConfigError("nu", f"Tikhonov weight must be >= 0, got {self.nu}")
        if not self.mu > 0:
            raise ConfigError("mu", f"sparse weight must be positive, got {self.mu}")
        if not self.a < 0:
            raise ConfigError("a", f"lower bound must be negative, got {self.a}")
        if not self.b > 0:
            raise ConfigError("b", f"upper bound must be positive, got {self.b}")
        if self.modes < 1:
            raise ConfigError("modes", f"need at least one mode, got {self.modes}")
        if self.grid_cells < 1:
            raise ConfigError("grid_cells", f"need at least one cell, got {self.grid_cells}")

    def with_nu(self, nu: float) -> "ProblemSpec":
        return replace(self, nu=float(nu))

    #: keys recognized by :meth:`from_dict`
    FIELDS = (
        "T", "alpha", "nu", "mu", "a", "b",
        "target", "control_shape", "y0", "modes", "grid_cells",
    )

    @staticmethod
    def from_dict(data: dict) -> "ProblemSpec":
        kwargs = {}
        for key in ("T", "alpha", "nu", "mu", "a", "b"):
            if key in data:
                try:
                    kwargs[key] = float(data[key])
                except (TypeError, ValueError):
                    raise ConfigError(key, f"expected a number, got {data[key]!r}")
        for key in ("modes", "grid_cells"):
            if key in data:
                try:
                    kwargs[key] = int(data[key])
                except (TypeError, ValueError):
                    raise ConfigError(key, f"expected an integer, got {data[key]!r}")
        if "target" in data:
            kwargs["target"] = Profile.from_dict(data["target"], "target")
        if "control_shape" in data:
            kwargs["control_shape"] = ControlShapeSpec.from_dict(data["control_shape"])
        if data.get("y0") is not None:
            kwargs["y0"] = Profile.from_dict(data["y0"], "y0")
        return ProblemSpec(**kwargs)

    def to_dict(self) -> dict:
        out = {
            "T": self.T, "alpha": self.alpha, "nu": self.nu, "mu": self.mu,
            "a": self.a, "b": self.b,
            "target": self.target.to_dict(),
            "control_shape": self.control_shape.to_dict(),
            "modes": self.modes, "grid_cells": self.grid_cells,
        }
        if self.y0 is not None:
            out["y0"] = self.y0.to_dict()
        return out
