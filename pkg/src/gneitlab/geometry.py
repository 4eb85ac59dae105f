"""Convex observation bodies, growth schedules and covariograms."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma as gamma_fn

from .errors import InvalidParams

log = logging.getLogger(__name__)

KINDS = ("unit-box", "centered-ball", "scaled-box")


def unit_ball_volume(d):
    return math.pi ** (d / 2) / gamma_fn(d / 2 + 1)


def unit_sphere_area(d):
    """Surface area of the unit sphere S^{d-1} in R^d (2 for d = 1)."""
    return 2 * math.pi ** (d / 2) / gamma_fn(d / 2)


@dataclass(frozen=True)
class ConvexBody:
    """A box ``[0, a_1] x ... x [0, a_d]`` or a centered ball of radius ``R``.

    ``extent`` holds the side lengths for boxes (all ones for ``unit-box``)
    and ``(R,)`` for balls.
    """

    kind: str
    dim: int
    extent: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParams(f"unknown body kind {self.kind!r}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise InvalidParams("dim must be a positive integer")
        ext = tuple(float(e) for e in self.extent)
        if self.kind == "unit-box":
            if ext and any(e != 1.0 for e in ext):
                raise InvalidParams("unit-box takes no extent")
            ext = (1.0,) * self.dim
        elif self.kind == "scaled-box":
            if len(ext) != self.dim:
                raise InvalidParams("scaled-box needs one side length per dimension")
        else:
            if len(ext) != 1:
                raise InvalidParams("centered-ball takes a single radius")
        if any(e <= 0 for e in ext):
            raise InvalidParams("extents must be positive")
        object.__setattr__(self, "extent", ext)
        object.__setattr__(self, "dim", int(self.dim))

    @property
    def is_box(self):
        return self.kind != "centered-ball"

    @property
    def radius(self):
        return self.extent[0]

    @property
    def sides(self):
        """Side lengths of the body's axis-aligned bounding box."""
        if self.is_box:
            return np.array(self.extent)
        return np.full(self.dim, 2 * self.radius)

    @property
    def lower(self):
        return np.zeros(self.dim) if self.is_box else np.full(self.dim, -self.radius)

    @property
    def vol(self):
        if self.is_box:
            return float(np.prod(self.extent))
        return unit_ball_volume(self.dim) * self.radius**self.dim

    @property
    def diam(self):
        if self.is_box:
            return float(np.sqrt(np.sum(np.square(self.extent))))
        return 2 * self.radius

    def scaled(self, t):
        if t <= 0:
            raise ValueError("scale factor must be positive")
        if self.kind == "centered-ball":
            return ConvexBody("centered-ball", self.dim, (t * self.radius,))
        return ConvexBody("scaled-box", self.dim, tuple(t * e for e in self.extent))

    def contains(self, x):
        """Boolean mask of the points ``x`` (shape ``(..., dim)``) lying in the body."""
        x = np.asarray(x, dtype=float)
        if self.is_box:
            return np.all((x >= 0) & (x <= np.asarray(self.extent)), axis=-1)
        return np.sum(x * x, axis=-1) <= self.radius**2

    def sample_uniform(self, rng, n):
        if self.is_box:
            return rng.random((n, self.dim)) * np.asarray(self.extent)
        g = rng.standard_normal((n, self.dim))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        r = self.radius * rng.random(n) ** (1.0 / self.dim)
        return g * r[:, None]

    def to_json(self):
        return {"kind": self.kind, "dim": self.dim, "extent": list(self.extent)}

    @classmethod
    def from_json(cls, obj):
        extra = set(obj) - {"kind", "dim", "extent"}
        if extra:
            raise InvalidParams(f"unknown keys in body spec: {sorted(extra)}")
        try:
            return cls(obj["kind"], obj["dim"], tuple(obj.get("extent", ())))
        except KeyError as exc:
            raise InvalidParams(f"body spec missing key {exc}") from None


def unit_box(dim=1):
    return ConvexBody("unit-box", dim)


@dataclass(frozen=True)
class GrowthSchedule:
    """Power-law window growth t1(t) = t**gamma1, t2(t) = t**gamma2."""

    gamma1: float = 1.0
    gamma2: float = 1.0

    def __post_init__(self):
        if not (self.gamma1 > 0 and self.gamma2 > 0):
            raise InvalidParams("growth rates must be positive")

    def t1(self, t):
        return t**self.gamma1

    def t2(self, t):
        return t**self.gamma2

    def to_json(self):
        return {"gamma1": self.gamma1, "gamma2": self.gamma2}

    @classmethod
    def from_json(cls, obj):
        extra = set(obj) - {"gamma1", "gamma2"}
        if extra:
            raise InvalidParams(f"unknown keys in schedule spec: {sorted(extra)}")
        return cls(float(obj["gamma1"]), float(obj["gamma2"]))


@dataclass(frozen=True)
class WindowSpec:
    body1: ConvexBody
    body2: ConvexBody
    schedule: GrowthSchedule = GrowthSchedule()

    @property
    def d1(self):
        return self.body1.dim

    @property
    def d2(self):
        return self.body2.dim

    def bodies_at(self, t):
        """The scaled bodies ``t1(t) D1`` and ``t2(t) D2``."""
        return self.body1.scaled(self.schedule.t1(t)), self.body2.scaled(self.schedule.t2(t))

    def volume_at(self, t):
        b1, b2 = self.bodies_at(t)
        return b1.vol * b2.vol

    def check_dims(self, C):
        if (C.d1, C.d2) != (self.d1, self.d2):
            raise InvalidParams(
                f"window dims ({self.d1}, {self.d2}) do not match covariance dims ({C.d1}, {C.d2})")

    def to_json(self):
        return {"body1": self.body1.to_json(), "body2": self.body2.to_json(),
                "schedule": self.schedule.to_json()}

    @classmethod
    def from_json(cls, obj):
        extra = set(obj) - {"body1", "body2", "schedule"}
        if extra:
            raise InvalidParams(f"unknown keys in window spec: {sorted(extra)}")
        return cls(ConvexBody.from_json(obj["body1"]), ConvexBody.from_json(obj["body2"]),
                   GrowthSchedule.from_json(obj.get("schedule", {"gamma1": 1, "gamma2": 1})))


def _ball_lens(radius, s, d):
    """Volume of the intersection of two d-balls of radius ``radius`` at distance ``s``."""
    if s >= 2 * radius:
        return 0.0
    if d == 1:
        return 2 * radius - s
    if d == 2:
        return 2 * radius**2 * math.acos(s / (2 * radius)) - 0.5 * s * math.sqrt(4 * radius**2 - s * s)
    if d == 3:
        return math.pi * (4 * radius + s) * (2 * radius - s) ** 2 / 12.0
    raise ValueError("closed-form lens only for d <= 3")


def covariogram_mc(body, z, n_points=10**6, seed=0):
    """Monte Carlo estimate of vol(D ∩ (D + z)) with its standard error."""
    z = np.asarray(z, dtype=float).reshape(body.dim)
    rng = np.random.default_rng(seed)
    hits = 0
    done = 0
    chunk = 1 << 18
    while done < n_points:
        m = min(chunk, n_points - done)
        x = body.sample_uniform(rng, m)
        hits += int(np.count_nonzero(body.contains(x - z)))
        done += m
    p = hits / n_points
    return body.vol * p, body.vol * math.sqrt(p * (1 - p) / n_points)


def covariogram(body, z, n_points=10**6, seed=0):
    """Covariogram g(D, z) = vol(D ∩ (D + z)).

    Closed form for boxes and for balls in dimension <= 3; Monte Carlo with
    ``n_points`` samples otherwise (the standard error is logged).
    """
    z = np.asarray(z, dtype=float)
    if z.size != body.dim:
        raise ValueError(f"lag must have {body.dim} components")
    z = z.reshape(body.dim)
    if body.is_box:
        return float(np.prod(np.clip(np.asarray(body.extent) - np.abs(z), 0.0, None)))
    s = float(np.linalg.norm(z))
    if body.dim <= 3:
        return _ball_lens(body.radius, s, body.dim)
    value, se = covariogram_mc(body, z, n_points, seed)
    log.info("ball covariogram in dim %d by Monte Carlo: %.6g +/- %.2g", body.dim, value, se)
    return value


def covariogram_scaling_check(body, z, t):
    """Both sides of g(tD, z) = t^d g(D, z / t)."""
    if t <= 0:
        raise ValueError("t must be positive")
    z = np.asarray(z, dtype=float)
    return covariogram(body.scaled(t), z), t**body.dim * covariogram(body, z / t)


def rate_admissible(schedule, factor2, d1):
    """Whether t1(t) * c2(t2(t))^(1/d1) diverges for power-law schedules.

    True iff gamma1 - gamma2 * rho2 / d1 > 0; an exponential factor2 never
    qualifies, and the boundary case is rejected.
    """
    if factor2.rho is None:
        raise InvalidParams("factor2 has no declared tail index")
    if math.isinf(factor2.rho):
        return False
    exponent = schedule.gamma1 - schedule.gamma2 * factor2.rho / d1
    if math.isclose(exponent, 0.0, abs_tol=1e-12):
        return False
    return exponent > 0
