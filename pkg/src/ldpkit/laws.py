"""Innovation laws with closed-form log-Laplace transforms.

Each law knows its transform, the open effective domain where the
transform is finite, the scaled-particle rate function, and exact samplers
(plain and exponentially tilted).  Domain membership is strict: boundary
points report +inf, never a large finite value, and no NaN is produced.

Built-ins: the squared standard normal, the duplicated pair of one square,
and the non-convex cross moments (X^2, Y^2, XY) of an independent normal
pair.  Custom convex laws are weighted sums of independent gamma
innovations, declared as a table of (shape, direction, rate) terms; their
effective domain is exactly a finite intersection of open halfspaces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .convex import HalfspaceDomain, halfspaces, support_function

CONE_TOL = 1e-9  # relative tolerance for membership in the cross-moment cone


def as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


class ParticleLaw:
    """Base class; subclasses fill in the transform, domain, rate and samplers."""

    name: str = "abstract"
    dim: int = 0
    convex: bool = False
    domain: HalfspaceDomain | None = None

    def _check_dim(self, v, what: str) -> np.ndarray:
        v = np.atleast_1d(np.asarray(v, dtype=float))
        if v.shape != (self.dim,):
            raise ValueError(f"{what} has shape {v.shape}, expected ({self.dim},)")
        return v

    def in_domain(self, theta) -> bool:
        theta = self._check_dim(theta, "tilt")
        if self.domain is None:
            raise NotImplementedError
        return self.domain.contains(theta, strict=True)

    def log_laplace(self, theta) -> float:
        raise NotImplementedError

    def log_laplace_grad(self, theta) -> np.ndarray:
        raise NotImplementedError

    def log_laplace_hess(self, theta) -> np.ndarray:
        raise NotImplementedError

    def rate_eval(self, z) -> float:
        """Rate of the single scaled particle; support function of the domain
        for convex laws."""
        z = self._check_dim(z, "point")
        if not self.convex or self.domain is None:
            raise NotImplementedError
        return support_function(self.domain, z)

    @property
    def mean(self) -> np.ndarray:
        return self.log_laplace_grad(np.zeros(self.dim))

    def sample(self, count: int, seed=0) -> np.ndarray:
        raise NotImplementedError

    def tilted_sample(self, theta, count: int, seed=0) -> np.ndarray:
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"<law {self.name} dim={self.dim} convex={self.convex}>"


class ChiSquare1(ParticleLaw):
    """Z = X^2 for X standard normal: transform -log(1-2t)/2 on t < 1/2."""

    name = "chisq1"
    dim = 1
    convex = True

    def __init__(self):
        self.domain = halfspaces([[1.0]], [0.5])

    def log_laplace(self, theta) -> float:
        t = float(self._check_dim(theta, "tilt")[0])
        if t >= 0.5:
            return np.inf
        return -0.5 * np.log1p(-2.0 * t)

    def log_laplace_grad(self, theta) -> np.ndarray:
        t = float(self._check_dim(theta, "tilt")[0])
        return np.array([1.0 / (1.0 - 2.0 * t)])

    def log_laplace_hess(self, theta) -> np.ndarray:
        t = float(self._check_dim(theta, "tilt")[0])
        return np.array([[2.0 / (1.0 - 2.0 * t) ** 2]])

    def sample(self, count: int, seed=0) -> np.ndarray:
        rng = as_generator(seed)
        return (rng.standard_normal(count) ** 2)[:, None]

    def tilted_sample(self, theta, count: int, seed=0) -> np.ndarray:
        # Tilting scales the square: X^2 under tilt t is X^2 / (1 - 2t).
        t = float(self._check_dim(theta, "tilt")[0])
        if t >= 0.5:
            raise ValueError("tilt outside the effective domain")
        return self.sample(count, seed) / (1.0 - 2.0 * t)


class ChiSquarePair(ParticleLaw):
    """Z = (X^2, X^2): one square duplicated, transform in t1 + t2 < 1/2."""

    name = "chisq_pair"
    dim = 2
    convex = True

    def __init__(self):
        self.domain = halfspaces([[1.0, 1.0]], [0.5])

    def log_laplace(self, theta) -> float:
        s = float(np.sum(self._check_dim(theta, "tilt")))
        if s >= 0.5:
            return np.inf
        return -0.5 * np.log1p(-2.0 * s)

    def log_laplace_grad(self, theta) -> np.ndarray:
        s = float(np.sum(self._check_dim(theta, "tilt")))
        return np.full(2, 1.0 / (1.0 - 2.0 * s))

    def log_laplace_hess(self, theta) -> np.ndarray:
        s = float(np.sum(self._check_dim(theta, "tilt")))
        return np.full((2, 2), 2.0 / (1.0 - 2.0 * s) ** 2)

    def sample(self, count: int, seed=0) -> np.ndarray:
        rng = as_generator(seed)
        w = rng.standard_normal(count) ** 2
        return np.stack([w, w], axis=1)

    def tilted_sample(self, theta, count: int, seed=0) -> np.ndarray:
        s = float(np.sum(self._check_dim(theta, "tilt")))
        if s >= 0.5:
            raise ValueError("tilt outside the effective domain")
        return self.sample(count, seed) / (1.0 - 2.0 * s)


class GaussCross(ParticleLaw):
    """Z = (X^2, Y^2, XY) for independent standard normals X, Y.

    The rate is (x + y)/2 plus the indicator of the cone r = +-sqrt(xy),
    x, y >= 0 -- not convex, so no halfspace domain is exposed.
    """

    name = "gauss_cross"
    dim = 3
    convex = False
    domain = None

    def _q(self, theta) -> tuple[float, float, float]:
        a, b, c = self._check_dim(theta, "tilt")
        return 1.0 - 2.0 * a, 1.0 - 2.0 * b, c

    def in_domain(self, theta) -> bool:
        p, q, c = self._q(theta)
        return p > 0.0 and q > 0.0 and p * q > c * c

    def log_laplace(self, theta) -> float:
        p, q, c = self._q(theta)
        det = p * q - c * c
        if p <= 0.0 or q <= 0.0 or det <= 0.0:
            return np.inf
        return -0.5 * np.log(det)

    def log_laplace_grad(self, theta) -> np.ndarray:
        p, q, c = self._q(theta)
        det = p * q - c * c
        return np.array([q / det, p / det, c / det])

    def log_laplace_hess(self, theta) -> np.ndarray:
        p, q, c = self._q(theta)
        det = p * q - c * c
        return np.array(
            [
                [2 * q * q, 2 * c * c, 2 * q * c],
                [2 * c * c, 2 * p * p, 2 * p * c],
                [2 * q * c, 2 * p * c, det + 2 * c * c],
            ]
        ) / det**2

    def rate_eval(self, z) -> float:
        x, y, r = self._check_dim(z, "point")
        scale = max(1.0, abs(x), abs(y), r * r)
        on_cone = x >= -CONE_TOL * scale and y >= -CONE_TOL * scale and abs(
            r * r - x * y
        ) <= CONE_TOL * scale
        return 0.5 * (x + y) if on_cone else np.inf

    def sample(self, count: int, seed=0) -> np.ndarray:
        rng = as_generator(seed)
        xy = rng.standard_normal((count, 2))
        x, y = xy[:, 0], xy[:, 1]
        return np.stack([x * x, y * y, x * y], axis=1)

    def tilted_sample(self, theta, count: int, seed=0) -> np.ndarray:
        # The tilted pair is centered Gaussian with covariance (I - 2A)^{-1}.
        a, b, c = self._check_dim(theta, "tilt")
        if not self.in_domain(theta):
            raise ValueError("tilt outside the effective domain")
        cov = np.linalg.inv(np.array([[1 - 2 * a, -c], [-c, 1 - 2 * b]]))
        chol = np.linalg.cholesky(cov)
        rng = as_generator(seed)
        xy = rng.standard_normal((count, 2)) @ chol.T
        x, y = xy[:, 0], xy[:, 1]
        return np.stack([x * x, y * y, x * y], axis=1)


@dataclass(frozen=True)
class GammaTerm:
    shape: float
    direction: tuple[float, ...]
    rate: float


class GammaMixLaw(ParticleLaw):
    """Z = sum_j a_j G_j with independent G_j ~ Gamma(shape_j, rate_j).

    Covers every custom convex law the config format accepts; the effective
    domain is {theta : <a_j, theta> < rate_j for all j}.
    """

    convex = True

    def __init__(self, dim: int, terms: list[GammaTerm], name: str = "custom"):
        if not terms:
            raise ValueError("a gamma-mix law needs at least one term")
        for t in terms:
            if t.shape <= 0 or t.rate <= 0:
                raise ValueError("gamma terms need positive shape and rate")
            if len(t.direction) != dim:
                raise ValueError("gamma term direction has wrong dimension")
        self.name = name
        self.dim = dim
        self.terms = tuple(terms)
        self._A = np.array([t.direction for t in terms], dtype=float)
        self._shapes = np.array([t.shape for t in terms])
        self._rates = np.array([t.rate for t in terms])
        self.domain = halfspaces(self._A, self._rates, dim)

    def _slacks(self, theta) -> np.ndarray:
        theta = self._check_dim(theta, "tilt")
        return self._rates - self._A @ theta

    def log_laplace(self, theta) -> float:
        s = self._slacks(theta)
        if np.any(s <= 0.0):
            return np.inf
        return float(np.sum(self._shapes * (np.log(self._rates) - np.log(s))))

    def log_laplace_grad(self, theta) -> np.ndarray:
        s = self._slacks(theta)
        return (self._shapes / s) @ self._A

    def log_laplace_hess(self, theta) -> np.ndarray:
        s = self._slacks(theta)
        return (self._A.T * (self._shapes / s**2)) @ self._A

    def sample(self, count: int, seed=0) -> np.ndarray:
        rng = as_generator(seed)
        g = rng.gamma(self._shapes, 1.0 / self._rates, size=(count, self._shapes.size))
        return g @ self._A

    def tilted_sample(self, theta, count: int, seed=0) -> np.ndarray:
        s = self._slacks(theta)
        if np.any(s <= 0.0):
            raise ValueError("tilt outside the effective domain")
        rng = as_generator(seed)
        g = rng.gamma(self._shapes, 1.0 / s, size=(count, self._shapes.size))
        return g @ self._A


_BUILTINS = {
    "chisq1": ChiSquare1,
    "chisq_pair": ChiSquarePair,
    "gauss_cross": GaussCross,
}


def law_by_name(name: str) -> ParticleLaw:
    try:
        return _BUILTINS[name]()
    except KeyError:
        raise ValueError(f"unknown law {name!r}; built-ins: {sorted(_BUILTINS)}") from None


def custom_law(dim: int, terms, name: str = "custom") -> GammaMixLaw:
    parsed = [
        t if isinstance(t, GammaTerm) else GammaTerm(float(t[0]), tuple(t[1]), float(t[2]))
        for t in terms
    ]
    return GammaMixLaw(dim, parsed, name=name)


# Spec-level free functions mirroring the law methods.


def log_laplace(law: ParticleLaw, theta) -> float:
    return law.log_laplace(theta)


def rate_eval(law: ParticleLaw, z) -> float:
    return law.rate_eval(z)


def sample(law: ParticleLaw, seed, count: int) -> np.ndarray:
    if count < 1:
        raise ValueError("count must be >= 1")
    return law.sample(count, seed)
