"""Finite-difference differential geometry on an opaque coordinate map.

A "map" here is any callable taking an (m, n) array of parameter points to
an (m, n) array of (possibly complex) coordinates; solver batches and
closed-form references both qualify. All derivatives are central finite
differences. Each operation evaluates the map once on a dense local
lattice around u and assembles every needed derivative from that single
batch, so nested derivatives (scale factors, rotation coefficients,
Christoffel symbols, curvature) never trigger extra solves.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .baker import Solver
from .curve import SpectralData, check_Q_residues
from .errors import InputError, NonPositiveDiagonal, StencilFailure

_D1 = {
    2: {-1: -0.5, 1: 0.5},
    4: {-2: 1.0 / 12.0, -1: -8.0 / 12.0, 1: 8.0 / 12.0, 2: -1.0 / 12.0},
}
_D2 = {
    2: {-1: 1.0, 0: -2.0, 1: 1.0},
    4: {-2: -1.0 / 12.0, -1: 16.0 / 12.0, 0: -30.0 / 12.0,
        1: 16.0 / 12.0, 2: -1.0 / 12.0},
}


@dataclass(frozen=True)
class FDConfig:
    h: float = 1e-3
    order: int = 4

    def __post_init__(self):
        if not (1e-8 <= self.h <= 1e-1):
            raise InputError(f"step {self.h} outside [1e-8, 1e-1]")
        if self.order not in (2, 4):
            raise InputError(f"stencil order must be 2 or 4, got {self.order}")

    @property
    def radius(self) -> int:
        return self.order // 2


FIRST_DERIVATIVE_FD = FDConfig(h=1e-5, order=2)
SECOND_DERIVATIVE_FD = FDConfig(h=1e-3, order=4)


class _Lattice:
    """Map values on a tensor grid u + h * k, |k_a| <= halfwidth, with
    memoized derived quantities (derivatives, scale factors, symbols)."""

    def __init__(self, map_fn, u, fd: FDConfig, halfwidth: int, eta=None):
        self.u = np.asarray(u, dtype=float)
        self.n = self.u.size
        self.fd = fd
        self.hw = halfwidth
        self.eta = np.ones(self.n) if eta is None else np.asarray(eta, dtype=float)
        width = 2 * halfwidth + 1
        offsets = np.array(
            list(itertools.product(range(-halfwidth, halfwidth + 1),
                                   repeat=self.n)))
        points = self.u[None, :] + fd.h * offsets
        try:
            values = np.asarray(map_fn(points), dtype=complex)
        except Exception as exc:
            raise StencilFailure(f"map evaluation failed on stencil: {exc}") from exc
        if values.shape != (points.shape[0], self.n):
            raise StencilFailure(
                f"map returned shape {values.shape}, expected {points.shape}")
        self.values = values.reshape((width,) * self.n + (self.n,))
        self._cache = {}

    # -- raw values and x-derivatives ----------------------------------------

    def x(self, idx=()) -> np.ndarray:
        idx = self._pad(idx)
        return self.values[tuple(self.hw + k for k in idx)]

    def _pad(self, idx):
        idx = tuple(idx)
        return idx + (0,) * (self.n - len(idx))

    def _memo(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    def _apply(self, stencil, axis, fn, idx, scale):
        idx = self._pad(idx)
        acc = None
        for off, w in stencil.items():
            shifted = list(idx)
            shifted[axis] += off
            term = w * fn(tuple(shifted))
            acc = term if acc is None else acc + term
        return acc * scale

    def dx(self, axis, idx=()) -> np.ndarray:
        key = ("dx", axis, self._pad(idx))
        return self._memo(key, lambda: self._apply(
            _D1[self.fd.order], axis, self.x, idx, 1.0 / self.fd.h))

    def d2x(self, a, b, idx=()) -> np.ndarray:
        idx = self._pad(idx)
        if a == b:
            key = ("d2x", a, a, idx)
            return self._memo(key, lambda: self._apply(
                _D2[self.fd.order], a, self.x, idx, 1.0 / self.fd.h ** 2))
        key = ("d2x", min(a, b), max(a, b), idx)
        return self._memo(key, lambda: self._apply(
            _D1[self.fd.order], a, lambda j: self.dx(b, j), idx,
            1.0 / self.fd.h))

    def jacobian(self, idx=()) -> np.ndarray:
        """J[k, a] = d x^k / d u^a."""
        return np.stack([self.dx(a, idx) for a in range(self.n)], axis=1)

    # -- metric and scale factors ---------------------------------------------

    def metric(self, idx=()) -> np.ndarray:
        key = ("g", self._pad(idx))

        def build():
            J = self.jacobian(idx)
            return J.T @ (self.eta[:, None] * J)

        return self._memo(key, build)

    def scale_factors(self, idx=()) -> np.ndarray:
        key = ("H", self._pad(idx))

        def build():
            diag = np.diagonal(self.metric(idx)).real
            if np.any(diag <= 0):
                raise NonPositiveDiagonal(
                    f"metric diagonal {diag.tolist()} at offset {idx}")
            return np.sqrt(diag)

        return self._memo(key, build)

    def dH(self, axis, idx=()) -> np.ndarray:
        key = ("dH", axis, self._pad(idx))
        return self._memo(key, lambda: self._apply(
            _D1[self.fd.order], axis, self.scale_factors, idx, 1.0 / self.fd.h))

    def d2H(self, a, b, idx=()) -> np.ndarray:
        idx = self._pad(idx)
        if a == b:
            key = ("d2H", a, a, idx)
            return self._memo(key, lambda: self._apply(
                _D2[self.fd.order], a, self.scale_factors, idx,
                1.0 / self.fd.h ** 2))
        key = ("d2H", min(a, b), max(a, b), idx)
        return self._memo(key, lambda: self._apply(
            _D1[self.fd.order], a, lambda j: self.dH(b, j), idx,
            1.0 / self.fd.h))

    # -- rotation coefficients and Christoffel symbols ------------------------

    def beta(self, idx=()) -> np.ndarray:
        """beta[i, j] = dH_j/du^i / H_i for i != j, zero diagonal."""
        key = ("beta", self._pad(idx))

        def build():
            H = self.scale_factors(idx)
            out = np.zeros((self.n, self.n))
            for i in range(self.n):
                dHi = self.dH(i, idx)
                for j in range(self.n):
                    if i != j:
                        out[i, j] = dHi[j] / H[i]
            return out

        return self._memo(key, build)

    def dbeta(self, axis, idx=()) -> np.ndarray:
        key = ("dbeta", axis, self._pad(idx))
        return self._memo(key, lambda: self._apply(
            _D1[self.fd.order], axis, self.beta, idx, 1.0 / self.fd.h))

    def christoffel(self, idx=()) -> np.ndarray:
        """Gamma[k, i, j] for the diagonal metric, from the scale factors."""
        key = ("Gamma", self._pad(idx))

        def build():
            H = self.scale_factors(idx)
            dH = np.stack([self.dH(a, idx) for a in range(self.n)])  # [a, i]
            out = np.zeros((self.n, self.n, self.n))
            for k in range(self.n):
                for j in range(self.n):
                    out[k, k, j] = dH[j, k] / H[k]
                    out[k, j, k] = out[k, k, j]
                for i in range(self.n):
                    if i != k:
                        out[k, i, i] = -H[i] * dH[k, i] / H[k] ** 2
            return out

        return self._memo(key, build)

    def dchristoffel(self, axis, idx=()) -> np.ndarray:
        key = ("dGamma", axis, self._pad(idx))
        return self._memo(key, lambda: self._apply(
            _D1[self.fd.order], axis, self.christoffel, idx, 1.0 / self.fd.h))


def _as_map(map_fn):
    if isinstance(map_fn, SpectralData):
        return Solver(map_fn).map_batch
    if isinstance(map_fn, Solver):
        return map_fn.map_batch
    return map_fn


def jacobian(map_fn, u, fd: FDConfig = FIRST_DERIVATIVE_FD) -> np.ndarray:
    lat = _Lattice(_as_map(map_fn), u, fd, fd.radius)
    return lat.jacobian()


def metric(map_fn, u, fd: FDConfig = FIRST_DERIVATIVE_FD, eta=None):
    """Gram matrix of the Jacobian with weights eta.

    Returns (g, imag_max): the real part of the metric and the largest
    imaginary component encountered (reported, never dropped silently).
    """
    lat = _Lattice(_as_map(map_fn), u, fd, fd.radius, eta=eta)
    g = lat.metric()
    return g.real.copy(), float(np.max(np.abs(g.imag)))


def lame(g) -> np.ndarray:
    diag = np.diagonal(np.asarray(g)).real
    if np.any(diag <= 0):
        raise NonPositiveDiagonal(f"metric diagonal {diag.tolist()}")
    return np.sqrt(diag)


def rotation(map_fn, u, fd: FDConfig = SECOND_DERIVATIVE_FD, eta=None) -> np.ndarray:
    lat = _Lattice(_as_map(map_fn), u, fd, 2 * fd.radius, eta=eta)
    return lat.beta()


@dataclass
class SystemResiduals:
    """Residuals of the four scale-factor/rotation systems at one point.

    Each list holds one entry per index combination; for n = 2 the
    triple-index families are genuinely empty rather than zero.
    """

    eq1: list = field(default_factory=list)
    eq2: list = field(default_factory=list)
    eq4: list = field(default_factory=list)
    eq5: list = field(default_factory=list)

    def max_abs(self) -> float:
        values = self.eq1 + self.eq2 + self.eq4 + self.eq5
        return max((abs(v) for v in values), default=0.0)


def check_systems(map_fn, u, fd: FDConfig = SECOND_DERIVATIVE_FD,
                  eta=None) -> SystemResiduals:
    """Residuals of the curvature equations for the scale factors (the
    second-derivative pair) and the rotation-coefficient form of the same
    conditions (first-derivative pair)."""
    # deepest chain: d(beta) -> beta -> dH -> H -> dx, three stencil layers
    lat = _Lattice(_as_map(map_fn), u, fd, 3 * fd.radius, eta=eta)
    n = lat.n
    H = lat.scale_factors()
    dH = np.stack([lat.dH(a) for a in range(n)])  # [a, i]
    out = SystemResiduals()

    for i, j, k in itertools.combinations(range(n), 3):
        for ii, jj, kk in ((i, j, k), (j, i, k), (k, i, j)):
            lhs = lat.d2H(jj, kk)[ii]
            rhs = (dH[kk, jj] / H[jj]) * dH[jj, ii] \
                + (dH[jj, kk] / H[kk]) * dH[kk, ii]
            out.eq1.append(lhs - rhs)

    for i, j in itertools.combinations(range(n), 2):
        term = lat.d2H(j, j)[i] / H[j] - dH[j, i] * dH[j, j] / H[j] ** 2
        term += lat.d2H(i, i)[j] / H[i] - dH[i, j] * dH[i, i] / H[i] ** 2
        for k in range(n):
            if k != i and k != j:
                term += dH[k, i] * dH[k, j] / H[k] ** 2
        out.eq2.append(term)

    beta = lat.beta()
    for i, j, k in itertools.permutations(range(n), 3):
        if i < j:  # each ordered pair (i,j) once per admissible k
            out.eq4.append(lat.dbeta(k)[i, j] - beta[i, k] * beta[k, j])
            out.eq4.append(lat.dbeta(k)[j, i] - beta[j, k] * beta[k, i])

    for i, j in itertools.combinations(range(n), 2):
        term = lat.dbeta(i)[i, j] + lat.dbeta(j)[j, i]
        for k in range(n):
            if k != i and k != j:
                term += beta[k, i] * beta[k, j]
        out.eq5.append(term)

    return out


def christoffel_and_riemann(map_fn, u, fd: FDConfig = SECOND_DERIVATIVE_FD,
                            eta=None):
    """Christoffel symbols at u and the max |R^a_{b c d}| of the curvature
    tensor assembled from finite-differenced symbols."""
    lat = _Lattice(_as_map(map_fn), u, fd, 3 * fd.radius, eta=eta)
    n = lat.n
    gamma = lat.christoffel()
    dgamma = np.stack([lat.dchristoffel(a) for a in range(n)])  # [a, k, i, j]
    riemann = np.zeros((n, n, n, n))
    for a in range(n):
        for b in range(n):
            for c in range(n):
                for d in range(n):
                    val = dgamma[c, a, d, b] - dgamma[d, a, c, b]
                    val += np.dot(gamma[a, c, :], gamma[:, d, b])
                    val -= np.dot(gamma[a, d, :], gamma[:, c, b])
                    riemann[a, b, c, d] = val
    return gamma, float(np.max(np.abs(riemann)))


def check_immersion(map_fn, u, fd: FDConfig = SECOND_DERIVATIVE_FD,
                    eta=None) -> float:
    """Max residual of the linear immersion system relating second
    derivatives of x to Christoffel symbols."""
    lat = _Lattice(_as_map(map_fn), u, fd, 2 * fd.radius, eta=eta)
    n = lat.n
    gamma = lat.christoffel()
    J = lat.jacobian()
    worst = 0.0
    for i in range(n):
        for j in range(n):
            lhs = lat.d2x(i, j)
            rhs = J @ gamma[:, i, j]
            worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


def epsilon_invariant(data: SpectralData, u_samples,
                      fd: FDConfig = FIRST_DERIVATIVE_FD) -> np.ndarray:
    """Relative spread of eta0^2 H_i^2 / h_i^2 across the samples.

    The theory makes this ratio a u-independent constant per axis; the
    returned vector holds the observed max relative deviation for each i.
    """
    eta0_sq = check_Q_residues(data)
    solver = Solver(data)
    u_samples = np.atleast_2d(np.asarray(u_samples, dtype=float))
    lead = solver.h_batch(u_samples)
    ratios = []
    for u, h_row in zip(u_samples, lead):
        lat = _Lattice(solver.map_batch, u, fd, fd.radius)
        H = lat.scale_factors()
        ratios.append(eta0_sq * H ** 2 / h_row ** 2)
    ratios = np.array(ratios)
    ref = ratios[0]
    return np.max(np.abs(ratios - ref[None, :]) / np.abs(ref)[None, :], axis=0)


@dataclass
class GeometryReport:
    u: list
    x: list
    imag_max: float
    g_offdiag_max: float
    lame: list
    rotation: list
    eq1_max: float
    eq2_max: float
    eq4_max: float
    eq5_max: float
    riemann_max: float
    immersion_max: float

    def to_json(self) -> dict:
        return dict(self.__dict__)


def build_report(map_fn, u,
                 fd_first: FDConfig = FIRST_DERIVATIVE_FD,
                 fd_second: FDConfig = SECOND_DERIVATIVE_FD,
                 eta=None) -> GeometryReport:
    """One-stop verification record at a single parameter point."""
    fn = _as_map(map_fn)
    u = np.asarray(u, dtype=float)
    x = np.asarray(fn(u[None, :]), dtype=complex)[0]
    g, imag_max = metric(fn, u, fd_first, eta=eta)
    off = g - np.diag(np.diagonal(g))
    H = lame(g)
    beta = rotation(fn, u, fd_second, eta=eta)
    systems = check_systems(fn, u, fd_second, eta=eta)
    _, riemann_max = christoffel_and_riemann(fn, u, fd_second, eta=eta)
    immersion = check_immersion(fn, u, fd_second, eta=eta)

    def fmax(vals):
        return max((abs(v) for v in vals), default=0.0)

    return GeometryReport(
        u=u.tolist(),
        x=[[float(v.real), float(v.imag)] for v in x],
        imag_max=float(np.max(np.abs(x.imag))),
        g_offdiag_max=float(np.max(np.abs(off))),
        lame=H.tolist(),
        rotation=beta.tolist(),
        eq1_max=fmax(systems.eq1),
        eq2_max=fmax(systems.eq2),
        eq4_max=fmax(systems.eq4),
        eq5_max=fmax(systems.eq5),
        riemann_max=riemann_max,
        immersion_max=immersion,
    )
