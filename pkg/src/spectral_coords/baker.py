"""Wave-function assembly and evaluation.

The wave function on component c has the form

    psi_c(z) = exp(sum_terms u^var * phase(z)) * (c_0 + sum_k c_k / (z - alpha_k)),

and the unknown coefficients are pinned down by the gluing equalities and
the point normalizations. The system is small, so it is rebuilt and solved
fresh at every u; a Solver instance precomputes everything u-independent
(basis values and phase values at all evaluation points) so that batches of
u are handled with stacked numpy solves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curve import ComponentAnsatz, CurvePoint, SpectralData, validate_counting
from .errors import EssentialSingularity, PoleEvaluation, SingularSystem
from .numerics import is_inf, same_point

CONDITION_LIMIT = 1e12


def _phase_vector(data: SpectralData, comp: int, z) -> np.ndarray:
    """Coefficients of u in the exponent of psi_c at the point z."""
    vec = np.zeros(data.n, dtype=complex)
    for term in data.ansatz[comp].essential:
        try:
            vec[term.var - 1] += term.phase.eval(z)
        except PoleEvaluation as exc:
            raise EssentialSingularity(
                f"phase of u^{term.var} blows up at {z} on component {comp}"
            ) from exc
    return vec


def _basis_row(data: SpectralData, comp: int, z, offsets) -> np.ndarray:
    """Rational-basis values (constant and pole terms) in the full layout."""
    row = np.zeros(offsets[-1], dtype=complex)
    base = offsets[comp]
    row[base] = 1.0
    for k, alpha in enumerate(data.ansatz[comp].poles):
        if is_inf(z):
            row[base + 1 + k] = 0.0
        else:
            if same_point(z, alpha):
                raise PoleEvaluation(f"evaluation at ansatz pole {alpha}")
            row[base + 1 + k] = 1.0 / (z - alpha)
    return row


def exp_factor(ansatz: ComponentAnsatz, u, z) -> complex:
    """exp(sum u^var * phase(z)); defined only away from phase poles."""
    u = np.asarray(u, dtype=float)
    total = 0j
    for term in ansatz.essential:
        try:
            total += u[term.var - 1] * term.phase.eval(z)
        except PoleEvaluation as exc:
            raise EssentialSingularity(
                f"phase of u^{term.var} blows up at {z}") from exc
    return complex(np.exp(total))


@dataclass(frozen=True)
class CoefficientVector:
    values: np.ndarray  # flat, one block per component
    u: np.ndarray
    offsets: tuple  # block start per component, plus total length

    def constant(self, comp: int) -> complex:
        return complex(self.values[self.offsets[comp]])

    def pole_coeff(self, comp: int, k: int) -> complex:
        return complex(self.values[self.offsets[comp] + 1 + k])


@dataclass(frozen=True)
class SolveDiagnostics:
    condition_estimate: float
    residual_norm: float


class Solver:
    """Precomputed linear system, reusable across many values of u.

    Every matrix entry is a sum of terms base * exp(phase . u); the bases
    and phases are assembled once, so a batch of m parameter points costs
    one stacked (m, U, U) solve.
    """

    def __init__(self, data: SpectralData):
        self.data = data
        report = validate_counting(data)
        offsets = [0]
        for comp in data.ansatz:
            offsets.append(offsets[-1] + 1 + len(comp.poles))
        self.offsets = tuple(offsets)
        self.size = offsets[-1]
        if self.size != report.unknowns:
            raise AssertionError("layout disagrees with counting")

        rows, cols, base, phase = [], [], [], []

        def add_point(row_index: int, cp: CurvePoint, sign: float):
            bvals = _basis_row(data, cp.component, cp.point, self.offsets)
            pvec = _phase_vector(data, cp.component, cp.point)
            lo = self.offsets[cp.component]
            hi = self.offsets[cp.component + 1]
            for col in range(lo, hi):
                if bvals[col] == 0 and col != lo:
                    continue
                rows.append(row_index)
                cols.append(col)
                base.append(sign * bvals[col])
                phase.append(pvec)

        rhs = np.zeros(self.size, dtype=complex)
        r = 0
        for g in data.gluings:
            for k in range(len(g.points) - 1):
                add_point(r, g.points[k], +1.0)
                add_point(r, g.points[k + 1], -1.0)
                r += 1
        for nm in data.normalizations:
            add_point(r, nm.point, +1.0)
            rhs[r] = nm.value
            r += 1
        if r != self.size:
            raise AssertionError("row count disagrees with counting")

        self._rows = np.asarray(rows)
        self._cols = np.asarray(cols)
        self._base = np.asarray(base, dtype=complex)
        self._phase = np.asarray(phase, dtype=complex)  # (terms, n)
        self.rhs = rhs

        # evaluation data for the coordinate map x^j = psi(Q_j) and for h_i
        self._q_base = np.array(
            [_basis_row(data, cp.component, cp.point, self.offsets)
             for cp in data.Q])
        self._q_phase = np.array(
            [_phase_vector(data, cp.component, cp.point) for cp in data.Q])
        self._h_base, self._h_phase = self._leading_data()

    def _leading_data(self):
        """Basis rows and stripped phase vectors at the markers P_i."""
        data = self.data
        h_base, h_phase = [], []
        for i, cp in enumerate(data.P_markers):
            vec = np.zeros(data.n, dtype=complex)
            for term in data.ansatz[cp.component].essential:
                if term.phase.order_at(cp.point) < 0:
                    if term.var != i + 1:
                        raise EssentialSingularity(
                            f"phase of u^{term.var} blows up at marker {i + 1}")
                    continue
                vec[term.var - 1] += term.phase.eval(cp.point)
            h_base.append(_basis_row(data, cp.component, cp.point, self.offsets))
            h_phase.append(vec)
        return np.array(h_base), np.array(h_phase)

    # -- assembly and solving -------------------------------------------------

    def matrices(self, us: np.ndarray) -> np.ndarray:
        us = np.atleast_2d(np.asarray(us, dtype=float))
        weights = self._base[:, None] * np.exp(self._phase @ us.T)  # (T, m)
        A = np.zeros((us.shape[0], self.size, self.size), dtype=complex)
        np.add.at(A, (slice(None), self._rows, self._cols), weights.T)
        return A

    def solve_batch(self, us: np.ndarray):
        us = np.atleast_2d(np.asarray(us, dtype=float))
        A = self.matrices(us)
        cond = np.linalg.cond(A)
        worst = float(np.max(cond))
        if not np.isfinite(worst) or worst > CONDITION_LIMIT:
            k = int(np.argmax(cond))
            raise SingularSystem(
                f"condition estimate {worst:.3e} at u = {us[k].tolist()}")
        b = np.broadcast_to(self.rhs, (us.shape[0], self.size))
        coeffs = np.linalg.solve(A, b[..., None])[..., 0]
        resid = np.linalg.norm(
            np.einsum("mij,mj->mi", A, coeffs) - b, axis=1)
        return coeffs, cond, resid

    def map_batch(self, us: np.ndarray) -> np.ndarray:
        """Coordinates x(u) for a batch of u, shape (m, n), complex."""
        us = np.atleast_2d(np.asarray(us, dtype=float))
        coeffs, _, _ = self.solve_batch(us)
        growth = np.exp(us @ self._q_phase.T)  # (m, n)
        return growth * (coeffs @ self._q_base.T)

    def h_batch(self, us: np.ndarray) -> np.ndarray:
        """Leading coefficients h_i(u) for a batch of u, shape (m, n)."""
        us = np.atleast_2d(np.asarray(us, dtype=float))
        coeffs, _, _ = self.solve_batch(us)
        growth = np.exp(us @ self._h_phase.T)
        return growth * (coeffs @ self._h_base.T)


def assemble_system(data: SpectralData, u):
    solver = Solver(data)
    A = solver.matrices(np.asarray(u, dtype=float))[0]
    return A, solver.rhs.copy()


def solve_coefficients(data: SpectralData, u):
    solver = Solver(data)
    u = np.asarray(u, dtype=float)
    coeffs, cond, resid = solver.solve_batch(u)
    vec = CoefficientVector(values=coeffs[0], u=u, offsets=solver.offsets)
    return vec, SolveDiagnostics(condition_estimate=float(cond[0]),
                                 residual_norm=float(resid[0]))


def eval_psi(data: SpectralData, coeffs: CoefficientVector, p: CurvePoint) -> complex:
    comp = data.ansatz[p.component]
    offsets = coeffs.offsets
    row = _basis_row(data, p.component, p.point, offsets)
    lo, hi = offsets[p.component], offsets[p.component + 1]
    rational = row[lo:hi] @ coeffs.values[lo:hi]
    return exp_factor(comp, coeffs.u, p.point) * rational


def coordinate_map(data: SpectralData, u):
    """x(u) with a reality report (largest imaginary part over the n outputs)."""
    solver = Solver(data)
    x = solver.map_batch(np.asarray(u, dtype=float))[0]
    return x, float(np.max(np.abs(x.imag)))


def h_values(data: SpectralData, coeffs: CoefficientVector) -> np.ndarray:
    solver = Solver(data)
    lead = solver.h_batch(np.asarray(coeffs.u, dtype=float))[0]
    return lead
