"""Validation of localized functions against decay/cancellation/smoothness
conditions, the inner-product bound parameters for pairs of such functions,
and construction of compactly supported atoms.

Candidates carry their own derivative evaluators (closed-form where the
construction permits, central finite differences otherwise).  Validation
reports the smallest admissible multiplicative constant per condition family
together with a uniformity check: a constant that keeps growing toward the
edge of the sampling region signals a decay exponent that the candidate does
not actually have.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .dyadic import DyadicCube
from .errors import PreconditionError
from .params import (
    DerivedIndices,
    MoleculeParams,
    molecule_param_sets,
    rounding_profile,
    strict_ceil,
)


def envelope(K: float, q: DyadicCube, pts: np.ndarray) -> np.ndarray:
    """(1 + |x - x_Q| / side)^-K scaled by |Q|^{-1/2}."""
    pts = np.atleast_2d(pts)
    t = (pts - np.array(q.lower)) / q.side
    r = np.linalg.norm(t, axis=-1)
    return q.volume ** -0.5 * (1.0 + r) ** -K


def multi_indices(n: int, total_max: int):
    """All multi-indices of length n with |gamma| <= total_max."""
    for total in range(total_max + 1):
        for combo in itertools.combinations_with_replacement(range(n), total):
            gamma = [0] * n
            for c in combo:
                gamma[c] += 1
            yield tuple(gamma)


@dataclass
class MoleculeCandidate:
    """A function attached to a cube, with derivative access.

    ``deriv(gamma, pts)`` returns the mixed partial; closed-form evaluators
    are registered in ``derivatives``, anything else falls back to central
    differences with step ``fd_step_rel * side``.
    """

    cube: DyadicCube
    func: object                      # pts (N, n) -> complex (N,)
    derivatives: dict = field(default_factory=dict)
    max_order: int = 0
    support_radius: float = math.inf  # in units of side, from the cube center
    fd_step_rel: float = 1e-5
    # for grid-sampled candidates: (spacing, lo tuple, hi tuple); integrals
    # then use the aligned left-endpoint rule, which is exact for the moments
    # of refinable sample data
    aligned_grid: tuple | None = None
    label: str = "candidate"

    def __call__(self, pts) -> np.ndarray:
        return np.asarray(self.func(np.atleast_2d(pts)), dtype=complex)

    def deriv(self, gamma: tuple[int, ...], pts) -> np.ndarray:
        order = sum(gamma)
        if order == 0:
            return self(pts)
        if gamma in self.derivatives:
            return np.asarray(self.derivatives[gamma](np.atleast_2d(pts)), dtype=complex)
        if order > self.max_order:
            raise PreconditionError(
                f"candidate declares derivatives up to order {self.max_order}, "
                f"requested {gamma}")
        # peel one coordinate and recurse with a central difference
        axis = next(i for i, gi in enumerate(gamma) if gi > 0)
        lower = tuple(gi - (1 if i == axis else 0) for i, gi in enumerate(gamma))
        h = self.fd_step_rel * self.cube.side
        pts = np.atleast_2d(pts)
        step = np.zeros(pts.shape[-1])
        step[axis] = h
        return (self.deriv(lower, pts + step) - self.deriv(lower, pts - step)) / (2 * h)


@dataclass(frozen=True)
class ValidationGrid:
    """Sampling region around the cube: extent in units of side, per-side count."""

    extent: float = 8.0
    points_per_side: int = 16

    def points(self, q: DyadicCube, extent: float | None = None) -> np.ndarray:
        extent = self.extent if extent is None else extent
        total = int(extent * self.points_per_side)
        axes = []
        for c in q.center:
            offs = (np.arange(total) + 0.5) / self.points_per_side - extent / 2
            axes.append(c + q.side * offs)
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)


@dataclass
class ConditionReport:
    name: str
    passed: bool
    constant: float
    witness: tuple | None = None
    detail: dict = field(default_factory=dict)


@dataclass
class MoleculeReport:
    conditions: list[ConditionReport]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions)

    def __getitem__(self, name: str) -> ConditionReport:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "conditions": [
                {"name": c.name, "passed": c.passed, "constant": c.constant,
                 "witness": c.witness, **c.detail}
                for c in self.conditions
            ],
        }


def _ratio_condition(name: str, evaluate, bound, q: DyadicCube,
                     grid: ValidationGrid, growth_tol: float) -> ConditionReport:
    """Fit the smallest constant c with |f| <= c * bound on the sampling
    region, and require it to be stable when the region doubles: a constant
    that keeps growing outward signals a decay exponent the candidate lacks.

    ``evaluate`` and ``bound`` map point arrays to values.
    """
    pts = grid.points(q)
    ratios = np.abs(evaluate(pts)) / bound(pts)
    i = int(np.argmax(ratios))
    c_base = float(ratios[i])
    if c_base == 0.0:
        return ConditionReport(name, True, 0.0)
    pts2 = grid.points(q, extent=2 * grid.extent)
    ratios2 = np.abs(evaluate(pts2)) / bound(pts2)
    i2 = int(np.argmax(ratios2))
    c_ext = float(ratios2[i2])
    stable = c_ext <= growth_tol * c_base
    c_all = max(c_base, c_ext)
    witness = tuple(pts2[i2]) if c_ext >= c_base else tuple(pts[i])
    return ConditionReport(name, bool(stable and math.isfinite(c_all)), c_all,
                           witness=witness,
                           detail={"base_constant": c_base, "extended_constant": c_ext})


def _moment_quadrature(f: MoleculeCandidate, gamma: tuple[int, ...],
                       extent: float, tol_abs: float,
                       order: int = 24, max_refine: int = 6) -> complex:
    """Adaptive tensor Gauss-Legendre integral of x^gamma * f over the
    sampling box, doubling the panel count until the value stabilizes.
    Grid-aligned candidates use their native left-endpoint rule instead."""
    if f.aligned_grid is not None:
        return _aligned_moment(f, gamma)
    q = f.cube
    n = q.n
    lo = np.array(q.center) - extent / 2 * q.side
    hi = np.array(q.center) + extent / 2 * q.side
    if f.support_radius < math.inf:
        lo = np.maximum(lo, np.array(q.center) - f.support_radius * q.side)
        hi = np.minimum(hi, np.array(q.center) + f.support_radius * q.side)
    prev = None
    panels = 1
    for _ in range(max_refine + 1):
        nodes_1d, weights_1d = np.polynomial.legendre.leggauss(order)
        axes, waxes = [], []
        for i in range(n):
            edges = np.linspace(lo[i], hi[i], panels + 1)
            xs, ws = [], []
            for a, b in zip(edges[:-1], edges[1:]):
                xs.append(0.5 * (b - a) * nodes_1d + 0.5 * (a + b))
                ws.append(0.5 * (b - a) * weights_1d)
            axes.append(np.concatenate(xs))
            waxes.append(np.concatenate(ws))
        grids = np.meshgrid(*axes, indexing="ij")
        wgrids = np.meshgrid(*waxes, indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=-1)
        w = np.prod(np.stack([g.ravel() for g in wgrids], axis=-1), axis=-1)
        mono = np.prod(pts ** np.array(gamma), axis=-1)
        val = complex(np.sum(w * mono * f(pts)))
        if prev is not None and abs(val - prev) <= max(tol_abs, 1e-300):
            return val
        prev = val
        panels *= 2
    return prev


def _aligned_moment(f: MoleculeCandidate, gamma: tuple[int, ...]) -> complex:
    h, lo, hi = f.aligned_grid
    n = f.cube.n
    axes = [lo[i] + h * np.arange(round((hi[i] - lo[i]) / h)) for i in range(n)]
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    mono = np.prod(pts ** np.array(gamma), axis=-1)
    return complex(np.sum(mono * f(pts)) * h ** n)


def validate_molecule(f: MoleculeCandidate, K: float, L: float, M: float, N: float,
                      grid: ValidationGrid = ValidationGrid(),
                      moment_tol: float = 1e-9, growth_tol: float = 1.5,
                      holder_seps: int = 5, holder_probe: int = 17) -> MoleculeReport:
    """Check the four condition families of a localized function.

    (a) decay against the K-envelope, (b) vanishing moments through L,
    (c) derivative decay against the M-envelope below order N, and (d) the
    fractional-smoothness difference condition at the top order.  Each decay
    condition reports its smallest admissible constant and fails when the
    constant keeps growing toward the sampling edge.
    """
    q = f.cube
    n = q.n
    pts = grid.points(q)
    conditions = []

    # (a) size
    vals = f(pts)
    conditions.append(_ratio_condition("decay", f, lambda p: envelope(K, q, p),
                                       q, grid, growth_tol))

    # (b) cancellation
    if L >= 0:
        sup = float(np.max(np.abs(vals)))
        span = (min(2 * f.support_radius, grid.extent) * q.side) ** n
        scale = max(sup * span, 1e-300)
        worst = 0.0
        worst_gamma = None
        for gamma in multi_indices(n, math.floor(L)):
            mom = abs(_moment_quadrature(f, gamma, grid.extent, moment_tol * scale))
            if mom > worst:
                worst, worst_gamma = mom, gamma
        conditions.append(ConditionReport(
            "cancellation", worst <= moment_tol * scale, worst / scale,
            witness=worst_gamma, detail={"tolerance": moment_tol}))
    else:
        conditions.append(ConditionReport("cancellation", True, 0.0,
                                          detail={"void": True}))

    # (c) derivative decay for 0 < |gamma| < N
    rpN = rounding_profile(N)
    top = rpN.strict_floor
    if N > 0:
        reports = []
        for gamma in multi_indices(n, max(top, 0)):
            order = sum(gamma)
            if order == 0 or order >= N:
                continue
            reports.append(_ratio_condition(
                "derivative-decay",
                lambda p, g=gamma: f.deriv(g, p),
                lambda p, o=order: q.side ** -o * envelope(M, q, p),
                q, grid, growth_tol))
        if reports:
            worst = max(reports, key=lambda r: r.constant)
            worst = ConditionReport("derivative-decay",
                                    all(r.passed for r in reports),
                                    worst.constant, worst.witness, worst.detail)
        else:
            worst = ConditionReport("derivative-decay", True, 0.0,
                                    detail={"void": True})
        conditions.append(worst)
    else:
        conditions.append(ConditionReport("derivative-decay", True, 0.0,
                                          detail={"void": True}))

    # (d) Hoelder difference at |gamma| = strict_floor(N), exponent N**
    if N > 0:
        expo = rpN.strict_frac
        gorder = max(rpN.strict_floor, 0)
        rng = np.random.default_rng(12345)
        sub = pts[rng.choice(len(pts), size=min(len(pts), 160), replace=False)]
        best_c = 0.0
        witness = None
        deltas = []
        for gamma in multi_indices(n, gorder):
            if sum(gamma) != gorder:
                continue
            for i_sep in range(holder_seps):
                h = q.side / 2 ** i_sep
                for axis in range(n):
                    dvec = np.zeros(n)
                    dvec[axis] = h
                    a = f.deriv(gamma, sub)
                    b = f.deriv(gamma, sub + dvec)
                    diff = np.abs(a - b)
                    # sup over |z| <= |x - y| of the envelope, probed on the segment
                    sup_env = np.zeros(len(sub))
                    for frac in np.linspace(-1.0, 1.0, holder_probe):
                        sup_env = np.maximum(sup_env, envelope(M, q, sub + frac * dvec))
                    sup_env_fine = sup_env.copy()
                    for frac in np.linspace(-1.0, 1.0, 2 * holder_probe - 1):
                        sup_env_fine = np.maximum(sup_env_fine,
                                                  envelope(M, q, sub + frac * dvec))
                    deltas.append(float(np.max(np.abs(sup_env_fine - sup_env)
                                               / np.maximum(sup_env, 1e-300))))
                    bound = q.side ** -gorder * (h / q.side) ** expo * sup_env_fine
                    ratios = diff / bound
                    i = int(np.argmax(ratios))
                    if ratios[i] > best_c:
                        best_c = float(ratios[i])
                        witness = (tuple(sub[i]), h, gamma)
        conditions.append(ConditionReport(
            "holder", math.isfinite(best_c), best_c, witness,
            detail={"probe_refinement_delta": max(deltas) if deltas else 0.0,
                    "exponent": expo}))
    else:
        conditions.append(ConditionReport("holder", True, 0.0, detail={"void": True}))

    return MoleculeReport(conditions)


def mgh_bound(params_m: MoleculeParams, params_b: MoleculeParams,
              n: int, alpha: float) -> tuple[float, float, float]:
    """Decay/shift parameters of the inner-product bound for two localized
    families; inapplicable unless all decay exponents exceed the dimension."""
    if alpha <= 0:
        raise PreconditionError("alpha must be positive")
    if min(params_m.K, params_m.M, params_b.K, params_b.M) <= n:
        raise PreconditionError("inner-product bound needs decay exponents > n")
    M = min(params_m.K, params_m.M, params_b.K, params_b.M)
    G = n / 2.0 + max(min(params_b.N, strict_ceil(params_m.L),
                          params_m.K - n - alpha), 0.0)
    H = n / 2.0 + max(min(params_m.N, strict_ceil(params_b.L),
                          params_b.K - n - alpha), 0.0)
    return M, G, H


def families_ad_check(analysis: MoleculeParams, synthesis: MoleculeParams,
                      di: DerivedIndices, n: int) -> tuple[bool, list[str]]:
    """Whether the two families' parameters make their pairing matrix
    admissible for the space; returns the failing inequalities by name."""
    syn_spec, ana_spec = molecule_param_sets(di, n)
    cs_syn = syn_spec.check(synthesis)
    cs_ana = ana_spec.check(analysis)
    failing = [f"synthesis {s}" for s in cs_syn.failing()]
    failing += [f"analysis {s}" for s in cs_ana.failing()]
    return (cs_syn.ok and cs_ana.ok), failing


# ---------------------------------------------------------------------------
# atom construction

def _bump_poly_coeffs(power: int) -> np.ndarray:
    """(1 - t^2)^power as polynomial coefficients (low to high degree)."""
    poly = np.array([1.0])
    factor = np.array([1.0, 0.0, -1.0])  # 1 - t^2
    for _ in range(power):
        poly = np.convolve(poly, factor)
    return poly


def _poly_derivative(coeffs: np.ndarray, k: int) -> np.ndarray:
    c = np.polynomial.polynomial.Polynomial(coeffs)
    return c.deriv(k).coef if k > 0 else coeffs


def make_atom(q: DyadicCube, r: float, L: float, N: float,
              margin: float = 0.999) -> MoleculeCandidate:
    """Compactly supported atom on r*q with vanishing moments through L.

    One-dimensional prototype: the (floor(L)+1)-st derivative of the
    polynomial bump (1-t^2)^P, tensorized; derivatives are exact polynomial
    evaluations.  The normalization keeps every derivative bound through
    order N strictly below the definitional constant 1.
    """
    if r < 1:
        raise PreconditionError("the support dilation r must be at least 1")
    n = q.n
    l_int = max(math.floor(L) + 1, 0) if L >= 0 else 0
    n_int = max(math.ceil(N), 0)
    power = l_int + n_int + 6
    base = _bump_poly_coeffs(power)
    proto = _poly_derivative(base, l_int)
    # 1d derivative table up to n_int
    derivs_1d = [proto]
    for _ in range(n_int):
        derivs_1d.append(_poly_derivative(derivs_1d[-1], 1))
    ts = np.linspace(-1, 1, 4097)
    sup_1d = [float(np.max(np.abs(np.polynomial.polynomial.polyval(ts, c))))
              for c in derivs_1d]
    half = r / 2.0  # support half-width in units of side
    center = np.array(q.center)
    side = q.side

    def eval_tensor(gamma, pts):
        pts = np.atleast_2d(pts)
        t = (pts - center) / (half * side)
        out = np.ones(pts.shape[0])
        inside = np.all(np.abs(t) < 1.0, axis=-1)
        for axis in range(n):
            c = derivs_1d[gamma[axis]]
            out = out * np.polynomial.polynomial.polyval(t[:, axis], c)
            out = out * (half * side) ** -gamma[axis]
        return np.where(inside, out, 0.0)

    # normalization: |D^gamma a_Q| <= |Q|^{-1/2-|gamma|/n} with margin
    worst = 0.0
    for gamma in multi_indices(n, n_int):
        sup = 1.0
        for axis in range(n):
            sup *= sup_1d[gamma[axis]] / (half * side) ** gamma[axis]
        need = q.volume ** (-0.5 - sum(gamma) / n)
        worst = max(worst, sup / need)
    c0 = margin / worst

    derivatives = {}
    for gamma in multi_indices(n, n_int):
        derivatives[gamma] = (lambda pts, g=gamma: c0 * eval_tensor(g, pts))

    return MoleculeCandidate(
        cube=q,
        func=lambda pts: c0 * eval_tensor((0,) * n, pts),
        derivatives=derivatives,
        max_order=n_int,
        support_radius=half,
        label=f"atom(r={r}, L={L}, N={N})",
    )


def validate_atom(f: MoleculeCandidate, q: DyadicCube, r: float, L: float, N: float,
                  grid: ValidationGrid = ValidationGrid(),
                  moment_tol: float = 1e-9, bound_tol: float = 1e-6) -> MoleculeReport:
    """Support containment, exact moments, and derivative bounds with the
    definitional constant 1 (up to bound_tol relative slack)."""
    n = q.n
    pts = grid.points(q)
    vals = np.abs(f(pts))
    center = np.array(q.center)
    inside = np.all(np.abs(pts - center) <= r / 2 * q.side + 1e-12, axis=-1)
    bad = (~inside) & (vals > 0)
    if np.any(bad):
        i = int(np.argmax(bad))
        support = ConditionReport("support", False, float(vals[i]), tuple(pts[i]))
    else:
        support = ConditionReport("support", True, 0.0)

    sup = float(np.max(vals))
    scale = max(sup * (r * q.side) ** n, 1e-300)
    worst, worst_gamma = 0.0, None
    if L >= 0:
        for gamma in multi_indices(n, math.floor(L)):
            mom = abs(_moment_quadrature(f, gamma, 2 * r, moment_tol * scale))
            if mom > worst:
                worst, worst_gamma = mom, gamma
    moments = ConditionReport("moments", worst <= moment_tol * scale,
                              worst / scale, worst_gamma)

    worst_ratio, witness = 0.0, None
    for gamma in multi_indices(n, math.floor(N)):
        dv = np.abs(f.deriv(gamma, pts))
        bound = q.volume ** (-0.5 - sum(gamma) / n)
        i = int(np.argmax(dv))
        ratio = float(dv[i] / bound)
        if ratio > worst_ratio:
            worst_ratio, witness = ratio, (tuple(pts[i]), gamma)
    bounds = ConditionReport("derivative-bounds", worst_ratio <= 1.0 + bound_tol,
                             worst_ratio, witness)
    return MoleculeReport([support, moments, bounds])


@dataclass
class MoleculeFamily:
    """A labelled family: declared parameters plus a member factory."""

    params: MoleculeParams
    member: object     # cube -> MoleculeCandidate
    label: str = "family"

    def __call__(self, q: DyadicCube) -> MoleculeCandidate:
        return self.member(q)


def wavelet_family(sys, lam: tuple[int, ...], params: MoleculeParams) -> MoleculeFamily:
    """Wrap one tensor-wavelet channel as a molecule family."""

    def member(q: DyadicCube) -> MoleculeCandidate:
        h = q.side * 2.0 ** -sys.resolution
        lo = q.lower
        hi = tuple(v + sys.support_width * q.side for v in lo)
        return MoleculeCandidate(
            cube=q,
            func=lambda pts: sys.evaluate(lam, q, pts),
            max_order=max(math.floor(sys.fp.holder), 0),
            support_radius=float(sys.support_width) + 1.0,
            fd_step_rel=2.0 ** -(sys.resolution - 2),
            aligned_grid=(h, lo, hi),
            label=f"wavelet{lam}",
        )

    return MoleculeFamily(params, member, f"wavelet-channel-{lam}")
