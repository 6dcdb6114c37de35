"""The norm suite: column/row/mixture smoothness norms, local Hardy norms,
bmo, the Carleson-type sup norm, tent-space norms, and the homogeneous-norm
equivalence report.

Every operation returns a :class:`NormReport` carrying the value, its
constituent terms, and the parameters that produced it, so equivalence
constants can be measured, diffed, and tracked rather than asserted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .lattice import ConeIndex, Grid, cone_index
from .opfield import (
    OperatorField,
    StripField,
    gram,
    herm,
    lp_norm_from_psd_eigs,
    trace_lp_norm,
)
from .sqfn import (
    SquareFunctionSpec,
    conic_accumulator,
    radial_accumulator,
    tent_accumulator,
)
from .spectral import (
    HomLPFamily,
    LPFamily,
    apply_symbol_data,
    poisson_symbol,
)


@dataclass
class NormReport:
    """Value of one norm evaluation with parameter echo and constituents."""

    name: str
    value: float
    params: dict = field(default_factory=dict)
    terms: dict = field(default_factory=dict)
    grid: Optional[Grid] = None
    n: Optional[int] = None
    seed: Optional[int] = None
    flags: dict = field(default_factory=dict)

    def to_text(self) -> str:
        lines = ["[report]", f"name = {self.name}", f"value = {self.value:.15e}"]
        if self.grid is not None:
            lines += ["[grid]", f"d = {self.grid.d}", f"N = {self.grid.N}"]
            if self.n is not None:
                lines.append(f"n = {self.n}")
        if self.seed is not None:
            lines += ["[run]", f"seed = {self.seed}"]
        if self.params:
            lines.append("[params]")
            lines += [f"{k} = {_fmt(v)}" for k, v in self.params.items()]
        if self.terms:
            lines.append("[terms]")
            lines += [f"{k} = {_fmt(v)}" for k, v in self.terms.items()]
        if self.flags:
            lines.append("[flags]")
            lines += [f"{k} = {_fmt(v)}" for k, v in self.flags.items()]
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.15e}"
    return str(v)


def _eig_norm(acc, p: float) -> float:
    return lp_norm_from_psd_eigs(acc.eigenvalues(), p, acc.grid.cell_volume)


def _low_term_norm(f: OperatorField, values: np.ndarray, p: float) -> float:
    low = OperatorField(f.grid, apply_symbol_data(values, f.data, f.grid))
    return trace_lp_norm(low, p)


# ---------------------------------------------------------------------------
# smoothness norms
# ---------------------------------------------------------------------------

def tl_norm_column(f: OperatorField, alpha: float, p: float, family: LPFamily,
                   seed: Optional[int] = None) -> NormReport:
    """Column norm || (sum_j 4^{j alpha} |phi_j * f|^2)^(1/2) ||_p, j >= 0."""
    if p != np.inf and p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    spec = SquareFunctionSpec(kernel_kind="lp", alpha=alpha, family=family,
                              include_zero_term=True)
    acc = radial_accumulator(f, spec)
    value = _eig_norm(acc, p)
    return NormReport(
        name="F_alpha_column",
        value=value,
        params={"alpha": alpha, "p": p, "kernel": f"lp[{family.kind}]"},
        terms={
            "square_function": value,
            "phi0_term": _low_term_norm(f, family.values(0), p),
        },
        grid=f.grid,
        n=f.n,
        seed=seed,
    )


def tl_norm_row(f: OperatorField, alpha: float, p: float, family: LPFamily,
                seed: Optional[int] = None) -> NormReport:
    """Row norm: column norm of the pointwise adjoint field."""
    rep = tl_norm_column(f.adjoint(), alpha, p, family, seed=seed)
    rep.name = "F_alpha_row"
    return rep


def tl_norm_mixture(f: OperatorField, alpha: float, p: float, family: LPFamily,
                    splits: Sequence[tuple[OperatorField, OperatorField]] = (),
                    seed: Optional[int] = None) -> NormReport:
    """Mixture norm: exact max(column,row) for p > 2; for p <= 2 the minimum
    of column(g)+row(h) over the provided splits plus the two trivial splits.

    The p <= 2 value is an upper bound for the true infimum and is flagged so.
    """
    col = tl_norm_column(f, alpha, p, family).value
    row = tl_norm_row(f, alpha, p, family).value
    if p > 2:
        value = max(col, row)
        flags = {"upper_bound": False}
        terms = {"column": col, "row": row}
    else:
        candidates = [col, row]  # trivial splits (f,0) and (0,f)
        for g, h in splits:
            total = g + h
            dev = float(np.max(np.abs(total.data - f.data)))
            scale = max(float(np.max(np.abs(f.data))), 1e-300)
            if dev > 1e-12 * scale:
                raise ValueError(f"split does not sum to f (deviation {dev:.3e})")
            candidates.append(
                tl_norm_column(g, alpha, p, family).value
                + tl_norm_row(h, alpha, p, family).value
            )
        value = min(candidates)
        flags = {"upper_bound": True, "splits_tried": len(candidates)}
        terms = {"column": col, "row": row, "best_split": value}
    return NormReport(
        name="F_alpha_mixture",
        value=value,
        params={"alpha": alpha, "p": p, "kernel": f"lp[{family.kind}]"},
        terms=terms,
        grid=f.grid,
        n=f.n,
        seed=seed,
        flags=flags,
    )


# ---------------------------------------------------------------------------
# local Hardy norms
# ---------------------------------------------------------------------------

def hardy_norm(f: OperatorField, p: float, mode: str = "lp", shape: str = "radial",
               family: Optional[LPFamily] = None, cone: Optional[ConeIndex] = None,
               poisson_k: int = 1, seed: Optional[int] = None) -> NormReport:
    """Local Hardy norm h_p^c in LP or Poisson mode, radial or conic shape.

    LP radial mode *is* the alpha = 0 column norm (same formula, with the
    low-frequency term inside the square sum); the low term is still recorded
    separately.  Poisson mode and conic shapes return the two-term form
    square-function + low-frequency, per the defining expression.
    """
    if p != np.inf and p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if mode not in ("lp", "poisson"):
        raise ValueError(f"unknown mode {mode!r}")
    if shape not in ("radial", "conic"):
        raise ValueError(f"unknown shape {shape!r}")
    grid = f.grid
    if mode == "lp" and family is None:
        raise ValueError("lp mode requires a family")

    if mode == "lp":
        low_values = family.values(0)
        j_top = family.j_max
        spec_kwargs = dict(kernel_kind="lp", family=family, alpha=0.0)
    else:
        low_values = poisson_symbol(grid, 1.0).values
        j_top = grid.max_scale if family is None else family.j_max
        spec_kwargs = dict(kernel_kind="poisson", poisson_k=poisson_k, alpha=0.0,
                           j_max=j_top)
    low = _low_term_norm(f, low_values, p)

    if shape == "radial":
        if mode == "lp":
            spec = SquareFunctionSpec(include_zero_term=True, **spec_kwargs)
            acc = radial_accumulator(f, spec)
            sq = _eig_norm(acc, p)
            value = sq
        else:
            spec = SquareFunctionSpec(include_zero_term=False, **spec_kwargs)
            acc = radial_accumulator(f, spec)
            sq = _eig_norm(acc, p)
            value = sq + low
    else:
        if cone is None:
            cone = cone_index(grid, j_top)
        spec = SquareFunctionSpec(include_zero_term=False, **spec_kwargs)
        acc = conic_accumulator(f, spec, cone)
        acc.S = 0.5 * (acc.S + herm(acc.S))
        sq = _eig_norm(acc, p)
        value = sq + low
    return NormReport(
        name="hardy",
        value=value,
        params={"p": p, "mode": mode, "shape": shape, "poisson_k": poisson_k},
        terms={"square_function": sq, "low_frequency": low},
        grid=grid,
        n=f.n,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# bmo and the Carleson-type sup norm
# ---------------------------------------------------------------------------

def _block_means(data: np.ndarray, grid: Grid, level: int) -> np.ndarray:
    """Mean of (*shape, n, n) data over each dyadic cube at ``level``.

    Returns array of shape (2^level,)*d + (n, n); entry [l] is the mean over
    the cube with index l.  Uses roll + reshape so wraparound cubes are exact.
    """
    n = data.shape[-1]
    side = grid.N >> level
    half = side // 2
    out = data
    for ax in range(grid.d):
        out = np.roll(out, half, axis=ax)
    # cube with index l spans rolled indices [l*side, (l+1)*side) per axis
    shape = []
    for _ in range(grid.d):
        shape += [1 << level, side]
    shape += [n, n]
    out = out.reshape(shape)
    mean_axes = tuple(2 * k + 1 for k in range(grid.d))
    return out.mean(axis=mean_axes)


def _max_sqrt_opnorm(blocks: np.ndarray) -> float:
    """max over leading axes of || block^(1/2) ||_op for PSD blocks."""
    blocks = 0.5 * (blocks + herm(blocks))
    eigs = np.linalg.eigvalsh(blocks)
    top = float(np.max(eigs)) if eigs.size else 0.0
    return math.sqrt(max(top, 0.0))


def bmo_norm(f: OperatorField, seed: Optional[int] = None) -> NormReport:
    """bmo^c norm: sup over dyadic |Q| < 1 of the mean oscillation, maximized
    with the |Q| = 1 (whole torus) size term."""
    grid = f.grid
    P = gram(f.data)
    whole = np.mean(P, axis=grid.spatial_axes)  # = int_Q |f|^2 at |Q| = 1
    unit_term = _max_sqrt_opnorm(whole[None])
    osc = 0.0
    per_level = {}
    for level in range(1, grid.max_cube_level + 1):
        mean_p = _block_means(P, grid, level)
        mean_f = _block_means(f.data, grid, level)
        m = mean_p - gram(mean_f)  # E|f|^2 - |E f|^2 over each cube
        lv = _max_sqrt_opnorm(m)
        per_level[f"oscillation_level_{level}"] = lv
        osc = max(osc, lv)
    value = max(osc, unit_term)
    return NormReport(
        name="bmo",
        value=value,
        params={},
        terms={"oscillation_sup": osc, "unit_cube_term": unit_term, **per_level},
        grid=grid,
        n=f.n,
        seed=seed,
    )


def tl_infty_norm(f: OperatorField, alpha: float, family: LPFamily,
                  seed: Optional[int] = None) -> NormReport:
    """F^alpha_infty norm: ||phi_0 * f||_sup plus the Carleson-type sup over
    dyadic cubes |Q| < 1 with scale cutoff j >= level(Q)."""
    grid = f.grid
    low = apply_symbol_data(family.values(0), f.data, grid)
    low_term = float(np.max(np.linalg.svd(low, compute_uv=False)))
    # per-scale PSD fields 4^{j alpha} |phi_j * f|^2
    P = {}
    for j in range(1, family.j_max + 1):
        g = apply_symbol_data(family.values(j), f.data, grid)
        P[j] = 4.0 ** (j * alpha) * gram(g)
    carleson = 0.0
    per_level = {}
    top_level = min(grid.max_cube_level, family.j_max)
    for level in range(1, top_level + 1):
        tail = np.zeros(grid.shape + (f.n, f.n), dtype=np.complex128)
        for j in range(level, family.j_max + 1):
            tail += P[j]
        m = _block_means(tail, grid, level)
        lv = _max_sqrt_opnorm(m)
        per_level[f"carleson_level_{level}"] = lv
        carleson = max(carleson, lv)
    value = low_term + carleson
    return NormReport(
        name="F_alpha_infty",
        value=value,
        params={"alpha": alpha, "kernel": f"lp[{family.kind}]"},
        terms={"phi0_sup": low_term, "carleson_sup": carleson, **per_level},
        grid=grid,
        n=f.n,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# tent norm
# ---------------------------------------------------------------------------

def tent_norm(F: StripField, p: float, cone: Optional[ConeIndex] = None,
              seed: Optional[int] = None) -> NormReport:
    """Tent-space norm || A^c(F) ||_p."""
    if p != np.inf and p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    acc = tent_accumulator(F, cone)
    value = _eig_norm(acc, p)
    return NormReport(
        name="tent",
        value=value,
        params={"p": p, "j_max": F.j_max},
        grid=F.grid,
        n=F.n,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# homogeneous equivalence (alpha > 0)
# ---------------------------------------------------------------------------

def homogeneous_equiv_report(f: OperatorField, alpha: float, p: float,
                             family: LPFamily, hom: HomLPFamily,
                             seed: Optional[int] = None) -> NormReport:
    """Ratios of the inhomogeneous norm to the two homogeneous two-term norms.

    ratio_phi0: against ||phi_0 * f||_p + homogeneous square term;
    ratio_lp  : against ||f||_p + homogeneous square term (p <= 2 form).
    """
    if alpha <= 0:
        raise ValueError("homogeneous equivalence requires alpha > 0")
    inhom = tl_norm_column(f, alpha, p, family).value
    grid = f.grid
    from .opfield import PSDAccumulator  # local import to avoid cycle noise

    acc = PSDAccumulator(grid, f.n)
    for j in hom.scales():
        g = apply_symbol_data(hom.member(j).values, f.data, grid)
        acc.add_gram(g, 4.0 ** (j * alpha))
    hom_sq = _eig_norm(acc, p)
    low = _low_term_norm(f, family.values(0), p)
    plain = trace_lp_norm(f, p)
    denom_phi0 = low + hom_sq
    denom_plain = plain + hom_sq
    ratio_phi0 = inhom / denom_phi0 if denom_phi0 > 0 else math.inf
    ratio_plain = inhom / denom_plain if denom_plain > 0 else math.inf
    return NormReport(
        name="homogeneous_equivalence",
        value=ratio_phi0,
        params={"alpha": alpha, "p": p, "j_min": hom.j_min, "kernel": f"lp[{family.kind}]"},
        terms={
            "inhomogeneous": inhom,
            "homogeneous_square": hom_sq,
            "phi0_term": low,
            "lp_term": plain,
            "ratio_phi0_form": ratio_phi0,
            "ratio_lp_form": ratio_plain,
        },
        grid=grid,
        n=f.n,
        seed=seed,
    )
