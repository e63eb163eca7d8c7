"""Which Hardy inequality each ground-state family yields: constant tag, weight and ratio kind."""

from __future__ import annotations

from typing import NamedTuple

from .estimators import RatioObjective, hardy_constant
from .gsr_engine import Family, GroundStateSpec, parse_family


class HardyForm(NamedTuple):
    constant_tag: str
    weight: str
    # sup-ratio kind the constant depends on, or None for closed-form constants
    ratio_kind: str | None = None


HARDY_FORMS: dict[Family, dict[str, HardyForm]] = {
    Family.POINT: {"standard": HardyForm("point", "inv_dist_sq")},
    Family.POINT_2D: {"standard": HardyForm("point2d", "inv_dist_sq_log")},
    Family.SUBSPACE: {"standard": HardyForm("subspace", "inv_dist_sq")},
    Family.SUBSPACE_2D: {"standard": HardyForm("subspace2d", "inv_dist_sq_log")},
    Family.SEPARATION: {"standard": HardyForm("separation", "inv_rho_sq")},
    Family.PAIR_3D: {"standard": HardyForm("pairs", "sum_inv_r_sq", "K"),
                     "cross": HardyForm("triples", "sum_inv_R_sq", "K")},
    Family.PAIR_1D: {"standard": HardyForm("pairs1d", "sum_inv_r_sq")},
    Family.PAIR_2D: {"standard": HardyForm("pairs2d", "sum_inv_r_sq_log", "K2d"),
                     "cross": HardyForm("triples2d", "sum_inv_R_sq_log", "K2d")},
    Family.COORD: {"standard": HardyForm("coord", "coord_potential")},
    Family.PARALLEL: {"standard": HardyForm("parallel", "sigma1", "C"),
                      "cross": HardyForm("parallel_cross", "sigma2", "C")},
    Family.PARALLEL_3D: {"standard": HardyForm("parallel3d", "sigma1_log", "C3d"),
                         "cross": HardyForm("parallel3d_cross", "sigma2_log", "C3d")},
    Family.SIMPLEX: {"standard": HardyForm("simplex", "sigma_simplex")},
    Family.SIMPLEX_CRITICAL: {"standard": HardyForm("simplex_critical", "sigma_simplex_log")},
    Family.ALL_SIMPLICES: {"standard": HardyForm("all_simplices", "sigma1_pN", "Cp"),
                           "cross": HardyForm("all_simplices_cross", "sigma2_pN", "Cp")},
}


def hardy_form(family, form: str = "standard") -> HardyForm:
    fam = parse_family(family)
    forms = HARDY_FORMS[fam]
    if form not in forms:
        raise ValueError(f"{fam.value} has forms {sorted(forms)}, not {form!r}")
    return forms[form]


def ratio_objective(spec: GroundStateSpec, form: HardyForm) -> RatioObjective | None:
    if form.ratio_kind is None:
        return None
    R = spec.R if spec.R is not None else 1.0
    return RatioObjective(form.ratio_kind, spec.d, spec.N, spec.p, R)


def form_constant(spec: GroundStateSpec, form: HardyForm, value: float | None = None) -> float:
    """Constant of the inequality; K/C-dependent forms fall back to the stated upper bound."""
    obj = ratio_objective(spec, form)
    if obj is not None and value is None:
        value = obj.stated_bound
    return hardy_constant(form.constant_tag, spec.d, spec.N, spec.p, value)
