"""Numerical verification toolkit for explicit singular solutions of the complex Monge-Ampere equation."""

from .catalog import (
    DomainError,
    Family,
    FamilyParams,
    Jet,
    SingularPointError,
    evaluate,
    field,
    hn_coeffs,
    hn_eval,
    jet_closed,
    list_families,
    ma_det_closed,
    ma_residual_closed,
    rhs,
    singular_locus,
)
from .quadrature import Bump, DomainBox, NormKind, QuadratureSpec, integrate, norm, sobolev_probe, weak_convergence
from .rates import Metric, SweepTable, eps_sweep, fit_rate
from .regularity import dini_test, holder_fit, modulus
from .viscosity import no_upper_contact, psh_monotone_check, supersolution_test
from .wirtinger import FdScheme, fd_jet, ma_det, psd_check

__version__ = "0.1.0"

__all__ = [
    "Bump",
    "DomainBox",
    "DomainError",
    "Family",
    "FamilyParams",
    "FdScheme",
    "Jet",
    "Metric",
    "NormKind",
    "QuadratureSpec",
    "SingularPointError",
    "SweepTable",
    "dini_test",
    "eps_sweep",
    "evaluate",
    "fd_jet",
    "field",
    "fit_rate",
    "hn_coeffs",
    "hn_eval",
    "holder_fit",
    "integrate",
    "jet_closed",
    "list_families",
    "ma_det",
    "ma_det_closed",
    "ma_residual_closed",
    "modulus",
    "no_upper_contact",
    "norm",
    "psd_check",
    "psh_monotone_check",
    "rhs",
    "singular_locus",
    "sobolev_probe",
    "supersolution_test",
    "weak_convergence",
]
