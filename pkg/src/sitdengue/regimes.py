"""Qualitative outcome of a release programme, and spectral stability labels.

`classify` turns threshold comparisons into one of a fixed set of
observation identifiers.  Stability labels attached to equilibria always
come from Jacobian eigenvalues, never from the classification.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import equilibria, thresholds
from .dynamics import jacobian
from .params import derived_quantities

NON_HYPERBOLIC_TOL = 1e-9

# Observation identifiers, one per row of the qualitative summary.
TDFE_GAS_NO_WILD = "TDFE_GAS_NO_WILD"
RELEASES_USELESS = "RELEASES_USELESS"
FEMALE_RELEASE_TOO_HIGH = "FEMALE_RELEASE_TOO_HIGH"
MASSIVE_RELEASE_TDFE_GAS = "MASSIVE_RELEASE_TDFE_GAS"
SIT_FAILS = "SIT_FAILS"
BISTABLE_TDFE_DFE_DIAMOND = "BISTABLE_TDFE_DFE_DIAMOND"
BISTABLE_TDFE_DFE2 = "BISTABLE_TDFE_DFE2"
DFE_DAGGER_LAS = "DFE_DAGGER_LAS"

OBSERVATIONS = {
    TDFE_GAS_NO_WILD: "no wild population can persist; the trivial equilibrium attracts everything",
    RELEASES_USELESS: "no epidemic risk even without control; releases are not needed",
    FEMALE_RELEASE_TOO_HIGH: "released females alone sustain transmission; WIFE and/or EE persist",
    MASSIVE_RELEASE_TDFE_GAS: "male releases exceed the elimination threshold; TDFE is GAS",
    SIT_FAILS: "the disease-free state reached under releases still has R^2 > 1",
    BISTABLE_TDFE_DFE_DIAMOND: "TDFE and the double-root DFE are both stable, R^2 < 1",
    BISTABLE_TDFE_DFE2: "TDFE and DFE2 are both stable, R^2 < 1",
    DFE_DAGGER_LAS: "wild insects persist at a low level with R^2 < 1; DFE_dagger is LAS",
}

CONTROLLED = {TDFE_GAS_NO_WILD, RELEASES_USELESS, MASSIVE_RELEASE_TDFE_GAS,
              BISTABLE_TDFE_DFE_DIAMOND, BISTABLE_TDFE_DFE2, DFE_DAGGER_LAS}


@dataclass
class RegimeReport:
    N: float
    N_eps: float
    r0_sq: float
    r0_sit_sq: float
    lambda_F: float
    lambda_F_crit: float
    lambda_M: float
    lambda_M_crit: float | None
    lambda_M_star: float | None
    lambda_M_crit_sharp: float | None
    lambda_M_NEgt1_crit: float | None
    r0_NElt1_sq: float | None
    r0_NElt1_sq_corrected: float | None
    r0_NEgt1_sq: float | None
    elimination_feasible: bool
    epi_risk_controllable: bool
    stable_equilibria: list
    observation: str
    description: str = ""
    stability: list = field(default_factory=list)

    def as_dict(self):
        return dataclasses.asdict(self)


def _entomo_stable_tags(p, n_eps, lam_m, crit):
    """Disease-free equilibria whose wild part is stable, by release size."""
    d = derived_quantities(p)
    if d.N <= 1:
        return ["TDFE"]
    if d.M_S_star <= 0:
        return ["DFE2"]
    if equilibria.close(n_eps, 1.0):
        return ["TDFE"] if lam_m >= crit else ["TDFE", "DFE_sharp"]
    if n_eps > 1:
        return ["DFE_dagger"]
    if equilibria.close(lam_m, crit):
        return ["TDFE", "DFE_diamond"]
    return ["TDFE"] if lam_m > crit else ["TDFE", "DFE2"]


def classify(p):
    """Locate p in the qualitative summary of release outcomes."""
    d = derived_quantities(p)
    n_eps = d.N * p.eps
    r0 = thresholds.r0_squared(p)
    lf_crit = thresholds.lambda_F_crit(p) if d.N > 1 else 0.0
    try:
        lm_crit = thresholds.lambda_M_crit(p)
    except thresholds.BranchError:
        lm_crit = None
    regime = thresholds.r0_regime_thresholds(p)
    lam_m, lam_f = p.lambda_M, p.lambda_F
    r0_sit = thresholds.r0_sit_squared(p).total
    stable = []
    # Released females alone keep R^2 >= 1 at TDFE: checked first, since
    # the rows below assume it does not happen.  For N > 1 this is the
    # same as lambda_F >= lambda_F_crit.
    if thresholds.r0_tdfe_squared(p) >= 1:
        obs = FEMALE_RELEASE_TOO_HIGH
    elif d.N <= 1:
        obs, stable = TDFE_GAS_NO_WILD, ["TDFE"]
    elif r0 <= 1:
        obs = RELEASES_USELESS
        stable = _entomo_stable_tags(p, n_eps, lam_m, lm_crit)
        if r0_sit >= 1:
            stable = [t for t in stable if t == "TDFE"]
    elif n_eps <= 1 or equilibria.close(n_eps, 1.0):
        if lam_m > lm_crit and not equilibria.close(lam_m, lm_crit):
            obs, stable = MASSIVE_RELEASE_TDFE_GAS, ["TDFE"]
        elif r0 >= regime["r0_NElt1_sq_corrected"]:
            obs, stable = SIT_FAILS, ["TDFE"]
        elif equilibria.close(lam_m, lm_crit):
            obs, stable = BISTABLE_TDFE_DFE_DIAMOND, ["TDFE", "DFE_diamond"]
        elif lam_m > regime["lambda_M_star"]:
            obs, stable = BISTABLE_TDFE_DFE2, ["TDFE", "DFE2"]
        else:
            obs, stable = SIT_FAILS, ["TDFE"]
    else:
        r0_gt = regime["r0_NEgt1_sq"]
        bound = max(regime["lambda_M_crit_sharp"], regime["lambda_M_NEgt1_crit"] or -np.inf)
        if r0 < r0_gt and lam_m > bound:
            obs, stable = DFE_DAGGER_LAS, ["DFE_dagger"]
        else:
            obs = SIT_FAILS
    return RegimeReport(
        N=d.N,
        N_eps=n_eps,
        r0_sq=r0,
        r0_sit_sq=r0_sit,
        lambda_F=lam_f,
        lambda_F_crit=lf_crit,
        lambda_M=lam_m,
        lambda_M_crit=lm_crit,
        lambda_M_star=regime["lambda_M_star"],
        lambda_M_crit_sharp=regime["lambda_M_crit_sharp"],
        lambda_M_NEgt1_crit=regime["lambda_M_NEgt1_crit"],
        r0_NElt1_sq=regime["r0_NElt1_sq"],
        r0_NElt1_sq_corrected=regime["r0_NElt1_sq_corrected"],
        r0_NEgt1_sq=regime["r0_NEgt1_sq"],
        elimination_feasible=bool(d.N <= 1 or n_eps <= 1 or equilibria.close(n_eps, 1.0)),
        epi_risk_controllable=bool(obs in CONTROLLED and r0_sit < 1),
        stable_equilibria=stable,
        observation=obs,
        description=OBSERVATIONS[obs],
    )


def jacobian_spectrum(p, state):
    """Eigenvalues of the host-vector Jacobian at state."""
    return np.linalg.eigvals(jacobian(p, state))


def stability_label(eigenvalues, tol=NON_HYPERBOLIC_TOL):
    top = float(np.max(np.real(eigenvalues)))
    if abs(top) < tol:
        return "non-hyperbolic"
    return "LAS" if top < 0 else "unstable"


def label_stability(p, eq):
    """Copy of a host-vector equilibrium with its spectral stability label."""
    ev = jacobian_spectrum(p, eq.state)
    return eq.with_stability(stability_label(ev), ev)


def checked_equilibria(p):
    return [label_stability(p, eq) for eq in equilibria.all_equilibria(p)]


def classify_with_stability(p):
    report = classify(p)
    report.stability = [eq.as_dict() for eq in checked_equilibria(p)]
    return report
