"""Critical release rates and reproduction numbers, all in closed form."""

from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass, field

from . import equilibria
from .params import derived_quantities


class BranchError(ValueError):
    """A threshold was requested outside the regime where it is defined."""


def _is_one(x):
    return equilibria.close(x, 1.0)


def lambda_M_sharp_crit(p):
    """Male release rate above which wild insects vanish when N eps = 1."""
    d = derived_quantities(p)
    return p.mu_MS / d.Q * (d.N - 1)


def lambda_M_crit(p):
    """Critical sterile-male release rate for elimination (N eps <= 1)."""
    d = derived_quantities(p)
    n_eps = d.N * p.eps
    if _is_one(n_eps):
        return lambda_M_sharp_crit(p)
    if n_eps > 1:
        raise BranchError("elimination unreachable: N*eps > 1")
    return p.mu_MS / d.Q * (math.sqrt(d.N * (1 - p.eps)) - math.sqrt(1 - n_eps)) ** 2


def r0_squared(p):
    d = derived_quantities(p)
    if d.N <= 1:
        return 0.0
    return d.transmission * d.F_star / p.N_h


def lambda_F_crit(p):
    """Sterile-female release rate at which released females alone give R0^2 = 1."""
    d = derived_quantities(p)
    if d.N <= 1:
        warnings.warn("N <= 1: no wild population, critical female release set to 0")
        return 0.0
    if d.transmission == 0:
        return math.inf
    return p.r * p.gamma * (p.gamma + p.mu_A1) * (d.N - 1) / (p.mu_A2_eff * r0_squared(p))


def r0_tdfe_squared(p):
    """Reproduction number carried by released females only."""
    d = derived_quantities(p)
    return d.transmission * p.lambda_F / (p.mu_S * p.N_h)


@dataclass(frozen=True)
class R0Sit:
    total: float
    wild_part: float
    sterile_part: float
    branch: str


def r0_sit_squared(p):
    """Reproduction number at the disease-free state reached under releases.

    Sum of a wild-female part, proportional to the larval abundance of the
    relevant equilibrium, and a released-female part.
    """
    d = derived_quantities(p)
    sterile = r0_tdfe_squared(p)
    if d.N <= 1:
        return R0Sit(sterile, 0.0, sterile, "no_wild")
    roots = equilibria.positive_ratio_roots(p)
    if d.M_S_star <= 0:
        a_x, branch = d.A_star, "E_star_wild"
    elif not roots:
        a_x, branch = 0.0, "elimination"
    else:
        # the upper equilibrium is the one that persists
        branch, ratio = roots[-1]
        a_x = equilibria._entomo_state(p, ratio)[0]
    wild = d.transmission * p.r * p.gamma * a_x / (p.mu_S * p.N_h)
    return R0Sit(wild + sterile, wild, sterile, branch)


def r0_regime_thresholds(p):
    """Thresholds splitting the control outcomes, per N eps regime.

    Returns a dict; entries that do not apply are None.  r0_NElt1_sq omits
    the (1 - N eps) factor on the larval abundance at the double root;
    r0_NElt1_sq_corrected keeps it, is the value at which the double-root
    DFE has R^2 = 1, and is what classification uses.
    """
    d = derived_quantities(p)
    out = {
        "r0_NElt1_sq": None,
        "r0_NElt1_sq_corrected": None,
        "lambda_M_star": None,
        "r0_NEgt1_sq": None,
        "lambda_M_crit_sharp": None,
        "lambda_M_NEgt1_crit": None,
    }
    if d.N <= 1:
        return out
    r0 = r0_squared(p)
    k = r0_tdfe_squared(p)
    n_eps = d.N * p.eps
    scale = p.mu_MS / d.Q
    if n_eps < 1 or _is_one(n_eps):
        female = p.lambda_F * p.mu_A2_eff / (p.r * p.gamma * (p.gamma + p.mu_A1))
        slack = 0.0 if _is_one(n_eps) else 1 - n_eps
        if _is_one(n_eps):
            out["r0_NElt1_sq"] = 0.0
            wild = 0.0
        else:
            root = math.sqrt((1 - p.eps) * d.N / slack)
            out["r0_NElt1_sq"] = (d.N - 1) / (female + root - 1)
            # larval abundance at the double root is A* (1 - N eps)(root - 1) / (N - 1)
            wild = slack * (root - 1)
        out["r0_NElt1_sq_corrected"] = (d.N - 1) / (female + wild) if female + wild > 0 else math.inf
        if r0 == 0:
            return out
        num = r0**2 * slack + (d.N - 1) * (1 - k) ** 2
        den = r0**2 * slack + r0 * (d.N - 1) * (1 - k)
        out["lambda_M_star"] = scale * (d.N - 1) * (1 - num / den)
        return out
    r0_gt = (d.N - 1) / (n_eps - 1) * (1 - k)
    out["r0_NEgt1_sq"] = r0_gt
    if r0 == 0:
        return out
    out["lambda_M_crit_sharp"] = scale * (d.N - 1) * (1 - 2 * (1 - k) / r0)
    if r0 < r0_gt:
        out["lambda_M_NEgt1_crit"] = scale * (d.N - 1) * (1 - (1 - k) / r0) / (1 - r0 / r0_gt)
    return out


def endemic_thresholds(p):
    """Release thresholds governing endemic equilibria.

    lambda_M_EE_crit applies for N eps <= 1.  The three others bound the sign
    changes of the endemic cubic coefficients a0, a2 and a1 when infected
    females die faster than susceptible ones.
    """
    d = derived_quantities(p)
    n_eps = d.N * p.eps
    out = {
        "lambda_M_EE_crit": None,
        "lambda_EE_crit_1": None,
        "lambda_tot_crit_2": None,
        "lambda_tot_crit_3": None,
        "lambda_tot_crit_3_reflected": None,
        "flags": [],
    }
    if n_eps <= 1 or _is_one(n_eps):
        slack = max(0.0, 1 - n_eps)
        out["lambda_M_EE_crit"] = (
            p.mu_MS / d.Q * (math.sqrt(d.N + slack) - math.sqrt(slack)) ** 2
        )
    if equilibria.close(p.mu_I, p.mu_S):
        out["flags"].append("degenerate: equal female mortalities, use the equal-mortality branch")
        return out
    alpha = d.alpha_epi * p.N_h
    if alpha == 0:
        out["flags"].append("no transmission: endemic thresholds undefined")
        return out
    rho = (1 + p.nu_m / p.mu_I) / (1 + p.nu_m / p.mu_S)
    eps_f = p.eps_F
    if d.N * rho > 1:
        out["lambda_tot_crit_2"] = (
            p.r * p.gamma * (p.gamma + p.mu_A1) * (d.N * rho - 1)
            / (p.mu_A2_eff * ((1 - eps_f) * p.r / (1 - p.r) * p.mu_M / p.mu_MS + eps_f))
        )
    if eps_f == 0:
        out["lambda_EE_crit_1"] = math.inf
        out["lambda_tot_crit_3"] = math.inf
        out["lambda_tot_crit_3_reflected"] = math.inf
        out["flags"].append("eps_F = 0: thresholds 1 and 3 unbounded")
        return out
    if n_eps * rho < 1:
        out["lambda_EE_crit_1"] = (
            p.mu_S / (eps_f * alpha) * n_eps * (1 - rho) / (1 - n_eps * rho)
        )
    h = d.Q * (1 - eps_f) / p.mu_MS * alpha * eps_f
    g = (
        alpha * p.mu_M * (1 - eps_f) * p.r / ((1 - p.r) * p.mu_MS) * (1 - n_eps * rho)
        + alpha * eps_f * (1 - d.N * rho)
    )
    c = d.N * p.mu_S * (1 - rho)
    if h > 0:
        disc = g * g + 4 * h * c
        out["lambda_tot_crit_3"] = (math.sqrt(disc) - g) / (2 * h)
        # minus the negative root; kept for comparison, not a sign change of a1
        out["lambda_tot_crit_3_reflected"] = (math.sqrt(disc) + g) / (2 * h)
    elif g > 0:
        out["lambda_tot_crit_3"] = c / g
    else:
        out["lambda_tot_crit_3"] = math.inf
    return out


@dataclass
class ThresholdBundle:
    N: float
    N_eps: float
    r0_sq: float
    lambda_F_crit: float
    lambda_M_crit: float | None
    lambda_M_sharp_crit: float | None
    r0_sit_sq: float
    r0_sit_W_sq: float
    r0_sit_S_sq: float
    r0_tdfe_sq: float
    regime: str
    r0_NElt1_sq: float | None = None
    r0_NElt1_sq_corrected: float | None = None
    lambda_M_star: float | None = None
    r0_NEgt1_sq: float | None = None
    lambda_M_crit_sharp: float | None = None
    lambda_M_NEgt1_crit: float | None = None
    lambda_M_EE_crit: float | None = None
    lambda_EE_crit_1: float | None = None
    lambda_tot_crit_2: float | None = None
    lambda_tot_crit_3: float | None = None
    lambda_tot_crit_3_reflected: float | None = None
    flags: list = field(default_factory=list)

    def as_dict(self):
        return dataclasses.asdict(self)


def threshold_bundle(p):
    d = derived_quantities(p)
    n_eps = d.N * p.eps
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        lf = lambda_F_crit(p)
    flags = [str(w.message) for w in caught]
    try:
        lm = lambda_M_crit(p)
    except BranchError:
        lm = None
    sharp = lambda_M_sharp_crit(p) if _is_one(n_eps) else None
    sit = r0_sit_squared(p)
    regime = r0_regime_thresholds(p)
    endemic = endemic_thresholds(p)
    flags.extend(endemic.pop("flags"))
    return ThresholdBundle(
        N=d.N,
        N_eps=n_eps,
        r0_sq=r0_squared(p),
        lambda_F_crit=lf,
        lambda_M_crit=lm,
        lambda_M_sharp_crit=sharp,
        r0_sit_sq=sit.total,
        r0_sit_W_sq=sit.wild_part,
        r0_sit_S_sq=sit.sterile_part,
        r0_tdfe_sq=r0_tdfe_squared(p),
        regime=sit.branch,
        flags=flags,
        **regime,
        **endemic,
    )
