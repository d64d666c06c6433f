"""Equilibria of the entomological and host-vector systems.

Entomological states are (A, M, F_WS, S_S); host-vector states follow
dynamics.STATE_NAMES.  Stability labels are attached by regimes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import thresholds
from .dynamics import STATE_NAMES, equilibrium_rhs, mating_fractions
from .params import derived_quantities

REL_TOL = 1e-12

ENTOMO_TO_DFE = {
    "E0": "TDFE",
    "E1": "DFE1",
    "E2": "DFE2",
    "E_diamond": "DFE_diamond",
    "E_dagger": "DFE_dagger",
    "E_sharp": "DFE_sharp",
    "E_star_wild": "DFE2",
}


@dataclass(frozen=True)
class LabeledEquilibrium:
    tag: str
    state: np.ndarray
    residual_norm: float
    stability: str = "unchecked"
    eigenvalues: np.ndarray | None = field(default=None, compare=False)

    def with_stability(self, label, eigenvalues=None):
        return replace(self, stability=label, eigenvalues=eigenvalues)

    def as_dict(self):
        names = ENTOMO_NAMES if len(self.state) == 4 else STATE_NAMES
        out = {
            "tag": self.tag,
            "state": {n: float(v) for n, v in zip(names, self.state)},
            "residual": float(self.residual_norm),
            "stability": self.stability,
        }
        if self.eigenvalues is not None:
            out["max_real_eigenvalue"] = float(np.max(self.eigenvalues.real))
        return out


ENTOMO_NAMES = ("A", "M", "F_WS", "S_S")


def close(a, b, rel=REL_TOL):
    return abs(a - b) <= rel * max(abs(a), abs(b), 1e-300)


def _scaled_max(values, state):
    return max(abs(v) / max(1.0, abs(x)) for v, x in zip(values, state))


def entomological_rhs(state, p):
    A, M, F, S = (float(v) for v in state)
    m_s = p.lambda_M / p.mu_MS
    fertile, sterile = mating_fractions(M, m_s, p.eps)
    return np.array([
        p.phi * F - (p.gamma + p.mu_A1 + p.mu_A2_eff * A) * A,
        (1 - p.r) * p.gamma * A - p.mu_M * M,
        fertile * p.r * p.gamma * A - p.mu_S * F,
        p.lambda_F + sterile * p.r * p.gamma * A - p.mu_S * S,
    ])


def equilibrium_residual(p, state):
    """Largest component of the derivative, each scaled by max(1, |x_i|)."""
    state = np.asarray(state, dtype=float)
    if len(state) == 4:
        return _scaled_max(entomological_rhs(state, p), state)
    return _scaled_max(equilibrium_rhs(state, p), state[:11])


def wild_equilibrium(p):
    """No-release equilibrium (A*, M*, F*, 0); zero when N <= 1."""
    d = derived_quantities(p)
    return np.array([d.A_star, d.M_star, d.F_star, 0.0])


def mating_quadratic(p):
    """Coefficients (a, b, c) of a x^2 + b x + c = 0 in x = M_S*/M."""
    d = derived_quantities(p)
    return 1 - d.N * p.eps, 1 + d.Q_S - d.N, d.Q_S


def _roots_stable(a, b, c):
    """Real roots of a x^2 + b x + c without cancellation."""
    disc = b * b - 4 * a * c
    if disc < 0:
        return []
    q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
    if q == 0:
        return [0.0, 0.0]
    return [q / a, c / q]


def _entomo_state(p, ratio):
    """Equilibrium (A, M, F_WS, S_S) for a sterile/wild male ratio."""
    d = derived_quantities(p)
    M = d.M_S_star / ratio
    A = p.mu_M * M / ((1 - p.r) * p.gamma)
    F = (p.gamma + p.mu_A1 + p.mu_A2_eff * A) * A / p.phi
    sterile = (1 - p.eps) * ratio / (1 + ratio)
    S = (p.lambda_F + sterile * p.r * p.gamma * A) / p.mu_S
    return np.array([A, M, F, S])


def positive_ratio_roots(p):
    """Tagged positive roots x = M_S*/M of the mating quadratic.

    Branches follow N*eps vs 1 and the male release rate vs its critical
    value; exact boundary cases go to the double-root equilibria.
    """
    d = derived_quantities(p)
    if d.N <= 1 or d.M_S_star <= 0:
        return []
    a, b, c = mating_quadratic(p)
    n_eps = d.N * p.eps
    lam_m = p.lambda_M
    if close(n_eps, 1.0):
        sharp = thresholds.lambda_M_sharp_crit(p)
        if lam_m < sharp and not close(lam_m, sharp):
            return [("E_sharp", c / -b)]
        return []
    if n_eps < 1:
        crit = thresholds.lambda_M_crit(p)
        if close(lam_m, crit):
            return [("E_diamond", -b / (2 * a))]
        if lam_m > crit:
            return []
        big, small = sorted(_roots_stable(a, b, c), reverse=True)
        # larger sterile/wild ratio means fewer wild insects
        return [("E1", big), ("E2", small)]
    roots = [x for x in _roots_stable(a, b, c) if x > 0]
    return [("E_dagger", roots[0])]


def sit_entomological_equilibria(p):
    """All equilibria of the entomological system under constant releases."""
    d = derived_quantities(p)
    e0 = np.array([0.0, 0.0, 0.0, p.lambda_F / p.mu_S])
    found = [("E0", e0)]
    if d.N > 1 and d.M_S_star <= 0:
        found.append(("E_star_wild", np.array([d.A_star, d.M_star, d.F_star, p.lambda_F / p.mu_S])))
    for tag, ratio in positive_ratio_roots(p):
        found.append((tag, _entomo_state(p, ratio)))
    return [LabeledEquilibrium(tag, s, equilibrium_residual(p, s)) for tag, s in found]


def embed(p, entomo, humans=None):
    """Disease-free host-vector state carrying an entomological state."""
    x = np.zeros(11)
    x[0] = p.N_h if humans is None else humans
    x[3], x[4], x[5], x[8] = entomo
    return x


def disease_free_equilibria(p):
    out = []
    for eq in sit_entomological_equilibria(p):
        x = embed(p, eq.state)
        out.append(LabeledEquilibrium(ENTOMO_TO_DFE[eq.tag], x, equilibrium_residual(p, x)))
    return out


def wife_equilibrium(p):
    """Boundary equilibrium with no wild insects and circulating virus.

    Exists only when the sterile-female release rate exceeds its critical
    value; returns None otherwise.
    """
    d = derived_quantities(p)
    tdfe = d.transmission * p.lambda_F / (p.mu_S * p.N_h)
    if tdfe <= 1 or close(tdfe, 1.0):
        return None
    b = p.B * p.beta_hm * p.mu_h / (p.mu_h + p.nu_h)
    frac = (p.mu_S + b) / (b + p.mu_S * tdfe)
    S_h = frac * p.N_h
    I_h = p.mu_h * p.N_h * (1 - frac) / (p.nu_h + p.mu_h)
    R_h = p.nu_h * I_h / p.mu_h
    foi = p.B * p.beta_hm * I_h / p.N_h
    S_S = p.lambda_F / (p.mu_S + foi)
    S_E = foi * S_S / (p.nu_m + p.mu_S)
    S_I = p.nu_m * S_E / p.mu_I
    x = np.array([S_h, I_h, R_h, 0, 0, 0, 0, 0, S_S, S_E, S_I], dtype=float)
    return LabeledEquilibrium("WIFE", x, equilibrium_residual(p, x))


def _mosquito_infection(p, A):
    """Force of infection on mosquitoes at an endemic state with larvae A.

    Returns None when no positive solution exists.
    """
    d = derived_quantities(p)
    u = d.alpha_epi * p.N_h * (p.lambda_F + p.r * p.gamma * A)
    y_max = p.mu_h * p.B * p.beta_hm / (p.nu_h + p.mu_h)
    if u <= p.mu_S:
        return None
    return (u - p.mu_S) / (1 + u / y_max)


def endemic_state(p, A):
    """Reconstruct the endemic host-vector state for larval abundance A."""
    y = _mosquito_infection(p, A)
    if y is None:
        return None
    d = derived_quantities(p)
    M = (1 - p.r) * p.gamma * A / p.mu_M
    fertile, sterile = mating_fractions(M, d.M_S_star, p.eps)
    emergence = p.r * p.gamma * A
    I_h = y * p.N_h / (p.B * p.beta_hm)
    S_h = p.N_h - (p.nu_h + p.mu_h) * I_h / p.mu_h
    R_h = p.nu_h * I_h / p.mu_h
    F_WS = fertile * emergence / (p.mu_S + y)
    F_WE = y * F_WS / (p.nu_m + p.mu_S)
    F_WI = p.nu_m * F_WE / p.mu_I
    S_S = (p.lambda_F + sterile * emergence) / (p.mu_S + y)
    S_E = y * S_S / (p.nu_m + p.mu_S)
    S_I = p.nu_m * S_E / p.mu_I
    return np.array([S_h, I_h, R_h, A, M, F_WS, F_WE, F_WI, S_S, S_E, S_I])


def _endemic_tag(p, index):
    if p.lambda_tot == 0:
        return "EE_SIT_star"
    return f"EE_SIT_{index + 1}"


def endemic_equilibria_equal_mortality(p):
    """Endemic equilibria when infected and susceptible females die alike.

    The larval abundance then solves the same equation as in the disease
    free case, and each root carries at most one endemic state.
    """
    if not close(p.mu_I, p.mu_S):
        raise ValueError("mu_I != mu_S: use endemic_root_classification")
    roots = sorted(float(eq.state[0]) for eq in sit_entomological_equilibria(p) if eq.state[0] > 0)
    out = []
    for i, A in enumerate(roots):
        x = endemic_state(p, A)
        if x is not None and x[1] > 0:
            out.append(LabeledEquilibrium(_endemic_tag(p, i), x, equilibrium_residual(p, x)))
    return out


# --- general case mu_S < mu_I -------------------------------------------------

DESCARTES_TABLE = {
    "----": (0,),
    "---+": (1,),
    "--+-": (2, 0),
    "-+--": (2, 0),
    "-++-": (2, 0),
    "-+-+": (3, 1),
    "--++": (1,),
    "-+++": (1,),
}


def _descartes_counts(signs):
    nonzero = [s for s in signs if s != 0]
    changes = sum(1 for a, b in zip(nonzero, nonzero[1:]) if a != b)
    return tuple(range(changes, -1, -2))


def endemic_cubic_coefficients(p):
    """(a3, a2, a1, a0) of the cubic in A, from its closed forms.

    Uses the mosquito infection balance with susceptible humans
    approximated by N_h, so the coupling constant is alpha_epi * N_h.
    """
    d = derived_quantities(p)
    alpha = d.alpha_epi * p.N_h
    r, g, mu_a1, mu_a2 = p.r, p.gamma, p.mu_A1, p.mu_A2_eff
    rho = (1 + p.nu_m / p.mu_I) / (1 + p.nu_m / p.mu_S)
    n, q, ms = d.N, d.Q, d.M_S_star
    lam_f = p.lambda_F
    larva = g + mu_a1
    a3 = -(1 - r) * g**2 * mu_a2 * alpha * r
    a2 = (1 - r) * alpha * g * (r * g * larva * (n * rho - q * ms - 1) - mu_a2 * lam_f)
    a1 = (1 - r) * g * larva * (
        alpha * p.mu_M * ms * r / (1 - r) * (n * p.eps * rho - 1)
        + n * p.mu_S * (1 - rho)
        + alpha * lam_f * (n * rho - q * ms - 1)
    )
    a0 = p.mu_M * ms * larva * p.mu_S * (
        n * p.eps * (1 - rho + rho * alpha * lam_f / p.mu_S) - alpha * lam_f / p.mu_S
    )
    return a3, a2, a1, a0


def endemic_polynomial(p, exact=True):
    """Cubic in A whose positive roots carry endemic equilibria.

    Built by multiplying out the larval balance.  With exact=False the
    susceptible-human fraction is taken as 1, which reproduces the closed
    form coefficients; exact=True keeps S_h = N_h (1 - y / y_max).
    Coefficients are returned highest degree first.
    """
    P = np.polynomial.polynomial
    d = derived_quantities(p)
    alpha = d.alpha_epi * p.N_h
    rg = p.r * p.gamma
    kappa = (1 + p.nu_m / p.mu_I) / (p.nu_m + p.mu_S)
    ms = d.M_S_star
    bites = p.B * p.beta_hm
    inv_ymax = (p.nu_h + p.mu_h) / (p.mu_h * bites) if exact and bites > 0 else 0.0
    u = np.array([alpha * p.lambda_F, alpha * rg])
    fertile_num = np.array([p.eps * p.mu_M * ms, (1 - p.r) * p.gamma])
    all_num = np.array([p.mu_M * ms, (1 - p.r) * p.gamma])
    # 1 + u / y_max + kappa (u - mu_S)
    infect = P.polyadd([1.0 - kappa * p.mu_S], (kappa + inv_ymax) * u)
    lhs = rg * p.phi * P.polymul(fertile_num, infect)
    death = np.array([p.gamma + p.mu_A1, p.mu_A2_eff])
    rhs = (1 + p.mu_S * inv_ymax) * P.polymul(P.polymul(death, u), all_num)
    poly = P.polysub(lhs, rhs)
    poly = np.concatenate([poly, np.zeros(4 - len(poly))])[:4]
    return tuple(float(c) for c in poly[::-1])


def positive_cubic_roots(coeffs):
    """Distinct positive real roots of a cubic, ascending."""
    coeffs = np.asarray(coeffs, dtype=float)
    scale = np.max(np.abs(coeffs))
    if scale == 0:
        return []
    roots = np.roots(coeffs / scale)
    out = []
    for z in roots:
        if abs(z.imag) <= 1e-8 * max(1.0, abs(z.real)) and z.real > 0:
            x = _polish(coeffs, z.real)
            if x > 0 and not any(close(x, o, 1e-9) for o in out):
                out.append(x)
    return sorted(out)


def _polish(coeffs, x):
    dp = np.polyder(coeffs)
    for _ in range(3):
        slope = np.polyval(dp, x)
        if slope == 0:
            break
        step = np.polyval(coeffs, x) / slope
        if not math.isfinite(step) or abs(step) > 1e-3 * abs(x):
            break
        x -= step
    return x


@dataclass
class EndemicClassification:
    coefficients: tuple
    sign_pattern: str
    descartes_counts: tuple
    count: int
    roots: list
    exact_coefficients: tuple
    exact_roots: list
    equilibria: list

    def as_dict(self):
        return {
            "coefficients": list(self.coefficients),
            "sign_pattern": self.sign_pattern,
            "descartes_counts": list(self.descartes_counts),
            "count": self.count,
            "roots": list(self.roots),
            "exact_coefficients": list(self.exact_coefficients),
            "exact_roots": list(self.exact_roots),
            "equilibria": [e.as_dict() for e in self.equilibria],
        }


def _signs(coeffs):
    return [int(np.sign(c)) for c in coeffs]


def endemic_root_classification(p):
    """Sign pattern and positive roots of the endemic cubic (mu_S < mu_I).

    The closed-form cubic drives the sign-rule classification; endemic
    states are rebuilt from the exact cubic, whose positive roots with a
    positive mosquito infection rate give true equilibria.
    """
    coeffs = endemic_cubic_coefficients(p)
    signs = _signs(coeffs)
    pattern = "".join({1: "+", -1: "-", 0: "0"}[s] for s in signs)
    roots = positive_cubic_roots(coeffs)
    exact = endemic_polynomial(p, exact=True)
    exact_roots = positive_cubic_roots(exact)
    eqs = []
    for A in exact_roots:
        x = endemic_state(p, A)
        if x is None or x[1] <= 0:
            continue
        x = _refine_endemic(p, x)
        eqs.append(LabeledEquilibrium(_endemic_tag(p, len(eqs)), x, equilibrium_residual(p, x)))
    return EndemicClassification(
        coefficients=coeffs,
        sign_pattern=pattern,
        descartes_counts=_descartes_counts(signs),
        count=len(roots),
        roots=roots,
        exact_coefficients=exact,
        exact_roots=exact_roots,
        equilibria=eqs,
    )


def _larval_balance(p, A):
    x = endemic_state(p, A)
    if x is None:
        return None
    return p.phi * (x[5] + x[6] + x[7]) - (p.gamma + p.mu_A1 + p.mu_A2_eff * A) * A


def _refine_endemic(p, x):
    """Newton-polish A on the larval balance itself (better conditioned)."""
    A = float(x[3])
    for _ in range(4):
        g = _larval_balance(p, A)
        h = 1e-7 * A
        g2 = _larval_balance(p, A + h)
        if g is None or g2 is None or g2 == g:
            break
        step = g * h / (g2 - g)
        if abs(step) > 1e-6 * A:
            break
        A -= step
    refined = endemic_state(p, A)
    if refined is None:
        return x
    if equilibrium_residual(p, refined) <= equilibrium_residual(p, x):
        return refined
    return x


def endemic_equilibria(p):
    if close(p.mu_I, p.mu_S):
        return endemic_equilibria_equal_mortality(p)
    return endemic_root_classification(p).equilibria


def all_equilibria(p):
    """Disease-free, wild-insect-free and endemic equilibria of the model."""
    out = list(disease_free_equilibria(p))
    wife = wife_equilibrium(p)
    if wife is not None:
        out.append(wife)
    out.extend(endemic_equilibria(p))
    return out
