"""Model parameters, presets and derived scalars.

All rates are per day and populations are continuous head counts.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path


class ValidationError(ValueError):
    """Raised when a parameter set or configuration violates its constraints."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class ModelParams:
    phi: float
    gamma: float
    mu_A1: float
    mu_A2: float
    r: float
    mu_M: float
    mu_MS: float
    mu_S: float
    mu_I: float
    nu_m: float
    B: float
    beta_mh: float
    beta_hm: float
    mu_h: float
    nu_h: float
    N_h: float
    lambda_tot: float = 0.0
    eps_F: float = 0.0
    eps: float = 0.0
    p_mc: float = 0.0

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def as_dict(self):
        return dataclasses.asdict(self)

    @property
    def lambda_M(self):
        """Sterile-male release rate."""
        return (1.0 - self.eps_F) * self.lambda_tot

    @property
    def lambda_F(self):
        """Sterile-female release rate."""
        return self.eps_F * self.lambda_tot

    @property
    def mu_A2_eff(self):
        """Larval density mortality after removing a fraction p_mc of breeding sites."""
        return self.mu_A2 / (1.0 - self.p_mc)


FIELDS = tuple(f.name for f in dataclasses.fields(ModelParams))
CONTROL_FIELDS = ("lambda_tot", "eps_F", "eps", "p_mc")
RATE_FIELDS = tuple(f for f in FIELDS if f not in CONTROL_FIELDS + ("r",))
# zero is allowed here: no eggs, no bites or no transmission per bite
NONNEGATIVE_FIELDS = ("phi", "B", "beta_mh", "beta_hm")

# Plausible ranges at 25 degrees C, used for sampling.  Lifespan and
# infectious-period ranges are stored as rate bounds.
PARAM_RANGES = {
    "mu_h": (1.0 / (80 * 365), 1.0 / (60 * 365)),
    "nu_h": (1.0 / 7, 1.0),
    "B": (0.1, 1.0),
    "beta_mh": (0.12, 0.57),
    "beta_hm": (0.4, 0.96),
    "mu_A1": (0.019, 0.299),
    "mu_A2": (2e-5, 0.02),
    "phi": (0.0, 11.0),
    "gamma": (0.028, 0.12),
    "r": (0.4, 0.6),
    "mu_S": (0.035, 0.07),
    "mu_I": (0.035, 0.07),
    "mu_M": (0.05, 0.082),
    "mu_MS": (0.1, 0.2),
    "nu_m": (0.015, 0.25),
    "lambda_tot": (0.0, 18000.0),
    "eps": (0.0, 0.05),
    "eps_F": (0.0, 0.05),
}

# Baseline column.  mu_A2 is left out on purpose: it follows from the
# larval carrying capacity K = 3 N_h (see params_from_mapping).
BASELINE = {
    "phi": 10.0,
    "gamma": 0.0962,
    "mu_A1": 0.0262,
    "r": 0.5,
    "mu_M": 0.0722,
    "mu_MS": 0.1,
    "mu_S": 0.0453,
    "mu_I": 0.0453,
    "nu_m": 0.184,
    "B": 0.25,
    "beta_mh": 0.3427,
    "beta_hm": 0.872,
    "mu_h": 1.0 / (78 * 365),
    "nu_h": 1.0 / 7,
    "N_h": 20000.0,
    "lambda_tot": 0.0,
    "eps_F": 0.0,
    "eps": 0.0,
    "p_mc": 0.0,
}

PRESETS = {
    "baseline": BASELINE,
    # Same column with the density-dependent larval mortality rounded as
    # usually tabulated.
    "baseline_rounded": dict(BASELINE, mu_A2=1.76e-4),
}

CAPACITY_PER_HUMAN = 3.0


def mu_A2_from_capacity(phi, gamma, mu_A1, r, mu_S, K):
    """Density-dependent larval mortality giving carrying capacity K."""
    n = r * gamma * phi / (mu_S * (gamma + mu_A1))
    return (gamma + mu_A1) * n / K


def validate(p):
    """Return a list of violated constraints (empty when p is valid)."""
    problems = []
    for name in FIELDS:
        value = getattr(p, name)
        if not isinstance(value, (int, float)) or not math.isfinite(value):
            problems.append(f"{name} must be a finite number")
    if problems:
        return problems
    for name in RATE_FIELDS:
        value = getattr(p, name)
        if name in NONNEGATIVE_FIELDS:
            if value < 0:
                problems.append(f"{name} must be >= 0")
        elif value <= 0:
            problems.append(f"{name} must be > 0")
    if not 0 < p.r < 1:
        problems.append("r out of (0,1)")
    if p.lambda_tot < 0:
        problems.append("lambda_tot must be >= 0")
    if not 0 <= p.eps < 1:
        problems.append("eps out of [0,1)")
    if not 0 <= p.eps_F <= 1:
        problems.append("eps_F out of [0,1]")
    if not 0 <= p.p_mc < 1:
        problems.append("p_mc out of [0,1)")
    if p.mu_I < p.mu_S:
        problems.append("mu_I < mu_S unsupported")
    return problems


def check(p):
    """Validate p and return it, raising ValidationError on any problem."""
    problems = validate(p)
    if problems:
        raise ValidationError(problems)
    return p


def basic_offspring_number(p):
    return p.r * p.gamma * p.phi / (p.mu_S * (p.gamma + p.mu_A1))


@dataclass(frozen=True)
class DerivedQuantities:
    N: float
    Q: float
    M_S_star: float
    Q_S: float
    alpha_epi: float
    K: float
    lambda_M: float
    lambda_F: float
    A_star: float
    M_star: float
    F_star: float
    transmission: float

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}


def derived_quantities(p):
    n = basic_offspring_number(p)
    q = p.mu_A2_eff * p.mu_M / ((p.gamma + p.mu_A1) * (1 - p.r) * p.gamma)
    ms = p.lambda_M / p.mu_MS
    alpha = (
        (p.nu_m / p.mu_I)
        * (p.B * p.beta_mh / (p.nu_h + p.mu_h))
        * (p.B * p.beta_hm / (p.nu_m + p.mu_S))
        / p.N_h**2
    )
    if n > 1:
        a_star = (p.gamma + p.mu_A1) * (n - 1) / p.mu_A2_eff
    else:
        a_star = 0.0
    m_star = (1 - p.r) * p.gamma * a_star / p.mu_M
    f_star = p.r * p.gamma * a_star / p.mu_S
    # Secondary human infections per susceptible female per human, so that
    # R0^2 = transmission * F / N_h.
    transmission = (
        (p.nu_m / (p.nu_m + p.mu_S))
        * (p.B * p.beta_mh / p.mu_I)
        * (p.B * p.beta_hm / (p.nu_h + p.mu_h))
    )
    return DerivedQuantities(
        N=n,
        Q=q,
        M_S_star=ms,
        Q_S=q * ms,
        alpha_epi=alpha,
        K=(p.gamma + p.mu_A1) * n / p.mu_A2_eff,
        lambda_M=p.lambda_M,
        lambda_F=p.lambda_F,
        A_star=a_star,
        M_star=m_star,
        F_star=f_star,
        transmission=transmission,
    )


def apply_mechanical_control(p):
    """Fold breeding-site removal into the larval density mortality.

    Removing a fraction p_mc of breeding sites shrinks the carrying capacity
    by (1 - p_mc), i.e. mu_A2 grows by 1/(1 - p_mc).
    """
    if not 0 <= p.p_mc < 1:
        raise ValidationError(f"p_mc={p.p_mc} out of [0,1): invalid control")
    if p.p_mc == 0:
        return p
    return p.replace(mu_A2=p.mu_A2 / (1 - p.p_mc), p_mc=0.0)


def _coerce(key, value):
    if key not in FIELDS and key != "K":
        raise ValidationError(f"unknown parameter '{key}'")
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{key}: cannot parse {value!r} as a number") from None


def params_from_mapping(mapping):
    """Build validated ModelParams from a name -> value mapping.

    When mu_A2 is absent it is derived from the carrying capacity K, which
    defaults to 3 N_h.  Giving both mu_A2 and K is an error.
    """
    values = {k: _coerce(k, v) for k, v in mapping.items()}
    capacity = values.pop("K", None)
    if "mu_A2" in values and capacity is not None:
        raise ValidationError("give either mu_A2 or K, not both")
    missing = [f for f in FIELDS if f not in values and f != "mu_A2"]
    missing = [f for f in missing if f not in CONTROL_FIELDS]
    if missing:
        raise ValidationError([f"missing parameter '{f}'" for f in missing])
    if "mu_A2" not in values:
        if capacity is None:
            capacity = CAPACITY_PER_HUMAN * values["N_h"]
        if capacity <= 0:
            raise ValidationError("K must be > 0")
        values["mu_A2"] = mu_A2_from_capacity(
            values["phi"], values["gamma"], values["mu_A1"],
            values["r"], values["mu_S"], capacity,
        )
    return check(ModelParams(**values))


def preset_mapping(name):
    try:
        return dict(PRESETS[name])
    except KeyError:
        known = ", ".join(sorted(PRESETS))
        raise ValidationError(f"unknown preset '{name}' (known: {known})") from None


def preset(name="baseline", **overrides):
    """Named preset with optional overrides, e.g. preset(eps=0.01)."""
    mapping = preset_mapping(name)
    mapping.update(overrides)
    return params_from_mapping(mapping)


def parse_key_values(text, source="<config>"):
    """Parse `name = value` lines; `#` starts a comment."""
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{source}:{lineno}: expected 'name = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ValidationError(f"{source}:{lineno}: empty name")
        if key in entries:
            raise ValidationError(f"{source}:{lineno}: duplicate key '{key}'")
        entries[key] = value
    return entries


def load_preset_file(path):
    """Read a parameter file; unknown keys are rejected.

    A file may start from a named preset with `preset = <name>`; the other
    lines override it.
    """
    path = Path(path)
    entries = parse_key_values(path.read_text(), source=str(path))
    base = entries.pop("preset", None)
    mapping = preset_mapping(base) if base else {}
    for key in entries:
        if key not in FIELDS and key != "K":
            raise ValidationError(f"{path}: unknown parameter '{key}'")
    mapping.update(entries)
    return params_from_mapping(mapping)
