"""Right-hand side, Jacobian and time integration of the host-vector model.

State order (reduced model, sterile males held at M_S*):

    S_h, I_h, R_h, A, M, F_WS, F_WE, F_WI, S_S, S_E, S_I

The full model appends the sterile-male compartment M_S.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .params import ValidationError, derived_quantities

STATE_NAMES = ("S_h", "I_h", "R_h", "A", "M", "F_WS", "F_WE", "F_WI", "S_S", "S_E", "S_I")
FULL_NAMES = STATE_NAMES + ("M_S",)
INDEX = {name: i for i, name in enumerate(FULL_NAMES)}


class IntegrationError(RuntimeError):
    """Step size collapsed; carries the last accepted time and state."""

    def __init__(self, message, t, state):
        super().__init__(f"{message} at t={t:.6g}")
        self.t = t
        self.state = state


@dataclass(frozen=True)
class Schedule:
    t_sit_start: float = 0.0
    t_denv: float = 0.0
    i0: float = 1.0
    horizon: float = 1000.0
    use_reduced: bool = True

    def validate(self):
        problems = []
        if self.t_sit_start < 0:
            problems.append("t_sit_start must be >= 0")
        if self.horizon <= 0:
            problems.append("horizon must be > 0")
        if self.t_sit_start > self.horizon:
            problems.append("t_sit_start must be <= horizon")
        if not 0 <= self.t_denv <= self.horizon:
            problems.append("t_denv out of [0, horizon]")
        if self.i0 < 0:
            problems.append("i0 must be >= 0")
        if problems:
            raise ValidationError(problems)
        return self


def mating_fractions(M, M_S, eps):
    """Fractions of emerging females mated fertile / sterile.

    With no males at all both fractions are 0.
    """
    total = M + M_S
    if total <= 0:
        return 0.0, 0.0
    return (M + eps * M_S) / total, (1 - eps) * M_S / total


def _rhs_core(x, p, m_s, lam_f):
    S_h, I_h, R_h, A, M, F_WS, F_WE, F_WI, S_S, S_E, S_I = x
    fertile, sterile = mating_fractions(M, m_s, p.eps)
    foi_h = p.B * p.beta_mh * (F_WI + S_I) / p.N_h
    foi_m = p.B * p.beta_hm * I_h / p.N_h
    emergence = p.r * p.gamma * A
    return [
        p.mu_h * p.N_h - foi_h * S_h - p.mu_h * S_h,
        foi_h * S_h - (p.nu_h + p.mu_h) * I_h,
        p.nu_h * I_h - p.mu_h * R_h,
        p.phi * (F_WS + F_WE + F_WI) - (p.gamma + p.mu_A1 + p.mu_A2_eff * A) * A,
        (1 - p.r) * p.gamma * A - p.mu_M * M,
        fertile * emergence - foi_m * F_WS - p.mu_S * F_WS,
        foi_m * F_WS - (p.nu_m + p.mu_S) * F_WE,
        p.nu_m * F_WE - p.mu_I * F_WI,
        lam_f + sterile * emergence - foi_m * S_S - p.mu_S * S_S,
        foi_m * S_S - (p.nu_m + p.mu_S) * S_E,
        p.nu_m * S_E - p.mu_I * S_I,
    ]


def rhs_full(state, t, p, schedule):
    """Time derivative at (state, t).

    An 11-component state uses the reduced model (M_S held at M_S* once
    releases start); a 12-component state carries M_S explicitly.
    """
    state = [float(v) for v in state]
    releasing = t >= schedule.t_sit_start
    lam_m = p.lambda_M if releasing else 0.0
    lam_f = p.lambda_F if releasing else 0.0
    if len(state) == 12:
        m_s = state[11]
        out = _rhs_core(state[:11], p, m_s, lam_f)
        out.append(lam_m - p.mu_MS * m_s)
    else:
        m_s = lam_m / p.mu_MS
        out = _rhs_core(state, p, m_s, lam_f)
    return np.array(out)


def equilibrium_rhs(state, p):
    """Reduced-model derivative with releases switched on."""
    return np.array(_rhs_core([float(v) for v in state[:11]], p, p.lambda_M / p.mu_MS, p.lambda_F))


def jacobian(p, state):
    """Analytic 11x11 Jacobian of the reduced model with releases on."""
    S_h, I_h, R_h, A, M, F_WS, F_WE, F_WI, S_S, S_E, S_I = (float(v) for v in state[:11])
    m_s = p.lambda_M / p.mu_MS
    fertile, sterile = mating_fractions(M, m_s, p.eps)
    total = M + m_s
    d_ratio = (1 - p.eps) * m_s / total**2 if total > 0 else 0.0
    bmh = p.B * p.beta_mh / p.N_h
    bhm = p.B * p.beta_hm / p.N_h
    foi_h = bmh * (F_WI + S_I)
    foi_m = bhm * I_h
    rg = p.r * p.gamma

    J = np.zeros((11, 11))
    J[0, 0] = -foi_h - p.mu_h
    J[0, 7] = J[0, 10] = -bmh * S_h
    J[1, 0] = foi_h
    J[1, 1] = -(p.nu_h + p.mu_h)
    J[1, 7] = J[1, 10] = bmh * S_h
    J[2, 1] = p.nu_h
    J[2, 2] = -p.mu_h
    J[3, 3] = -(p.gamma + p.mu_A1 + 2 * p.mu_A2_eff * A)
    J[3, 5] = J[3, 6] = J[3, 7] = p.phi
    J[4, 3] = (1 - p.r) * p.gamma
    J[4, 4] = -p.mu_M
    J[5, 1] = -bhm * F_WS
    J[5, 3] = fertile * rg
    J[5, 4] = d_ratio * rg * A
    J[5, 5] = -foi_m - p.mu_S
    J[6, 1] = bhm * F_WS
    J[6, 5] = foi_m
    J[6, 6] = -(p.nu_m + p.mu_S)
    J[7, 6] = p.nu_m
    J[7, 7] = -p.mu_I
    J[8, 1] = -bhm * S_S
    J[8, 3] = sterile * rg
    J[8, 4] = -d_ratio * rg * A
    J[8, 8] = -foi_m - p.mu_S
    J[9, 1] = bhm * S_S
    J[9, 8] = foi_m
    J[9, 9] = -(p.nu_m + p.mu_S)
    J[10, 9] = p.nu_m
    J[10, 10] = -p.mu_I
    return J


def effective_reproduction_number(state, p):
    d = derived_quantities(p)
    return d.transmission * (float(state[5]) + float(state[8])) / p.N_h


def default_initial_conditions(p, schedule):
    """Susceptible humans, wild mosquitoes at their no-release equilibrium."""
    d = derived_quantities(p)
    x = np.zeros(11 if schedule.use_reduced else 12)
    x[0] = p.N_h
    x[3], x[4], x[5] = d.A_star, d.M_star, d.F_star
    if not schedule.use_reduced and schedule.t_sit_start == 0:
        x[11] = d.M_S_star
    return x


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    r_eff: np.ndarray
    names: tuple
    events: list = field(default_factory=list)

    def column(self, name):
        return self.states[:, self.names.index(name)]

    @property
    def final(self):
        return self.states[-1]


# Dormand-Prince 5(4) tableau.
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_E = (
    71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40,
)


def _make_rhs(p, releasing, full):
    """Fast closure for one integration segment (release switch fixed)."""
    lam_m = p.lambda_M if releasing else 0.0
    lam_f = p.lambda_F if releasing else 0.0
    m_s_fixed = lam_m / p.mu_MS
    eps = p.eps
    mu_h, N_h, nu_h = p.mu_h, p.N_h, p.nu_h
    bmh = p.B * p.beta_mh / N_h
    bhm = p.B * p.beta_hm / N_h
    phi, larva = p.phi, p.gamma + p.mu_A1
    mu_A2 = p.mu_A2_eff
    male = (1 - p.r) * p.gamma
    rg = p.r * p.gamma
    mu_M, mu_S, mu_I, nu_m, mu_MS = p.mu_M, p.mu_S, p.mu_I, p.nu_m, p.mu_MS
    recover = nu_h + mu_h
    latent = nu_m + mu_S

    def f(y):
        S_h, I_h, R_h, A, M, Fs, Fe, Fi, Ss, Se, Si = y[:11]
        m_s = y[11] if full else m_s_fixed
        total = M + m_s
        if total > 0:
            fertile = (M + eps * m_s) / total
            sterile = (1 - eps) * m_s / total
        else:
            fertile = sterile = 0.0
        foi_h = bmh * (Fi + Si)
        foi_m = bhm * I_h
        em = rg * A
        out = [
            mu_h * N_h - (foi_h + mu_h) * S_h,
            foi_h * S_h - recover * I_h,
            nu_h * I_h - mu_h * R_h,
            phi * (Fs + Fe + Fi) - (larva + mu_A2 * A) * A,
            male * A - mu_M * M,
            fertile * em - (foi_m + mu_S) * Fs,
            foi_m * Fs - latent * Fe,
            nu_m * Fe - mu_I * Fi,
            lam_f + sterile * em - (foi_m + mu_S) * Ss,
            foi_m * Ss - latent * Se,
            nu_m * Se - mu_I * Si,
        ]
        if full:
            out.append(lam_m - mu_MS * m_s)
        return out

    return f


def _norm(v):
    return math.sqrt(sum(x * x for x in v) / len(v))


def _initial_step(f, y0, k0, rtol, atol, span):
    sc = [atol + rtol * abs(v) for v in y0]
    d0 = _norm([v / s for v, s in zip(y0, sc)])
    d1 = _norm([v / s for v, s in zip(k0, sc)])
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    y1 = [a + h0 * b for a, b in zip(y0, k0)]
    k1 = f(y1)
    d2 = _norm([(a - b) / s for a, b, s in zip(k1, k0, sc)]) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, span)


def _integrate_segment(f, t0, y0, t1, stops, rtol, atol, h, record):
    """Advance from t0 to t1, landing exactly on every time in `stops`.

    `record(t, y)` is called at each interior stop; returns (y, h) at t1.
    """
    n = len(y0)
    y = list(y0)
    t = t0
    k1 = f(y)
    targets = [s for s in stops if t0 < s < t1] + [t1]
    if h is None:
        h = _initial_step(f, y, k1, rtol, atol, t1 - t0)
    a2, a3, a4, a5, a6, a7 = _A[1:]
    e1, _, e3, e4, e5, e6, e7 = _E
    neg_floor = -atol
    for i_stop, target in enumerate(targets):
        while t < target:
            landing = t + h >= target - 1e-12 * max(1.0, abs(target))
            hh = target - t if landing else h
            if hh <= 1e-13 * max(1.0, abs(t)):
                if landing:
                    t = target
                    break
                raise IntegrationError("step size underflow", t, np.array(y))
            k2 = f([y[i] + hh * a2[0] * k1[i] for i in range(n)])
            k3 = f([y[i] + hh * (a3[0] * k1[i] + a3[1] * k2[i]) for i in range(n)])
            k4 = f([y[i] + hh * (a4[0] * k1[i] + a4[1] * k2[i] + a4[2] * k3[i])
                    for i in range(n)])
            k5 = f([y[i] + hh * (a5[0] * k1[i] + a5[1] * k2[i] + a5[2] * k3[i]
                                 + a5[3] * k4[i]) for i in range(n)])
            k6 = f([y[i] + hh * (a6[0] * k1[i] + a6[1] * k2[i] + a6[2] * k3[i]
                                 + a6[3] * k4[i] + a6[4] * k5[i]) for i in range(n)])
            y_new = [y[i] + hh * (a7[0] * k1[i] + a7[2] * k3[i] + a7[3] * k4[i]
                                  + a7[4] * k5[i] + a7[5] * k6[i]) for i in range(n)]
            k7 = f(y_new)
            acc = 0.0
            for i in range(n):
                err = hh * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i]
                            + e6 * k6[i] + e7 * k7[i])
                sc = atol + rtol * max(abs(y[i]), abs(y_new[i]))
                acc += (err / sc) ** 2
            err_norm = math.sqrt(acc / n)
            if err_norm <= 1.0 and min(y_new) >= neg_floor:
                t = target if landing else t + hh
                y, k1 = y_new, k7
                fac = 5.0 if err_norm == 0 else min(5.0, max(0.2, 0.9 * err_norm ** -0.2))
                # a step shortened to hit a stop says little about the next one
                if not (landing and hh < h):
                    h = hh * fac
            else:
                # reject: too inaccurate, or a compartment went clearly negative
                if err_norm > 1.0:
                    h = hh * max(0.2, 0.9 * err_norm ** -0.2)
                else:
                    h = hh * 0.5
                if h < 1e-13 * max(1.0, abs(t)):
                    raise IntegrationError("step size underflow", t, np.array(y))
        if i_stop < len(targets) - 1:
            record(t, y)
    return y, h


def integrate(p, schedule, ic=None, rtol=1e-8, atol=None, dt_out=1.0):
    """Simulate the model under `schedule`, sampling every dt_out days.

    Integration restarts exactly at the release start and at the virus
    introduction, where I_h jumps by i0 (taken from S_h).
    """
    schedule.validate()
    full = not schedule.use_reduced
    dim = 12 if full else 11
    if ic is None:
        ic = default_initial_conditions(p, schedule)
    y = [float(v) for v in ic]
    if len(y) != dim:
        raise ValidationError(f"initial state must have {dim} components, got {len(y)}")
    if min(y) < 0:
        raise ValidationError("initial state must be non-negative")
    if rtol <= 0:
        raise ValidationError("rtol must be > 0")
    if atol is None:
        atol = 1e-10 * p.N_h
    if atol <= 0:
        raise ValidationError("atol must be > 0")
    if dt_out <= 0:
        raise ValidationError("dt_out must be > 0")

    horizon = schedule.horizon
    n_out = int(math.floor(horizon / dt_out + 1e-9))
    grid = [k * dt_out for k in range(n_out + 1)]
    if grid[-1] < horizon - 1e-9 * horizon:
        grid.append(horizon)

    times, samples = [], []

    def record(t, state):
        times.append(t)
        samples.append(list(state))

    events = []
    cuts = sorted({schedule.t_sit_start, schedule.t_denv} - {0.0})
    cuts = [c for c in cuts if c < horizon]
    bounds = [0.0] + cuts + [horizon]

    t = 0.0
    if schedule.t_denv == 0.0:
        y = _introduce(y, schedule.i0, events, 0.0)
    record(0.0, y)
    h = None
    for t0, t1 in zip(bounds[:-1], bounds[1:]):
        f_raw = _make_rhs(p, releasing=t0 >= schedule.t_sit_start, full=full)
        inner = [g for g in grid if t0 < g < t1]
        y, h = _integrate_segment(f_raw, t0, y, t1, inner, rtol, atol, h, record)
        t = t1
        if t1 == schedule.t_denv and t1 < horizon:
            y = _introduce(y, schedule.i0, events, t1)
        if t1 in grid[1:]:
            record(t1, y)
        # a jump or a change of release regime invalidates the step history
        h = None

    times = np.array(times)
    states = np.maximum(np.array(samples), 0.0)
    d = derived_quantities(p)
    r_eff = d.transmission * (states[:, 5] + states[:, 8]) / p.N_h
    return Trajectory(times, states, r_eff, FULL_NAMES[:dim], events)


def _introduce(y, i0, events, t):
    before = np.array(y)
    y = list(y)
    moved = min(i0, y[0])
    y[0] -= moved
    y[1] += moved
    events.append((t, before, np.array(y)))
    return y
