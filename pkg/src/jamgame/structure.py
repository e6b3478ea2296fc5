"""Monotone-structure checks for the learned/solved game.

Verifies, by exhaustive enumeration over the finite grids, the chain of
facts behind "larger state implies larger equilibrium power":

* the channel ratio bound ``epsilon_max`` over all gain/action tuples;
* the value-gap ratio condition that, together with the action-product
  inequality, is sufficient for strict supermodularity;
* strict supermodularity of a Q-table via the four-point inequality on
  (state block) x (action block) crossed pairs;
* strict monotonicity of per-state equilibrium strategies, summarized
  both by expected action and by the max-probability action.

The reward cancellation check evaluates its alternating sum in exact
rational arithmetic over the stored float parameters, so "equals zero"
is meaningful rather than a round-off accident.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .game import GameSpec, enumerate_states, reward_attacker

__all__ = [
    "LatticePoint",
    "EpsilonReport",
    "MonotoneConditionReport",
    "MonotoneReport",
    "epsilon_max",
    "check_supermodular",
    "game_q_lattice",
    "check_q_supermodular",
    "gain_averaged_values",
    "check_monotone_sufficient_condition",
    "check_monotone_policy",
    "reward_cancellation_residual",
    "continuation_difference_positive",
    "structure_report",
    "render_report",
]


@dataclass(frozen=True)
class LatticePoint:
    """State coordinates joined with a joint action, componentwise ordered.

    One point strictly dominates another only when every coordinate
    (holding time, both gains, both actions) is strictly larger; join and
    meet are componentwise max and min.
    """

    tau: int
    g_s: float
    g_a: float
    a: float
    b: float

    def coords(self) -> tuple:
        return (self.tau, self.g_s, self.g_a, self.a, self.b)

    def dominates(self, other: "LatticePoint") -> bool:
        return all(x > y for x, y in zip(self.coords(), other.coords()))

    def join(self, other: "LatticePoint") -> "LatticePoint":
        return LatticePoint(*(max(x, y) for x, y in zip(self.coords(), other.coords())))

    def meet(self, other: "LatticePoint") -> "LatticePoint":
        return LatticePoint(*(min(x, y) for x, y in zip(self.coords(), other.coords())))


@dataclass(frozen=True, eq=False)
class EpsilonReport:
    """Channel ratio bound over every gain/action tuple.

    ``epsilon_values`` maps ``(g_s, g_a, g_s', g_a', a+, a-, b+, b-)`` to
    the ratio of arrival-probability increments weighted by the stationary
    masses; ``excluded`` lists tuples whose denominator vanished.
    ``condition_holds`` states whether every arrival-probability increment
    was strictly positive (the premise under which the bound is usable);
    ``witness`` is the first offending tuple otherwise.
    """

    epsilon_values: dict
    epsilon_max: float
    condition_holds: bool
    witness: tuple = None
    excluded: tuple = ()


@dataclass(frozen=True, eq=False)
class MonotoneConditionReport:
    """Value-gap ratio condition per holding time plus the action product."""

    ratios: dict  # m -> ratio or None when undefined
    holds: dict  # m -> bool
    undefined: tuple
    action_product_ok: bool
    epsilon_max: float
    threshold_tau: int = None  # smallest m from which the condition holds onward

    @property
    def ok(self) -> bool:
        return self.action_product_ok and self.threshold_tau is not None


@dataclass(frozen=True, eq=False)
class MonotoneReport:
    """Strict-increase verdict for both players under both summaries."""

    expected_ok: bool
    expected_witnesses: tuple
    argmax_ok: bool
    argmax_witnesses: tuple

    @property
    def ok(self) -> bool:
        return self.expected_ok


def epsilon_max(spec: GameSpec) -> EpsilonReport:
    """Enumerate the ratio bound over all gain quadruples and action pairs.

    Each tuple compares the weighted arrival-probability increment at the
    lower state's gains against the higher state's. Tuples with a zero
    denominator are excluded from the max and reported.
    """
    if len(spec.actions_attacker) < 2 or len(spec.actions_sensor) < 2:
        raise ValueError("need at least two actions per player")
    gains = spec.channel.gains
    mu = spec.mu
    values = {}
    excluded = []
    cond = True
    witness = None
    pairs_a = [
        (hi, lo) for lo, hi in itertools.combinations(spec.actions_attacker, 2)
    ]
    pairs_b = [
        (hi, lo) for lo, hi in itertools.combinations(spec.actions_sensor, 2)
    ]

    def qdiff(apair, bpair, gs, ga):
        hi = spec.arrival_prob(apair[0], bpair[0], gs, ga)
        lo = spec.arrival_prob(apair[1], bpair[1], gs, ga)
        return hi - lo

    for (a_hi, a_lo), (b_hi, b_lo) in itertools.product(pairs_a, pairs_b):
        for gs, ga, gps, gpa in itertools.product(gains, repeat=4):
            num = (
                mu[gains.index(ga)]
                * mu[gains.index(gs)]
                * qdiff((a_hi, a_lo), (b_hi, b_lo), gs, ga)
            )
            den = (
                mu[gains.index(gpa)]
                * mu[gains.index(gps)]
                * qdiff((a_hi, a_lo), (b_hi, b_lo), gps, gpa)
            )
            key = (gs, ga, gps, gpa, a_hi, a_lo, b_hi, b_lo)
            if num <= 0 and cond:
                cond = False
                witness = key
            if den == 0.0:
                excluded.append(key)
                continue
            values[key] = float(num / den)
    if not values:
        raise ValueError("all denominators vanished; channel is degenerate")
    return EpsilonReport(
        epsilon_values=values,
        epsilon_max=max(values.values()),
        condition_holds=cond,
        witness=witness,
        excluded=tuple(excluded),
    )


# ---------------------------------------------------------------------------
# Supermodularity
# ---------------------------------------------------------------------------

def check_supermodular(table: np.ndarray, n_state_axes: int, strict: bool = True):
    """Four-point inequality over (state block) x (action block) crossings.

    Axes of ``table`` must be ordered coordinates, the first
    ``n_state_axes`` forming the state block and the rest the action
    block. For every pair of points with the state block strictly higher
    on one side and the action block strictly higher on the other,
    requires ``f(join) + f(meet) > f(x) + f(y)``. Returns ``(ok,
    witness)`` where the witness names the first violating pair.
    """
    table = np.asarray(table, dtype=float)
    ndim = table.ndim
    if not 0 < n_state_axes < ndim:
        raise ValueError("state block must be a proper prefix of the axes")
    state_ranges = [range(s) for s in table.shape[:n_state_axes]]
    act_ranges = [range(s) for s in table.shape[n_state_axes:]]
    for s_hi in itertools.product(*state_ranges):
        for s_lo in itertools.product(*state_ranges):
            if not all(h > l for h, l in zip(s_hi, s_lo)):
                continue
            for a_hi in itertools.product(*act_ranges):
                for a_lo in itertools.product(*act_ranges):
                    if not all(h > l for h, l in zip(a_hi, a_lo)):
                        continue
                    join = table[s_hi + a_hi]
                    meet = table[s_lo + a_lo]
                    x = table[s_hi + a_lo]
                    y = table[s_lo + a_hi]
                    lhs = join + meet
                    rhs = x + y
                    bad = lhs <= rhs if strict else lhs < rhs
                    if bad:
                        return False, (s_hi + a_lo, s_lo + a_hi, float(lhs - rhs))
    return True, None


def game_q_lattice(spec: GameSpec, q: np.ndarray, max_tau: int = None) -> np.ndarray:
    """Rearrange a ``(state, a, b)`` table onto ascending lattice axes.

    Output axes: (tau, sensor gain asc, attacker gain asc, attacker action
    asc, sensor action asc). State indexing stores gains descending, so the
    gain axes are flipped here. ``max_tau`` truncates the holding-time axis.
    """
    l = spec.channel.n_gains
    na = len(spec.actions_attacker)
    nb = len(spec.actions_sensor)
    out = q.reshape(spec.tau_max + 1, l, l, na, nb)
    if max_tau is not None:
        out = out[: max_tau + 1]
    return out[:, ::-1, ::-1, :, :]


def check_q_supermodular(spec: GameSpec, q: np.ndarray, exclude_cap: bool = True):
    """Supermodularity of a per-state Q-table on the game lattice.

    By default the saturated holding time ``tau_max`` is excluded: failures
    there stay in place instead of advancing, which breaks the four-point
    structure the sufficient condition speaks about (its ratio test only
    reaches ``m + 2 = tau_max``).
    """
    max_tau = spec.tau_max - 1 if exclude_cap else None
    return check_supermodular(game_q_lattice(spec, q, max_tau=max_tau), n_state_axes=3)


# ---------------------------------------------------------------------------
# Sufficient condition and policy monotonicity
# ---------------------------------------------------------------------------

def gain_averaged_values(spec: GameSpec, values: np.ndarray) -> np.ndarray:
    """Average per-state values over the stationary gain pair, per tau."""
    values = np.asarray(values, dtype=float)
    l = spec.channel.n_gains
    v = values.reshape(spec.tau_max + 1, l, l)
    w = np.outer(spec.mu[::-1], spec.mu[::-1])  # state gains run descending
    return np.einsum("tij,ij->t", v, w)


def check_monotone_sufficient_condition(
    spec: GameSpec, values: np.ndarray, eps: EpsilonReport
) -> MonotoneConditionReport:
    """Ratio and action-product sufficient condition for supermodularity.

    ``values`` are the sensor's per-state equilibrium values (their gaps
    ``v(0) - v(m)`` are positive; the ratio is identical for either player
    of the zero-sum game). The condition at holding time ``m`` compares
    ``(v(0) - v(m+2)) / (v(0) - v(m+1))`` against ``epsilon_max``; the
    report also records the smallest ``m`` from which it holds onward.
    """
    # Attacker values work equally: both gaps flip sign, the ratio does not.
    vbar = gain_averaged_values(spec, values)
    ratios = {}
    holds = {}
    undefined = []
    for m in range(spec.tau_max - 1):
        den = float(vbar[0] - vbar[m + 1])
        num = float(vbar[0] - vbar[m + 2])
        if den == 0.0:
            ratios[m] = None
            holds[m] = False
            undefined.append(m)
            continue
        ratios[m] = num / den
        holds[m] = bool(ratios[m] > eps.epsilon_max)
    product_ok = all(
        b_hi * a_lo >= b_lo * a_hi
        for a_lo, a_hi in itertools.combinations(spec.actions_attacker, 2)
        for b_lo, b_hi in itertools.combinations(spec.actions_sensor, 2)
    )
    threshold = None
    for m in sorted(holds):
        if all(holds[k] for k in holds if k >= m):
            threshold = m
            break
    return MonotoneConditionReport(
        ratios=ratios,
        holds=holds,
        undefined=tuple(undefined),
        action_product_ok=product_ok,
        epsilon_max=eps.epsilon_max,
        threshold_tau=threshold,
    )


def _comparable(s1, s2) -> bool:
    # State-block restriction of the LatticePoint order.
    return s1.tau > s2.tau and s1.g_s > s2.g_s and s1.g_a > s2.g_a


def check_monotone_policy(
    spec: GameSpec, policies, min_tau: int = 0
) -> MonotoneReport:
    """Strictly increasing strategies across all comparable state pairs.

    A state dominates another when every coordinate (tau and both gains)
    is strictly larger. Each player's mixed strategy is summarized two
    ways: expected action and max-probability action; the check requires
    the summary of the dominating state to be strictly larger (argmax
    summary: at least as large, strictly in tau-spanning chains is not
    enforced -- ties are reported as witnesses). Pairs below ``min_tau``
    are skipped.
    """
    states = enumerate_states(spec)
    acts_a = np.array(spec.actions_attacker)
    acts_b = np.array(spec.actions_sensor)
    exp_a = np.array([float(p.strat_p1.probs @ acts_a) for p in policies])
    exp_b = np.array([float(p.strat_p2.probs @ acts_b) for p in policies])
    arg_a = np.array([acts_a[int(np.argmax(p.strat_p1.probs))] for p in policies])
    arg_b = np.array([acts_b[int(np.argmax(p.strat_p2.probs))] for p in policies])
    exp_wit = []
    arg_wit = []
    for i, hi in enumerate(states):
        if hi.tau < min_tau:
            continue
        for j, lo in enumerate(states):
            if lo.tau < min_tau or not _comparable(hi, lo):
                continue
            if not (exp_a[i] > exp_a[j] and exp_b[i] > exp_b[j]):
                exp_wit.append((i, j))
            if not (arg_a[i] >= arg_a[j] and arg_b[i] >= arg_b[j]):
                arg_wit.append((i, j))
    return MonotoneReport(
        expected_ok=not exp_wit,
        expected_witnesses=tuple(exp_wit),
        argmax_ok=not arg_wit,
        argmax_witnesses=tuple(arg_wit),
    )


# ---------------------------------------------------------------------------
# Reward-difference identities
# ---------------------------------------------------------------------------

def reward_cancellation_residual(spec: GameSpec):
    """Alternating reward sum over (m, m+1) x (low, high) action pairs.

    Returns ``(exact_zero, float_max_abs)``. The first flag evaluates the
    sum in exact rational arithmetic over the stored float parameters --
    the cancellation is algebraic for the separable reward, so a nonzero
    there means the reward form itself is broken. The second is the worst
    residue of the same sum over ``reward_attacker``'s float outputs.
    """
    tt = [Fraction(t) for t in spec.steady.trace_table]
    a_s = Fraction(spec.alpha_s)
    a_a = Fraction(spec.alpha_a)

    def r_exact(m, a, b):
        return tt[m] + a_s * Fraction(b) - a_a * Fraction(a)

    worst = 0.0
    exact = True
    for m in range(spec.tau_max):
        for a_lo, a_hi in itertools.combinations(spec.actions_attacker, 2):
            for b_lo, b_hi in itertools.combinations(spec.actions_sensor, 2):
                d_exact = (
                    r_exact(m + 1, a_hi, b_hi)
                    + r_exact(m, a_lo, b_lo)
                    - r_exact(m + 1, a_lo, b_lo)
                    - r_exact(m, a_hi, b_hi)
                )
                if d_exact != 0:
                    exact = False
                d_float = (
                    reward_attacker(spec, m + 1, a_hi, b_hi)
                    + reward_attacker(spec, m, a_lo, b_lo)
                    - reward_attacker(spec, m + 1, a_lo, b_lo)
                    - reward_attacker(spec, m, a_hi, b_hi)
                )
                worst = max(worst, abs(d_float))
    return exact, worst


def continuation_difference_positive(spec: GameSpec, values: np.ndarray):
    """Continuation-difference positivity over every enumerated tuple.

    ``values`` are the sensor's per-state values. For each holding time
    and tuple of gains/actions, assembles the weighted difference of
    arrival-probability increments against the value gaps and requires it
    to be strictly positive. Returns ``(ok, witness)``.
    """
    vbar = gain_averaged_values(spec, values)
    gains = spec.channel.gains
    mu = spec.mu
    ok = True
    witness = None
    for m in range(spec.tau_max - 1):
        gap1 = vbar[0] - vbar[m + 1]
        gap2 = vbar[0] - vbar[m + 2]
        for a_lo, a_hi in itertools.combinations(spec.actions_attacker, 2):
            for b_lo, b_hi in itertools.combinations(spec.actions_sensor, 2):
                for gs, ga, gps, gpa in itertools.product(gains, repeat=4):
                    d = spec.arrival_prob(a_hi, b_hi, gs, ga) - spec.arrival_prob(
                        a_lo, b_lo, gs, ga
                    )
                    dp = spec.arrival_prob(a_hi, b_hi, gps, gpa) - spec.arrival_prob(
                        a_lo, b_lo, gps, gpa
                    )
                    u = mu[gains.index(gs)] * mu[gains.index(ga)]
                    up = mu[gains.index(gps)] * mu[gains.index(gpa)]
                    val = up * dp * gap2 - u * d * gap1
                    if val <= 0:
                        return False, (m, gs, ga, gps, gpa, a_hi, a_lo, b_hi, b_lo, val)
    return ok, witness


# ---------------------------------------------------------------------------
# Aggregate report
# ---------------------------------------------------------------------------

def structure_report(spec: GameSpec, oracle) -> dict:
    """Full pipeline: ratio bound, sufficient condition, supermodularity,
    policy monotonicity and the reward cancellation, as one JSON-ready dict.

    ``oracle`` is a ``ValueIterationResult``; the sensor's table and values
    are the ones whose gaps are positive, so they drive the checks.
    """
    eps = epsilon_max(spec)
    v2 = np.array([p.value_p2 for p in oracle.policies])
    t3 = check_monotone_sufficient_condition(spec, v2, eps)
    sup_ok, sup_wit = check_q_supermodular(spec, oracle.tables.q2)
    min_tau = t3.threshold_tau if t3.threshold_tau is not None else 0
    mono = check_monotone_policy(spec, oracle.policies, min_tau=min_tau)
    d1_exact, d1_float = reward_cancellation_residual(spec)
    d2_ok, d2_wit = continuation_difference_positive(spec, v2)
    return {
        "epsilon_max": eps.epsilon_max,
        "epsilon_condition_holds": eps.condition_holds,
        "epsilon_excluded_tuples": len(eps.excluded),
        "ratio_per_holding_time": {str(m): t3.ratios[m] for m in t3.ratios},
        "ratio_holds": {str(m): t3.holds[m] for m in t3.holds},
        "ratio_undefined": list(t3.undefined),
        "action_product_ok": t3.action_product_ok,
        "threshold_tau": t3.threshold_tau,
        "supermodular_sensor_q": sup_ok,
        "supermodular_witness": list(map(list, sup_wit[:2])) if sup_wit else None,
        "monotone_expected_action": mono.expected_ok,
        "monotone_argmax_action": mono.argmax_ok,
        "monotone_witnesses": [list(w) for w in mono.expected_witnesses[:10]],
        "reward_cancellation_exact": d1_exact,
        "reward_cancellation_float_residue": d1_float,
        "continuation_difference_positive": d2_ok,
    }


def render_report(report: dict) -> str:
    lines = [
        f"epsilon_max: {report['epsilon_max']:.6f} "
        f"(increments positive: {report['epsilon_condition_holds']})",
        f"action product condition: {report['action_product_ok']}",
        f"threshold tau: {report['threshold_tau']}",
    ]
    for m in sorted(report["ratio_per_holding_time"], key=int):
        r = report["ratio_per_holding_time"][m]
        shown = "undefined" if r is None else f"{r:.6f}"
        lines.append(f"  gap ratio at m={m}: {shown} -> {report['ratio_holds'][m]}")
    lines += [
        f"sensor Q supermodular: {report['supermodular_sensor_q']}",
        f"policies strictly increasing (expected action): "
        f"{report['monotone_expected_action']}",
        f"policies increasing (argmax action): {report['monotone_argmax_action']}",
        f"reward cancellation exact: {report['reward_cancellation_exact']} "
        f"(float residue {report['reward_cancellation_float_residue']:.3g})",
        f"continuation difference positive: {report['continuation_difference_positive']}",
    ]
    return "\n".join(lines)


def report_to_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True)
