"""Bimatrix stage-game solvers with deviation-gap certification.

Three routes are provided and cross-checked in the test suite:

* ``lemke_howson`` -- complementary pivoting on the two best-response
  polytopes, with lexicographic tie-breaking and a pivot budget;
* ``zero_sum_value`` -- the maximin/minimax linear programs (HiGHS);
* ``support_enumeration`` -- exhaustive support pairs for desk-scale
  games, used as the independent oracle.

Every result is certified against the *original* payoff matrices via
``deviation_gap``; tolerances are centralized below.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

__all__ = [
    "StageGame",
    "MixedStrategy",
    "EquilibriumResult",
    "PivotLimitError",
    "deviation_gap",
    "lemke_howson",
    "zero_sum_value",
    "support_enumeration",
    "solve_stage",
    "read_stage_game",
]

# Strategy vectors must sum to 1 within this.
NORM_TOL = 1e-12
# A certified equilibrium has deviation gap at most this.
CERT_TOL = 1e-8
# Solver cross-checks (Lemke-Howson vs LP vs enumeration) agree within this.
VALUE_TOL = 1e-7
# Two payoff matrices are treated as exact negations within this.
ZERO_SUM_TOL = 1e-9

# 1e-10 is the tightest feasibility tolerance HiGHS accepts; the support
# polish in zero_sum_value takes the certificate the rest of the way.
_LP_OPTIONS = {
    "presolve": True,
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
}


class PivotLimitError(RuntimeError):
    """Lemke-Howson exceeded its pivot budget (degenerate or cycling game)."""


@dataclass(frozen=True, eq=False)
class StageGame:
    """One-shot bimatrix game; ``payoff_p1`` rows, ``payoff_p2`` columns."""

    payoff_p1: np.ndarray
    payoff_p2: np.ndarray

    def __post_init__(self):
        a = np.array(self.payoff_p1, dtype=float)
        b = np.array(self.payoff_p2, dtype=float)
        if a.ndim != 2 or a.shape != b.shape:
            raise ValueError(f"payoff matrices must share a 2-D shape, got {a.shape} vs {b.shape}")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("payoff matrices must be finite")
        a.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "payoff_p1", a)
        object.__setattr__(self, "payoff_p2", b)

    @property
    def shape(self):
        return self.payoff_p1.shape

    @property
    def zero_sum(self) -> bool:
        return float(np.abs(self.payoff_p1 + self.payoff_p2).max()) <= ZERO_SUM_TOL


@dataclass(frozen=True, eq=False)
class MixedStrategy:
    """Probability vector over one player's actions."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 1:
            raise ValueError("strategy must be a vector")
        if p.min() < -NORM_TOL:
            raise ValueError("strategy has a negative entry")
        if abs(p.sum() - 1.0) > NORM_TOL:
            raise ValueError(f"strategy sums to {p.sum()}, not 1")
        p = np.clip(p, 0.0, None)
        p.flags.writeable = False
        object.__setattr__(self, "probs", p)


@dataclass(frozen=True, eq=False)
class EquilibriumResult:
    """Certified strategy pair with per-player values and deviation gap."""

    strat_p1: MixedStrategy
    strat_p2: MixedStrategy
    value_p1: float
    value_p2: float
    deviation_gap: float


def deviation_gap(game: StageGame, s1, s2) -> float:
    """Largest unilateral pure-deviation improvement over the given mix pair.

    Zero (within tolerance) if and only if the pair is a Nash equilibrium.
    """
    x = s1.probs if isinstance(s1, MixedStrategy) else np.asarray(s1, dtype=float)
    y = s2.probs if isinstance(s2, MixedStrategy) else np.asarray(s2, dtype=float)
    m, n = game.shape
    if x.shape != (m,) or y.shape != (n,):
        raise ValueError("strategy dimensions do not match the game")
    payoff1 = game.payoff_p1 @ y
    payoff2 = x @ game.payoff_p2
    v1 = float(x @ payoff1)
    v2 = float(payoff2 @ y)
    gap1 = float(payoff1.max()) - v1
    gap2 = float(payoff2.max()) - v2
    return max(gap1, gap2, 0.0)


def _result(game: StageGame, x: np.ndarray, y: np.ndarray) -> EquilibriumResult:
    x = np.clip(x, 0.0, None)
    y = np.clip(y, 0.0, None)
    x = x / x.sum()
    y = y / y.sum()
    s1 = MixedStrategy(x)
    s2 = MixedStrategy(y)
    v1 = float(x @ game.payoff_p1 @ y)
    v2 = float(x @ game.payoff_p2 @ y)
    return EquilibriumResult(s1, s2, v1, v2, deviation_gap(game, s1, s2))


# ---------------------------------------------------------------------------
# Lemke-Howson
# ---------------------------------------------------------------------------

def _lex_min_ratio(tableau: np.ndarray, col: int, id_cols) -> int:
    """Row of the lexicographic minimum ratio for the entering column.

    Compares (rhs, identity-history columns) componentwise, all divided by
    the pivot entry; this is the standard anti-cycling rule.
    """
    rows = np.nonzero(tableau[:, col] > 1e-12)[0]
    if rows.size == 0:
        raise PivotLimitError("entering column has no positive entry (unbounded ray)")
    best = None
    best_key = None
    cols = [tableau.shape[1] - 1] + list(id_cols)
    for r in rows:
        piv = tableau[r, col]
        key = tuple(tableau[r, c] / piv for c in cols)
        if best is None or key < best_key:
            best, best_key = int(r), key
    return best


def _pivot(tableau: np.ndarray, row: int, col: int) -> None:
    tableau[row] /= tableau[row, col]
    for r in range(tableau.shape[0]):
        if r != row and tableau[r, col] != 0.0:
            tableau[r] -= tableau[r, col] * tableau[row]


def lemke_howson(game: StageGame, initial_label: int = 0) -> EquilibriumResult:
    """Find one Nash equilibrium by complementary pivoting.

    ``initial_label`` is the label dropped first: ``0..m-1`` are row
    actions, ``m..m+n-1`` column actions. The payoffs are shifted to be
    positive internally; the certificate is computed on the originals.
    Raises ``PivotLimitError`` past ``10 (m+n)^2`` pivots; callers fall
    back to ``support_enumeration`` or ``zero_sum_value``.
    """
    m, n = game.shape
    if not 0 <= initial_label < m + n:
        raise ValueError(f"initial_label must be in [0, {m + n})")
    shift = min(float(game.payoff_p1.min()), float(game.payoff_p2.min()))
    a = game.payoff_p1 - shift + 1.0  # strictly positive
    b = game.payoff_p2 - shift + 1.0

    # Tableau X: n rows for B' x + s = 1; columns [x_0..x_{m-1}, s_0..s_{n-1}, 1].
    # Tableau Y: m rows for r + A y = 1; columns [r_0..r_{m-1}, y_0..y_{n-1}, 1].
    # In both, the variable carrying label L sits in column L.
    tab_x = np.hstack([b.T, np.eye(n), np.ones((n, 1))])
    tab_y = np.hstack([np.eye(m), a, np.ones((m, 1))])
    basis_x = [m + j for j in range(n)]
    basis_y = list(range(m))
    id_x = list(range(m, m + n))
    id_y = list(range(m))

    budget = 10 * (m + n) ** 2
    label = initial_label
    in_x = initial_label < m  # x_k enters tableau X, y_k enters tableau Y
    for _ in range(budget):
        if in_x:
            row = _lex_min_ratio(tab_x, label, id_x)
            leaving = basis_x[row]
            _pivot(tab_x, row, label)
            basis_x[row] = label
        else:
            row = _lex_min_ratio(tab_y, label, id_y)
            leaving = basis_y[row]
            _pivot(tab_y, row, label)
            basis_y[row] = label
        if leaving == initial_label:
            break
        label = leaving
        in_x = not in_x
    else:
        raise PivotLimitError(f"no equilibrium within {budget} pivots")

    x = np.zeros(m)
    for row, lab in enumerate(basis_x):
        if lab < m:
            x[lab] = tab_x[row, -1]
    y = np.zeros(n)
    for row, lab in enumerate(basis_y):
        if lab >= m:
            y[lab - m] = tab_y[row, -1]
    if x.sum() <= 0 or y.sum() <= 0:
        raise PivotLimitError("pivoting terminated at the artificial equilibrium")
    return _result(game, x, y)


# ---------------------------------------------------------------------------
# Zero-sum linear programming
# ---------------------------------------------------------------------------

def _maximin_lp(a: np.ndarray) -> tuple:
    """Row player's maximin mix and value for payoff matrix ``a``."""
    m, n = a.shape
    # Variables (x_1..x_m, v): maximize v s.t. A' x >= v, sum x = 1, x >= 0.
    c = np.zeros(m + 1)
    c[-1] = -1.0
    a_ub = np.hstack([-a.T, np.ones((n, 1))])
    b_ub = np.zeros(n)
    a_eq = np.zeros((1, m + 1))
    a_eq[0, :m] = 1.0
    bounds = [(0, None)] * m + [(None, None)]
    res = linprog(
        c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0], bounds=bounds,
        method="highs", options=_LP_OPTIONS,
    )
    if not res.success:
        raise RuntimeError(f"maximin LP failed: {res.message}")
    return res.x[:m], float(res.x[-1])


def _polish_support(a: np.ndarray, x: np.ndarray, y: np.ndarray):
    """Refine an LP solution to machine precision via its support system.

    Solves the indifference equations restricted to the LP supports; falls
    back to the raw LP point when the system is singular or leaves the
    simplex.
    """
    sup_x = np.nonzero(x > 1e-9)[0]
    sup_y = np.nonzero(y > 1e-9)[0]
    if sup_x.size != sup_y.size:
        return x, y
    k = sup_x.size
    sub = a[np.ix_(sup_x, sup_y)]
    try:
        # Row mix equalizes column payoffs on the support: x' sub = v 1'.
        lhs = np.zeros((k + 1, k + 1))
        lhs[:k, :k] = sub.T
        lhs[:k, k] = -1.0
        lhs[k, :k] = 1.0
        rhs = np.zeros(k + 1)
        rhs[k] = 1.0
        solx = np.linalg.solve(lhs, rhs)
        lhs2 = np.zeros((k + 1, k + 1))
        lhs2[:k, :k] = sub
        lhs2[:k, k] = -1.0
        lhs2[k, :k] = 1.0
        soly = np.linalg.solve(lhs2, rhs)
    except np.linalg.LinAlgError:
        return x, y
    if solx[:k].min() < -1e-12 or soly[:k].min() < -1e-12:
        return x, y
    xr = np.zeros_like(x)
    yr = np.zeros_like(y)
    xr[sup_x] = np.clip(solx[:k], 0.0, None)
    yr[sup_y] = np.clip(soly[:k], 0.0, None)
    return xr / xr.sum(), yr / yr.sum()


def zero_sum_value(game: StageGame) -> EquilibriumResult:
    """Solve a zero-sum game by linear programming, certified.

    The row player's maximin LP and the column player's minimax LP are
    solved on ``payoff_p1``; the supports are then polished by a direct
    linear solve so the certificate holds at 1e-8.
    """
    if not game.zero_sum:
        raise ValueError("zero_sum_value requires payoff_p1 + payoff_p2 = 0")
    a = game.payoff_p1
    x, _ = _maximin_lp(a)
    # Column player maximizes its own payoff -a', i.e. minimaxes a.
    y, _ = _maximin_lp(-a.T)
    x, y = _polish_support(a, x, y)
    res = _result(game, x, y)
    if res.deviation_gap > CERT_TOL:
        raise RuntimeError(
            f"LP equilibrium failed certification (gap {res.deviation_gap})"
        )
    return res


# ---------------------------------------------------------------------------
# Support enumeration (oracle)
# ---------------------------------------------------------------------------

def support_enumeration(game: StageGame) -> list:
    """All equilibria of a small game by support-pair enumeration.

    Enumerates equal-size support pairs, solves each indifference system,
    keeps solutions that stay in the simplex and admit no profitable
    outside action. Exponential; restricted to matrices up to 5x5.
    """
    m, n = game.shape
    if m > 5 or n > 5:
        raise ValueError("support enumeration is limited to 5x5 games")
    a, b = game.payoff_p1, game.payoff_p2
    found = []
    seen = set()
    for k in range(1, min(m, n) + 1):
        for sup_x in itertools.combinations(range(m), k):
            for sup_y in itertools.combinations(range(n), k):
                sol = _support_solve(a, b, np.array(sup_x), np.array(sup_y))
                if sol is None:
                    continue
                x, y = sol
                res = _result(game, x, y)
                if res.deviation_gap > CERT_TOL:
                    continue
                key = (tuple(np.round(res.strat_p1.probs, 9)),
                       tuple(np.round(res.strat_p2.probs, 9)))
                if key not in seen:
                    seen.add(key)
                    found.append(res)
    return found


def _support_solve(a, b, sup_x, sup_y):
    k = sup_x.size
    # y on sup_y equalizing the row payoffs over sup_x, and vice versa.
    try:
        lhs_y = np.zeros((k + 1, k + 1))
        lhs_y[:k, :k] = a[np.ix_(sup_x, sup_y)]
        lhs_y[:k, k] = -1.0
        lhs_y[k, :k] = 1.0
        rhs = np.zeros(k + 1)
        rhs[k] = 1.0
        sol_y = np.linalg.solve(lhs_y, rhs)
        lhs_x = np.zeros((k + 1, k + 1))
        lhs_x[:k, :k] = b[np.ix_(sup_x, sup_y)].T
        lhs_x[:k, k] = -1.0
        lhs_x[k, :k] = 1.0
        sol_x = np.linalg.solve(lhs_x, rhs)
    except np.linalg.LinAlgError:
        return None
    y_s, u = sol_y[:k], sol_y[k]
    x_s, v = sol_x[:k], sol_x[k]
    if y_s.min() < -1e-9 or x_s.min() < -1e-9:
        return None
    x = np.zeros(a.shape[0])
    y = np.zeros(a.shape[1])
    x[sup_x] = np.clip(x_s, 0.0, None)
    y[sup_y] = np.clip(y_s, 0.0, None)
    # No action outside the support may beat the support payoff.
    if (a @ y).max() > u + 1e-9 or (x @ b).max() > v + 1e-9:
        return None
    return x, y


# ---------------------------------------------------------------------------
# Dispatcher
# ---------------------------------------------------------------------------

def solve_stage(game: StageGame) -> EquilibriumResult:
    """One certified equilibrium, deterministically selected.

    Zero-sum games go through the LP route. Otherwise Lemke-Howson runs
    are tried at increasing initial labels and the first certified result
    wins; support enumeration is the last resort for small games.
    """
    if game.zero_sum:
        return zero_sum_value(game)
    m, n = game.shape
    for label in range(m + n):
        try:
            res = lemke_howson(game, label)
        except PivotLimitError:
            continue
        if res.deviation_gap <= CERT_TOL:
            return res
    results = support_enumeration(game)
    if results:
        return results[0]
    raise RuntimeError("no certified equilibrium found")


def read_stage_game(path) -> StageGame:
    """Read two whitespace-separated matrices (blank-line delimited blocks).

    A file with a single block is interpreted as a zero-sum game.
    """
    with open(path) as fh:
        text = fh.read()
    blocks = [blk for blk in text.split("\n\n") if blk.strip()]
    if len(blocks) not in (1, 2):
        raise ValueError(f"expected 1 or 2 matrix blocks, found {len(blocks)}")
    mats = []
    for blk in blocks:
        rows = [
            [float(tok) for tok in line.split()]
            for line in blk.strip().splitlines()
            if line.strip()
        ]
        widths = {len(r) for r in rows}
        if len(widths) != 1:
            raise ValueError("ragged matrix block")
        mats.append(np.array(rows))
    if len(mats) == 1:
        mats.append(-mats[0])
    return StageGame(payoff_p1=mats[0], payoff_p2=mats[1])
