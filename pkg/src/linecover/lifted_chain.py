"""The dynamic control law: a lifted, nonreversible chain plus token moves.

Each of the n agents keeps two mass variables, z_i and z_i'. Stacked as a
row vector z = (z_1..z_n, z_1'..z_n'), they evolve by z(t+1) = z(t) K where
K is a 2n-state row-stochastic matrix over a directed 2n-cycle: unprimed
states flow rightward (i -> i+1), primed states leftward (i' -> (i-1)'),
with turnarounds 1' -> 1 and n -> n'. Each node continues along the cycle
with high probability and takes a low-probability (1/U) "switching" edge to
the mirrored track, which jumps the cycle position by an even amount; U is
the agents' estimate of n. The guided motion mixes in O(n) rounds instead
of the O(n^2) of a diffusive walk, which is the whole point of the lift.

Two variants are provided:

* ``figure2``: interior nodes carry an extra self-loop of probability 1/2
  (continuing 1/2 (1 - 1/U), switching 1/(2U)); boundary nodes 1, 1', n, n'
  have no half self-loop (continuing 1 - 1/U, switching 1/U, where the
  switching edges at 1' and n are self-loops). Its stationary vector puts
  half as much mass on the four boundary states as on each interior state.
* ``uniformized``: no half self-loops anywhere; every node continues with
  1 - 1/U and switches with 1/U. Its stationary vector is exactly uniform,
  so the mass pair sums agents read off in the limit reproduce the balanced
  optimal configuration.

Movement is token-passing: at round t agent j = ((t-1) mod U) + 1 (if
j <= n) moves so that the mass between its left neighbor and itself equals
its current mass target, and drags along any agent it overtakes. The
target is z_j + z_j' under the ``pair`` rule and z_{(j-1)'} + z_j under the
``split`` rule; only the latter has the optimal configuration as its fixed
point under the uniformized chain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .density import DensityField, check_positions, coverage, optimal_configuration
from .errors import DomainError, NumericError
from .trace import ExperimentTrace, StopRule, TraceRow

VARIANTS = ("figure2", "uniformized")
MOVEMENT_RULES = ("pair", "split")

_ZSUM_GUARD = 1e-9   # internal relative drift guard on the conserved mass


@dataclass(frozen=True)
class LiftedChain:
    """Immutable 2n-state transition matrix with its parameters."""

    n: int
    big_u: int
    variant: str
    K: np.ndarray

    @property
    def size(self) -> int:
        return 2 * self.n


@dataclass
class DynamicState:
    """Mutable per-run state: chain, mass variables, positions, round."""

    chain: LiftedChain
    z: np.ndarray
    positions: np.ndarray
    round_index: int = 0
    movement_rule: str = "split"

    @property
    def n(self) -> int:
        return self.chain.n

    @property
    def zsum(self) -> float:
        return float(np.sum(self.z))


# ----------------------------------------------------------------------
# chain construction and diagnostics
# ----------------------------------------------------------------------

def _strongly_connected(K: np.ndarray) -> bool:
    support = K > 0.0
    m = K.shape[0]
    for adj in (support, support.T):
        seen = np.zeros(m, dtype=bool)
        seen[0] = True
        frontier = [0]
        while frontier:
            nxt = adj[frontier].any(axis=0) & ~seen
            seen |= nxt
            frontier = np.nonzero(nxt)[0].tolist()
        if not seen.all():
            return False
    return True


def build_chain(n: int, big_u: int, variant: str = "uniformized") -> LiftedChain:
    """Build the 2n-state chain for n agents and round-trip estimate U."""
    if n < 3:
        raise DomainError("the dynamic law needs at least 3 agents")
    if big_u < 3:
        raise DomainError("the round-trip estimate U must be at least 3")
    if variant not in VARIANTS:
        raise DomainError(f"variant must be one of {VARIANTS}")

    u = float(big_u)
    cont = 1.0 - 1.0 / u
    switch = 1.0 / u
    up = lambda i: i - 1          # 1-based agent -> unprimed state index
    pr = lambda i: n + i - 1      # 1-based agent -> primed state index

    K = np.zeros((2 * n, 2 * n))
    for i in range(2, n):
        if variant == "figure2":
            K[up(i), up(i)] = 0.5
            K[up(i), up(i + 1)] = 0.5 * cont
            K[up(i), pr(i + 1)] = 0.5 * switch
            K[pr(i), pr(i)] = 0.5
            K[pr(i), pr(i - 1)] = 0.5 * cont
            K[pr(i), up(i - 1)] = 0.5 * switch
        else:
            K[up(i), up(i + 1)] = cont
            K[up(i), pr(i + 1)] = switch
            K[pr(i), pr(i - 1)] = cont
            K[pr(i), up(i - 1)] = switch
    # Boundary nodes are identical in both variants; the switching edges at
    # 1' and n are self-loops (the mirrored jump lands on the node itself).
    K[up(1), up(2)] = cont
    K[up(1), pr(2)] = switch
    K[pr(1), up(1)] = cont
    K[pr(1), pr(1)] = switch
    K[up(n), pr(n)] = cont
    K[up(n), up(n)] = switch
    K[pr(n), pr(n - 1)] = cont
    K[pr(n), up(n - 1)] = switch

    row_err = float(np.max(np.abs(K.sum(axis=1) - 1.0)))
    if row_err > 1e-14:
        raise NumericError(f"rows of K do not sum to 1 (max error {row_err:.2e})")
    if not _strongly_connected(K):
        raise NumericError("chain support graph is not irreducible")
    return LiftedChain(n=n, big_u=big_u, variant=variant, K=K)


def stationary(chain: LiftedChain, tol: float = 1e-15,
               max_iterations: int = 2_000_000) -> np.ndarray:
    """Stationary probability vector, by power iteration on pi <- pi K."""
    pi = np.full(chain.size, 1.0 / chain.size)
    for _ in range(max_iterations):
        nxt = pi @ chain.K
        nxt /= nxt.sum()
        if float(np.abs(nxt - pi).sum()) <= tol:
            return nxt
        pi = nxt
    raise NumericError("power iteration for the stationary vector did not converge")


def mixing_profile(chain: LiftedChain, eps: float,
                   max_rounds: int | None = None) -> tuple[int, list[float]]:
    """Worst-row total-variation curve and the settling time below eps.

    Returns (t_mix, vcurve) where vcurve[t] = max_i ||(K^t)_i - pi||_1 and
    t_mix is the first t from which the curve stays below eps for 2n
    consecutive rounds (the monitored window; the curve is not monotone).
    """
    if not 0.0 < eps < 1.0:
        raise DomainError("eps must lie in (0, 1)")
    pi = stationary(chain)
    window = chain.size
    cap = max_rounds if max_rounds is not None else 2000 + 600 * chain.n
    powers = np.eye(chain.size)
    vcurve = [float(np.max(np.abs(powers - pi).sum(axis=1)))]
    streak_start, streak = 0, (1 if vcurve[0] < eps else 0)
    for t in range(1, cap + 1):
        powers = powers @ chain.K
        v = float(np.max(np.abs(powers - pi).sum(axis=1)))
        vcurve.append(v)
        if v < eps:
            if streak == 0:
                streak_start = t
            streak += 1
            if streak >= window:
                return streak_start, vcurve
        else:
            streak = 0
    raise NumericError(f"mixing curve did not settle below {eps} within {cap} rounds")


def spreading_min(chain: LiftedChain) -> float:
    """Smallest entry of K^(4n): the worst-case 4n-round transition mass."""
    return float(np.min(np.linalg.matrix_power(chain.K, 4 * chain.n)))


# ----------------------------------------------------------------------
# state initialization and round updates
# ----------------------------------------------------------------------

def init_z(field: DensityField, positions) -> np.ndarray:
    """Initial mass variables: half of each agent's cell mass, mirrored.

    Cell boundaries sit at the 1-medians of adjacent agents (outer
    boundaries 0 and 1); z_i(0) = z_i'(0) = half the cell mass, so the
    variables sum to F(1) exactly up to roundoff. Initial positions must be
    distinct for the cells to be well defined; later coincidences created
    by pushing are fine because initialization runs once.
    """
    x = check_positions(positions, n_min=3)
    if np.any(np.diff(x) <= 0.0):
        raise DomainError("initial positions must be distinct for cell setup")
    n = x.size
    bounds = np.empty(n + 1)
    bounds[0], bounds[-1] = 0.0, 1.0
    for i in range(n - 1):
        bounds[i + 1] = field.alpha_median(x[i], x[i + 1], 1.0)
    half = np.diff(field.cdf(bounds)) / 2.0
    z = np.concatenate([half, half])
    total = field.total_mass
    if abs(float(z.sum()) - total) > 1e-12 * max(1.0, total):
        raise NumericError("initial mass variables do not sum to F(1)")
    return z


def initialize_state(field: DensityField, positions, *, big_u: int | None = None,
                     variant: str = "uniformized",
                     movement_rule: str = "split") -> DynamicState:
    """Build a fresh run state; U defaults to the true agent count."""
    if movement_rule not in MOVEMENT_RULES:
        raise DomainError(f"movement rule must be one of {MOVEMENT_RULES}")
    x = check_positions(positions, n_min=3)
    n = x.size
    chain = build_chain(n, big_u if big_u is not None else n, variant)
    return DynamicState(chain=chain, z=init_z(field, x), positions=x.copy(),
                        movement_rule=movement_rule)


def chain_step(state: DynamicState) -> DynamicState:
    """Advance the mass variables one communication round: z <- z K."""
    state.z = state.z @ state.chain.K
    state.round_index += 1
    return state


def token_index(t: int, big_u: int) -> int:
    """Index of the agent holding the movement token at round t >= 1."""
    return (t - 1) % big_u + 1


def movement_step(field: DensityField, state: DynamicState) -> DynamicState:
    """Move the token holder (if any) and push overtaken agents along.

    Agent j moves to c with F(c) = min(F(1), F(x_{j-1}) + M_j), where M_j
    is z_j + z_j' (pair rule) or z_{(j-1)'} + z_j (split rule, z_0' = 0).
    Rounds whose token exceeds n are communication-only.
    """
    t = state.round_index
    if t < 1:
        raise DomainError("movement starts at round 1; advance the chain first")
    n = state.n
    j = token_index(t, state.chain.big_u)
    if j > n:
        return state
    if state.movement_rule == "pair":
        target_mass = float(state.z[j - 1] + state.z[n + j - 1])
    else:
        left_primed = float(state.z[n + j - 2]) if j >= 2 else 0.0
        target_mass = left_primed + float(state.z[j - 1])
    left = field._cdf_scalar(float(state.positions[j - 2])) if j >= 2 else 0.0
    c = field._inverse_scalar(min(field.total_mass, left + target_mass))
    if j >= 2 and c < state.positions[j - 2]:
        # the target mass is >= F(x_{j-1}), so c >= x_{j-1} holds exactly in
        # real arithmetic; guard the one-ulp inversion case
        c = float(state.positions[j - 2])
    state.positions[j - 1] = c
    tail = state.positions[j:]
    tail[tail < c] = c
    return state


def step_round(field: DensityField, state: DynamicState) -> DynamicState:
    """One full round: communication then movement."""
    chain_step(state)
    return movement_step(field, state)


# ----------------------------------------------------------------------
# agent churn
# ----------------------------------------------------------------------

def add_agent(state: DynamicState, x_new: float) -> DynamicState:
    """Insert an agent at x_new with zeroed variables (mass sum unchanged)."""
    if not 0.0 <= x_new <= 1.0:
        raise DomainError("new agent position must lie in [0, 1]")
    n = state.n
    idx = int(np.searchsorted(state.positions, x_new, side="right"))
    state.positions = np.insert(state.positions, idx, x_new)
    unprimed = np.insert(state.z[:n], idx, 0.0)
    primed = np.insert(state.z[n:], idx, 0.0)
    state.z = np.concatenate([unprimed, primed])
    state.chain = build_chain(n + 1, state.chain.big_u, state.chain.variant)
    return state


def remove_agent(state: DynamicState, i: int) -> DynamicState:
    """Delete agent i (1-based); its pair mass goes to the left neighbor.

    The left neighbor can reconstruct z_i + z_i' from geometry (agent i
    sits exactly that much mass to its right after moving), so handing the
    whole amount to its unprimed variable keeps the total at F(1). Agent 1
    hands its mass to the right neighbor instead.
    """
    n = state.n
    if n < 4:
        raise DomainError("removal would drop the agent count below 3")
    if not 1 <= i <= n:
        raise DomainError(f"agent index must be in 1..{n}")
    removed = float(state.z[i - 1] + state.z[n + i - 1])
    recipient = i - 2 if i >= 2 else 1
    unprimed = state.z[:n].copy()
    primed = state.z[n:].copy()
    unprimed[recipient] += removed
    state.z = np.concatenate([np.delete(unprimed, i - 1), np.delete(primed, i - 1)])
    state.positions = np.delete(state.positions, i - 1)
    state.chain = build_chain(n - 1, state.chain.big_u, state.chain.variant)
    return state


# ----------------------------------------------------------------------
# runs
# ----------------------------------------------------------------------

def simulate_dynamic(field: DensityField, state: DynamicState, stop: StopRule,
                     metadata: dict | None = None) -> ExperimentTrace:
    """Run rounds from the current state until the stop rule fires.

    Records one row per round (including the entry state) with coverage,
    the squared distance to the optimal configuration for the current
    agent count, and the conserved mass total. ``max_rounds`` counts rounds
    executed by this call, so churn scenarios can resume a state.
    """
    xstar, phi_star = optimal_configuration(field, state.n)
    total = field.total_mass
    meta = {"law": "dynamic", "field": field.name, "n": state.n,
            "U": state.chain.big_u, "variant": state.chain.variant,
            "rule": state.movement_rule, "phi_star": phi_star}
    if metadata:
        meta.update(metadata)
    trace = ExperimentTrace(law="dynamic", metadata=meta)

    streak = 0
    for k in range(stop.max_rounds + 1):
        zsum = state.zsum
        if abs(zsum - total) > _ZSUM_GUARD * max(1.0, total):
            raise NumericError(f"mass conservation drifted: sum z = {zsum!r}")
        residual = float(np.sum((state.positions - xstar) ** 2))
        trace.rows.append(TraceRow(state.round_index, state.positions.copy(),
                                   coverage(field, state.positions), residual, zsum))
        if stop.tol is not None and residual <= stop.tol:
            streak += 1
            if streak >= stop.persist:
                trace.stop_reason = "tol"
                break
        else:
            streak = 0
        if k == stop.max_rounds:
            trace.stop_reason = "max_rounds"
            break
        step_round(field, state)
    return trace


def run_dynamic(field: DensityField, positions0, stop: StopRule, *,
                big_u: int | None = None, variant: str = "uniformized",
                movement_rule: str = "split",
                metadata: dict | None = None) -> ExperimentTrace:
    """Initialize from positions0 and simulate until the stop rule fires."""
    state = initialize_state(field, positions0, big_u=big_u, variant=variant,
                             movement_rule=movement_rule)
    return simulate_dynamic(field, state, stop, metadata=metadata)
