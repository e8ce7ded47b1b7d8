"""Dynamic action-space masking and the masked Q-learning target.

The mask is a boolean vector marking, per state, which discrete actions are
not certain to fail. A policy built from :func:`masked_argmax` only ever
executes allowed actions. During learning, :func:`targets` produces the
one-step bootstrapped target for the executed action and, whenever the
*unrestricted* greedy action at the stored state is disallowed by the mask,
one extra zero-reward target for that disallowed action — teaching the
Q-function that masked actions are worthless without ever executing them.
Exactly one extra sample per transition; summing over every masked entry is
known to destabilize training.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable, Hashable, Optional, Sequence

from .qfunction import QFunction

# A mask is any sequence of booleans indexed by action id.
ActionMask = Sequence[bool]
MaskFn = Callable[[Hashable], ActionMask]


class EmptyActionSpaceError(RuntimeError):
    """Every action is masked in a state that still requires one."""


@dataclass(frozen=True)
class SpotQTargets:
    """Targets for one replayed transition.

    ``masked_target``/``masked_action`` are present iff the unrestricted
    greedy action at the stored state was disallowed by the mask.
    """

    executed_target: float
    masked_target: Optional[float] = None
    masked_action: Optional[int] = None

    def __post_init__(self) -> None:
        if (self.masked_target is None) != (self.masked_action is None):
            raise ValueError("masked_target and masked_action must appear together")


def allowed_actions(mask: ActionMask) -> list[int]:
    return [a for a, ok in enumerate(mask) if ok]


def masked_argmax(q: QFunction, state: Hashable, mask: ActionMask, tie_rng: random.Random) -> int:
    """Highest-valued allowed action; exact ties broken uniformly.

    The tie draw consumes randomness only when there really is a tie, so
    deterministic replays are unaffected by states with a unique maximizer.
    """
    best_value = None
    tied: list[int] = []
    for a, ok in enumerate(mask):
        if not ok:
            continue
        v = q.value(state, a)
        if best_value is None or v > best_value:
            best_value = v
            tied = [a]
        elif v == best_value:
            tied.append(a)
    if not tied:
        raise EmptyActionSpaceError("empty dynamic action space")
    if len(tied) == 1:
        return tied[0]
    return tied[tie_rng.randrange(len(tied))]


def targets(
    *,
    state: Hashable,
    action_id: int,
    reward: float,
    next_state: Hashable,
    terminal: bool,
    q: QFunction,
    mask_fn: Optional[MaskFn],
    learn_discount: float,
    tie_rng: random.Random,
) -> SpotQTargets:
    """SPOT-Q targets for one transition.

    The executed target is the usual one-step bootstrap,
    ``reward + learn_discount * max_a Q(next_state, a)``, with the bootstrap
    dropped on terminal transitions (the trial ends there; bootstrapping
    past it would make the target unbounded over an episode).

    When ``mask_fn`` is given, the unrestricted greedy action at ``state``
    is recomputed against the *current* Q-function; if the mask disallows
    it, a zero-reward target ``learn_discount * Q(next_state, that action)``
    is emitted for that action. When ``mask_fn`` is None (mask disabled, or
    the extra-sample mechanism switched off) only the executed target is
    produced and the computation degenerates to plain Q-learning.
    """
    if terminal:
        executed = reward
    else:
        executed = reward + learn_discount * q.best_value(next_state)

    if mask_fn is None:
        return SpotQTargets(executed)

    mask = mask_fn(state)
    if all(mask):
        # Nothing can be disallowed; skip the greedy recomputation entirely
        # so fully-permissive masks leave no trace (not even tie draws).
        return SpotQTargets(executed)

    greedy = masked_argmax(q, state, [True] * len(mask), tie_rng)
    if mask[greedy]:
        return SpotQTargets(executed)
    masked_target = learn_discount * q.value(next_state, greedy)
    return SpotQTargets(executed, masked_target, greedy)


def huber_loss(prediction: float, target: float) -> float:
    """Smooth-L1 with threshold 1: quadratic inside, linear outside."""
    d = abs(prediction - target)
    if d <= 1.0:
        return 0.5 * d * d
    return d - 0.5
