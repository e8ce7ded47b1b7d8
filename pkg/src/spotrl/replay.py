"""Trial-aware experience store with surprise-ranked prioritized sampling.

Sampling follows the extended replay scheme: candidates are kept sorted by
surprise ``|reward - predicted_q|`` (descending; the reward is the trial
reward once the trial is finalized, the instant reward before that), a coin
with probability ``type_filter_prob`` restricts candidates to experiences
whose action type matches the most recent one but whose success flag
differs (falling back to the full list when that set is empty), and the
rank within the candidate list is drawn from a power law
``P(rank r) proportional to (r+1)**(-per_exponent)``. Priorities are never
adjusted after sampling; the ordering only changes when a trial's rewards
are re-recorded by :meth:`ReplayBuffer.finalize_trial`.

Trial-level reward kinds (``trial_sr``, ``trial_progress``,
``discounted``) train on backfilled trial rewards, so their experiences
only become sample-eligible once their trial is finalized; the instant
kinds are eligible as soon as they are pushed.

The buffer is append-only up to capacity; eviction removes whole trials,
oldest first, so backfilled rewards stay coherent.
"""
from __future__ import annotations

import random
from bisect import bisect_right
from dataclasses import dataclass
from typing import Callable, Hashable, Iterable, Optional

from sortedcontainers import SortedList

from . import rewards, spotq
from .qfunction import QFunction
from .rewards import RewardConfig
from .spotq import MaskFn, huber_loss


class EmptyBufferError(RuntimeError):
    """sample() on a buffer with no eligible experiences."""


class TrialOrderError(ValueError):
    """Push that violates trial/step ordering, or a push to a finalized trial."""


@dataclass
class Experience:
    """One stored transition. Field order is the dump-file column order."""

    state: Hashable
    action_id: int
    action_type: str
    instant_reward: float
    trial_reward: Optional[float]
    predicted_q: float
    success: bool
    trial_id: int
    step_index: int
    next_state: Hashable
    terminal: bool


def training_reward(e: Experience, cfg: RewardConfig) -> float:
    """The reward a replayed update trains on under cfg.reward_kind."""
    if cfg.uses_trial_reward and e.trial_reward is not None:
        return e.trial_reward
    return e.instant_reward


def surprise(e: Experience) -> float:
    """|reward - prediction|, using the trial reward once backfilled."""
    reward = e.trial_reward if e.trial_reward is not None else e.instant_reward
    return abs(reward - e.predicted_q)


@dataclass
class _Trial:
    ids: list[int]
    finalized: bool = False
    completed: Optional[bool] = None


class ReplayBuffer:
    def __init__(
        self,
        cfg: RewardConfig,
        capacity: int = 100_000,
        per_exponent: float = 2.0,
        type_filter_prob: float = 0.95,
    ):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.cfg = cfg
        self.capacity = capacity
        self.per_exponent = per_exponent
        self.type_filter_prob = type_filter_prob

        self._entries: dict[int, Experience] = {}
        self._next_id = 0
        self._trials: dict[int, _Trial] = {}  # insertion-ordered
        self._max_trial_seen: Optional[int] = None
        self._min_live_trial: Optional[int] = None
        self.last_pushed: Optional[Experience] = None

        # Sampling structures: (-surprise, id) tuples, so iteration order is
        # surprise-descending with insertion id as the deterministic tiebreak.
        self._ranked_all: SortedList = SortedList()
        self._ranked_group: dict[tuple[str, bool], SortedList] = {}
        # Prefix sums of (rank+1)**(-per_exponent), grown on demand.
        self._cum: list[float] = []

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def eligible(self) -> int:
        """Number of experiences currently visible to sample()."""
        return len(self._ranked_all)

    def get(self, index: int) -> Experience:
        return self._entries[index]

    # -- writing ----------------------------------------------------------

    def push(self, e: Experience) -> int:
        """Append an experience; returns its buffer index."""
        if self._max_trial_seen is not None and e.trial_id < self._max_trial_seen:
            raise TrialOrderError(
                f"trial_id {e.trial_id} precedes current trial {self._max_trial_seen}"
            )
        trial = self._trials.get(e.trial_id)
        if trial is None:
            trial = _Trial(ids=[])
            self._trials[e.trial_id] = trial
            self._max_trial_seen = e.trial_id
            if self._min_live_trial is None:
                self._min_live_trial = e.trial_id
        else:
            if trial.finalized:
                raise TrialOrderError(f"trial {e.trial_id} is already finalized")
            last = self._entries[trial.ids[-1]]
            if e.step_index <= last.step_index:
                raise TrialOrderError(
                    f"step_index {e.step_index} does not advance within trial {e.trial_id}"
                )

        idx = self._next_id
        self._next_id += 1
        self._entries[idx] = e
        trial.ids.append(idx)
        self.last_pushed = e
        if not self.cfg.uses_trial_reward:
            self._rank_insert(idx)
        self._evict_over_capacity(keep_trial=e.trial_id)
        return idx

    def finalize_trial(self, trial_id: int, completed: bool, cfg: Optional[RewardConfig] = None) -> None:
        """Backfill the trial-level reward for every step of a pushed trial.

        Idempotent for an already-finalized trial; a no-op for a trial the
        buffer has already evicted; unknown trial ids raise KeyError.
        """
        cfg = cfg or self.cfg
        trial = self._trials.get(trial_id)
        if trial is None:
            if self._min_live_trial is not None and trial_id < self._min_live_trial:
                return  # already evicted
            raise KeyError(f"unknown trial id {trial_id}")
        if trial.finalized:
            return
        instants = [self._entries[i].instant_reward for i in trial.ids]
        filled = rewards.backfill(instants, completed, cfg)
        for idx, value in zip(trial.ids, filled):
            if not self.cfg.uses_trial_reward:
                self._rank_remove(idx)
            self._entries[idx].trial_reward = value
            self._rank_insert(idx)
        trial.finalized = True
        trial.completed = completed

    # -- sampling ---------------------------------------------------------

    def sample(self, rng: random.Random, last_action_type: str, last_success: bool) -> int:
        """Draw one buffer index by surprise-ranked power-law sampling.

        Always consumes exactly two rng draws (filter coin, rank draw) so
        interleaved runs stay reproducible regardless of buffer contents.
        """
        if not self._ranked_all:
            raise EmptyBufferError("no sample-eligible experiences in buffer")
        apply_filter = rng.random() < self.type_filter_prob
        candidates = self._ranked_all
        if apply_filter:
            group = self._ranked_group.get((last_action_type, not last_success))
            if group:
                candidates = group
        rank = self._draw_rank(rng, len(candidates))
        return candidates[rank][1]

    def _draw_rank(self, rng: random.Random, n: int) -> int:
        while len(self._cum) < n:
            prev = self._cum[-1] if self._cum else 0.0
            self._cum.append(prev + (len(self._cum) + 1) ** (-self.per_exponent))
        u = rng.random() * self._cum[n - 1]
        return bisect_right(self._cum, u, 0, n - 1)

    def rank_probabilities(self, n: int) -> list[float]:
        """The exact mass function _draw_rank targets for a list of size n."""
        weights = [(r + 1) ** (-self.per_exponent) for r in range(n)]
        total = sum(weights)
        return [w / total for w in weights]

    # -- internals --------------------------------------------------------

    def _group_for(self, e: Experience) -> SortedList:
        key = (e.action_type, e.success)
        group = self._ranked_group.get(key)
        if group is None:
            group = self._ranked_group[key] = SortedList()
        return group

    def _rank_insert(self, idx: int) -> None:
        e = self._entries[idx]
        item = (-surprise(e), idx)
        self._ranked_all.add(item)
        self._group_for(e).add(item)

    def _rank_remove(self, idx: int) -> None:
        e = self._entries[idx]
        item = (-surprise(e), idx)
        self._ranked_all.discard(item)
        self._group_for(e).discard(item)

    def _evict_over_capacity(self, keep_trial: int) -> None:
        while len(self._entries) > self.capacity:
            oldest_id = next(iter(self._trials))
            if oldest_id == keep_trial:
                break  # never evict the trial currently being written
            trial = self._trials.pop(oldest_id)
            for idx in trial.ids:
                self._rank_remove(idx)
                del self._entries[idx]
            self._min_live_trial = next(iter(self._trials), None)

    # -- persistence ------------------------------------------------------

    def dump_lines(self, state_to_text: Callable[[Hashable], str]) -> Iterable[str]:
        """One experience per line, fields tab-separated in declaration order."""
        for idx in sorted(self._entries):
            e = self._entries[idx]
            trial_reward = "-" if e.trial_reward is None else repr(e.trial_reward)
            yield "\t".join(
                [
                    state_to_text(e.state),
                    str(e.action_id),
                    e.action_type,
                    repr(e.instant_reward),
                    trial_reward,
                    repr(e.predicted_q),
                    "1" if e.success else "0",
                    str(e.trial_id),
                    str(e.step_index),
                    state_to_text(e.next_state),
                    "1" if e.terminal else "0",
                ]
            )

    @classmethod
    def restore(
        cls,
        lines: Iterable[str],
        state_from_text: Callable[[str], Hashable],
        cfg: RewardConfig,
        **kwargs,
    ) -> "ReplayBuffer":
        """Rebuild a buffer from dump_lines output.

        Trials whose every entry carries a trial reward are marked finalized
        (the stored values are kept as-is, not recomputed).
        """
        buf = cls(cfg, **kwargs)
        parsed: list[Experience] = []
        for line in lines:
            if not line.strip():
                continue
            (state, action_id, action_type, instant, trial_reward, predicted,
             success, trial_id, step_index, next_state, terminal) = line.rstrip("\n").split("\t")
            parsed.append(
                Experience(
                    state=state_from_text(state),
                    action_id=int(action_id),
                    action_type=action_type,
                    instant_reward=float(instant),
                    trial_reward=None if trial_reward == "-" else float(trial_reward),
                    predicted_q=float(predicted),
                    success=success == "1",
                    trial_id=int(trial_id),
                    step_index=int(step_index),
                    next_state=state_from_text(next_state),
                    terminal=terminal == "1",
                )
            )
        for e in parsed:
            restored_trial_reward = e.trial_reward
            e.trial_reward = None
            idx = buf.push(e)
            e.trial_reward = restored_trial_reward
            if restored_trial_reward is None:
                continue
            # Re-rank under the restored (finalized) surprise.
            if not cfg.uses_trial_reward:
                item = (-abs(e.instant_reward - e.predicted_q), idx)
                buf._ranked_all.discard(item)
                buf._group_for(e).discard(item)
            buf._rank_insert(idx)
        for trial in buf._trials.values():
            if all(buf._entries[i].trial_reward is not None for i in trial.ids):
                trial.finalized = True
        return buf


def apply_update(
    e: Experience,
    q: QFunction,
    mask_fn: Optional[MaskFn],
    cfg: RewardConfig,
    alpha: float,
    tie_rng: random.Random,
    reward: Optional[float] = None,
) -> float:
    """Train Q on one experience: executed target plus, when the mask
    disallows the unrestricted greedy action, the extra zero-reward target.

    Both losses and both predictions are read before either update is
    applied, so the reported loss and the pair of targets come from one
    consistent view of Q. Returns the summed huber loss.
    """
    if reward is None:
        reward = training_reward(e, cfg)
    t = spotq.targets(
        state=e.state,
        action_id=e.action_id,
        reward=reward,
        next_state=e.next_state,
        terminal=e.terminal,
        q=q,
        mask_fn=mask_fn,
        learn_discount=cfg.learn_discount,
        tie_rng=tie_rng,
    )
    loss = huber_loss(q.value(e.state, e.action_id), t.executed_target)
    if t.masked_action is not None:
        loss += huber_loss(q.value(e.state, t.masked_action), t.masked_target)
    q.update(e.state, e.action_id, t.executed_target, alpha)
    if t.masked_action is not None:
        q.update(e.state, t.masked_action, t.masked_target, alpha)
    return loss


def train_step(
    buf: ReplayBuffer,
    q: QFunction,
    mask_fn: Optional[MaskFn],
    cfg: RewardConfig,
    alpha: float,
    rng: random.Random,
    tie_rng: random.Random,
) -> float:
    """Sample one experience (filter anchored on the most recent push) and
    train on it; returns the summed huber loss."""
    if buf.last_pushed is None:
        raise EmptyBufferError("buffer has never been pushed to")
    idx = buf.sample(rng, buf.last_pushed.action_type, buf.last_pushed.success)
    return apply_update(buf.get(idx), q, mask_fn, cfg, alpha, tie_rng)
