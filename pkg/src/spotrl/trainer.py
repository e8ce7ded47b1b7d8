"""The agent loop: action selection, situation removal, replay training,
validation probes, and greedy evaluation.

Per executed action, in deterministic interleaved order: select (epsilon-
greedy over the allowed set), step the environment, run k prioritized
replay updates on the buffer as it stood before this action (the replay
filter is anchored on the previously pushed sample), push the new
experience, backfill trial rewards if the trial just ended, then apply one
immediate update on the new experience with its instant reward. Every
random draw comes from a named derived stream, so identical configs
reproduce identical runs bit for bit.

During training only, and only for the shaped reward kinds, a situation-
removal check after each step can cut the trial short: the step's reward
is overridden to zero, its experience is marked terminal, and the trial
ends without the completion bonus.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

from . import replay, seeding, spotq
from .qfunction import QFunction, TabularQ
from .replay import Experience, ReplayBuffer
from .rewards import ConfigError, RewardConfig, instant_reward
from .spotq import masked_argmax

TERMINATION_COMPLETE = "Complete"
TERMINATION_LIMIT = "ActionLimit"
TERMINATION_SR = "SituationRemoval"
TERMINATION_LAVA = "LavaDeath"


@dataclass(frozen=True)
class AgentConfig:
    reward: RewardConfig
    seed: int = 0
    training_action_budget: int = 10_000
    epsilon_start: float = 0.5
    epsilon_end: float = 0.05
    epsilon_decay_steps: Optional[int] = None  # default: 20% of the budget
    learning_rate: float = 0.2
    train_steps_per_action: int = 1
    use_mask: bool = False
    use_spotq: bool = False
    validation_every: int = 5_000
    validation_trials: int = 30
    stop_on_convergence: bool = False
    replay_capacity: int = 100_000
    per_exponent: float = 2.0
    type_filter_prob: float = 0.95

    def __post_init__(self):
        if self.use_spotq and not self.use_mask:
            raise ConfigError("use_spotq requires use_mask")
        for eps in (self.epsilon_start, self.epsilon_end):
            if not 0.0 <= eps <= 1.0:
                raise ConfigError("epsilon must be in [0, 1]")

    @property
    def reward_kind(self) -> str:
        return self.reward.reward_kind

    def epsilon_at(self, action_count: int) -> float:
        decay = self.epsilon_decay_steps
        if decay is None:
            decay = max(1, int(0.2 * self.training_action_budget))
        frac = min(1.0, action_count / decay)
        return self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)


@dataclass
class TrialRecord:
    trial_id: int
    completed: bool
    actions_taken: int
    ideal_actions: int
    attempts: dict = field(default_factory=dict)
    successes: dict = field(default_factory=dict)
    termination: str = TERMINATION_LIMIT

    @property
    def efficiency(self) -> float:
        if not self.completed or self.actions_taken == 0:
            return 0.0
        return min(1.0, self.ideal_actions / self.actions_taken)


@dataclass
class StepTrace:
    """Per-step detail handed to observers for the step log."""
    experience: Experience
    epsilon: float
    masked_policy: bool
    progress: float


def step_env(env, action: int):
    """Uniform (state, outcome, event) view over both environments."""
    result = env.step(action)
    if len(result) == 3:
        return result
    state, outcome = result
    return state, outcome, None


def select_action(
    q: QFunction,
    state,
    mask: Optional[list],
    epsilon: float,
    rng: random.Random,
    tie_rng: random.Random,
    n_actions: int,
) -> int:
    """Epsilon-greedy over the allowed set (the full set when mask is None)."""
    if rng.random() < epsilon:
        if mask is None:
            return rng.randrange(n_actions)
        allowed = [a for a in range(n_actions) if mask[a]]
        if not allowed:
            raise spotq.EmptyActionSpaceError("empty dynamic action space")
        return allowed[rng.randrange(len(allowed))]
    return masked_argmax(q, state, mask if mask is not None else [True] * n_actions, tie_rng)


def masked_policy_flag(q: QFunction, state, mask: list) -> bool:
    """True when the mask is doing work: some disallowed action out-values
    every allowed one. Draw-free, for logging only."""
    best_allowed = None
    best_disallowed = None
    for a, ok in enumerate(mask):
        v = q.value(state, a)
        if ok:
            best_allowed = v if best_allowed is None else max(best_allowed, v)
        else:
            best_disallowed = v if best_disallowed is None else max(best_disallowed, v)
    if best_allowed is None or best_disallowed is None:
        return False
    return best_disallowed > best_allowed


def run_validation(q, env_factory, cfg: AgentConfig, round_index: int) -> int:
    """Greedy-policy probe on fresh evaluation-range seeds; returns the
    number of completed trials. No learning, no situation removal."""
    stream = seeding.stream(cfg.seed, f"val-{round_index}")
    env = env_factory()
    completed = 0
    for _ in range(cfg.validation_trials):
        if run_greedy_trial(q, env, cfg.use_mask, stream).completed:
            completed += 1
    return completed


def run_greedy_trial(q, env, use_mask: bool, rng: random.Random) -> TrialRecord:
    state = env.reset(seeding.eval_env_seed(rng))
    ideal = env.ideal_actions()
    attempts: dict = {}
    successes: dict = {}
    steps = 0
    termination = TERMINATION_LIMIT
    completed = False
    while not env.terminal:
        mask = env.mask_for(state) if use_mask else [True] * env.n_actions
        action = masked_argmax(q, state, mask, rng)
        if use_mask:
            assert mask[action], "masked policy executed a disallowed action"
        state, outcome, event = step_env(env, action)
        steps += 1
        attempts[outcome.action_type] = attempts.get(outcome.action_type, 0) + 1
        if outcome.success:
            successes[outcome.action_type] = successes.get(outcome.action_type, 0) + 1
        if outcome.task_complete:
            completed = True
            termination = TERMINATION_COMPLETE
        elif event == "lava":
            termination = TERMINATION_LAVA
    return TrialRecord(
        trial_id=0,
        completed=completed,
        actions_taken=steps,
        ideal_actions=ideal,
        attempts=attempts,
        successes=successes,
        termination=termination,
    )


def run_training(
    env_factory: Callable[[], object],
    cfg: AgentConfig,
    q: Optional[QFunction] = None,
    observer=None,
) -> tuple[QFunction, list[TrialRecord], Optional[int]]:
    """Train for cfg.training_action_budget actions; returns the learned Q,
    the finished-trial records, and the first action count at which every
    validation trial completed (None if that never happened).

    The observer, when given, is called as observer.on_trial(record, traces),
    observer.on_partial_trial(traces) for a budget-cut unfinished trial, and
    observer.on_validation(round_index, action_count, completed).
    """
    env = env_factory()
    if q is None:
        q = TabularQ(env.n_actions)
    rcfg = cfg.reward
    action_rng = seeding.stream(cfg.seed, "action")
    tie_rng = seeding.stream(cfg.seed, "ties")
    replay_rng = seeding.stream(cfg.seed, "replay")
    env_seed_rng = seeding.stream(cfg.seed, "env")
    buf = ReplayBuffer(
        rcfg,
        capacity=cfg.replay_capacity,
        per_exponent=cfg.per_exponent,
        type_filter_prob=cfg.type_filter_prob,
    )
    target_mask_fn = env.mask_for if cfg.use_spotq else None

    records: list[TrialRecord] = []
    convergence: Optional[int] = None
    actions_done = 0
    trial_id = 0
    validation_round = 0
    stop = False

    while actions_done < cfg.training_action_budget and not stop:
        state = env.reset(seeding.training_env_seed(env_seed_rng))
        ideal = env.ideal_actions()
        attempts: dict = {}
        successes: dict = {}
        traces: list[StepTrace] = []
        termination: Optional[str] = None
        step_in_trial = 0

        while True:
            epsilon = cfg.epsilon_at(actions_done)
            mask = env.mask_for(state) if cfg.use_mask else None
            action = select_action(q, state, mask, epsilon, action_rng, tie_rng, env.n_actions)
            if mask is not None:
                assert mask[action], "masked policy executed a disallowed action"
            masked_flag = masked_policy_flag(q, state, mask) if mask is not None else False
            predicted = q.value(state, action)
            next_state, outcome, event = step_env(env, action)

            reward = env.instant_reward_override(outcome, rcfg.reward_kind)
            if reward is None:
                reward = instant_reward(outcome, rcfg)
            sr_cut = False
            if rcfg.situation_removal_active and not outcome.terminal:
                if env.situation_removal_check(outcome.progress_before, outcome.progress_after):
                    sr_cut = True
                    reward = 0.0
            terminal = outcome.terminal or sr_cut

            if buf.last_pushed is not None and buf.eligible > 0:
                for _ in range(cfg.train_steps_per_action):
                    replay.train_step(buf, q, target_mask_fn, rcfg, cfg.learning_rate,
                                      replay_rng, tie_rng)

            e = Experience(
                state=state,
                action_id=action,
                action_type=outcome.action_type,
                instant_reward=reward,
                trial_reward=None,
                predicted_q=predicted,
                success=outcome.success,
                trial_id=trial_id,
                step_index=step_in_trial,
                next_state=next_state,
                terminal=terminal,
            )
            buf.push(e)
            actions_done += 1
            step_in_trial += 1
            attempts[outcome.action_type] = attempts.get(outcome.action_type, 0) + 1
            if outcome.success:
                successes[outcome.action_type] = successes.get(outcome.action_type, 0) + 1

            if terminal:
                buf.finalize_trial(trial_id, outcome.task_complete)

            replay.apply_update(e, q, target_mask_fn, rcfg, cfg.learning_rate, tie_rng,
                                reward=e.instant_reward)
            traces.append(StepTrace(e, epsilon, masked_flag, outcome.progress_after))

            if cfg.validation_every and actions_done % cfg.validation_every == 0:
                completed = run_validation(q, env_factory, cfg, validation_round)
                if observer is not None:
                    observer.on_validation(validation_round, actions_done, completed)
                validation_round += 1
                if completed == cfg.validation_trials and convergence is None:
                    convergence = actions_done
                    if cfg.stop_on_convergence:
                        stop = True

            if terminal:
                if sr_cut:
                    termination = TERMINATION_SR
                elif outcome.task_complete:
                    termination = TERMINATION_COMPLETE
                elif event == "lava":
                    termination = TERMINATION_LAVA
                else:
                    termination = TERMINATION_LIMIT
                break
            if actions_done >= cfg.training_action_budget or stop:
                break
            state = next_state

        if termination is not None:
            record = TrialRecord(
                trial_id=trial_id,
                completed=termination == TERMINATION_COMPLETE,
                actions_taken=step_in_trial,
                ideal_actions=ideal,
                attempts=attempts,
                successes=successes,
                termination=termination,
            )
            records.append(record)
            if observer is not None:
                observer.on_trial(record, traces)
        elif observer is not None:
            observer.on_partial_trial(traces)
        trial_id += 1

    return q, records, convergence


def evaluate(
    q: QFunction,
    env_factory: Callable[[], object],
    n_trials: int,
    seed: int,
    use_mask: bool = True,
) -> tuple[dict, list[TrialRecord]]:
    """Greedy-policy evaluation on fresh evaluation-range seeds.

    Efficiency is ideal/actual clamped to 1, averaged over completed trials
    only (0 when nothing completed). Also reports per-type success rates.
    """
    stream = seeding.stream(seed, "eval")
    env = env_factory()
    trials: list[TrialRecord] = []
    for i in range(n_trials):
        record = run_greedy_trial(q, env, use_mask, stream)
        trials.append(replace_trial_id(record, i))
    done = [t for t in trials if t.completed]
    attempts: dict = {}
    successes: dict = {}
    for t in trials:
        for k, v in t.attempts.items():
            attempts[k] = attempts.get(k, 0) + v
        for k, v in t.successes.items():
            successes[k] = successes.get(k, 0) + v
    summary = {
        "completion_rate": len(done) / n_trials if n_trials else 0.0,
        "mean_efficiency": (sum(t.efficiency for t in done) / len(done)) if done else 0.0,
        "success_rates": {
            k: successes.get(k, 0) / attempts[k] for k in sorted(attempts)
        },
    }
    return summary, trials


def replace_trial_id(record: TrialRecord, trial_id: int) -> TrialRecord:
    return replace(record, trial_id=trial_id)
