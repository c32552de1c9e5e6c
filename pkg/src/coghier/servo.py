"""Visual-servoing simulation: a camera tracking an accelerating object.

Three nodes: the world (object sliding down a frictionless incline, plus
the camera), a fixed-gain filter node estimating the object position from
noisy readings, and a physics node that integrates the known dynamics one
time step ahead. In ``context`` mode the physics node's position estimate
is passed back down and becomes the filter node's prior for the next tick;
in ``no_context`` mode the filter node keeps its own estimate.

Each tick: the world advances and takes one noisy position reading, the
hierarchy runs one process update (which moves the camera), and the
absolute camera-to-object distance is recorded.
"""

from __future__ import annotations

import csv
import json
import math
import statistics
from dataclasses import dataclass, replace
from typing import Iterable

import numpy as np

from . import kernel
from .kernel import (
    CognitiveNodeSpec,
    EdgeTriple,
    Hierarchy,
    Tagged,
    default_spaces,
    emit_nothing,
    make_world_node_spec,
)

WORLD, FILTER_NODE, PHYSICS_NODE = "N0", "N1", "N2"

MODES = ("no_context", "context")


@dataclass(frozen=True)
class ServoParams:
    accel: float = 8.49
    dt: float = 0.05
    duration: float = 3.0
    noise_sigma: float = 0.1
    kalman_gain: float = 0.25
    mode: str = "context"
    seed: int = 42
    trials: int = 100

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.duration < self.dt:
            raise ValueError("duration must cover at least one step")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if not 0.0 <= self.kalman_gain <= 1.0:
            raise ValueError("kalman_gain must lie in [0, 1]")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")

    @property
    def steps(self) -> int:
        return int(round(self.duration / self.dt))


@dataclass(frozen=True)
class ServoWorld:
    """Environment payload: analytic object state, camera, sensor stream.

    The object position is always the closed form 0.5*k*t**2; a single
    noisy reading is drawn per step when the world advances, so the
    hierarchy update itself is free of random state.
    """

    elapsed: float
    true_position: float
    camera_position: float
    sensor_reading: float
    rng: np.random.Generator


def initial_world(params: ServoParams) -> ServoWorld:
    return ServoWorld(0.0, 0.0, 0.0, 0.0, np.random.default_rng(params.seed))


def advance_world(world: ServoWorld, params: ServoParams) -> ServoWorld:
    """Move time forward one step and take the position reading."""
    t = world.elapsed + params.dt
    true_position = 0.5 * params.accel * t * t
    reading = true_position + world.rng.normal(0.0, params.noise_sigma)
    return replace(
        world, elapsed=t, true_position=true_position, sensor_reading=float(reading)
    )


def build_servo_hierarchy(params: ServoParams) -> Hierarchy:
    """Wire the world, filter and physics nodes for the requested mode."""
    gain = params.kalman_gain
    k, dt = params.accel, params.dt
    with_context = params.mode == "context"

    filter_spaces = default_spaces(FILTER_NODE)
    physics_spaces = default_spaces(PHYSICS_NODE)
    world_spaces = default_spaces(WORLD)

    def filter_observation(observations: tuple, belief: float) -> float:
        if len(observations) != 1:
            raise ValueError(f"expected one position reading, got {len(observations)}")
        return (1.0 - gain) * belief + gain * observations[0]

    def filter_prediction(contexts: tuple, actions: tuple, belief: float) -> float:
        if with_context and contexts:
            return contexts[0]
        if actions:
            return actions[0]
        return belief

    filter_node = CognitiveNodeSpec(
        node_id=FILTER_NODE,
        spaces=filter_spaces,
        policies={"track": lambda belief: (belief,)},
        policy_selector=lambda _task_params: "track",
        observation_update=filter_observation,
        prediction_update=filter_prediction,
        initial_belief=0.0,
        initial_policy="track",
    )

    def physics_observation(observations: tuple, belief: tuple) -> tuple:
        if len(observations) != 1:
            raise ValueError(f"expected one position estimate, got {len(observations)}")
        _, velocity = belief
        return (observations[0], velocity)

    def physics_prediction(contexts: tuple, actions: tuple, belief: tuple) -> tuple:
        del contexts, actions
        x, v = belief
        return (x + v * dt + 0.5 * k * dt * dt, v + k * dt)

    physics_node = CognitiveNodeSpec(
        node_id=PHYSICS_NODE,
        spaces=physics_spaces,
        policies={"command": lambda _belief: ("track",)},
        policy_selector=lambda _task_params: "command",
        observation_update=physics_observation,
        prediction_update=physics_prediction,
        initial_belief=(0.0, 0.0),
        initial_policy="command",
    )

    def actuate(task_params: tuple, world: ServoWorld) -> ServoWorld:
        if not task_params:
            return world
        return replace(world, camera_position=float(task_params[0]))

    world_node = make_world_node_spec(WORLD, actuate=actuate, spaces=world_spaces)

    sense_edge = EdgeTriple(
        lower=WORLD,
        upper=FILTER_NODE,
        sensing_fn=lambda world: (Tagged(filter_spaces.observation_space, world.sensor_reading),),
        task_param_fn=lambda actions: tuple(
            Tagged(world_spaces.task_param_space, float(a)) for a in actions
        ),
        context_fn=emit_nothing,
    )

    relay_edge = EdgeTriple(
        lower=FILTER_NODE,
        upper=PHYSICS_NODE,
        sensing_fn=lambda belief: (Tagged(physics_spaces.observation_space, belief),),
        task_param_fn=lambda actions: tuple(
            Tagged(filter_spaces.task_param_space, a) for a in actions
        ),
        context_fn=(
            (lambda belief: (Tagged(filter_spaces.context_space, belief[0]),))
            if with_context
            else emit_nothing
        ),
    )

    return Hierarchy(
        nodes=(world_node, filter_node, physics_node),
        world_node=WORLD,
        edges=(sense_edge, relay_edge),
    )


# ---------------------------------------------------------------------------
# Episodes and experiments


@dataclass(frozen=True)
class StepRecord:
    t: float
    true_position: float
    camera_position: float
    n1_belief: float
    n2_belief: tuple[float, float]
    abs_error: float


@dataclass(frozen=True)
class ServoEpisode:
    steps: tuple[StepRecord, ...]
    mean_error: float


def run_episode(params: ServoParams) -> ServoEpisode:
    """Simulate one episode: advance, update, record, for every step."""
    hierarchy = build_servo_hierarchy(params)
    ah = kernel.init_active(hierarchy, initial_world(params))
    records: list[StepRecord] = []
    for _ in range(params.steps):
        ah = kernel.with_world_state(ah, advance_world(ah.world_state, params))
        ah = kernel.process_update(ah)
        world = ah.world_state
        records.append(
            StepRecord(
                t=world.elapsed,
                true_position=world.true_position,
                camera_position=world.camera_position,
                n1_belief=ah.node(FILTER_NODE).belief,
                n2_belief=ah.node(PHYSICS_NODE).belief,
                abs_error=abs(world.camera_position - world.true_position),
            )
        )
    mean_error = sum(r.abs_error for r in records) / len(records)
    return ServoEpisode(tuple(records), mean_error)


@dataclass(frozen=True)
class TrialResult:
    trial: int
    mode: str
    mean_error: float


@dataclass(frozen=True)
class ModeStats:
    mean: float
    std: float
    n: int


@dataclass(frozen=True)
class ExperimentSummary:
    per_mode: dict[str, ModeStats]
    reduction_percent: float | None
    rows: tuple[TrialResult, ...]


def run_experiment(
    params: ServoParams, modes: Iterable[str] = MODES
) -> ExperimentSummary:
    """Run seeded trials per mode and summarise episode mean errors.

    Trial i uses seed ``params.seed + i`` in every mode, so per-trial
    comparisons across modes share their noise realisations.
    """
    modes = tuple(modes)
    for mode in modes:
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
    rows: list[TrialResult] = []
    per_mode: dict[str, ModeStats] = {}
    for mode in modes:
        errors = []
        for trial in range(params.trials):
            episode = run_episode(replace(params, mode=mode, seed=params.seed + trial))
            errors.append(episode.mean_error)
            rows.append(TrialResult(trial, mode, episode.mean_error))
        std = statistics.stdev(errors) if len(errors) > 1 else 0.0
        per_mode[mode] = ModeStats(mean=statistics.fmean(errors), std=std, n=len(errors))
    reduction = None
    if "context" in per_mode and "no_context" in per_mode and per_mode["no_context"].mean > 0:
        reduction = 100.0 * (1.0 - per_mode["context"].mean / per_mode["no_context"].mean)
    rows.sort(key=lambda r: (r.trial, r.mode))
    return ExperimentSummary(per_mode=per_mode, reduction_percent=reduction, rows=tuple(rows))


def _sig12(x: float) -> float:
    if math.isfinite(x):
        return float(f"{x:.12g}")
    return x


def summary_to_document(summary: ExperimentSummary) -> dict:
    doc: dict = {
        mode: {"mean": _sig12(s.mean), "std": _sig12(s.std), "n": s.n}
        for mode, s in sorted(summary.per_mode.items())
    }
    if summary.reduction_percent is not None:
        doc["reduction_percent"] = _sig12(summary.reduction_percent)
    return doc


def write_csv(path: str, summary: ExperimentSummary) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["trial", "mode", "mean_error"])
        for row in summary.rows:
            writer.writerow([row.trial, row.mode, repr(row.mean_error)])


def write_json(path: str, summary: ExperimentSummary) -> None:
    with open(path, "w") as handle:
        json.dump(summary_to_document(summary), handle, indent=2, sort_keys=True)
        handle.write("\n")
