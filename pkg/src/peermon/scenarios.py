"""Synthetic indicator scenarios for the accuracy/overhead benchmarks.

Every scenario is a per-second ground-truth series on [0, duration) for an
indicator conventionally ranging in [0, 1], generated deterministically from
(name, seed).
"""

from __future__ import annotations

from dataclasses import dataclass
from random import Random
from typing import Tuple

SCENARIO_NAMES: Tuple[str, ...] = (
    "stable",
    "unstable",
    "stable_unstable",
    "random",
    "spiky",
)

_WALK_LO, _WALK_HI = 0.5, 0.85
_WALK_STEP = 0.05
_SPIKY_BASE = 0.3
_SPIKY_BAND = (0.2, 0.5)
_SPIKY_PEAK = 1.0
# block layout in seconds: steady base, erratic band, spike
_SPIKY_STABLE_S, _SPIKY_BAND_S, _SPIKY_SPIKE_S = 28, 12, 4


class UnknownScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int
    duration: int
    values: Tuple[float, ...]  # ground truth at t = 0, 1, ..., duration-1
    spike_segments: Tuple[Tuple[float, float], ...] = ()

    def value_at(self, t: float) -> float:
        """Ground truth sampled at an arbitrary (possibly fractional) time."""
        index = int(t)
        if index < 0:
            index = 0
        elif index >= self.duration:
            index = self.duration - 1
        return self.values[index]


def _rng(name: str, seed: int) -> Random:
    # String seeding hashes via SHA-512 internally; stable across platforms.
    return Random(f"{name}:{seed}")


def _stable_value(t: int) -> float:
    # Two close levels, each held for 14 seconds.
    return 0.8 if (t // 14) % 2 == 0 else 0.83


def _walk_step(value: float, rng: Random) -> float:
    value += rng.uniform(-_WALK_STEP, _WALK_STEP)
    if value > _WALK_HI:
        value = 2 * _WALK_HI - value
    elif value < _WALK_LO:
        value = 2 * _WALK_LO - value
    return value


def gen_scenario(name: str, seed: int) -> Scenario:
    """Build one of the five named scenarios.

    stable           600 s: 0.8/0.83 alternating every 14 s.
    unstable         600 s: reflected random walk in [0.5, 0.85], +-0.05/s.
    stable_unstable  1200 s: the two above alternating in 150 s phases.
    random           600 s: i.i.d. uniform in [0, 1] per second.
    spiky            600 s: 28 s base 0.3, 12 s band in [0.2, 0.5], 4 s spike
                     at 1.0; spike windows recorded as segments.
    """
    rng = _rng(name, seed)
    if name == "stable":
        values = tuple(_stable_value(t) for t in range(600))
        return Scenario(name=name, seed=seed, duration=600, values=values)

    if name == "unstable":
        value = (_WALK_LO + _WALK_HI) / 2
        out = []
        for _ in range(600):
            out.append(value)
            value = _walk_step(value, rng)
        return Scenario(name=name, seed=seed, duration=600, values=tuple(out))

    if name == "stable_unstable":
        duration = 1200
        phase_len = 150
        out = []
        value = (_WALK_LO + _WALK_HI) / 2
        for t in range(duration):
            phase, offset = divmod(t, phase_len)
            if phase % 2 == 0:
                v = _stable_value(offset)
                out.append(v)
                value = min(max(v, _WALK_LO), _WALK_HI)
            else:
                if offset > 0:
                    value = _walk_step(value, rng)
                out.append(value)
        return Scenario(name=name, seed=seed, duration=duration, values=tuple(out))

    if name == "random":
        values = tuple(rng.uniform(0.0, 1.0) for _ in range(600))
        return Scenario(name=name, seed=seed, duration=600, values=values)

    if name == "spiky":
        duration = 600
        block = _SPIKY_STABLE_S + _SPIKY_BAND_S + _SPIKY_SPIKE_S
        out = []
        for t in range(duration):
            offset = t % block
            if offset < _SPIKY_STABLE_S:
                out.append(_SPIKY_BASE)
            elif offset < _SPIKY_STABLE_S + _SPIKY_BAND_S:
                out.append(rng.uniform(*_SPIKY_BAND))
            else:
                out.append(_SPIKY_PEAK)
        segments = []
        start = _SPIKY_STABLE_S + _SPIKY_BAND_S
        for base in range(0, duration, block):
            lo, hi = base + start, base + block
            if hi <= duration:
                segments.append((float(lo), float(hi)))
        return Scenario(
            name=name,
            seed=seed,
            duration=duration,
            values=tuple(out),
            spike_segments=tuple(segments),
        )

    raise UnknownScenarioError(
        f"unknown scenario '{name}' (expected one of {', '.join(SCENARIO_NAMES)})"
    )
