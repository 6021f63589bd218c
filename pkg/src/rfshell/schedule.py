"""Piecewise rf schedules: omega_rf(t), Omega(t) and the rotating-frame phase.

A schedule is a tuple of contiguous segments plus optional additive
frequency-noise tracks. Phase is piecewise constant per segment, so phase
jumps happen exactly at segment boundaries where the phases differ.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainError

KINDS = ("constant", "linear", "staircase", "sinusoid")


@dataclass(frozen=True)
class Segment:
    t0: float
    t1: float
    kind: str
    w_start: float
    w_end: float
    rabi_start: float
    rabi_end: float
    n_steps: int = 0
    mod_depth: float = 0.0  # rad/s, sinusoid only
    mod_freq: float = 0.0  # Hz, sinusoid only
    phase: float = 0.0
    span: float = 0.0  # parametrisation length of the ramp; 0 means t1 - t0

    def __post_init__(self):
        if self.span == 0.0:
            object.__setattr__(self, "span", self.t1 - self.t0)
        if self.kind not in KINDS:
            raise DomainError(f"unknown segment kind {self.kind!r}")
        if not self.t1 > self.t0:
            raise DomainError("segment must have positive duration")
        if self.kind == "staircase" and self.n_steps < 1:
            raise DomainError("staircase needs n_steps >= 1")
        if min(self.rabi_start, self.rabi_end) < 0:
            raise DomainError("Omega must be >= 0")

    @property
    def duration(self):
        return self.t1 - self.t0

    def omega_rf(self, t):
        t = np.asarray(t, dtype=float)
        u = (t - self.t0) / self.span
        if self.kind == "constant":
            return np.full_like(t, self.w_start)
        if self.kind == "linear":
            return self.w_start + (self.w_end - self.w_start) * u
        if self.kind == "staircase":
            # tread k sits at the midpoint of the linear ramp over that tread
            k = np.clip(np.floor(u * self.n_steps), 0, self.n_steps - 1)
            return self.w_start + (self.w_end - self.w_start) * (k + 0.5) / self.n_steps
        return self.w_start + self.mod_depth * np.sin(2 * np.pi * self.mod_freq * (t - self.t0))

    def rabi(self, t):
        u = (np.asarray(t, dtype=float) - self.t0) / self.span
        return self.rabi_start + (self.rabi_end - self.rabi_start) * u

    def shifted(self, dt):
        return replace(self, t0=self.t0 + dt, t1=self.t1 + dt)


@dataclass(frozen=True)
class NoiseTrack:
    """Additive omega_rf noise, 2 pi * samples[k] (rad/s) held on [t0 + k dt, t0 + (k+1) dt)."""

    t0: float
    dt: float
    samples_hz: np.ndarray = field(repr=False)
    t_stop: float = np.inf

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        k = np.floor((t - self.t0) / self.dt).astype(np.int64)
        valid = (k >= 0) & (k < len(self.samples_hz)) & (t < self.t_stop)
        out = np.zeros(t.shape)
        out[valid] = 2 * np.pi * self.samples_hz[k[valid]]
        return out


@dataclass(frozen=True)
class RfSchedule:
    segments: tuple
    noise: tuple = ()

    def __post_init__(self):
        if not self.segments:
            raise DomainError("schedule needs at least one segment")
        for a, b in zip(self.segments[:-1], self.segments[1:]):
            if not np.isclose(a.t1, b.t0, rtol=0, atol=1e-12):
                raise DomainError("segments must be contiguous")
        for s in self.segments:
            if min(s.w_start, s.w_end) - s.mod_depth <= 0:
                raise DomainError("omega_rf must stay > 0")

    @classmethod
    def constant(cls, omega_rf, Omega, duration, t0=0.0):
        return cls((Segment(t0, t0 + duration, "constant", omega_rf, omega_rf, Omega, Omega),))

    @property
    def t_start(self):
        return self.segments[0].t0

    @property
    def t_end(self):
        return self.segments[-1].t1

    @property
    def duration(self):
        return self.t_end - self.t_start

    @property
    def jumps(self):
        """[(t, jump_rad)] at boundaries where the phase changes."""
        return [
            (b.t0, b.phase - a.phase)
            for a, b in zip(self.segments[:-1], self.segments[1:])
            if b.phase != a.phase
        ]

    def _index(self, t):
        edges = np.array([s.t0 for s in self.segments[1:]])
        return np.searchsorted(edges, np.asarray(t, dtype=float), side="right")

    def _piecewise(self, t, attr):
        t = np.asarray(t, dtype=float)
        idx = self._index(t)
        out = np.empty(t.shape)
        for i, seg in enumerate(self.segments):
            m = idx == i
            if np.any(m):
                out[m] = getattr(seg, attr)(t[m])
        return out

    def omega_rf(self, t):
        w = self._piecewise(t, "omega_rf")
        for track in self.noise:
            w = w + track(t)
        return w

    def rabi(self, t):
        return self._piecewise(t, "rabi")

    def phase(self, t):
        idx = self._index(t)
        return np.array([s.phase for s in self.segments])[idx]

    def detuning(self, t, V0_over_hbar):
        return self.omega_rf(t) - V0_over_hbar

    def shifted(self, dt):
        return RfSchedule(
            tuple(s.shifted(dt) for s in self.segments),
            tuple(replace(n, t0=n.t0 + dt, t_stop=n.t_stop + dt) for n in self.noise),
        )

    def truncated(self, t_stop):
        """Restriction to [t_start, t_stop]."""
        if not self.t_start < t_stop <= self.t_end:
            raise DomainError("truncation time outside schedule support")
        segs = []
        for s in self.segments:
            if s.t0 >= t_stop:
                break
            if s.t1 > t_stop:
                s = replace(s, t1=t_stop)
            segs.append(s)
        noise = tuple(replace(n, t_stop=min(n.t_stop, t_stop)) for n in self.noise)
        return RfSchedule(tuple(segs), noise)

    def extended(self, duration):
        """Append a constant hold at the final (noise-free) omega_rf and Omega."""
        last = self.segments[-1]
        w = float(last.omega_rf(last.t1 - 1e-15 * max(1.0, last.t1)))
        rabi = float(last.rabi(last.t1))
        hold = Segment(last.t1, last.t1 + duration, "constant", w, w, rabi, rabi, phase=last.phase)
        return RfSchedule(self.segments + (hold,), self.noise)
