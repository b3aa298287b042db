"""Emulated one-sided communication and a replayable actor scheduler.

Windows
-------
A :class:`Window` holds a *public* copy, written by remote :meth:`Epoch.put`
calls, and a *private* copy, read by the owner.  Puts are buffered in the
access epoch and land in the public copy at :meth:`Epoch.unlock`; the owner
sees them only after :meth:`Window.sync`.  Each put replaces one whole slot
(row), so a slot is never observed half written.

Scheduling
----------
Actors are generators.  Before every communication action (``sync``,
``put``) and at every ``barrier`` they yield an :class:`Event`; code between
two yields runs without interruption.  A :class:`ScheduleController`
decides which actor resumes next and records that order as a trace.
Feeding the trace back reproduces the run exactly.

Trace files are line oriented::

    # asyncwr-trace mode=seeded seed=7
    actor,action,target,step,iteration
    0,sync,buffer,0,1
    ...
"""
from __future__ import annotations

import threading
import time
import zlib
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import numpy as np

__all__ = [
    "SHARED",
    "EXCLUSIVE",
    "RMAError",
    "DeadlockError",
    "ReplayMismatch",
    "Window",
    "Epoch",
    "Event",
    "Trace",
    "ScheduleController",
    "SCHEDULE_MODES",
]

SHARED = "shared"
EXCLUSIVE = "exclusive"


class RMAError(RuntimeError):
    """Misuse of a window or epoch."""


class DeadlockError(RMAError):
    """A lock or barrier can never be granted under the current schedule."""


class ReplayMismatch(RuntimeError):
    """The program diverged from the trace it is replaying."""


def _crc(row: np.ndarray) -> int:
    return zlib.crc32(np.ascontiguousarray(row).tobytes())


class Window:
    """Memory exposed by ``owner`` for remote puts.

    Parameters
    ----------
    slots, width : int
        The window holds ``slots`` rows of ``width`` doubles.
    owner : int
        Actor id allowed to sync and write locally.
    fill : float or array
        Initial content of both copies.
    """

    def __init__(self, slots: int, width: int, owner: int, name: str = "", fill=0.0):
        self.name = name
        self.owner = owner
        self.public = np.empty((slots, width))
        self.public[...] = fill
        self.private = self.public.copy()
        self._checksums = [_crc(r) for r in self.public]
        self._cond = threading.Condition()
        self._queue: deque = deque()
        self._shared = 0
        self._exclusive: Optional[int] = None

    @property
    def shape(self):
        return self.public.shape

    # -- locking -----------------------------------------------------------
    def _grantable(self, ticket, kind) -> bool:
        if not self._queue or self._queue[0] is not ticket:
            return False
        if kind == EXCLUSIVE:
            return self._exclusive is None and self._shared == 0
        return self._exclusive is None

    @property
    def lock_state(self):
        if self._exclusive is not None:
            return (EXCLUSIVE, self._exclusive)
        if self._shared:
            return (SHARED, self._shared)
        return ("unlocked", None)

    def lock(self, kind: str, actor: int, timeout: Optional[float] = None) -> "Epoch":
        """Open an access epoch.  Requests are granted in FIFO order.

        ``timeout=0`` fails immediately instead of waiting, which is what a
        single-threaded scheduler needs: waiting could never succeed there.
        """
        if kind not in (SHARED, EXCLUSIVE):
            raise ValueError(f"unknown lock kind {kind!r}")
        ticket = object()
        with self._cond:
            self._queue.append(ticket)
            deadline = None if timeout is None else time.monotonic() + timeout
            while not self._grantable(ticket, kind):
                remaining = None if deadline is None else deadline - time.monotonic()
                if remaining is not None and remaining <= 0:
                    self._queue.remove(ticket)
                    self._cond.notify_all()
                    raise DeadlockError(f"window {self.name!r}: {kind} lock by actor {actor} "
                                        f"not granted (state {self.lock_state})")
                self._cond.wait(remaining)
            self._queue.popleft()
            if kind == EXCLUSIVE:
                self._exclusive = actor
            else:
                self._shared += 1
            self._cond.notify_all()
        return Epoch(self, kind, actor)

    def _release(self, epoch: "Epoch"):
        with self._cond:
            for offset, payload in epoch._pending:
                self.public[offset] = payload
                self._checksums[offset] = _crc(self.public[offset])
            if epoch.kind == EXCLUSIVE:
                self._exclusive = None
            else:
                self._shared -= 1
            self._cond.notify_all()

    # -- owner side --------------------------------------------------------
    def _check_owner(self, actor):
        if actor is not None and actor != self.owner:
            raise RMAError(f"actor {actor} does not own window {self.name!r}")

    def sync(self, actor: Optional[int] = None) -> None:
        """Copy the public copy into the private copy."""
        self._check_owner(actor)
        with self._cond:
            self.private[...] = self.public

    def write_local(self, index, value, actor: Optional[int] = None) -> None:
        """Owner write that updates both copies."""
        self._check_owner(actor)
        with self._cond:
            self.public[index] = value
            self.private[index] = value
            rows = range(self.public.shape[0])[index]
            for r in ([rows] if isinstance(rows, int) else rows):
                self._checksums[r] = _crc(self.public[r])

    def read(self, index):
        """Read from the private copy."""
        return self.private[index].copy()

    def verify(self) -> bool:
        """True if every public slot matches the checksum of its last complete write."""
        with self._cond:
            return all(_crc(r) == c for r, c in zip(self.public, self._checksums))


class Epoch:
    """An open access epoch on a window; see :meth:`Window.lock`."""

    def __init__(self, window: Window, kind: str, actor: int):
        self.window = window
        self.kind = kind
        self.actor = actor
        self._pending: List = []
        self._open = True

    def put(self, offset: int, payload) -> None:
        if not self._open:
            raise RMAError("put outside an open epoch")
        slots, width = self.window.shape
        if not 0 <= offset < slots:
            raise IndexError(f"offset {offset} outside window {self.window.name!r} of {slots} slots")
        payload = np.array(payload, dtype=float).reshape(width)
        self._pending.append((offset, payload))

    def unlock(self) -> None:
        if not self._open:
            raise RMAError("double unlock")
        self._open = False
        self.window._release(self)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        if self._open:
            self.unlock()


@dataclass(frozen=True)
class Event:
    actor: int
    action: str
    target: str
    step: int
    iteration: int

    def line(self) -> str:
        return f"{self.actor},{self.action},{self.target},{self.step},{self.iteration}"

    @classmethod
    def parse(cls, line: str) -> "Event":
        actor, action, target, step, iteration = line.strip().split(",")
        return cls(int(actor), action, target, int(step), int(iteration))


SCHEDULE_MODES = ("free", "lockstep", "process0_ahead", "process1_ahead", "seeded")
_HEADER = "actor,action,target,step,iteration"


@dataclass
class Trace:
    mode: str
    seed: Optional[int]
    events: List[Event]

    def dumps(self) -> str:
        lines = [f"# asyncwr-trace mode={self.mode} seed={self.seed}", _HEADER]
        lines += [e.line() for e in self.events]
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "Trace":
        mode, seed, events = None, None, []
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if tok.startswith("mode="):
                        mode = tok[5:]
                    elif tok.startswith("seed="):
                        seed = None if tok[5:] == "None" else int(tok[5:])
                continue
            if line == _HEADER:
                continue
            events.append(Event.parse(line))
        if mode is None:
            raise ValueError("trace has no mode header")
        return cls(mode, seed, events)

    @classmethod
    def load(cls, path) -> "Trace":
        return cls.loads(Path(path).read_text())


_PHASE = {"sync": 0, "put": 1, "barrier": 2}
_SEEDED_RANK = {"put": 0, "sync": 1, "barrier": 2}


class ScheduleController:
    """Decides the interleaving of actor generators.

    Parameters
    ----------
    mode : str
        ``free``: real threads, OS scheduling.
        ``lockstep``: all actors finish the communication of step ``n``
        before any starts step ``n + 1``; syncs of a step precede its puts.
        ``process0_ahead`` / ``process1_ahead``: the named actor runs until
        it blocks at a barrier.
        ``seeded``: discrete-event simulation where each step costs a nominal
        ``costs[actor]`` times a random factor ``1 + U(0, delay_factor)``.
    seed : int
        Seed of the delay generator (``seeded`` only).
    replay : Trace, optional
        Follow this trace instead of deciding.  Its mode must equal ``mode``.
    """

    def __init__(self, mode: str = "lockstep", seed: Optional[int] = 0,
                 delay_factor: float = 0.5, replay: Optional[Trace] = None,
                 barrier_timeout: float = 60.0):
        if mode not in SCHEDULE_MODES:
            raise ValueError(f"unknown schedule mode {mode!r}")
        if replay is not None and replay.mode != mode:
            raise ReplayMismatch(f"trace recorded in mode {replay.mode!r} cannot be replayed in mode {mode!r}")
        if delay_factor < 0:
            raise ValueError("delay_factor must be non-negative")
        self.mode = mode
        self.seed = seed
        self.delay_factor = delay_factor
        self.replay = replay
        self.barrier_timeout = barrier_timeout
        self.trace: List[Event] = []

    @property
    def cooperative(self) -> bool:
        """Whether actors run in one thread (every mode but unreplayed ``free``)."""
        return not (self.mode == "free" and self.replay is None)

    @property
    def lock_timeout(self) -> Optional[float]:
        return 0.0 if self.cooperative else self.barrier_timeout

    def recorded(self) -> Trace:
        return Trace(self.mode, self.seed, list(self.trace))

    def run(self, actors: Sequence, costs: Optional[Sequence[float]] = None) -> None:
        """Drive the actor generators to completion."""
        self.trace = []
        if self.cooperative:
            self._run_cooperative(list(actors), costs)
        else:
            self._run_threads(list(actors))

    # -- single-threaded driver ---------------------------------------------
    def _run_cooperative(self, actors, costs):
        n = len(actors)
        costs = [1.0] * n if costs is None else list(costs)
        rng = np.random.default_rng(self.seed)
        clock = [0.0] * n
        pending: List[Optional[Event]] = [None] * n
        for i, gen in enumerate(actors):
            pending[i] = self._advance(gen)
        replay = iter(self.replay.events) if self.replay is not None else None

        released = set()
        while any(p is not None for p in pending):
            alive = [i for i in range(n) if pending[i] is not None]
            at_barrier = [i for i in alive if pending[i].action == "barrier" and i not in released]
            if at_barrier and len(at_barrier) == len(alive):
                if len(alive) < n:
                    raise DeadlockError("barrier can never complete: an actor has finished")
                if len({(pending[i].target, pending[i].iteration) for i in alive}) > 1:
                    raise DeadlockError("actors wait at different barriers")
                released.update(alive)
                t = max(clock)
                clock = [t] * n
            runnable = [i for i in alive if pending[i].action != "barrier" or i in released]

            if replay is not None:
                want = next(replay, None)
                if want is None:
                    raise ReplayMismatch("trace exhausted while actors are still running")
                if want.actor not in runnable or pending[want.actor] != want:
                    got = pending[want.actor] if 0 <= want.actor < n else None
                    raise ReplayMismatch(f"trace expects {want.line()}, program is at "
                                         f"{got.line() if got else 'end'}")
                i = want.actor
            else:
                i = self._choose(runnable, pending, clock)

            ev = pending[i]
            self.trace.append(ev)
            if self.mode == "seeded" and ev.action == "sync":
                clock[i] += costs[i] * (1.0 + self.delay_factor * rng.random())
            released.discard(i)
            pending[i] = self._advance(actors[i], resume=True)

        if replay is not None and next(replay, None) is not None:
            raise ReplayMismatch("program finished before the trace")

    @staticmethod
    def _advance(gen, resume=False):
        try:
            return gen.send(None) if resume else next(gen)
        except StopIteration:
            return None

    def _choose(self, runnable, pending, clock):
        if self.mode == "lockstep" or self.mode == "free":
            return min(runnable, key=lambda i: (pending[i].iteration, pending[i].step,
                                                _PHASE[pending[i].action], i))
        if self.mode == "process0_ahead":
            return min(runnable)
        if self.mode == "process1_ahead":
            return max(runnable)
        # seeded: earliest clock; a put at the same instant lands before a sync
        return min(runnable, key=lambda i: (clock[i], _SEEDED_RANK[pending[i].action], i))

    # -- threaded driver -----------------------------------------------------
    def _run_threads(self, actors):
        n = len(actors)
        big_lock = threading.Lock()
        barrier = threading.Barrier(n, timeout=self.barrier_timeout)
        errors: List[BaseException] = []

        def main(i, gen):
            try:
                with big_lock:
                    ev = self._advance(gen)
                while ev is not None:
                    if ev.action == "barrier":
                        barrier.wait()
                    else:
                        time.sleep(0)
                    with big_lock:
                        self.trace.append(ev)
                        ev = self._advance(gen, resume=True)
            except threading.BrokenBarrierError:
                if not errors:
                    errors.append(DeadlockError("barrier broken or timed out"))
            except BaseException as exc:  # propagate to the caller
                errors.append(exc)
                barrier.abort()

        threads = [threading.Thread(target=main, args=(i, g), daemon=True) for i, g in enumerate(actors)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        if errors:
            first = [e for e in errors if not isinstance(e, DeadlockError)] or errors
            raise first[0]
