"""In-memory, step-addressed staging between producer and consumers, plus the
topic-match trigger registry used by the middleware pattern.

Semantics:

* ``put`` is synchronous: the producer bears the transfer cost (emulated
  bandwidth wait, or a real memory copy by default) while holding the single
  transfer channel. Puts block on a per-variable capacity bound (default 4
  resident steps), which is the pipeline backpressure.
* ``get_next`` is the persistent-consumer read: cursor-ordered, exactly-once,
  free of transfer cost (the put already moved the data to the consumer
  side). It blocks until a matching step exists or the stream ends.
* ``peek_next`` is the in-middleware read used by a checker co-located with
  the store: no byte accounting, no transfer cost.
* ``pull`` is the fresh-task read of the middleware pattern: it pays the
  transfer cost through the shared channel and is byte-accounted.

Entries are reference counted: a put inserts one reference; ``get_next``
consumes it; a middleware checker uses ``retain``/``release`` to hand a
qualified step to its triggered tasks, each of which releases one reference
via ``pull``. The last release evicts the entry and unblocks waiting puts.
"""

import threading
import time
from dataclasses import dataclass, field
from queue import Queue

import numpy as np

from .errors import ConfigurationError, DuplicateStepError, StagingError
from .timing import precise_wait_ms


@dataclass
class StepPayload:
    """One step's data blob plus metadata."""

    step_index: int
    variable: str
    data: np.ndarray  # uint8 buffer (bytes-like also accepted)
    qualified_hint: bool = None
    produced_at: float = 0.0

    def __post_init__(self):
        if self.step_index < 1:
            raise ConfigurationError("step_index must be >= 1")
        if not isinstance(self.data, np.ndarray):
            self.data = np.frombuffer(bytes(self.data), dtype=np.uint8)
        if self.data.nbytes == 0:
            raise ConfigurationError("payload must be non-empty")

    @property
    def size_bytes(self):
        return int(self.data.nbytes)


@dataclass(frozen=True)
class TopicSubscription:
    topic_pattern: str  # exact-match
    action: object  # task template, opaque to the staging layer

    def __post_init__(self):
        if not self.topic_pattern:
            raise ConfigurationError("topic_pattern must be non-empty")


@dataclass
class StagingStats:
    bytes_put: int = 0
    bytes_got: int = 0
    put_count: int = 0
    get_count: int = 0
    put_latencies_ms: list = field(default_factory=list)
    get_latencies_ms: list = field(default_factory=list)


class _Entry:
    __slots__ = ("payload", "refs")

    def __init__(self, payload, refs=1):
        self.payload = payload
        self.refs = refs


class _Stream:
    __slots__ = ("entries", "seen", "reserved", "eos")

    def __init__(self):
        self.entries = {}
        self.seen = set()
        self.reserved = 0
        self.eos = False


class StagingService:
    """Shared staging store; safe for concurrent workers."""

    def __init__(self, capacity_per_variable=4, transfer_cost=None,
                 event_log=None, clock=None):
        """``transfer_cost``: None for a real memory copy, or
        (fixed_ms, ms_per_mib) for emulated bandwidth."""
        if capacity_per_variable < 1:
            raise ConfigurationError("capacity must be >= 1")
        self.capacity = capacity_per_variable
        self.transfer_cost = transfer_cost
        self._streams = {}
        self._cond = threading.Condition()
        self._channel = threading.Lock()
        self._subs = []
        self._aborted = False
        self._stats = StagingStats()
        self._log = event_log
        self._t0 = time.perf_counter()
        self._clock = clock or (lambda: (time.perf_counter() - self._t0) * 1000.0)
        self.trigger_queue = Queue()

    # -- internals ---------------------------------------------------------

    def _stream(self, variable):
        s = self._streams.get(variable)
        if s is None:
            s = self._streams[variable] = _Stream()
        return s

    def _transfer(self, payload):
        if self.transfer_cost is None:
            return StepPayload(
                payload.step_index, payload.variable, payload.data.copy(),
                payload.qualified_hint, payload.produced_at,
            )
        fixed_ms, ms_per_mib = self.transfer_cost
        precise_wait_ms(fixed_ms + ms_per_mib * payload.size_bytes / (1024.0 * 1024.0))
        return payload

    def abort(self):
        """Fail any blocked operation; used when a worker dies mid-run."""
        with self._cond:
            self._aborted = True
            self._cond.notify_all()

    def _check_abort(self):
        if self._aborted:
            raise StagingError("staging aborted")

    def _release_locked(self, stream, step):
        entry = stream.entries[step]
        entry.refs -= 1
        if entry.refs <= 0:
            del stream.entries[step]
            self._cond.notify_all()

    def _log_event(self, event_type, stage, step, nbytes, t_start, t_end, kind=""):
        if self._log is not None:
            self._log.add(event_type, stage, step, kind, nbytes, t_start, t_end)

    # -- producer side -----------------------------------------------------

    def put(self, payload):
        """Store one step; blocks on capacity; bears the transfer cost."""
        var = payload.variable
        step = payload.step_index
        with self._cond:
            stream = self._stream(var)
            if step in stream.seen:
                raise DuplicateStepError(f"({var}, step {step}) already put")
            if stream.eos:
                raise StagingError(f"stream {var!r} already ended")
            stream.seen.add(step)
            while len(stream.entries) + stream.reserved >= self.capacity:
                self._check_abort()
                self._cond.wait()
            self._check_abort()
            stream.reserved += 1
        with self._channel:
            t_start = self._clock()
            stored = self._transfer(payload)
            t_end = self._clock()
        with self._cond:
            stream.reserved -= 1
            stream.entries[step] = _Entry(stored, refs=1)
            self._stats.bytes_put += payload.size_bytes
            self._stats.put_count += 1
            self._stats.put_latencies_ms.append(t_end - t_start)
            self._cond.notify_all()
        self._log_event("put", "io_put", step, payload.size_bytes, t_start, t_end)

    def mark_end_of_stream(self, variable):
        """Producer is done; wakes all blocked readers past the last step."""
        with self._cond:
            stream = self._stream(variable)
            stream.eos = True
            self._cond.notify_all()
        t = self._clock()
        self._log_event("eos", "io_put", max(stream.seen, default=0), 0, t, t)

    # -- consumer side -----------------------------------------------------

    def get_next(self, variable, after_step, only_qualified=False, timeout_s=None):
        """Next step past the cursor (lowest first); None at stream end.

        With ``only_qualified``, steps whose hint is not True are skipped and
        released as the cursor passes them (they are not byte-accounted).
        """
        deadline = None if timeout_s is None else time.monotonic() + timeout_s
        with self._cond:
            stream = self._stream(variable)
            while True:
                candidates = sorted(s for s in stream.entries if s > after_step)
                chosen = None
                for s in candidates:
                    if only_qualified and not stream.entries[s].payload.qualified_hint:
                        self._release_locked(stream, s)
                        continue
                    chosen = s
                    break
                if chosen is not None:
                    payload = stream.entries[chosen].payload
                    self._stats.bytes_got += payload.size_bytes
                    self._stats.get_count += 1
                    self._stats.get_latencies_ms.append(0.0)
                    self._release_locked(stream, chosen)
                    t = self._clock()
                    self._log_event("get", "io_get", chosen, payload.size_bytes, t, t)
                    return payload
                if stream.eos:
                    return None
                self._check_abort()
                if deadline is not None:
                    left = deadline - time.monotonic()
                    if left <= 0:
                        raise TimeoutError(f"get_next({variable!r}) timed out")
                    self._cond.wait(left)
                else:
                    self._cond.wait()

    def peek_next(self, variable, after_step, timeout_s=None):
        """Like get_next without filtering, byte accounting, or release."""
        deadline = None if timeout_s is None else time.monotonic() + timeout_s
        with self._cond:
            stream = self._stream(variable)
            while True:
                candidates = [s for s in stream.entries if s > after_step]
                if candidates:
                    return stream.entries[min(candidates)].payload
                if stream.eos:
                    return None
                self._check_abort()
                if deadline is not None:
                    left = deadline - time.monotonic()
                    if left <= 0:
                        raise TimeoutError(f"peek_next({variable!r}) timed out")
                    self._cond.wait(left)
                else:
                    self._cond.wait()

    def pull(self, variable, step, kind=""):
        """Fetch a retained step, paying the transfer cost; releases one ref."""
        with self._cond:
            stream = self._stream(variable)
            entry = stream.entries.get(step)
            if entry is None:
                raise StagingError(f"({variable}, step {step}) not resident")
            payload = entry.payload
        with self._channel:
            t_start = self._clock()
            fetched = self._transfer(payload)
            t_end = self._clock()
        with self._cond:
            self._stats.bytes_got += payload.size_bytes
            self._stats.get_count += 1
            self._stats.get_latencies_ms.append(t_end - t_start)
            self._release_locked(stream, step)
        self._log_event("get", "io_get", step, payload.size_bytes, t_start, t_end, kind)
        return fetched

    def retain(self, variable, step, extra_refs):
        with self._cond:
            entry = self._stream(variable).entries.get(step)
            if entry is None:
                raise StagingError(f"({variable}, step {step}) not resident")
            entry.refs += extra_refs

    def release(self, variable, step):
        with self._cond:
            stream = self._stream(variable)
            if step not in stream.entries:
                raise StagingError(f"({variable}, step {step}) not resident")
            self._release_locked(stream, step)

    def resident_steps(self, variable):
        with self._cond:
            return sorted(self._stream(variable).entries)

    # -- trigger registry ----------------------------------------------------

    def subscribe(self, sub):
        with self._cond:
            self._subs.append(sub)
            return len(self._subs) - 1

    def publish(self, topic, step_index):
        """Enqueue every matching subscription's action; returns match count."""
        with self._cond:
            matches = [s for s in self._subs if s.topic_pattern == topic]
        for sub in matches:
            self.trigger_queue.put((sub, step_index))
        t = self._clock()
        self._log_event("publish", "trigger", step_index, 0, t, t)
        return len(matches)

    def stats(self):
        with self._cond:
            return StagingStats(
                self._stats.bytes_put,
                self._stats.bytes_got,
                self._stats.put_count,
                self._stats.get_count,
                list(self._stats.put_latencies_ms),
                list(self._stats.get_latencies_ms),
            )
