"""Live execution of the three trigger patterns over a bounded worker pool.

Workers are plain threads that communicate only through the staging service
and the launcher queue; emulated compute is a wall-clock busy spin (GIL
released on the numba backend) and emulated transfer is a timed wait while
holding the staging channel. The wiring and cost placement mirror
costmodel.predict step for step; disagreement between the two is what the
calibration acceptance test measures.

Pattern wiring:

* P: producer generates, checks in line (serialized into the producer), and
  puts only qualified steps; one persistent consumer drains qualified steps
  and runs the analysis kinds serially.
* C: producer puts every step; the persistent consumer checks each step and
  analyses the qualified ones, overlapping the producer's next generation.
* M: producer puts every step; a dedicated middleware checker peeks each
  arriving step; on a match it retains the entry for the subscribed tasks
  and publishes. The launcher charges one trigger latency per subscription,
  serially, then starts a fresh task that pulls its step's payload and runs
  one analysis on the worker pool.
"""

import itertools
import threading
import time
from dataclasses import dataclass, field
from queue import Queue

import numpy as np

from .errors import ConfigurationError
from .eventlog import EventLog, stage_means
from .indicator import check as indicator_check
from .simkernel import GrayScottProducer, payload_bytes
from .staging import StagingService, StepPayload, TopicSubscription
from .timing import busy_spin_ms, busy_spin_scaled_ms, precise_wait_ms
from .workload import MIB, PATTERNS

_LAUNCHER_STOP = object()

_run_ids = itertools.count(1)


@dataclass(frozen=True)
class AnalysisTaskSpec:
    """One analytics kind triggered per qualified step."""

    kind: str
    cost_per_mb: float = 0.0  # ms per MiB of input
    fixed_cost: float = 0.0  # ms per invocation
    instances: int = 1

    def __post_init__(self):
        if self.instances < 1:
            raise ConfigurationError("instances must be >= 1")
        if self.cost_per_mb < 0 or self.fixed_cost < 0:
            raise ConfigurationError("analysis costs must be >= 0")

    def duration_ms(self, size_mib):
        return self.fixed_cost + self.cost_per_mb * size_mib


@dataclass(frozen=True)
class WorkerPool:
    """Compute slots for analysis execution.

    In queueing mode tasks beyond `size` wait. In slowdown mode all runnable
    tasks execute, each stretched by max(1, r/size) and, past capacity, by a
    further (1 + (oversubscription_slowdown - 1) * (r - size)).
    """

    size: int
    mode: str = "queueing"
    oversubscription_slowdown: float = 1.0

    def __post_init__(self):
        if self.size < 1:
            raise ConfigurationError("pool size must be >= 1")
        if self.mode not in ("queueing", "slowdown"):
            raise ConfigurationError(f"unknown pool mode {self.mode!r}")
        if self.oversubscription_slowdown < 1.0:
            raise ConfigurationError("oversubscription_slowdown must be >= 1")


class TaskPool:
    """Executes submitted callables under the WorkerPool policy."""

    def __init__(self, pool):
        self.spec = pool
        self._lock = threading.Lock()
        self._runnable = 0
        self._threads = []
        self._queue = Queue()
        self._workers = []
        self._errors = []
        if pool.mode == "queueing":
            for i in range(pool.size):
                t = threading.Thread(target=self._worker_loop, daemon=True,
                                     name=f"pool-{i}")
                t.start()
                self._workers.append(t)

    # -- slowdown bookkeeping ------------------------------------------------

    def _enter(self):
        with self._lock:
            self._runnable += 1

    def _exit(self):
        with self._lock:
            self._runnable -= 1

    def runnable(self):
        with self._lock:
            return self._runnable

    def rate(self):
        r = self.runnable()
        w = self.spec.size
        if r <= w:
            return 1.0
        stretch = (r / w) * (1.0 + (self.spec.oversubscription_slowdown - 1.0) * (r - w))
        return 1.0 / stretch

    def spin(self, duration_ms):
        """Burn analysis compute under the pool's contention policy."""
        if self.spec.mode == "slowdown":
            busy_spin_scaled_ms(duration_ms, self.rate)
        else:
            busy_spin_ms(duration_ms)

    # -- submission ------------------------------------------------------------

    def submit(self, fn):
        if self.spec.mode == "queueing":
            done = threading.Event()
            self._queue.put((fn, done))
            return done
        done = threading.Event()

        def run():
            try:
                self._enter()
                try:
                    fn()
                finally:
                    self._exit()
            except BaseException as exc:  # surfaced on join
                self._errors.append(exc)
            finally:
                done.set()

        t = threading.Thread(target=run, daemon=True)
        with self._lock:
            self._threads.append(t)
        t.start()
        return done

    def _worker_loop(self):
        while True:
            item = self._queue.get()
            if item is None:
                return
            fn, done = item
            try:
                self._enter()
                try:
                    fn()
                finally:
                    self._exit()
            except BaseException as exc:
                self._errors.append(exc)
            finally:
                done.set()

    def join(self, pending):
        """Wait for all submitted task events, then stop workers."""
        for done in pending:
            done.wait()
        if self.spec.mode == "queueing":
            for _ in self._workers:
                self._queue.put(None)
            for t in self._workers:
                t.join()
        else:
            with self._lock:
                threads = list(self._threads)
            for t in threads:
                t.join()
        if self._errors:
            raise self._errors[0]


def launch_task(spec, step, pool, body=None):
    """Enqueue one analysis task; it begins when the pool admits it."""
    fn = body if body is not None else (lambda: None)
    return pool.submit(fn)


@dataclass
class RunReport:
    run_id: str
    pattern: str
    makespan_ms: float
    stage_means: dict
    bytes_transferred: int
    analyses_completed: int
    qualified_steps: int
    steps: int
    payload_bytes: int
    instances: int
    pool_size: int
    events: EventLog

    def to_csv(self):
        return self.events.to_csv(self.run_id, self.pattern)


def measure_stage_times(report):
    """Per-stage mean durations; absent stages are omitted, empty log errors."""
    return stage_means(report.events)


class _SyntheticCosts:
    def __init__(self, workload, profile):
        self.profile = profile
        self.size_mib = workload.size_mib
        self.gen_ms = profile.gen(self.size_mib)
        self.check_ms = profile.check(self.size_mib)
        self.analysis_ms = profile.analysis(self.size_mib)
        self.sigma_ms = profile.trigger_latency_ms
        self.transfer = (profile.io.fixed_ms, profile.io.ms_per_mib)


class _Runner:
    """One live run of one pattern."""

    def __init__(self, workload, pattern, profile=None):
        from .costmodel import preset_profile

        self.workload = workload
        self.pattern = pattern.upper()
        if self.pattern not in PATTERNS:
            raise ConfigurationError(f"unknown pattern {pattern!r}")
        self.synthetic = workload.cost_source == "synthetic"
        self.profile = profile or (preset_profile(workload.preset) if self.synthetic else None)
        self.schedule = workload.schedule() if self.synthetic else None
        self.k = workload.instances
        self.pool_size = workload.effective_pool()
        self.log = EventLog()
        self._t0 = None
        self._errors = []
        if self.synthetic:
            self.costs = _SyntheticCosts(workload, self.profile)
            transfer = self.costs.transfer
            self.var = "synthetic"
        else:
            self.costs = None
            transfer = None  # real memory copy
            self.var = "u"
        self.staging = StagingService(
            capacity_per_variable=4,
            transfer_cost=transfer,
            event_log=self.log,
            clock=self._clock,
        )
        mode = workload.pool_mode
        self.pool = TaskPool(WorkerPool(self.pool_size, mode,
                                        workload.oversubscription_slowdown))
        self._analysis_count = itertools.count()
        self._analyses_done = 0
        self._qualified_live = set()
        self._task_events = []
        self._task_events_lock = threading.Lock()

    def _clock(self):
        if self._t0 is None:
            return 0.0
        return (time.perf_counter() - self._t0) * 1000.0

    def _guard(self, fn, name):
        def wrapped():
            try:
                fn()
            except BaseException as exc:
                self._errors.append((name, exc))
                self.staging.abort()  # fail blocked peers instead of hanging
                self.staging.trigger_queue.put(_LAUNCHER_STOP)

        return wrapped

    # -- producer ----------------------------------------------------------

    def _gen_payload(self, step):
        if self.synthetic:
            t_start = self._clock()
            t0 = time.perf_counter()
            data = payload_bytes(self.workload.seed, step, self.workload.payload_bytes)
            spent = (time.perf_counter() - t0) * 1000.0
            busy_spin_ms(self.costs.gen_ms - spent)
            self.log.add("compute", "gen", step, "", 0, t_start, self._clock())
            return data, None
        t_start = self._clock()
        self._gs.advance()
        payload = self._gs.payload()
        self.log.add("compute", "gen", step, "", 0, t_start, self._clock())
        return payload.data, payload

    def _producer_check(self, step, data):
        t_start = self._clock()
        if self.synthetic:
            busy_spin_ms(self.costs.check_ms)
            qualified = self.schedule.is_qualified(step)
        else:
            gs = self.workload.gray_scott
            field = np.frombuffer(data.tobytes(), dtype="<f8")
            qualified = indicator_check(
                field, gs.threshold, gs.direction, bin_count=gs.bin_count,
                step_index=step,
            ).qualified
        self.log.add("compute", "check", step, "", 0, t_start, self._clock())
        if qualified:
            self._qualified_live.add(step)
        return qualified

    def _producer(self):
        n = self.workload.steps
        for step in range(1, n + 1):
            data, _ = self._gen_payload(step)
            if self.pattern == "P":
                if not self._producer_check(step, data):
                    continue
                hint = True
            else:
                hint = None
            self.staging.put(StepPayload(step, self.var, data, hint,
                                         self._clock()))
        self.staging.mark_end_of_stream(self.var)

    # -- consumer (P, C) -----------------------------------------------------

    def _consumer_check(self, step, data):
        return self._producer_check(step, data)

    def _run_analyses_inline(self, step):
        size_mib = self.workload.payload_bytes / MIB
        for j in range(1, self.k + 1):
            t_start = self._clock()
            busy_spin_ms(self._analysis_ms(size_mib))
            self.log.add("compute", "analysis", step, f"analysis-{j}", 0,
                         t_start, self._clock())
            self._analyses_done += 1

    def _analysis_ms(self, size_mib):
        if self.synthetic:
            return self.costs.analysis_ms
        return self.profile.analysis(size_mib) if self.profile else 0.0

    def _consumer(self):
        cursor = 0
        only_q = self.pattern == "P"
        while True:
            payload = self.staging.get_next(self.var, cursor, only_q)
            if payload is None:
                return
            cursor = payload.step_index
            if self.pattern == "C":
                if not self._consumer_check(payload.step_index, payload.data):
                    continue
            elif self.pattern == "P" and not self.synthetic:
                self._qualified_live.add(payload.step_index)
            self._run_analyses_inline(payload.step_index)

    # -- middleware (M) --------------------------------------------------------

    def _checker(self):
        cursor = 0
        topic = f"qualified/{self.var}"
        while True:
            payload = self.staging.peek_next(self.var, cursor)
            if payload is None:
                break
            step = payload.step_index
            cursor = step
            qualified = self._producer_check(step, payload.data)
            if qualified:
                self.staging.retain(self.var, step, self.k)
                self.staging.publish(topic, step)
                self.staging.release(self.var, step)
            else:
                self.staging.release(self.var, step)
        self.staging.trigger_queue.put(_LAUNCHER_STOP)

    def _launcher(self):
        size_mib = self.workload.payload_bytes / MIB
        while True:
            item = self.staging.trigger_queue.get()
            if item is _LAUNCHER_STOP:
                return
            sub, step = item
            t_start = self._clock()
            if self.synthetic:
                sigma = self.costs.sigma_ms
            else:
                sigma = self.profile.trigger_latency_ms if self.profile else 5.0
            precise_wait_ms(sigma)
            spec = sub.action
            self.log.add("trigger", "trigger", step, spec.kind, 0,
                         t_start, self._clock())
            done = launch_task(spec, step, self.pool,
                               body=self._task_body(spec, step, size_mib))
            with self._task_events_lock:
                self._task_events.append(done)

    def _task_body(self, spec, step, size_mib):
        def body():
            self.staging.pull(self.var, step, kind=spec.kind)
            t_start = self._clock()
            duration = self._analysis_ms(size_mib)
            self.pool.spin(duration)
            self.log.add("compute", "analysis", step, spec.kind, 0,
                         t_start, self._clock())
            with self._task_events_lock:
                self._analyses_done += 1

        return body

    # -- run ----------------------------------------------------------------

    def run(self):
        from . import _kernels
        from .timing import spin_iters_per_ms

        _kernels.warmup()
        spin_iters_per_ms()
        self._t0 = time.perf_counter()
        if not self.synthetic:
            gs = self.workload.gray_scott
            self._gs = GrayScottProducer(gs.dims, gs.params(),
                                         seed=self.workload.seed, variable=self.var)
        if self.pattern == "M":
            for j in range(1, self.k + 1):
                self.staging.subscribe(TopicSubscription(
                    f"qualified/{self.var}",
                    AnalysisTaskSpec(kind=f"analysis-{j}"),
                ))
        threads = [threading.Thread(target=self._guard(self._producer, "producer"),
                                    name="producer")]
        if self.pattern in ("P", "C"):
            threads.append(threading.Thread(
                target=self._guard(self._consumer, "consumer"), name="consumer"))
        else:
            threads.append(threading.Thread(
                target=self._guard(self._checker, "checker"), name="checker"))
            threads.append(threading.Thread(
                target=self._guard(self._launcher, "launcher"), name="launcher"))
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        with self._task_events_lock:
            pending = list(self._task_events)
        self.pool.join(pending)
        if self._errors:
            name, exc = self._errors[0]
            raise RuntimeError(f"worker {name!r} failed: {exc}") from exc
        return self._report()

    def _report(self):
        rows = self.log.rows()
        gen_starts = [r.t_start_ms for r in rows if r.stage == "gen"]
        if not gen_starts:
            raise RuntimeError("run produced no generation events")
        makespan = max(r.t_end_ms for r in rows) - min(gen_starts)
        stats = self.staging.stats()
        bytes_transferred = stats.bytes_put + (stats.bytes_got if self.pattern == "M" else 0)
        if self.synthetic:
            qualified = len(self.schedule)
        else:
            qualified = len(self._qualified_live)
        return RunReport(
            run_id=f"live-{self.pattern.lower()}-{next(_run_ids)}",
            pattern=self.pattern,
            makespan_ms=makespan,
            stage_means=stage_means(self.log),
            bytes_transferred=int(bytes_transferred),
            analyses_completed=self._analyses_done,
            qualified_steps=qualified,
            steps=self.workload.steps,
            payload_bytes=self.workload.payload_bytes,
            instances=self.k,
            pool_size=self.pool_size,
            events=self.log,
        )


def run_pattern(workload, pattern, profile=None):
    return _Runner(workload, pattern, profile).run()


def run_pattern_p(workload, profile=None):
    """Producer-responsible: check in line with generation, ship only
    qualified steps."""
    return run_pattern(workload, "P", profile)


def run_pattern_c(workload, profile=None):
    """Consumer-responsible: ship everything, check at the consumer."""
    return run_pattern(workload, "C", profile)


def run_pattern_m(workload, profile=None):
    """Middleware-responsible: check in the staging service, trigger a fresh
    task per subscription per qualified step."""
    return run_pattern(workload, "M", profile)
