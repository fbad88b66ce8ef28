"""Panel job manager that runs independent experiment points on a thread pool."""
from __future__ import annotations

import logging
import threading
import uuid
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence

log = logging.getLogger(__name__)

RunnerCallable = Callable[["PanelJob"], Any]
ListenerCallable = Callable[["PanelUpdate"], None]


class PanelStatus(str, Enum):
    QUEUED = "queued"
    RUNNING = "running"
    SUCCEEDED = "succeeded"
    FAILED = "failed"


@dataclass
class PanelJob:
    """One panel point: a label such as "eps=0.1" and the callable computing it."""

    label: str
    task: Callable[..., Any]
    params: Dict[str, Any] = field(default_factory=dict)


@dataclass
class PanelUpdate:
    """Event object delivered to listeners on state changes."""

    job_id: str
    label: str
    status: PanelStatus
    result: Any = None
    error: Optional[BaseException] = None


def run_task(job: PanelJob) -> Any:
    return job.task(**job.params)


class ExperimentManager:
    """Executes panel jobs on a bounded thread pool and reports their progress."""

    def __init__(self, runner: RunnerCallable = run_task, max_workers: int = 1) -> None:
        if max_workers < 1:
            raise ValueError("max_workers must be at least 1")
        self._runner = runner
        self._executor = ThreadPoolExecutor(max_workers=max_workers, thread_name_prefix="panel")
        self._lock = threading.Lock()
        self._jobs: Dict[str, List[PanelUpdate]] = {}
        self._futures: Dict[str, Future] = {}
        self._listeners: List[ListenerCallable] = []
        self._job_listeners: Dict[str, List[ListenerCallable]] = {}

    def __enter__(self) -> "ExperimentManager":
        return self

    def __exit__(self, *_: object) -> None:
        self.shutdown()

    # ------------------------------------------------------------------
    def add_listener(self, listener: ListenerCallable) -> None:
        """Receive updates for every job submitted from now on."""
        with self._lock:
            self._listeners.append(listener)

    def submit(self, job: PanelJob) -> str:
        job_id = uuid.uuid4().hex
        with self._lock:
            self._jobs[job_id] = []
            self._job_listeners.setdefault(job_id, [])
        self._emit(PanelUpdate(job_id=job_id, label=job.label, status=PanelStatus.QUEUED))
        future = self._executor.submit(self._run_job, job_id, job)
        with self._lock:
            self._futures[job_id] = future
        return job_id

    def subscribe(self, job_id: str, listener: ListenerCallable) -> None:
        with self._lock:
            self._job_listeners.setdefault(job_id, []).append(listener)
            snapshots = list(self._jobs.get(job_id, []))
        for update in snapshots:
            listener(update)

    def get_status(self, job_id: str) -> PanelStatus:
        return self._latest(job_id).status

    def get_result(self, job_id: str) -> Any:
        return self._latest(job_id).result

    def wait(self, job_id: str) -> Any:
        """Block until the job finishes; re-raise its exception if it failed."""
        with self._lock:
            future = self._futures.get(job_id)
        if future is None:
            raise KeyError(f"Unknown panel job id {job_id}")
        future.result()
        update = self._latest(job_id)
        if update.status is PanelStatus.FAILED and update.error is not None:
            raise update.error
        return update.result

    def run_all(self, jobs: Sequence[PanelJob]) -> list[Any]:
        """Submit every job and return results in submission order."""
        job_ids = [self.submit(job) for job in jobs]
        return [self.wait(job_id) for job_id in job_ids]

    def shutdown(self) -> None:
        self._executor.shutdown(wait=True)

    # ------------------------------------------------------------------
    def _latest(self, job_id: str) -> PanelUpdate:
        with self._lock:
            updates = self._jobs.get(job_id)
        if not updates:
            raise KeyError(f"Unknown panel job id {job_id}")
        return updates[-1]

    def _run_job(self, job_id: str, job: PanelJob) -> None:
        self._emit(PanelUpdate(job_id=job_id, label=job.label, status=PanelStatus.RUNNING))
        try:
            result = self._runner(job)
        except Exception as exc:
            log.debug("panel job %s failed: %s", job.label, exc)
            self._emit(PanelUpdate(job_id=job_id, label=job.label, status=PanelStatus.FAILED, error=exc))
            return
        self._emit(PanelUpdate(job_id=job_id, label=job.label, status=PanelStatus.SUCCEEDED, result=result))

    def _emit(self, update: PanelUpdate) -> None:
        with self._lock:
            self._jobs.setdefault(update.job_id, []).append(update)
            listeners = list(self._listeners) + list(self._job_listeners.get(update.job_id, []))
        for listener in listeners:
            listener(update)


__all__ = [
    "ExperimentManager",
    "PanelJob",
    "PanelStatus",
    "PanelUpdate",
    "run_task",
]
