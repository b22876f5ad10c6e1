"""Per-stage wall-clock accounting."""

from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import dataclass, field


@dataclass
class StageTimer:
    seconds: dict[str, float] = field(default_factory=dict)

    @contextmanager
    def __call__(self, stage: str):
        t0 = time.perf_counter()
        try:
            yield self
        finally:
            self.seconds[stage] = self.seconds.get(stage, 0.0) + max(0.0, time.perf_counter() - t0)

    @property
    def total(self) -> float:
        return sum(self.seconds.values())


class NullTimer:
    """Stand-in when no timing is wanted."""

    def __call__(self, stage: str):
        return self

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False


@dataclass
class TimingReport:
    # interview -> backend -> stage -> seconds
    interviews: dict[str, dict[str, dict[str, float]]] = field(default_factory=dict)

    def add(self, interview_id: str, backend: str, timer: StageTimer) -> None:
        self.interviews.setdefault(interview_id, {})[backend] = dict(timer.seconds)

    def interview_total(self, interview_id: str, backend: str) -> float:
        return sum(self.interviews[interview_id][backend].values())

    def backend_totals(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for per in self.interviews.values():
            for backend, stages in per.items():
                out[backend] = out.get(backend, 0.0) + sum(stages.values())
        return out

    def to_record(self) -> dict:
        return {"interviews": {i: {b: {**s, "total": sum(s.values())} for b, s in per.items()}
                               for i, per in self.interviews.items()},
                "totals": self.backend_totals()}

    def render(self) -> str:
        lines = ["interview\tbackend\tstage\tseconds"]
        for i, per in self.interviews.items():
            for b, stages in per.items():
                for s, v in stages.items():
                    lines.append(f"{i}\t{b}\t{s}\t{v:.4f}")
                lines.append(f"{i}\t{b}\ttotal\t{sum(stages.values()):.4f}")
        for b, v in self.backend_totals().items():
            lines.append(f"all\t{b}\ttotal\t{v:.4f}")
        return "\n".join(lines) + "\n"
