"""Pool-based active labeling: seed randomly, then label where the model
is least sure.

A session draws a random seed batch, collects human labels, retrains the
ensemble when a batch completes, and surfaces the pool messages whose
predicted urgency probability sits closest to 50%. Every state change is
appended to a JSON-lines event log, so a session can be replayed or
resumed after a disconnect without losing a single label.
"""

from __future__ import annotations

import json
import uuid
from dataclasses import dataclass

import numpy as np

from . import linear
from .config import derive_seed
from .ensemble import (
    DEFAULT_CV_FOLDS,
    DEFAULT_REG_GRID,
    EnsembleModel,
    Featurizer,
    LabeledDataset,
    fit_members,
)
from .preprocess import DEFAULT_DROP_RULES, DropRules, Message, TokenizedMessage, tokenize


@dataclass(frozen=True)
class Schedule:
    seed_size: int = 100
    batch_size: int = 100
    target_total: int = 400

    def __post_init__(self):
        if self.seed_size < 1 or self.batch_size < 1:
            raise ValueError("seed and batch sizes must be positive")
        if self.target_total < self.seed_size:
            raise ValueError("target total must be at least the seed size")


class LabelSubmissionError(ValueError):
    """Submission rejected; ``ids`` lists the offending message ids."""

    def __init__(self, message: str, ids: list[str]):
        super().__init__(f"{message}: {sorted(ids)}")
        self.ids = sorted(ids)


class NoModelError(ValueError):
    """No trained model yet: the seed batch must be labeled first."""


class ActiveSession:
    """One labeling session over a fixed pool of unlabeled messages."""

    def __init__(
        self,
        pool: list[Message],
        schedule: Schedule,
        featurizer: Featurizer,
        seed: int = 7,
        session_id: str | None = None,
        log_path: str | None = None,
        reg_grid: tuple[float, ...] = DEFAULT_REG_GRID,
        cv_folds: int = DEFAULT_CV_FOLDS,
        mode: str = linear.LOGISTIC,
        rules: DropRules = DEFAULT_DROP_RULES,
        _replaying: bool = False,
    ):
        if len(pool) < schedule.target_total:
            raise ValueError(
                f"pool ({len(pool)}) is smaller than the schedule total "
                f"({schedule.target_total})"
            )
        ids = [m.id for m in pool]
        if len(set(ids)) != len(ids):
            raise ValueError("pool contains duplicate message ids")
        self.schedule = schedule
        self.featurizer = featurizer
        self.seed = seed
        self.session_id = session_id or uuid.uuid4().hex[:12]
        self.log_path = log_path
        self.reg_grid = tuple(reg_grid)
        self.cv_folds = cv_folds
        self.mode = mode
        self.rules = rules

        self.initial_pool_size = len(pool)
        self.pool: dict[str, Message] = {m.id: m for m in pool}
        self._tokenized: dict[str, TokenizedMessage] = {
            m.id: tokenize(m, rules) for m in pool
        }
        self.pending: dict[str, Message] = {}
        self.labeled: list[Message] = []
        self.round = 0
        self.model_version = 0
        self.current_model: EnsembleModel | None = None

        if not _replaying:
            self._log(
                {
                    "event": "session_init",
                    "session_id": self.session_id,
                    "seed": seed,
                    "schedule": {
                        "seed_size": schedule.seed_size,
                        "batch_size": schedule.batch_size,
                        "target_total": schedule.target_total,
                    },
                    "pool_size": len(pool),
                }
            )
            rng = np.random.default_rng(derive_seed(seed, "seed-batch"))
            drawn = rng.choice(np.array(sorted(self.pool)), size=schedule.seed_size, replace=False)
            self._move_to_pending([str(i) for i in drawn])
            self._log({"event": "seed_drawn", "ids": list(self.pending)})

    # -- state inspection ------------------------------------------------

    @property
    def complete(self) -> bool:
        return len(self.labeled) >= self.schedule.target_total

    def status(self) -> dict:
        return {
            "session_id": self.session_id,
            "round": self.round,
            "model_version": self.model_version,
            "labeled_count": len(self.labeled),
            "pending_count": len(self.pending),
            "pool_count": len(self.pool),
            "target_total": self.schedule.target_total,
            "complete": self.complete,
        }

    def pending_batch(self) -> list[Message]:
        return list(self.pending.values())

    def pending_scores(self) -> dict[str, float | None]:
        if self.current_model is None:
            return {mid: None for mid in self.pending}
        return {
            mid: self.current_model.score_tokenized(self._tokenized[mid])
            for mid in self.pending
        }

    def export_labeled(self) -> list[Message]:
        return list(self.labeled)

    # -- the labeling loop -----------------------------------------------

    def next_batch(self, k: int) -> list[Message]:
        """The k pool messages whose score is closest to 0.5, most ambiguous
        first; ties break toward the ascending id."""
        if self.complete:
            raise ValueError("session is complete; no further batches")
        if self.current_model is None:
            raise NoModelError(
                "no model trained yet: label the seed batch to trigger the first training"
            )
        if k > len(self.pool):
            raise ValueError(f"requested {k} messages but pool has {len(self.pool)}")
        ranked = sorted(
            self.pool.values(),
            key=lambda m: (
                abs(self.current_model.score_tokenized(self._tokenized[m.id]) - 0.5),
                m.id,
            ),
        )
        return ranked[:k]

    def submit_labels(self, labels: list[tuple[str, int]]) -> dict:
        """Record labels for pending messages; retrains when the batch completes.

        Returns the post-submission status. Rejects (listing ids) any
        duplicate ids within the submission and any id not pending.
        """
        ids = [mid for mid, _ in labels]
        dupes = [mid for mid in set(ids) if ids.count(mid) > 1]
        if dupes:
            raise LabelSubmissionError("duplicate ids in one submission", dupes)
        unknown = [mid for mid in ids if mid not in self.pending]
        if unknown:
            raise LabelSubmissionError("ids not pending a label", unknown)
        bad = [mid for mid, lab in labels if lab not in (0, 1)]
        if bad:
            raise LabelSubmissionError("labels must be 0 or 1", bad)

        for mid, lab in labels:
            msg = self.pending.pop(mid)
            self.labeled.append(Message(id=msg.id, text=msg.text, label=int(lab)))
        self._log({"event": "labels_submitted", "labels": [[m, int(l)] for m, l in labels]})
        if not self.pending:
            self._complete_round()
        return self.status()

    def _complete_round(self) -> None:
        self.round += 1
        self._retrain()
        if self.complete:
            self._log({"event": "complete", "round": self.round})
            return
        remaining = self.schedule.target_total - len(self.labeled)
        k = min(self.schedule.batch_size, remaining)
        if self.current_model is not None:
            batch = self.next_batch(k)
        else:
            # Labels so far are single-class: no trainable model, fall back
            # to a random draw so the session can keep moving.
            rng = np.random.default_rng(derive_seed(self.seed, "fallback-batch", self.round))
            chosen = rng.choice(np.array(sorted(self.pool)), size=k, replace=False)
            batch = [self.pool[str(i)] for i in chosen]
        self._move_to_pending([m.id for m in batch])
        self._log({"event": "batch_drawn", "round": self.round, "ids": list(self.pending)})

    def _retrain(self) -> None:
        dataset = LabeledDataset(
            items=[(m, self._tokenized.get(m.id) or tokenize(m, self.rules)) for m in self.labeled]
        )
        n0, n1 = dataset.class_counts()
        if n0 == 0 or n1 == 0:
            self._log({"event": "retrain_skipped", "reason": "single-class labels"})
            return
        sets = self.featurizer.available()
        member_map = fit_members(
            dataset,
            self.featurizer,
            sets,
            self.reg_grid,
            self.cv_folds,
            self.mode,
            seed=derive_seed(self.seed, "retrain", self.round),
        )
        members = [member_map[fs] for fs in sets]
        weights = np.full(len(members), 1.0 / len(members))
        self.current_model = EnsembleModel(
            members=members, member_weights=weights, threshold=0.5,
            featurizer=self.featurizer, rules=self.rules,
        )
        self.model_version += 1
        self._log(
            {"event": "model_retrained", "model_version": self.model_version, "round": self.round}
        )

    # -- persistence -----------------------------------------------------

    def _move_to_pending(self, ids: list[str]) -> None:
        for mid in ids:
            self.pending[mid] = self.pool.pop(mid)

    def _log(self, event: dict) -> None:
        if self.log_path is None:
            return
        with open(self.log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event) + "\n")
            fh.flush()

    @classmethod
    def replay(
        cls,
        pool: list[Message],
        events: list[dict],
        featurizer: Featurizer,
        log_path: str | None = None,
        reg_grid: tuple[float, ...] = DEFAULT_REG_GRID,
        cv_folds: int = DEFAULT_CV_FOLDS,
        mode: str = linear.LOGISTIC,
        rules: DropRules = DEFAULT_DROP_RULES,
        retrain: bool = True,
    ) -> "ActiveSession":
        """Rebuild a session from its event log.

        Labeled and pending sets come verbatim from the log; the model is
        retrained once at the end (deterministic, so it matches the state
        at the last ``model_retrained`` event).
        """
        if not events or events[0].get("event") != "session_init":
            raise ValueError("event log must start with session_init")
        init = events[0]
        schedule = Schedule(**init["schedule"])
        session = cls(
            pool,
            schedule,
            featurizer,
            seed=init["seed"],
            session_id=init["session_id"],
            log_path=None,
            reg_grid=reg_grid,
            cv_folds=cv_folds,
            mode=mode,
            rules=rules,
            _replaying=True,
        )
        version = 0
        rounds = 0
        last_retrain: tuple[int, int] | None = None  # (labeled count, round)
        for event in events[1:]:
            kind = event.get("event")
            if kind in ("seed_drawn", "batch_drawn"):
                session.pending = {}
                session._move_to_pending(event["ids"])
                if kind == "batch_drawn":
                    rounds = event["round"]
            elif kind == "labels_submitted":
                for mid, lab in event["labels"]:
                    msg = session.pending.pop(mid)
                    session.labeled.append(Message(id=msg.id, text=msg.text, label=int(lab)))
            elif kind == "model_retrained":
                version = event["model_version"]
                rounds = event["round"]
                last_retrain = (len(session.labeled), event["round"])
            elif kind == "complete":
                rounds = event["round"]
        session.round = rounds
        session.model_version = version
        session.log_path = log_path
        if retrain and last_retrain is not None:
            session._rebuild_model(*last_retrain)
        return session

    def _rebuild_model(self, labeled_count: int, at_round: int) -> None:
        # Same data prefix and derived seed as the original retrain, so the
        # rebuilt model matches the logged one exactly.
        dataset = LabeledDataset(
            items=[
                (m, self._tokenized.get(m.id) or tokenize(m, self.rules))
                for m in self.labeled[:labeled_count]
            ]
        )
        sets = self.featurizer.available()
        member_map = fit_members(
            dataset,
            self.featurizer,
            sets,
            self.reg_grid,
            self.cv_folds,
            self.mode,
            seed=derive_seed(self.seed, "retrain", at_round),
        )
        members = [member_map[fs] for fs in sets]
        weights = np.full(len(members), 1.0 / len(members))
        self.current_model = EnsembleModel(
            members=members, member_weights=weights, threshold=0.5,
            featurizer=self.featurizer, rules=self.rules,
        )


def read_event_log(path: str) -> list[dict]:
    events = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                events.append(json.loads(line))
    return events
