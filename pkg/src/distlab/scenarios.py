"""Multi-trial experiment runner and CSV output."""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from os import PathLike
from typing import Sequence

import numpy as np

from . import blocks as bl
from . import engine as en
from . import problem as pb
from .graph import LaplacianGraph, fig2_graph, normalize

STEPSIZE = 0.25

N_AGENTS = 5
DIMENSION = 3
DEFAULT_TRIALS = 100
CSV_HEADER = ["scenario", "variant", "trial", "iteration", "e_opt", "e_con", "e_total"]
PRESETS = ("fig6", "fig7", "fig10", "fig13")


def default_graph() -> LaplacianGraph:
    """The five-agent graph rescaled to unit maximum degree.

    With the raw weights (largest Laplacian eigenvalue 1.5) the gradient
    method at stepsize 0.25 and the heavy-ball method both lose closed-loop
    stability through the P estimators' negative transient poles.
    """
    return normalize(fig2_graph())


@dataclass(frozen=True)
class Variant:
    name: str
    form: en.AlgorithmForm


@dataclass
class ScenarioConfig:
    scenario: str = "custom"
    trials: int = DEFAULT_TRIALS
    iterations: int = 1000
    seed: int = 0
    variants: list = field(default_factory=list)
    events: list = field(default_factory=list)
    graph: LaplacianGraph = None
    dimension: int = DIMENSION
    metrics: tuple = ("e_total",)

    def __post_init__(self):
        if self.graph is None:
            self.graph = default_graph()

    def validate(self) -> None:
        if self.trials < 1:
            raise ValueError(f"trials: must be at least 1, got {self.trials}")
        if self.iterations < 1:
            raise ValueError(f"iterations: must be at least 1, got {self.iterations}")
        if self.dimension < 1:
            raise ValueError(f"dimension: must be at least 1, got {self.dimension}")
        if not self.variants:
            raise ValueError("variants: at least one variant is required")
        names = [v.name for v in self.variants]
        if len(set(names)) != len(names):
            raise ValueError(f"variants: duplicate names in {names}")
        for e in self.events:
            if not 0 <= e.agent < self.graph.n:
                raise ValueError(f"events: agent {e.agent} out of range for {self.graph.n} agents")
            if e.iteration < 0:
                raise ValueError(f"events: negative iteration {e.iteration}")


def preset(name: str, trials: int | None = None, iterations: int | None = None, seed: int = 0) -> ScenarioConfig:
    P = bl.p_estimator()
    grad = bl.gradient_method(STEPSIZE)
    factored = Variant("factored", en.Factored(P, grad, P))
    general = Variant("general", en.General(grad, bl.series_estimator(P, P)))
    if name == "fig6":
        cfg = ScenarioConfig(name, variants=[general], iterations=1000, metrics=("e_opt", "e_con"))
    elif name == "fig7":
        cfg = ScenarioConfig(name, variants=[general, factored], iterations=100_000)
    elif name == "fig10":
        acc = bl.accelerated_estimator(0.1, 1.1)
        fast = en.Factored(acc, bl.general_first_order(0.1, 0.8, 0.0), acc)
        cfg = ScenarioConfig(
            name, variants=[Variant("baseline", factored.form), Variant("accelerated", fast)], iterations=1000
        )
    elif name == "fig13":
        pi = en.Factored(P, grad, bl.pi_estimator(1.0, 0.5, 0.95))
        cfg = ScenarioConfig(
            name,
            variants=[Variant("P-right", factored.form), Variant("PI-right", pi)],
            events=[en.NetworkEvent(200, 0)],
            iterations=2000,
        )
    else:
        raise ValueError(f"scenario: unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    if trials is not None:
        cfg.trials = trials
    if iterations is not None:
        cfg.iterations = iterations
    cfg.seed = seed
    return cfg


def trial_seed(master: int, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([master, trial])


def run_trial(cfg: ScenarioConfig, trial: int) -> list[pb.ErrorTrace]:
    """Sample one problem and push it through every variant."""
    problem = pb.sample(cfg.graph.n, cfg.dimension, trial_seed(cfg.seed, trial))
    out = []
    for v in cfg.variants:
        a = en.build(v.form, cfg.graph, cfg.dimension)
        tr = en.run(a, problem, cfg.iterations, cfg.events)
        tr.meta.update(scenario=cfg.scenario, variant=v.name, trial=trial)
        out.append(tr)
    return out


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    traces: list  # per-trial, ordered by (variant, trial)
    means: list  # one per variant, in declaration order

    def mean(self, variant: str) -> pb.ErrorTrace:
        return next(m for m in self.means if m.meta["variant"] == variant)

    def trials_of(self, variant: str) -> list[pb.ErrorTrace]:
        return [t for t in self.traces if t.meta["variant"] == variant]


def mean_trace(traces: Sequence[pb.ErrorTrace], **meta) -> pb.ErrorTrace:
    return pb.ErrorTrace(
        np.mean([t.e_opt for t in traces], axis=0),
        np.mean([t.e_con for t in traces], axis=0),
        dict(meta, trial="mean"),
        total=np.mean([t.e_total for t in traces], axis=0),
    )


def run_scenario(cfg: ScenarioConfig, workers: int = 1) -> ScenarioResult:
    cfg.validate()
    job = partial(run_trial, cfg)
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            batches = list(pool.map(job, range(cfg.trials)))
    else:
        batches = [job(t) for t in range(cfg.trials)]
    rank = {v.name: i for i, v in enumerate(cfg.variants)}
    traces = sorted((t for b in batches for t in b), key=lambda t: (rank[t.meta["variant"]], t.meta["trial"]))
    means = [
        mean_trace([t for t in traces if t.meta["variant"] == v.name], scenario=cfg.scenario, variant=v.name)
        for v in cfg.variants
    ]
    return ScenarioResult(cfg, traces, means)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def emit_csv(traces: Sequence[pb.ErrorTrace], path: str | PathLike) -> None:
    """One row per record; traces are written in the order given."""
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for t in traces:
                m = t.meta
                tot = t.e_total
                for k in range(len(t)):
                    w.writerow(
                        [m.get("scenario", ""), m.get("variant", ""), m.get("trial", ""), k,
                         _fmt(t.e_opt[k]), _fmt(t.e_con[k]), _fmt(tot[k])]
                    )
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc


def result_rows(result: ScenarioResult) -> list[pb.ErrorTrace]:
    """Per-trial traces followed by the mean, for each variant in turn."""
    out = []
    for v in result.config.variants:
        out.extend(result.trials_of(v.name))
        out.append(result.mean(v.name))
    return out


def read_csv(path: str | PathLike) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
