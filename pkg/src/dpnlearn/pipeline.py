"""End-to-end learning and the experiment sweep behind the CLI."""
from __future__ import annotations

import configparser
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field


from .dataset import SequenceDataset, apply_regime, parse_regime
from .metrics import hamming_breakdown, relative_logloss
from .model import Dpn, DpnStructure, VariableSpec
from .scoring import BDE, BIC, ScoreConfig
from .search import SearchConstraints, persistence_arcs
from .sem import (
    NOISY_OR,
    TABLE,
    SemConfig,
    add_switch,
    hidden_init,
    learn_complete,
    random_params,
    structural_em,
    switch_p_on,
)
from .simulation import make_reference_model, pathway_to_dpn, sample

SWITCH = "S"


@dataclass(frozen=True)
class LearnOptions:
    score: str = BIC
    cpd_kind: str = TABLE
    hidden: int = 0
    hidden_cardinality: int = 2
    forced_persistence: bool = False
    inter_slice_only: bool = False
    max_parents: int | None = 5
    seed: int = 0
    restarts: int = 1
    bde_ess: float = 1.0
    prior_dpn: Dpn | None = None
    edge_penalty: float = 0.0
    switch: bool = False
    p_on: float | None = None
    max_outer_iterations: int = 30
    inner_em_iterations: int = 10
    tolerance: float = 1e-6

    def score_config(self) -> ScoreConfig:
        if self.score == BDE:
            return ScoreConfig(BDE, self.prior_dpn, self.bde_ess, self.bde_ess, self.edge_penalty)
        return ScoreConfig(BIC)


@dataclass
class LearnResult:
    dpn: Dpn
    score: float
    method: str
    trace: list = field(default_factory=list)
    iterations: int = 0
    restart_scores: list = field(default_factory=list)
    diagnostics: object = None

    def log_record(self) -> dict:
        rec = {
            "method": self.method,
            "score": self.score,
            "score_trace": self.trace,
            "iterations": self.iterations,
            "restart_scores": self.restart_scores,
        }
        d = self.diagnostics
        if d is not None:
            rec["loglik_trace"] = d.loglik
            rec["expected_gap"] = d.expected_gap
            rec["converged"] = d.converged
            rec["bound_checks"] = len(d.bound_checks)
            rec["bound_violations"] = sum(not b.holds for b in d.bound_checks)
        return rec


def _constraints(names, opts: LearnOptions) -> SearchConstraints:
    forced = persistence_arcs(names) if opts.forced_persistence else frozenset()
    return SearchConstraints(opts.max_parents, forced, frozenset(), not opts.inter_slice_only)


def _initial(data: SequenceDataset, opts: LearnOptions, constraints, seed) -> Dpn:
    observed = [v for v in data.variables if not v.hidden]
    if opts.hidden > 0:
        structure = hidden_init(observed, opts.hidden, opts.hidden_cardinality, seed).structure
    else:
        structure = DpnStructure(tuple(VariableSpec(v.name, v.cardinality, v.role) for v in data.variables))
    structure = constraints.apply_forced(structure)
    strict = opts.forced_persistence and opts.cpd_kind == NOISY_OR
    dpn = random_params(structure, seed, opts.cpd_kind, strict)
    if opts.switch:
        dpn = add_switch(dpn, opts.p_on if opts.p_on is not None else switch_p_on(), SWITCH)
    return dpn


def learn(data: SequenceDataset, opts: LearnOptions | None = None) -> LearnResult:
    """Count and search for complete data; Structural EM otherwise.

    With several restarts the best final score wins. Under forced
    persistence, noisy-OR persistence parameters are held at 0.
    """
    opts = opts or LearnOptions()
    names = [v.name for v in data.variables if not v.hidden]
    constraints = _constraints(names, opts)
    strict = opts.forced_persistence and opts.cpd_kind == NOISY_OR
    if data.is_complete() and opts.hidden == 0 and not opts.switch:
        structure = DpnStructure(data.variables)
        dpn, res = learn_complete(data, structure, opts.score_config(), constraints, opts.cpd_kind, strict)
        return LearnResult(dpn, res.score, "search", res.trace, len(res.moves), [res.score])
    best = None
    scores = []
    for r in range(max(1, opts.restarts)):
        seed = opts.seed + r
        init = _initial(data, opts, constraints, seed)
        cfg = SemConfig(
            max_outer_iterations=opts.max_outer_iterations,
            inner_em_iterations=opts.inner_em_iterations,
            loglik_tolerance=opts.tolerance,
            score_config=opts.score_config(),
            constraints=constraints,
            rng_seed=seed,
            cpd_kind=opts.cpd_kind,
            strict_persistence=strict,
            switch=SWITCH if opts.switch else None,
        )
        dpn, diag = structural_em(init, data, cfg)
        scores.append(diag.final_score)
        if best is None or diag.final_score > best[1].final_score:
            best = (dpn, diag)
    dpn, diag = best
    return LearnResult(dpn, diag.final_score, "structural-em", diag.score, diag.iterations, scores, diag)


# ---------------------------------------------------------------------------
# experiment sweep

CSV_COLUMNS = ("regime", "N_seq", "cpd_kind", "hamming", "rel_logloss", "seed",
               "hamming_prior", "hamming_transition")


@dataclass(frozen=True)
class ExperimentConfig:
    sizes: tuple = (10, 30, 100)
    regimes: tuple = ("hide:0", "hide:0.2", "hide:0.4")
    cpd_kinds: tuple = (TABLE, NOISY_OR)
    seeds: tuple = (0, 1, 2, 3, 4)
    T: int = 20
    test_sequences: int = 100
    test_seed: int = 1000
    spontaneous: float | None = None
    switch: bool = False
    restarts: int = 1
    max_parents: int | None = 5
    jobs: int = 1

    def cells(self) -> list:
        return list(itertools.product(self.regimes, self.sizes, self.cpd_kinds, self.seeds))


def load_experiment_config(path) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if not cp.read(path):
        raise FileNotFoundError(path)
    sec = cp["experiment"]

    def words(key, default):
        return tuple(sec[key].split()) if key in sec else default

    d = ExperimentConfig()
    spont = sec.get("spontaneous")
    mp = sec.get("max_parents")
    return ExperimentConfig(
        sizes=tuple(int(x) for x in words("sizes", d.sizes)),
        regimes=tuple(str(parse_regime(x)) for x in words("regimes", d.regimes)),
        cpd_kinds=words("cpd_kinds", d.cpd_kinds),
        seeds=tuple(int(x) for x in words("seeds", d.seeds)),
        T=sec.getint("T", d.T),
        test_sequences=sec.getint("test_sequences", d.test_sequences),
        test_seed=sec.getint("test_seed", d.test_seed),
        spontaneous=float(spont) if spont else None,
        switch=sec.getboolean("switch", d.switch),
        restarts=sec.getint("restarts", d.restarts),
        max_parents=None if mp in ("none", "None") else int(mp or d.max_parents),
        jobs=sec.getint("jobs", d.jobs),
    )


def pathway_learn_options(cpd_kind: str, seed: int, switch: bool = False, restarts: int = 1,
                          max_parents: int | None = 5) -> LearnOptions:
    return LearnOptions(cpd_kind=cpd_kind, forced_persistence=True, inter_slice_only=True,
                        seed=seed, switch=switch, restarts=restarts, max_parents=max_parents)


def run_cell(cfg: ExperimentConfig, regime: str, size: int, cpd_kind: str, seed: int) -> dict:
    gen = pathway_to_dpn(make_reference_model(cfg.spontaneous))
    train = apply_regime(sample(gen, cfg.T, size, seed), regime, [seed, 1])
    test = sample(gen, cfg.T, cfg.test_sequences, cfg.test_seed)
    opts = pathway_learn_options(cpd_kind, seed, cfg.switch, cfg.restarts, cfg.max_parents)
    res = learn(train, opts)
    hb = hamming_breakdown(res.dpn.structure, gen.structure, ignore=(SWITCH,))
    return {
        "regime": str(parse_regime(regime)),
        "N_seq": size,
        "cpd_kind": cpd_kind,
        "hamming": hb["total"],
        "rel_logloss": relative_logloss(res.dpn, gen, test),
        "seed": seed,
        "hamming_prior": hb["prior"],
        "hamming_transition": hb["transition"],
    }


def _run_cell_args(args):
    return run_cell(*args)


def run_experiment(cfg: ExperimentConfig, jobs: int | None = None) -> list:
    """One row per (regime, size, CPD kind, seed), in grid order."""
    jobs = cfg.jobs if jobs is None else jobs
    args = [(cfg,) + cell for cell in cfg.cells()]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            return list(pool.map(_run_cell_args, args))
    return [run_cell(*a) for a in args]


def format_float(x: float) -> str:
    return "inf" if x == math.inf else repr(float(x))
