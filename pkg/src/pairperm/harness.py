"""Monte Carlo studies of rejection rates.

A study crosses scenarios with methods. Every (scenario, method) cell draws
its own datasets: run ``r`` of a cell uses a stream derived from
``(seed, scenario digest, method, r)``. Cells are therefore independent of
each other, individually re-runnable, and identical for any worker count.
All tests are two-sided.
"""

import csv
import hashlib
import io
import itertools
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import randomization, statistics
from .distributions import CovarianceSpec, ScenarioConfig, generate_sample
from .errors import DataError, PairPermError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

logger = logging.getLogger(__name__)

METHODS = ("Tp", "T", "T_LS", "t3")
_RUN_CHUNK = 250


@dataclass(frozen=True)
class StudyGrid:
    scenarios: Tuple[ScenarioConfig, ...]
    methods: Tuple[str, ...] = METHODS
    alpha: float = 0.05
    nsim: int = 5000
    B: int = 1000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "scenarios", tuple(self.scenarios))
        object.__setattr__(self, "methods", tuple(self.methods))
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise PairPermError(f"unknown methods {sorted(unknown)}; choose from {METHODS}")
        if self.nsim < 1 or self.B < 1:
            raise PairPermError("nsim and B must be at least 1")
        if not 0.0 < self.alpha < 1.0:
            raise PairPermError(f"alpha must lie in (0, 1), got {self.alpha!r}")


def scenario_digest(scenario: ScenarioConfig) -> int:
    """Stable 64-bit digest of a scenario's parameters."""
    text = json.dumps(scenario.describe(), sort_keys=True)
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "little")


def run_stream(seed: int, scenario: ScenarioConfig, method: str, run: int) -> np.random.Generator:
    entropy = [int(seed) & (2**64 - 1), scenario_digest(scenario), METHODS.index(method), run]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def _rejects(method, sample, alpha, B, perm_seed):
    if method == "Tp":
        a = statistics.resolve_weight(sample, statistics.WeightRule.PAPER)
        t_obs = statistics.weighted_statistic(sample, a)
        values = randomization.mc_replicates(sample, a, B, perm_seed)
        p1 = np.count_nonzero(values >= t_obs) / B
        return min(2.0 * p1, 2.0 - 2.0 * p1) <= alpha
    if method == "T":
        return statistics.asymptotic_test(sample, statistics.WeightRule.PAPER, alpha).reject
    if method == "T_LS":
        return statistics.lin_stivers_test(sample, alpha).reject
    return statistics.kim_t3_test(sample, alpha).reject


def simulate_runs(scenario, method, alpha, B, seed, start, stop) -> int:
    """Number of rejections among runs ``start .. stop - 1`` of one cell."""
    count = 0
    for run in range(start, stop):
        rng = run_stream(seed, scenario, method, run)
        sample = generate_sample(scenario, rng)
        perm_seed = int(rng.integers(0, 2**63))
        count += bool(_rejects(method, sample, alpha, B, perm_seed))
    return count


def _task(args):
    cell, scenario, method, alpha, B, seed, start, stop = args
    t0 = time.perf_counter()
    try:
        return cell, simulate_runs(scenario, method, alpha, B, seed, start, stop), None, time.perf_counter() - t0
    except PairPermError as exc:
        return cell, 0, f"{type(exc).__name__}: {exc}", time.perf_counter() - t0


@dataclass
class StudyRow:
    """One (scenario, method) cell of a study."""

    marginal: str
    sigma1_sq: float
    sigma2_sq: float
    rho: float
    n1: int
    n2: int
    n3: int
    mu1: float
    delta: float
    kappa: float
    method: str
    alpha: float
    nsim: int
    B: int
    rejections: int
    rejection_rate: float
    mc_stderr: float
    status: str = "ok"
    runtime: Optional[float] = None

    @property
    def scenario(self) -> ScenarioConfig:
        return ScenarioConfig(
            self.marginal,
            CovarianceSpec(self.sigma1_sq, self.sigma2_sq, self.rho),
            self.n1,
            self.n2,
            self.n3,
            self.mu1,
            self.delta,
            self.kappa,
        )


_INT_COLUMNS = {"n1", "n2", "n3", "nsim", "B", "rejections"}
_STR_COLUMNS = {"marginal", "method", "status"}
COLUMNS = [f.name for f in fields(StudyRow)]


@dataclass
class StudyTable:
    rows: List[StudyRow] = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def lookup(self, scenario: ScenarioConfig, method: str) -> StudyRow:
        key = scenario.describe()
        for row in self.rows:
            if row.method == method and row.scenario.describe() == key:
                return row
        raise KeyError((key, method))


def mc_stderr(rate: float, nsim: int) -> float:
    """Monte Carlo standard error ``sqrt(r (1 - r) / nsim)``."""
    return math.sqrt(rate * (1.0 - rate) / nsim)


def run_study(grid: StudyGrid, workers: int = 1) -> StudyTable:
    """Estimate the two-sided rejection rate of every method in every scenario.

    A cell whose runs raise a package error is reported with
    ``status="failed: ..."`` and a NaN rate; other cells are unaffected.
    """
    cells = list(itertools.product(range(len(grid.scenarios)), grid.methods))
    tasks = []
    for cell, (si, method) in enumerate(cells):
        for start in range(0, grid.nsim, _RUN_CHUNK):
            stop = min(start + _RUN_CHUNK, grid.nsim)
            tasks.append((cell, grid.scenarios[si], method, grid.alpha, grid.B, grid.seed, start, stop))

    counts = [0] * len(cells)
    errors: List[Optional[str]] = [None] * len(cells)
    runtimes = [0.0] * len(cells)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_task, tasks))
    else:
        outcomes = map(_task, tasks)
    for cell, count, error, elapsed in outcomes:
        counts[cell] += count
        runtimes[cell] += elapsed
        if error and errors[cell] is None:
            errors[cell] = error

    table = StudyTable()
    for cell, (si, method) in enumerate(cells):
        scenario = grid.scenarios[si]
        if errors[cell] is None:
            rate = counts[cell] / grid.nsim
            status, se = "ok", mc_stderr(rate, grid.nsim)
        else:
            rate = se = float("nan")
            status = f"failed: {errors[cell]}"
            logger.warning("cell %s/%s failed: %s", scenario.describe(), method, errors[cell])
        table.rows.append(
            StudyRow(
                **scenario.describe(),
                method=method,
                alpha=grid.alpha,
                nsim=grid.nsim,
                B=grid.B,
                rejections=counts[cell] if errors[cell] is None else 0,
                rejection_rate=rate,
                mc_stderr=se,
                status=status,
                runtime=runtimes[cell],
            )
        )
    return table


# ---------------------------------------------------------------------------
# delimited output


def emit_plot_data(table: StudyTable, destination, include_runtime: bool = False) -> None:
    """Write the table as comma-separated text with a header row.

    Columns: scenario parameters (``marginal`` .. ``kappa``), ``method``,
    ``alpha``, ``nsim``, ``B``, ``rejections``, ``rejection_rate``,
    ``mc_stderr``, ``status`` and, if requested, ``runtime`` in seconds.
    Runtime is off by default so output is reproducible byte for byte.
    """
    if not len(table):
        raise PairPermError("cannot emit an empty study table")
    columns = COLUMNS if include_runtime else [c for c in COLUMNS if c != "runtime"]

    def write(fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in table:
            record = asdict(row)
            writer.writerow([_format(record[c]) for c in columns])

    if hasattr(destination, "write"):
        write(destination)
    else:
        with open(destination, "w", newline="") as fh:
            write(fh)


def _format(value):
    if isinstance(value, float):
        return repr(value)
    return "" if value is None else str(value)


def read_plot_data(source) -> StudyTable:
    """Parse output of :func:`emit_plot_data`."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, newline="") as fh:
            text = fh.read()
    reader = csv.DictReader(io.StringIO(text))
    table = StudyTable()
    for record in reader:
        kwargs = {}
        for name in COLUMNS:
            raw = record.get(name)
            if name in _STR_COLUMNS:
                kwargs[name] = raw
            elif raw is None or raw == "":
                kwargs[name] = None
            elif name in _INT_COLUMNS:
                kwargs[name] = int(raw)
            else:
                kwargs[name] = float(raw)
        table.rows.append(StudyRow(**kwargs))
    return table


# ---------------------------------------------------------------------------
# declarative configuration

_COVARIANCES = {"sigma1": CovarianceSpec.homoscedastic, "sigma2": CovarianceSpec.heteroscedastic}


def _as_list(value):
    return list(value) if isinstance(value, list) else [value]


def _sizes(value):
    if isinstance(value, list) and value and all(isinstance(v, int) for v in value):
        value = [value]
    out = []
    for triple in _as_list(value):
        if len(triple) != 3:
            raise PairPermError(f"sizes entries must be [n1, n2, n3], got {triple!r}")
        out.append(tuple(int(v) for v in triple))
    return out


def _covariance(kind, rho):
    if isinstance(kind, dict):
        return CovarianceSpec(float(kind["sigma1_sq"]), float(kind["sigma2_sq"]), rho)
    try:
        return _COVARIANCES[kind](rho)
    except KeyError:
        raise PairPermError(f"covariance must be 'sigma1', 'sigma2' or a table, got {kind!r}") from None


def expand_grid_block(block: dict) -> List[ScenarioConfig]:
    """All scenarios of one ``[[grid]]`` block (Cartesian product of list entries)."""
    known = {"marginal", "covariance", "rho", "sizes", "delta", "mu1", "kappa"}
    extra = set(block) - known
    if extra:
        raise PairPermError(f"unknown grid keys {sorted(extra)}")
    product = itertools.product(
        _as_list(block.get("marginal", "normal")),
        _as_list(block.get("covariance", "sigma1")),
        _as_list(block.get("rho", 0.0)),
        _sizes(block.get("sizes", [10, 10, 10])),
        _as_list(block.get("delta", 0.0)),
        _as_list(block.get("mu1", 0.0)),
        _as_list(block.get("kappa", 2.0)),
    )
    return [
        ScenarioConfig(marginal, _covariance(cov, float(rho)), *sizes, float(mu1), float(delta), float(kappa))
        for marginal, cov, rho, sizes, delta, mu1, kappa in product
    ]


def grid_from_mapping(config: dict) -> StudyGrid:
    scenarios = []
    for block in config.get("grid", []):
        scenarios.extend(expand_grid_block(block))
    if not scenarios:
        raise PairPermError("study config defines no [[grid]] scenarios")
    return StudyGrid(
        scenarios=scenarios,
        methods=tuple(config.get("methods", METHODS)),
        alpha=float(config.get("alpha", 0.05)),
        nsim=int(config.get("nsim", 5000)),
        B=int(config.get("B", 1000)),
        seed=int(config.get("seed", 0)),
    )


def load_study_config(path) -> StudyGrid:
    """Read a TOML study description; see the README for the schema."""
    with open(path, "rb") as fh:
        try:
            config = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise DataError(f"{path}: {exc}") from None
    try:
        return grid_from_mapping(config)
    except (PairPermError, KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: invalid study config: {exc}") from None


def study_metadata(grid: StudyGrid, table: StudyTable) -> dict:
    """Provenance record written next to the emitted table."""
    return {
        "alpha": grid.alpha,
        "nsim": grid.nsim,
        "B": grid.B,
        "seed": grid.seed,
        "methods": list(grid.methods),
        "covariance_root": "symmetric spectral square root",
        "asymmetric_laplace": "difference of exponentials with rates kappa and 1/kappa, unit scale",
        "weight_rule": "a = 2 n1 / (n + n1)",
        "two_sided_p": "min(2 p1, 2 - 2 p1)",
        "runtimes": [
            {"scenario": row.scenario.describe(), "method": row.method, "seconds": row.runtime}
            for row in table
        ],
    }
