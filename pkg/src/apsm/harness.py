"""Monte-Carlo learning curves for online sparse system identification.

Random streams are derived from the master seed by a fixed split rule:
run ``r`` draws from ``SeedSequence(seed, spawn_key=(r, lane))`` with
lane 0 for the unknown system, lane 1 for the input process and lane 2
for the noise. Every variant therefore sees the same data for a given
run, and results do not depend on how runs are spread over workers.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional, Sequence

import numpy as np

from .solver import SolverState, StepPolicy, run
from .sparse import nlms_config

VARIANTS = ("subgrad-ball", "exact-ball", "nlms")

LANE_SYSTEM, LANE_INPUT, LANE_NOISE = 0, 1, 2

# (1-based coefficient index, value) assignments
Assignment = tuple[tuple[int, float], ...]


@dataclass(frozen=True)
class ScenarioConfig:
    L: int = 100
    support_size: int = 5
    noise_variance: float = 0.1
    num_samples: int = 1000
    runs: int = 50
    seed: int = 0
    q: int = 25
    rho: float = 6.0
    eps_check: float = 0.005
    xi_factor: float = 2.0
    # explicit tolerance; overrides xi_factor * sigma when set
    xi: Optional[float] = None
    lam: float = 1.0
    nu: float = 1.0
    variant: str = "subgrad-ball"
    # deterministic initial system; random Gaussian support when None
    fixed_system: Optional[Assignment] = None
    # (1-based time instant, coefficient assignments applied from then on)
    change_schedule: tuple[tuple[int, Assignment], ...] = ()

    def __post_init__(self):
        if self.L < 1:
            raise ValueError("L must be positive")
        if not 0 <= self.support_size <= self.L:
            raise ValueError(f"support_size={self.support_size} must lie in [0, L={self.L}]")
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        if self.num_samples < 0:
            raise ValueError("num_samples must be non-negative")
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if self.noise_variance < 0:
            raise ValueError("noise_variance must be non-negative")
        for v in self.variants:
            if v not in VARIANTS:
                raise ValueError(f"unknown variant {v!r}; expected one of {VARIANTS}")
        steps = [s for s, _ in self.change_schedule]
        if any(b <= a for a, b in zip(steps, steps[1:])):
            raise ValueError("change schedule steps must be strictly increasing")
        for _, assignment in self.change_schedule + ((0, self.fixed_system or ()),):
            for idx, _ in assignment:
                if not 1 <= idx <= self.L:
                    raise ValueError(f"coefficient #{idx} outside 1..{self.L}")

    @property
    def variants(self) -> tuple[str, ...]:
        return tuple(v.strip() for v in self.variant.split(",") if v.strip())

    @property
    def sigma(self) -> float:
        return math.sqrt(self.noise_variance)

    @property
    def tolerance(self) -> float:
        return self.xi if self.xi is not None else self.xi_factor * self.sigma


_FIG2_CHANGE = ((501, ((2, 0.0), (4, 0.0), (7, 1.0), (9, 1.0), (11, 1.0), (13, 1.0), (15, 1.0))),)

PRESETS = {
    "fig1-time-invariant": ScenarioConfig(),
    # index 1000 must exist in the curve, hence 1001 samples
    "fig2-time-varying": ScenarioConfig(
        num_samples=1001,
        rho=9.0,
        support_size=5,
        fixed_system=tuple((i, 1.0) for i in range(1, 6)),
        change_schedule=_FIG2_CHANGE,
    ),
}


@dataclass(frozen=True)
class GroundTruth:
    x_star: np.ndarray

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.x_star))


@dataclass
class MsdSeries:
    variant: str
    msd: np.ndarray = field(repr=False)

    @property
    def msd_db(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 10.0 * np.log10(self.msd)

    def __len__(self):
        return len(self.msd)


def system_rng(seed: int, run: int, lane: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(run, lane)))


def _assign(x: np.ndarray, assignment: Assignment) -> np.ndarray:
    x = x.copy()
    for idx, value in assignment:
        x[idx - 1] = value
    return x


def gen_system(config: ScenarioConfig, rng: np.random.Generator) -> GroundTruth:
    """Sparse system: uniform random support, standard normal nonzeros."""
    if config.support_size > config.L:
        raise ValueError("support_size exceeds L")
    if config.fixed_system is not None:
        return GroundTruth(_assign(np.zeros(config.L), config.fixed_system))
    x = np.zeros(config.L)
    support = rng.choice(config.L, size=config.support_size, replace=False)
    x[np.sort(support)] = rng.standard_normal(config.support_size)
    return GroundTruth(x)


def apply_change(truth: GroundTruth, schedule, step: int) -> GroundTruth:
    """System in force at 1-based time instant ``step``."""
    steps = [s for s, _ in schedule]
    if any(b <= a for a, b in zip(steps, steps[1:])):
        raise ValueError("change schedule steps must be strictly increasing")
    x = truth.x_star
    for when, assignment in schedule:
        if when > step:
            break
        x = _assign(x, assignment)
    return truth if x is truth.x_star else GroundTruth(x)


def _truth_timeline(truth: GroundTruth, config: ScenarioConfig):
    """Yields ``(first_instant, system)`` segments."""
    yield 1, truth.x_star
    for when, _ in config.change_schedule:
        yield when, apply_change(truth, config.change_schedule, when).x_star


def system_at(truth: GroundTruth, config: ScenarioConfig, instant: int) -> np.ndarray:
    return apply_change(truth, config.change_schedule, max(instant, 1)).x_star


def gen_stream(
    truth: GroundTruth,
    config: ScenarioConfig,
    input_rng: np.random.Generator,
    noise_rng: Optional[np.random.Generator] = None,
) -> Iterator[tuple[np.ndarray, float]]:
    """Tapped-delay-line regressors driven by white Gaussian input.

    ``a_n = [a_n, a_{n-1}, ..., a_{n-L+1}]`` with zero pre-history, and
    ``d_n = a_n^T x_*(n) + noise``. Sample ``n`` (0-based) belongs to time
    instant ``n + 1`` for the change schedule.
    """
    if noise_rng is None:
        noise_rng = input_rng
    L, N = config.L, config.num_samples
    # Draw everything up front so the stream is independent of consumption.
    samples = input_rng.standard_normal(N)
    noise = config.sigma * noise_rng.standard_normal(N)
    padded = np.concatenate([np.zeros(L - 1), samples])
    segments = list(_truth_timeline(truth, config))
    for n in range(N):
        a = padded[n : n + L][::-1].copy()
        x = next(x for first, x in reversed(segments) if first <= n + 1)
        yield a, float(a @ x + noise[n])


def _policy(config: ScenarioConfig, variant: str) -> tuple[StepPolicy, int, float, str]:
    if variant == "nlms":
        nlms = nlms_config(config.lam)
        return nlms.policy(), nlms.q, nlms.xi, "identity"
    policy = StepPolicy(
        lam=config.lam,
        epsilon_guard=min(config.lam, 2.0 - config.lam, 1.0),
        nu=config.nu,
        nu_guard=min(config.nu, 2.0 - config.nu, 1.0),
    )
    return policy, config.q, config.tolerance, variant


def single_run(config: ScenarioConfig, run_index: int, variant: str) -> np.ndarray:
    """Squared deviation ``||x_*(n) - u_n||^2`` for ``n = 0..num_samples-1``."""
    truth = gen_system(config, system_rng(config.seed, run_index, LANE_SYSTEM))
    stream = gen_stream(
        truth,
        config,
        system_rng(config.seed, run_index, LANE_INPUT),
        system_rng(config.seed, run_index, LANE_NOISE),
    )
    policy, q, xi, constraint = _policy(config, variant)
    state = SolverState.zeros(config.L, q=q, policy=policy)
    dev = np.empty(config.num_samples)

    def observe(n, u):
        dev[n] = float(np.sum((system_at(truth, config, n) - u) ** 2))

    try:
        run(
            state,
            stream,
            config.num_samples,
            xi=xi,
            rho=config.rho,
            eps_check=config.eps_check,
            constraint=constraint,
            observer=observe,
        )
    except FloatingPointError as exc:
        raise RuntimeError(f"run {run_index} ({variant}) failed: {exc}") from exc
    return dev


def _run_job(args):
    return single_run(*args)


def run_experiment(
    config: ScenarioConfig, workers: int = 1, variants: Optional[Sequence[str]] = None
) -> dict[str, MsdSeries]:
    """Average the squared deviation over ``config.runs`` independent runs.

    Returns one series per variant. The reduction is ordered by run index,
    so the result is identical for any ``workers``.
    """
    variants = tuple(variants) if variants is not None else config.variants
    jobs = [(config, r, v) for v in variants for r in range(config.runs)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            curves = list(pool.map(_run_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        curves = [_run_job(job) for job in jobs]
    out = {}
    for k, v in enumerate(variants):
        total = np.zeros(config.num_samples)
        for curve in curves[k * config.runs : (k + 1) * config.runs]:
            total += curve
        out[v] = MsdSeries(v, total / config.runs)
    return out


def _fmt(value: float) -> str:
    if value == -math.inf:
        return "-inf"
    return repr(float(value))


def emit_csv(series: MsdSeries, path) -> Path:
    """Write ``n,msd,msd_db`` rows using shortest round-trip floats."""
    path = Path(path)
    lines = ["n,msd,msd_db"]
    for n, (m, db) in enumerate(zip(series.msd, series.msd_db)):
        lines.append(f"{n},{_fmt(m)},{_fmt(db)}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


# ---------------------------------------------------------------------------
# flat ``key = value`` configuration files


def _parse_assignment(text: str) -> Assignment:
    pairs = []
    for item in text.replace(" ", "").split(","):
        if not item:
            continue
        idx, _, value = item.partition("=")
        pairs.append((int(idx), float(value)))
    return tuple(pairs)


def _parse_schedule(text: str):
    out = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        when, _, rest = chunk.partition(":")
        if not rest:
            raise ValueError(f"malformed change schedule entry {chunk!r}")
        out.append((int(when), _parse_assignment(rest)))
    return tuple(out)


def _format_assignment(a: Assignment) -> str:
    return ",".join(f"{i}={v!r}" for i, v in a)


_PARSERS = {
    "L": int,
    "support_size": int,
    "num_samples": int,
    "runs": int,
    "seed": int,
    "q": int,
    "noise_variance": float,
    "rho": float,
    "eps_check": float,
    "xi_factor": float,
    "xi": lambda s: None if s.lower() in ("", "none") else float(s),
    "lam": float,
    "nu": float,
    "variant": str,
    "fixed_system": lambda s: None if s.lower() in ("", "none") else _parse_assignment(s),
    "change_schedule": _parse_schedule,
}


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines (``#`` starts a comment) into overrides."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        if key == "preset":
            values["preset"] = value
            continue
        if key not in _PARSERS:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = _PARSERS[key](value)
        except ValueError as exc:
            raise ValueError(f"line {lineno}: bad value for {key}: {exc}") from exc
    return values


def load_config(path=None, preset: Optional[str] = None, **overrides) -> ScenarioConfig:
    """Preset, then file values, then explicit overrides (``None`` skipped)."""
    file_values = parse_config_text(Path(path).read_text()) if path is not None else {}
    name = preset or file_values.pop("preset", None) or "fig1-time-invariant"
    file_values.pop("preset", None)
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    values = {**file_values, **{k: v for k, v in overrides.items() if v is not None}}
    return dataclasses.replace(PRESETS[name], **values)


def dump_config(config: ScenarioConfig) -> str:
    lines = []
    for f in dataclasses.fields(config):
        value = getattr(config, f.name)
        if f.name == "fixed_system":
            text = "none" if value is None else _format_assignment(value)
        elif f.name == "change_schedule":
            text = "; ".join(f"{w}:{_format_assignment(a)}" for w, a in value)
        elif value is None:
            text = "none"
        else:
            text = str(value)
        lines.append(f"{f.name} = {text}")
    return "\n".join(lines) + "\n"
