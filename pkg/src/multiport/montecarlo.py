"""Monte Carlo link-level simulation over random coupling realizations.

A scenario fixes both array geometries and terminations, draws the
trans-impedance coupling matrix i.i.d. complex Gaussian per
realization (or imports externally generated realizations), builds the
physically consistent forward and reverse channels, and evaluates the
configured transmit strategies over a transmit power grid. Results are
ergodic averages plus per-realization samples of rates, active stream
counts, and radiated-power ratios with a Gaussian kernel density
estimate of the latter.

Reproducibility: every realization uses a counter-based random stream
keyed by (seed, realization index, resampling attempt), so results are
independent of worker count and realization order.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import partial

import numpy as np

from .channel_model import (
    ChannelBundle,
    ImpedanceSystem,
    NoiseConfig,
    build_bundle,
    mismatch_power_matrix,
    reversed_link,
)
from .em_arrays import (
    array_impedance_matrix,
    dipole_mutual_impedance,
    dipole_self_impedance,
    uniform_circular_array,
)
from .numerics import FactorizationError
from .strategies import (
    dpc_sum_rate,
    evaluate_bc_rates,
    greedy_zf,
    mac_sum_capacity,
    su_mimo_capacity,
    su_mimo_naive,
    su_mimo_reciprocal,
    su_miso_capacity,
    su_miso_naive,
    su_miso_reciprocal,
    with_true_power,
)

FAR_FIELD_DISTANCE_WAVELENGTHS = 1000.0
SINGLE_USER_STRATEGIES = ("cap", "recip", "hyp")
MULTI_USER_STRATEGIES = ("cap", "hyp", "cap_lin", "recip_lin", "hyp_lin")
MAX_RESAMPLE_ATTEMPTS = 25
FAILURE_ABORT_FRACTION = 0.01
KDE_GRID_POINTS = 128


class ConfigError(ValueError):
    """A scenario or run configuration is invalid."""


class SimulationAbort(RuntimeError):
    """Too many realizations failed to produce a usable channel."""


def far_field_coupling_std() -> float:
    """Calibrated coupling standard deviation in ohm.

    Matches the magnitude of the dipole mutual impedance at a far-field
    reference distance, so random realizations carry a physically
    plausible path scale.
    """
    return abs(dipole_mutual_impedance(FAR_FIELD_DISTANCE_WAVELENGTHS))


def gaussian_kde(
    samples: np.ndarray, n_points: int = KDE_GRID_POINTS
) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian kernel density estimate on an automatic grid.

    Bandwidth is the Silverman rule 1.06 * std * n^(-1/5); the grid
    spans the sample range extended by three bandwidths on both sides.
    Raises ValueError for fewer than two samples or zero spread.
    """
    x = np.asarray(samples, dtype=float).reshape(-1)
    if x.size < 2:
        raise ValueError("need at least two samples")
    if not np.all(np.isfinite(x)):
        raise ValueError("samples must be finite")
    std = float(np.std(x, ddof=1))
    if std == 0.0:
        raise ValueError("samples are degenerate (zero spread)")
    bandwidth = 1.06 * std * x.size ** (-1.0 / 5.0)
    grid = np.linspace(x.min() - 3 * bandwidth, x.max() + 3 * bandwidth, n_points)
    z = (grid[:, None] - x[None, :]) / bandwidth
    density = np.exp(-0.5 * z * z).sum(axis=1) / (
        x.size * bandwidth * math.sqrt(2 * math.pi)
    )
    return grid, density


@dataclass(frozen=True)
class ScenarioConfig:
    """Geometry, strategies, power grid, and sampling plan of one run."""

    name: str
    n_tx: int
    tx_spacing: float
    rx_partition: tuple[int, ...]
    strategies: tuple[str, ...]
    power_grid_dbw: tuple[float, ...]
    n_realizations: int
    seed: int = 0
    rx_spacing: float | None = None
    coupling_std_ohm: float | None = None
    coupling_file: str | None = None
    noise: NoiseConfig = field(default_factory=NoiseConfig.default)

    def __post_init__(self) -> None:
        if not self.name:
            raise ConfigError("scenario name must be nonempty")
        if self.n_tx < 1:
            raise ConfigError("n_tx must be at least 1")
        if not self.tx_spacing > 0.0:
            raise ConfigError("tx_spacing must be positive")
        if not self.rx_partition or any(m < 1 for m in self.rx_partition):
            raise ConfigError("rx_partition must be positive antenna counts")
        if any(m > 1 for m in self.rx_partition) and (
            self.rx_spacing is None or not self.rx_spacing > 0.0
        ):
            raise ConfigError("rx_spacing must be positive for multi-antenna users")
        allowed = (
            SINGLE_USER_STRATEGIES
            if len(self.rx_partition) == 1
            else MULTI_USER_STRATEGIES
        )
        if not self.strategies:
            raise ConfigError("at least one strategy is required")
        for s in self.strategies:
            if s not in allowed:
                raise ConfigError(
                    f"strategy {s!r} is not available for this topology; "
                    f"allowed: {', '.join(allowed)}"
                )
        if len(set(self.strategies)) != len(self.strategies):
            raise ConfigError("strategies must be unique")
        grid = self.power_grid_dbw
        if not grid or not all(math.isfinite(p) for p in grid):
            raise ConfigError("power_grid_dbw must be nonempty and finite")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("power_grid_dbw must be strictly increasing")
        if self.n_realizations < 1:
            raise ConfigError("n_realizations must be at least 1")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        if self.coupling_std_ohm is not None and not self.coupling_std_ohm > 0.0:
            raise ConfigError("coupling_std_ohm must be positive when given")

    @property
    def n_rx_total(self) -> int:
        return int(sum(self.rx_partition))

    @property
    def is_single_user(self) -> bool:
        return len(self.rx_partition) == 1


def config_to_dict(config: ScenarioConfig) -> dict:
    """JSON-safe dictionary form of a scenario configuration."""
    data = asdict(config)
    noise = data["noise"]
    noise["correlation"] = [
        complex(config.noise.correlation).real,
        complex(config.noise.correlation).imag,
    ]
    data["rx_partition"] = list(config.rx_partition)
    data["strategies"] = list(config.strategies)
    data["power_grid_dbw"] = list(config.power_grid_dbw)
    return data


def config_from_dict(data: dict) -> ScenarioConfig:
    """Parse a scenario configuration, applying defaults."""
    if not isinstance(data, dict):
        raise ConfigError("scenario must be a JSON object")
    known = {
        "name",
        "n_tx",
        "tx_spacing",
        "rx_partition",
        "strategies",
        "power_grid_dbw",
        "n_realizations",
        "seed",
        "rx_spacing",
        "coupling_std_ohm",
        "coupling_file",
        "noise",
    }
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown scenario fields: {sorted(unknown)}")
    required = {"name", "n_tx", "tx_spacing", "rx_partition", "strategies",
                "power_grid_dbw", "n_realizations"}
    missing = required - set(data)
    if missing:
        raise ConfigError(f"missing scenario fields: {sorted(missing)}")
    noise_data = data.get("noise")
    if noise_data is None:
        noise = NoiseConfig.default()
    else:
        try:
            corr = noise_data.get("correlation", 0.0)
            if isinstance(corr, (list, tuple)):
                corr = complex(corr[0], corr[1])
            noise = NoiseConfig(
                voltage_noise_var=float(noise_data["voltage_noise_var"]),
                current_noise_var=float(noise_data["current_noise_var"]),
                correlation=corr,
                antenna_temperature_k=float(
                    noise_data.get("antenna_temperature_k", 290.0)
                ),
                bandwidth_hz=float(noise_data.get("bandwidth_hz", 740e3)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid noise block: {exc}") from exc
    try:
        return ScenarioConfig(
            name=str(data["name"]),
            n_tx=int(data["n_tx"]),
            tx_spacing=float(data["tx_spacing"]),
            rx_partition=tuple(int(m) for m in data["rx_partition"]),
            strategies=tuple(str(s) for s in data["strategies"]),
            power_grid_dbw=tuple(float(p) for p in data["power_grid_dbw"]),
            n_realizations=int(data["n_realizations"]),
            seed=int(data.get("seed", 0)),
            rx_spacing=(
                float(data["rx_spacing"]) if data.get("rx_spacing") is not None else None
            ),
            coupling_std_ohm=(
                float(data["coupling_std_ohm"])
                if data.get("coupling_std_ohm") is not None
                else None
            ),
            coupling_file=(
                str(data["coupling_file"])
                if data.get("coupling_file") is not None
                else None
            ),
            noise=noise,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid scenario value: {exc}") from exc


@dataclass(frozen=True)
class ScenarioResult:
    """Aggregated and per-realization outputs of one scenario run."""

    config: ScenarioConfig
    power_grid_dbw: tuple[float, ...]
    ergodic_rates: dict[str, np.ndarray]
    per_realization_rates: dict[str, np.ndarray]
    mean_active_streams: dict[str, np.ndarray]
    per_realization_streams: dict[str, np.ndarray]
    alpha_samples: np.ndarray | None
    alpha_kde: tuple[tuple[np.ndarray, np.ndarray], ...] | None
    n_failures: int


def coupling_realization(
    seed: int, realization: int, attempt: int, n_rx: int, n_tx: int, std: float
) -> np.ndarray:
    """Draw one i.i.d. circularly symmetric Gaussian coupling matrix.

    Entries have standard deviation ``std`` split evenly between real
    and imaginary parts. The counter-based stream makes each
    (seed, realization, attempt) triple independent.
    """
    bitgen = np.random.Philox(
        key=np.array([seed, 0], dtype=np.uint64),
        counter=np.array([0, 0, attempt, realization], dtype=np.uint64),
    )
    rng = np.random.Generator(bitgen)
    scale = std / math.sqrt(2.0)
    return scale * (
        rng.standard_normal((n_rx, n_tx)) + 1j * rng.standard_normal((n_rx, n_tx))
    )


def read_coupling_file(path: str) -> np.ndarray:
    """Load externally generated coupling realizations.

    JSON files carry {"n_rx", "n_tx", "realizations": [[[re, im], ...]]};
    CSV files carry rows (realization, i, j, re_ohm, im_ohm) after a
    matching header. Returns an (n_realizations, n_rx, n_tx) array.
    """
    if path.endswith(".json"):
        with open(path) as fh:
            data = json.load(fh)
        try:
            n_rx, n_tx = int(data["n_rx"]), int(data["n_tx"])
            reals = data["realizations"]
            out = np.zeros((len(reals), n_rx, n_tx), dtype=complex)
            for r, mat in enumerate(reals):
                for i in range(n_rx):
                    for j in range(n_tx):
                        re, im = mat[i][j]
                        out[r, i, j] = complex(re, im)
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise ConfigError(f"invalid coupling JSON: {exc}") from exc
        if out.size == 0:
            raise ConfigError("coupling file holds no realizations")
        return out
    import csv as _csv

    entries: dict[tuple[int, int, int], complex] = {}
    with open(path, newline="") as fh:
        reader = _csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:5] != ["realization", "i", "j", "re_ohm", "im_ohm"]:
            raise ConfigError("unrecognized coupling CSV header")
        for row in reader:
            if not row:
                continue
            try:
                entries[(int(row[0]), int(row[1]), int(row[2]))] = complex(
                    float(row[3]), float(row[4])
                )
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"invalid coupling CSV row {row!r}") from exc
    if not entries:
        raise ConfigError("coupling file holds no realizations")
    n_reals = max(k[0] for k in entries) + 1
    n_rx = max(k[1] for k in entries) + 1
    n_tx = max(k[2] for k in entries) + 1
    out = np.zeros((n_reals, n_rx, n_tx), dtype=complex)
    for (r, i, j), v in entries.items():
        out[r, i, j] = v
    return out


def write_coupling_file(path: str, realizations: np.ndarray) -> None:
    """Write coupling realizations in the CSV import format."""
    arr = np.asarray(realizations)
    if arr.ndim != 3:
        raise ValueError("realizations must be (n_realizations, n_rx, n_tx)")
    import csv as _csv

    with open(path, "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["realization", "i", "j", "re_ohm", "im_ohm"])
        for r in range(arr.shape[0]):
            for i in range(arr.shape[1]):
                for j in range(arr.shape[2]):
                    writer.writerow(
                        [r, i, j, repr(float(arr[r, i, j].real)), repr(float(arr[r, i, j].imag))]
                    )


def _receive_impedance(config: ScenarioConfig) -> np.ndarray:
    """Block-diagonal receive impedance: one UCA block per user."""
    blocks = []
    z_self = dipole_self_impedance()
    for m in config.rx_partition:
        if m == 1:
            blocks.append(np.array([[z_self]], dtype=complex))
        else:
            geom = uniform_circular_array(m, float(config.rx_spacing))
            blocks.append(array_impedance_matrix(geom))
    total = sum(b.shape[0] for b in blocks)
    z_rx = np.zeros((total, total), dtype=complex)
    offset = 0
    for b in blocks:
        size = b.shape[0]
        z_rx[offset : offset + size, offset : offset + size] = b
        offset += size
    return z_rx


@dataclass(frozen=True)
class _ScenarioKernel:
    """Precomputed geometry shared by all realizations."""

    config: ScenarioConfig
    z_tx: np.ndarray
    z_rx: np.ndarray
    termination: complex
    coupling_std: float

    def bundles(self, z21: np.ndarray) -> tuple[ChannelBundle, ChannelBundle]:
        forward = ImpedanceSystem(
            z_tx=self.z_tx,
            z_rx=self.z_rx,
            z_coupling=z21,
            z_source=self.termination,
            z_load=self.termination,
        )
        down = build_bundle(forward, self.config.noise)
        up = build_bundle(reversed_link(forward), self.config.noise)
        return down, up


def _make_kernel(config: ScenarioConfig) -> _ScenarioKernel:
    geom = uniform_circular_array(config.n_tx, config.tx_spacing)
    z_tx = array_impedance_matrix(geom)
    z_rx = _receive_impedance(config)
    termination = complex(dipole_self_impedance().real)
    std = (
        config.coupling_std_ohm
        if config.coupling_std_ohm is not None
        else far_field_coupling_std()
    )
    return _ScenarioKernel(config, z_tx, z_rx, termination, std)


def _evaluate_single_user(
    config: ScenarioConfig,
    down: ChannelBundle,
    up: ChannelBundle,
    powers_w: np.ndarray,
) -> tuple[dict[str, np.ndarray], dict[str, np.ndarray], np.ndarray | None]:
    sigma = down.noise_scale
    miso = down.n_rx == 1
    mismatch = (
        mismatch_power_matrix(down) if "hyp" in config.strategies else None
    )
    rates = {s: np.zeros(powers_w.size) for s in config.strategies}
    streams = {s: np.zeros(powers_w.size) for s in config.strategies}
    alphas = np.zeros(powers_w.size) if "hyp" in config.strategies else None
    for j, p_w in enumerate(powers_w):
        for s in config.strategies:
            if s == "cap":
                res = (
                    su_miso_capacity(down.channel[0], p_w, sigma)
                    if miso
                    else su_mimo_capacity(down.channel, p_w, sigma)
                )
            elif s == "recip":
                res = (
                    su_miso_reciprocal(down.channel[0], up.channel[:, 0], p_w, sigma)
                    if miso
                    else su_mimo_reciprocal(down.channel, up.channel, p_w, sigma)
                )
            else:
                res = (
                    su_miso_naive(down.channel_mismatched[0], mismatch, p_w, sigma)
                    if miso
                    else su_mimo_naive(
                        down.channel_mismatched,
                        down.channel_assumed,
                        mismatch,
                        p_w,
                        sigma,
                    )
                )
                alphas[j] = res.alpha
            rates[s][j] = res.rate.rate_bits
            streams[s][j] = res.rate.active_streams
    return rates, streams, alphas


def _evaluate_multi_user(
    config: ScenarioConfig,
    down: ChannelBundle,
    up: ChannelBundle,
    powers_w: np.ndarray,
) -> tuple[dict[str, np.ndarray], dict[str, np.ndarray], np.ndarray | None]:
    sigma = down.noise_scale
    partition = config.rx_partition
    need_mismatch = any(s in config.strategies for s in ("hyp", "hyp_lin"))
    mismatch = mismatch_power_matrix(down) if need_mismatch else None
    rates = {s: np.zeros(powers_w.size) for s in config.strategies}
    streams = {s: np.zeros(powers_w.size) for s in config.strategies}
    alphas = np.zeros(powers_w.size) if "hyp_lin" in config.strategies else None
    warm: dict[str, np.ndarray | None] = {"cap": None, "hyp": None}
    for j, p_w in enumerate(powers_w):
        scale_next = (
            powers_w[j + 1] / p_w if j + 1 < powers_w.size and p_w > 0 else 1.0
        )
        for s in config.strategies:
            if s == "cap":
                sol = mac_sum_capacity(
                    down.channel, partition, p_w, sigma, initial=warm["cap"]
                )
                warm["cap"] = sol.mac_covariance * scale_next
                rates[s][j] = sol.rate.rate_bits
                streams[s][j] = sol.rate.active_streams
            elif s == "hyp":
                sol = mac_sum_capacity(
                    down.channel_assumed, partition, p_w, sigma, initial=warm["hyp"]
                )
                warm["hyp"] = sol.mac_covariance * scale_next
                rates[s][j] = dpc_sum_rate(
                    down.channel_mismatched, sol.mac_covariance, sigma
                )
                streams[s][j] = sol.rate.active_streams
            else:
                if s == "cap_lin":
                    assumed, true = down.channel, down.channel
                elif s == "recip_lin":
                    assumed, true = up.channel.T, down.channel
                else:
                    assumed, true = down.channel_assumed, down.channel_mismatched
                lin = greedy_zf(assumed, partition, p_w, sigma)
                if s == "hyp_lin":
                    lin = with_true_power(lin, mismatch)
                    alphas[j] = lin.alpha if lin.predicted_power_w > 0 else 1.0
                res = evaluate_bc_rates(true, lin, sigma)
                rates[s][j] = res.rate_bits
                streams[s][j] = res.active_streams
    return rates, streams, alphas


def _run_realization(
    kernel: _ScenarioKernel,
    imported: np.ndarray | None,
    index: int,
) -> tuple[dict[str, np.ndarray], dict[str, np.ndarray], np.ndarray | None, int]:
    config = kernel.config
    powers_w = np.array([10.0 ** (p / 10.0) for p in config.power_grid_dbw])
    failures = 0
    attempt = 0
    while True:
        if imported is not None:
            z21 = imported[index]
        else:
            z21 = coupling_realization(
                config.seed,
                index,
                attempt,
                config.n_rx_total,
                config.n_tx,
                kernel.coupling_std,
            )
        try:
            down, up = kernel.bundles(z21)
            evaluate = (
                _evaluate_single_user if config.is_single_user else _evaluate_multi_user
            )
            rates, streams, alphas = evaluate(config, down, up, powers_w)
            return rates, streams, alphas, failures
        except FactorizationError:
            failures += 1
            if imported is not None:
                # Imported realizations cannot be resampled; mark as lost.
                nan = np.full(powers_w.size, np.nan)
                rates = {s: nan.copy() for s in config.strategies}
                streams = {s: nan.copy() for s in config.strategies}
                has_alpha = ("hyp" in config.strategies and config.is_single_user) or (
                    "hyp_lin" in config.strategies
                )
                return rates, streams, (nan.copy() if has_alpha else None), failures
            attempt += 1
            if attempt >= MAX_RESAMPLE_ATTEMPTS:
                raise SimulationAbort(
                    f"realization {index} failed {attempt} consecutive resampling attempts"
                ) from None


def run_scenario(config: ScenarioConfig, n_workers: int = 1) -> ScenarioResult:
    """Run all realizations of a scenario and aggregate the results.

    ``n_workers`` > 1 distributes realizations over processes; outputs
    are identical to the serial run because every realization owns a
    counter-based random stream and results are reduced in index order.
    """
    kernel = _make_kernel(config)
    imported = None
    if config.coupling_file is not None:
        imported = read_coupling_file(config.coupling_file)
        if imported.shape[1:] != (config.n_rx_total, config.n_tx):
            raise ConfigError(
                f"coupling file shape {imported.shape[1:]} does not match "
                f"({config.n_rx_total}, {config.n_tx})"
            )
        if imported.shape[0] < config.n_realizations:
            raise ConfigError(
                f"coupling file holds {imported.shape[0]} realizations, "
                f"need {config.n_realizations}"
            )
    worker = partial(_run_realization, kernel, imported)
    indices = range(config.n_realizations)
    if n_workers > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            outcomes = list(pool.map(worker, indices, chunksize=8))
    else:
        outcomes = [worker(i) for i in indices]

    n_p = len(config.power_grid_dbw)
    n_r = config.n_realizations
    per_rates = {
        s: np.vstack([out[0][s] for out in outcomes]) for s in config.strategies
    }
    per_streams = {
        s: np.vstack([out[1][s] for out in outcomes]) for s in config.strategies
    }
    has_alpha = outcomes[0][2] is not None
    alpha_samples = (
        np.vstack([out[2] for out in outcomes]) if has_alpha else None
    )
    n_failures = int(sum(out[3] for out in outcomes))
    if n_failures > FAILURE_ABORT_FRACTION * n_r:
        raise SimulationAbort(
            f"{n_failures} failed realizations out of {n_r} exceed the "
            f"{FAILURE_ABORT_FRACTION:.0%} abort threshold"
        )
    with np.errstate(invalid="ignore"):
        ergodic = {s: np.nanmean(per_rates[s], axis=0) for s in config.strategies}
        mean_streams = {
            s: np.nanmean(per_streams[s], axis=0) for s in config.strategies
        }
    alpha_kde = None
    if has_alpha:
        curves = []
        for j in range(n_p):
            col = alpha_samples[:, j]
            col = col[np.isfinite(col)]
            try:
                curves.append(gaussian_kde(col))
            except ValueError:
                grid = np.full(KDE_GRID_POINTS, np.nan)
                curves.append((grid, grid.copy()))
        alpha_kde = tuple(curves)
    return ScenarioResult(
        config=config,
        power_grid_dbw=config.power_grid_dbw,
        ergodic_rates=ergodic,
        per_realization_rates=per_rates,
        mean_active_streams=mean_streams,
        per_realization_streams=per_streams,
        alpha_samples=alpha_samples,
        alpha_kde=alpha_kde,
        n_failures=n_failures,
    )
