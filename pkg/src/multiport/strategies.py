"""Transmit strategies and rate evaluation.

Single-user strategies cover the informed capacity benchmark, the
reverse-link (reciprocity-based) precoder, and the naive strategy that
optimizes against the mismatched channel a coupling-unaware designer
would assume. Multi-user strategies cover dual-decomposition sum
capacity via projected gradient ascent and a greedy zero-forcing
linear precoder with rate evaluation under residual interference.

Rates are in bits per channel use throughout. The scalar noise level
is the per-port standard deviation of the whitened receive noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .numerics import project_psd_trace, waterfill

LN2 = math.log(2.0)
STREAM_POWER_REL_TOL = 1e-12


@dataclass(frozen=True)
class RateResult:
    """Achieved rate plus the number of actively used streams."""

    rate_bits: float
    active_streams: int
    per_user_rates: tuple[float, ...] | None = None


@dataclass(frozen=True)
class SuStrategyResult:
    """Single-user outcome: rate, transmit covariance, power ratio.

    ``alpha`` is the ratio of actually radiated to intended power and
    equals 1 for strategies designed against the true power model.
    """

    rate: RateResult
    tx_covariance: np.ndarray
    alpha: float = 1.0


@dataclass(frozen=True)
class PrecodingSolution:
    """Linear precoding solution for a set of users.

    ``precoders`` holds one (n_tx, streams_k) matrix of unit-norm
    beamforming columns per user and ``stream_powers`` the matching
    per-stream watts. ``alpha`` is true over predicted radiated power.
    """

    precoders: tuple[np.ndarray, ...]
    stream_powers: tuple[np.ndarray, ...]
    partition: tuple[int, ...]
    predicted_rate_bits: float
    predicted_power_w: float
    true_power_w: float

    @property
    def n_streams(self) -> int:
        return int(sum(f.shape[1] for f in self.precoders))

    @property
    def alpha(self) -> float:
        if self.predicted_power_w <= 0.0:
            return float("nan")
        return self.true_power_w / self.predicted_power_w

    def stacked(self) -> tuple[np.ndarray, np.ndarray]:
        """All beamformers as columns plus the flat power vector."""
        n_tx = self.precoders[0].shape[0]
        cols = [f for f in self.precoders if f.shape[1]]
        stacked = np.hstack(cols) if cols else np.zeros((n_tx, 0), dtype=complex)
        powers = (
            np.concatenate([p for p in self.stream_powers])
            if self.stream_powers
            else np.zeros(0)
        )
        return stacked, powers


@dataclass(frozen=True)
class MacSolution:
    """Sum-capacity solution of the dual multiple-access problem.

    ``objective_trace`` records the objective after every accepted
    ascent step (monotone nondecreasing by construction).
    """

    rate: RateResult
    mac_covariance: np.ndarray
    iterations: int
    kkt_residual: float
    converged: bool
    objective_trace: tuple[float, ...]


def _count_active(powers: np.ndarray, total_power: float) -> int:
    return int(np.count_nonzero(powers > STREAM_POWER_REL_TOL * max(total_power, 1e-300)))


def su_miso_capacity(
    h: np.ndarray, total_power: float, noise_std: float
) -> SuStrategyResult:
    """Matched-filter beamforming on the true channel row.

    Rate is log2(1 + P |h|^2 / sigma^2), the single-receiver capacity.
    """
    h = np.asarray(h).reshape(-1)
    gain = float(np.vdot(h, h).real)
    rate = math.log2(1.0 + total_power * gain / noise_std**2)
    if gain > 0.0:
        f = h.conj() / math.sqrt(gain)
        cov = total_power * np.outer(f, f.conj())
        streams = 1 if total_power > 0.0 else 0
    else:
        cov = np.zeros((h.size, h.size), dtype=complex)
        streams = 0
    return SuStrategyResult(RateResult(rate, streams), cov)


def su_miso_reciprocal(
    h_forward: np.ndarray,
    h_reverse: np.ndarray,
    total_power: float,
    noise_std: float,
) -> SuStrategyResult:
    """Beamform with the conjugated reverse-link channel.

    The transmitter only knows the reverse-direction vector; the
    achieved gain is |h_forward . conj(h_reverse)|^2 / |h_reverse|^2,
    which meets the capacity gain exactly when the two directions are
    aligned and drops to zero when they are orthogonal.
    """
    hf = np.asarray(h_forward).reshape(-1)
    hr = np.asarray(h_reverse).reshape(-1)
    if hf.size != hr.size:
        raise ValueError("forward and reverse channels must have equal length")
    nrm = float(np.vdot(hr, hr).real)
    if nrm == 0.0:
        return SuStrategyResult(
            RateResult(0.0, 0), np.zeros((hf.size, hf.size), dtype=complex)
        )
    f = hr.conj() / math.sqrt(nrm)
    gain = float(abs(hf @ f) ** 2)
    rate = math.log2(1.0 + total_power * gain / noise_std**2)
    cov = total_power * np.outer(f, f.conj())
    return SuStrategyResult(RateResult(rate, 1 if total_power > 0.0 else 0), cov)


def su_miso_naive(
    h_mismatched: np.ndarray,
    mismatch_power: np.ndarray,
    total_power: float,
    noise_std: float,
) -> SuStrategyResult:
    """Matched filter against the coupling-unaware channel estimate.

    The designer believes the transmit ports are uncoupled, so the
    beamformer matches the mismatched channel; the rate follows that
    same channel, while the truly radiated power is the quadratic form
    of the beamformer under ``mismatch_power`` times the budget.
    """
    hh = np.asarray(h_mismatched).reshape(-1)
    gain = float(np.vdot(hh, hh).real)
    if gain == 0.0:
        return SuStrategyResult(
            RateResult(0.0, 0), np.zeros((hh.size, hh.size), dtype=complex)
        )
    f = hh.conj() / math.sqrt(gain)
    rate = math.log2(1.0 + total_power * gain / noise_std**2)
    cov = total_power * np.outer(f, f.conj())
    alpha = float(np.vdot(f, mismatch_power @ f).real)
    return SuStrategyResult(
        RateResult(rate, 1 if total_power > 0.0 else 0), cov, alpha
    )


def su_mimo_capacity(
    channel: np.ndarray, total_power: float, noise_std: float
) -> SuStrategyResult:
    """Water-filling over the eigenmodes of the true channel."""
    h = np.asarray(channel)
    w, v = np.linalg.eigh(h.conj().T @ h)
    gains = np.clip(w.real, 0.0, None) / noise_std**2
    powers = waterfill(gains, total_power)
    rate = float(np.sum(np.log2(1.0 + powers * gains)))
    cov = (v * powers) @ v.conj().T
    return SuStrategyResult(RateResult(rate, _count_active(powers, total_power)), cov)


def su_mimo_reciprocal(
    channel_forward: np.ndarray,
    channel_reverse: np.ndarray,
    total_power: float,
    noise_std: float,
) -> SuStrategyResult:
    """Eigenmode transmission inferred from the reverse-link channel.

    The transmit eigenbasis and water-filling gains come from the
    conjugated reverse channel Gram matrix; the achieved rate is then
    evaluated on the true forward channel.
    """
    hf = np.asarray(channel_forward)
    hr = np.asarray(channel_reverse)
    if hr.shape != (hf.shape[1], hf.shape[0]):
        raise ValueError("reverse channel must have transposed shape")
    gram = hr.conj() @ hr.T
    w, v = np.linalg.eigh(0.5 * (gram + gram.conj().T))
    gains = np.clip(w.real, 0.0, None) / noise_std**2
    powers = waterfill(gains, total_power)
    cov = (v * powers) @ v.conj().T
    m = hf.shape[0]
    _, logdet = np.linalg.slogdet(
        np.eye(m) + hf @ cov @ hf.conj().T / noise_std**2
    )
    return SuStrategyResult(
        RateResult(float(logdet / LN2), _count_active(powers, total_power)), cov
    )


def su_mimo_naive(
    h_mismatched: np.ndarray,
    h_assumed: np.ndarray,
    mismatch_power: np.ndarray,
    total_power: float,
    noise_std: float,
) -> SuStrategyResult:
    """Water-filling against the fully coupling-unaware channel.

    Precoding modes and powers are designed on ``h_assumed`` (transmit
    coupling and noise correlation both ignored); the rate is evaluated
    on ``h_mismatched``, the channel actually seen through the true
    whitened front end, and ``alpha`` is the truly radiated fraction of
    the intended power.
    """
    hh = np.asarray(h_mismatched)
    ha = np.asarray(h_assumed)
    _, s, vh = np.linalg.svd(ha)
    gains = (s * s) / noise_std**2
    powers = waterfill(gains, total_power)
    v = vh.conj().T[:, : powers.size]
    cov = (v * powers) @ v.conj().T
    m = hh.shape[0]
    _, logdet = np.linalg.slogdet(
        np.eye(m) + hh @ cov @ hh.conj().T / noise_std**2
    )
    alpha = (
        float(np.trace(mismatch_power @ cov).real / total_power)
        if total_power > 0.0
        else 1.0
    )
    return SuStrategyResult(
        RateResult(float(logdet / LN2), _count_active(powers, total_power)), cov, alpha
    )


def _block_mask(partition: tuple[int, ...]) -> np.ndarray:
    total = sum(partition)
    mask = np.zeros((total, total), dtype=bool)
    offset = 0
    for size in partition:
        mask[offset : offset + size, offset : offset + size] = True
        offset += size
    return mask


def dpc_sum_rate(
    channel: np.ndarray, mac_covariance: np.ndarray, noise_std: float
) -> float:
    """Sum rate log2 det(I + H^H Xi H / sigma^2) for a stacked channel."""
    h = np.asarray(channel)
    m = h.shape[0]
    gram = h @ h.conj().T / noise_std**2
    _, logdet = np.linalg.slogdet(np.eye(m) + gram @ mac_covariance)
    return float(logdet / LN2)


def mac_sum_capacity(
    channel: np.ndarray,
    partition: tuple[int, ...],
    total_power: float,
    noise_std: float,
    initial: np.ndarray | None = None,
    rel_tol: float = 1e-12,
    max_iterations: int = 5000,
) -> MacSolution:
    """Broadcast sum capacity via its dual multiple-access problem.

    Maximizes log2 det(I + G Xi) over block-diagonal PSD Xi with
    tr(Xi) <= total power, where G is the stacked-channel Gram matrix
    over the noise variance. Projected gradient ascent with an Armijo
    backtracking arc search; the step is warm-started at twice the
    previous accepted step. Iterates are monotone nondecreasing.

    ``kkt_residual`` measures the normalized fixed-point gap of the
    projected-gradient map; values below 1e-5 set ``converged``.
    """
    h = np.asarray(channel)
    partition = tuple(int(p) for p in partition)
    m_total = h.shape[0]
    if sum(partition) != m_total or any(p < 1 for p in partition):
        raise ValueError("partition must be positive and sum to the channel rows")
    if total_power < 0.0:
        raise ValueError("power budget must be nonnegative")
    mask = _block_mask(partition)
    gram = h @ h.conj().T / noise_std**2
    gram = 0.5 * (gram + gram.conj().T)
    eye = np.eye(m_total)

    def objective(xi: np.ndarray) -> float:
        _, logdet = np.linalg.slogdet(eye + gram @ xi)
        return float(logdet / LN2)

    def masked_gradient(xi: np.ndarray) -> np.ndarray:
        core = np.linalg.solve(eye + gram @ xi, gram)
        grad = 0.5 * (core + core.conj().T) / LN2
        return np.where(mask, grad, 0.0)

    if initial is not None:
        xi = project_psd_trace(np.where(mask, initial, 0.0), total_power)
    else:
        xi = (total_power / m_total) * np.eye(m_total, dtype=complex)
    fx = objective(xi)
    trace = [fx]
    step = 1.0
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        grad = masked_gradient(xi)
        step = min(1.0, 2.0 * step)
        accepted = False
        while step > 1e-30:
            cand = project_psd_trace(np.where(mask, xi + step * grad, 0.0), total_power)
            fc = objective(cand)
            inner = float(np.trace(grad @ (cand - xi)).real)
            if fc >= fx + 1e-4 * inner:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        gain = fc - fx
        xi, fx = cand, fc
        trace.append(fx)
        if gain <= rel_tol * max(abs(fx), 1e-12) and iterations > 2:
            break

    grad = masked_gradient(xi)
    grad_norm = float(np.linalg.norm(grad))
    if total_power > 0.0 and grad_norm > 0.0:
        probe = total_power / grad_norm
        moved = project_psd_trace(np.where(mask, xi + probe * grad, 0.0), total_power)
        kkt_residual = float(np.linalg.norm(moved - xi)) / total_power
    else:
        kkt_residual = 0.0

    active = 0
    offset = 0
    for size in partition:
        block = xi[offset : offset + size, offset : offset + size]
        vals = np.linalg.eigvalsh(0.5 * (block + block.conj().T))
        active += int(np.count_nonzero(vals > STREAM_POWER_REL_TOL * max(total_power, 1e-300)))
        offset += size
    return MacSolution(
        rate=RateResult(fx, active),
        mac_covariance=xi,
        iterations=iterations,
        kkt_residual=kkt_residual,
        converged=bool(kkt_residual < 1e-5),
        objective_trace=tuple(trace),
    )


def _split_rows(channel: np.ndarray, partition: tuple[int, ...]) -> list[np.ndarray]:
    offsets = np.cumsum((0,) + tuple(partition))
    return [channel[offsets[k] : offsets[k + 1]] for k in range(len(partition))]


def greedy_zf(
    channel_assumed: np.ndarray,
    partition: tuple[int, ...],
    total_power: float,
    noise_std: float,
) -> PrecodingSolution:
    """Greedy zero-forcing stream selection with exact nulling.

    Streams are added one at a time: each candidate user contributes
    the dominant singular direction of its channel projected on the
    orthogonal complement of the already selected virtual streams. The
    precoder zero-forces the stacked virtual rows via pseudo-inverse,
    powers come from water-filling the resulting stream gains, and a
    stream is kept only while the predicted sum rate still improves.
    """
    h = np.asarray(channel_assumed)
    partition = tuple(int(p) for p in partition)
    m_total, n_tx = h.shape
    if sum(partition) != m_total or any(p < 1 for p in partition):
        raise ValueError("partition must be positive and sum to the channel rows")
    if total_power < 0.0:
        raise ValueError("power budget must be nonnegative")
    users = _split_rows(h, partition)
    max_streams = min(n_tx, m_total)

    basis = np.zeros((n_tx, 0), dtype=complex)
    rows = np.zeros((0, n_tx), dtype=complex)
    owners: list[int] = []
    per_user = [0] * len(partition)
    best_rate = 0.0
    best_beams = np.zeros((n_tx, 0), dtype=complex)
    best_powers = np.zeros(0)
    best_owners: list[int] = []

    while len(owners) < max_streams:
        proj = np.eye(n_tx) - basis @ basis.conj().T
        candidate = None
        for k, hk in enumerate(users):
            if per_user[k] >= hk.shape[0]:
                continue
            u, s, vh = np.linalg.svd(hk @ proj)
            if candidate is None or s[0] > candidate[0]:
                candidate = (float(s[0]), k, u[:, 0], vh[0].conj())
        if candidate is None or candidate[0] ** 2 <= 1e-28:
            break
        _, k, left, direction = candidate
        rows_next = np.vstack([rows, (left.conj() @ users[k])[None, :]])
        inverse = np.linalg.pinv(rows_next)
        norms = np.linalg.norm(inverse, axis=0)
        gains = 1.0 / (norms**2 * noise_std**2)
        powers = waterfill(gains, total_power)
        rate = float(np.sum(np.log2(1.0 + powers * gains)))
        if rate <= best_rate + 1e-12:
            break
        rows = rows_next
        basis = np.hstack([basis, direction[:, None]])
        owners.append(k)
        per_user[k] += 1
        best_rate = rate
        best_beams = inverse / norms[None, :]
        best_powers = powers
        best_owners = list(owners)

    precoders: list[np.ndarray] = []
    stream_powers: list[np.ndarray] = []
    for k in range(len(partition)):
        idx = [i for i, owner in enumerate(best_owners) if owner == k]
        precoders.append(
            best_beams[:, idx] if idx else np.zeros((n_tx, 0), dtype=complex)
        )
        stream_powers.append(best_powers[idx] if idx else np.zeros(0))
    used_power = float(sum(float(p.sum()) for p in stream_powers))
    return PrecodingSolution(
        precoders=tuple(precoders),
        stream_powers=tuple(stream_powers),
        partition=partition,
        predicted_rate_bits=best_rate,
        predicted_power_w=used_power,
        true_power_w=used_power,
    )


def with_true_power(
    solution: PrecodingSolution, mismatch_power: np.ndarray
) -> PrecodingSolution:
    """Recompute the truly radiated power of a naive linear solution."""
    stacked, powers = solution.stacked()
    if stacked.shape[1] == 0:
        return solution
    cov = (stacked * powers) @ stacked.conj().T
    true_power = float(np.trace(mismatch_power @ cov).real)
    return replace(solution, true_power_w=true_power)


def evaluate_bc_rates(
    channel_true: np.ndarray,
    solution: PrecodingSolution,
    noise_std: float,
) -> RateResult:
    """Per-user rates of a linear solution on the true channel.

    Each user decodes its own streams jointly; the other users' beams
    act as colored interference added to the thermal noise.
    """
    h = np.asarray(channel_true)
    users = _split_rows(h, solution.partition)
    stacked, powers = solution.stacked()
    owner_of = np.concatenate(
        [
            np.full(f.shape[1], k, dtype=int)
            for k, f in enumerate(solution.precoders)
        ]
    ) if stacked.shape[1] else np.zeros(0, dtype=int)
    total_power = float(powers.sum())
    rates: list[float] = []
    for k, hk in enumerate(users):
        m_k = hk.shape[0]
        received = hk @ stacked if stacked.shape[1] else np.zeros((m_k, 0), dtype=complex)
        own = owner_of == k
        if not np.any(own):
            rates.append(0.0)
            continue
        noise_cov = noise_std**2 * np.eye(m_k, dtype=complex)
        if np.any(~own):
            other = received[:, ~own] * powers[~own]
            noise_cov = noise_cov + other @ received[:, ~own].conj().T
        signal = (received[:, own] * powers[own]) @ received[:, own].conj().T
        _, logdet = np.linalg.slogdet(
            np.eye(m_k) + np.linalg.solve(noise_cov, signal)
        )
        rates.append(float(logdet / LN2))
    active = _count_active(powers, total_power if total_power > 0 else 1.0)
    return RateResult(float(sum(rates)), active, tuple(rates))
