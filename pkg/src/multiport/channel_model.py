"""Physically consistent MIMO channel construction from impedance matrices.

A two-sided multiport network (transmit array, receive array, and the
trans-impedance coupling between them) terminated by source and load
impedances is mapped to the standard information-theoretic model
y = H x + noise, preserving radiated transmit power and the receive
noise statistics. The map yields, per link direction:

- the voltage transfer matrix from generator voltages to load voltages,
- the transmit power-coupling matrix and its (non-Hermitian) root,
  which translate symbol covariance into radiated power,
- the receive-port noise covariance (amplifier voltage and current
  noise plus antenna thermal noise) and the output noise covariance
  after load termination, with a matched root,
- the normalized channel, plus the two mismatched channels a designer
  would infer when ignoring transmit coupling and receive noise
  correlation.

The output-noise root uses a real scalar root whenever the receive
impedance matrix is exactly scalar (a multiple of the identity), and a
Cholesky-based product root otherwise. With this convention the
single-receiver reciprocity identity and the general reverse-link
transform hold to machine precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import sqrt

import numpy as np

from .numerics import FactorizationError, cholesky_psd, hermitize, principal_sqrt_psd

BOLTZMANN_J_PER_K = 1.380649e-23
REFERENCE_TEMPERATURE_K = 290.0
DEFAULT_BANDWIDTH_HZ = 740e3
DEFAULT_NOISE_RESISTANCE_OHM = 5.0
DEFAULT_NOISE_CONDUCTANCE_S = 2e-3

_SYMMETRY_TOL = 1e-8


@dataclass(frozen=True)
class NoiseConfig:
    """Receive-chain noise parameters.

    ``voltage_noise_var`` and ``current_noise_var`` are the variances
    of the amplifier's series voltage source (V^2) and shunt current
    source (A^2); ``correlation`` is their complex correlation
    coefficient. Antenna thermal noise is 4 k T B times the receive
    resistance matrix.
    """

    voltage_noise_var: float
    current_noise_var: float
    correlation: complex = 0.0
    antenna_temperature_k: float = REFERENCE_TEMPERATURE_K
    bandwidth_hz: float = DEFAULT_BANDWIDTH_HZ

    def __post_init__(self) -> None:
        if self.voltage_noise_var < 0.0 or self.current_noise_var < 0.0:
            raise ValueError("noise variances must be nonnegative")
        if abs(self.correlation) > 1.0 + 1e-12:
            raise ValueError("noise correlation magnitude must not exceed 1")
        if self.antenna_temperature_k < 0.0 or self.bandwidth_hz <= 0.0:
            raise ValueError("temperature must be >= 0 and bandwidth > 0")

    @classmethod
    def default(cls) -> "NoiseConfig":
        """Amplifier noise at 290 K reference over the default bandwidth."""
        four_ktb = 4.0 * BOLTZMANN_J_PER_K * REFERENCE_TEMPERATURE_K * DEFAULT_BANDWIDTH_HZ
        return cls(
            voltage_noise_var=four_ktb * DEFAULT_NOISE_RESISTANCE_OHM,
            current_noise_var=four_ktb * DEFAULT_NOISE_CONDUCTANCE_S,
        )


@dataclass(frozen=True)
class ImpedanceSystem:
    """Partitioned impedance description of one link direction.

    ``z_tx`` couples the transmit ports among themselves, ``z_rx`` the
    receive ports, and ``z_coupling`` maps transmit currents to receive
    open-circuit voltages. The network is assumed reciprocal, so the
    reverse-direction coupling is the transpose. Every transmit port is
    driven through ``z_source`` and every receive port is terminated by
    ``z_load``.
    """

    z_tx: np.ndarray
    z_rx: np.ndarray
    z_coupling: np.ndarray
    z_source: complex
    z_load: complex

    def __post_init__(self) -> None:
        n, m = self.n_tx, self.n_rx
        if self.z_tx.shape != (n, n) or self.z_rx.shape != (m, m):
            raise ValueError("side impedance blocks must be square")
        if self.z_coupling.shape != (m, n):
            raise ValueError("coupling block must be (n_rx, n_tx)")
        for name, block in (("z_tx", self.z_tx), ("z_rx", self.z_rx)):
            scale = max(float(np.linalg.norm(block)), 1e-300)
            if float(np.linalg.norm(block - block.T)) > _SYMMETRY_TOL * scale:
                raise ValueError(f"{name} must be complex symmetric (reciprocal network)")
        if not (self.z_source.real > 0.0 and self.z_load.real > 0.0):
            raise ValueError("source and load impedances need positive real part")

    @property
    def n_tx(self) -> int:
        return self.z_tx.shape[0]

    @property
    def n_rx(self) -> int:
        return self.z_rx.shape[0]


def reversed_link(system: ImpedanceSystem) -> ImpedanceSystem:
    """Swap transmit and receive sides of a reciprocal network."""
    return ImpedanceSystem(
        z_tx=system.z_rx,
        z_rx=system.z_tx,
        z_coupling=system.z_coupling.T,
        z_source=system.z_source,
        z_load=system.z_load,
    )


def is_scalar_matrix(matrix: np.ndarray) -> bool:
    """True when the matrix is exactly a multiple of the identity."""
    m = matrix.shape[0]
    return bool(np.all(matrix == matrix[0, 0] * np.eye(m)))


def voltage_transfer(system: ImpedanceSystem) -> np.ndarray:
    """Transfer matrix from generator voltages to receive load voltages."""
    n, m = system.n_tx, system.n_rx
    a_tx = system.z_tx + system.z_source * np.eye(n)
    a_rx = system.z_rx + system.z_load * np.eye(m)
    right = system.z_coupling @ np.linalg.inv(a_tx)
    return system.z_load * np.linalg.solve(a_rx, right)


def power_coupling(system: ImpedanceSystem) -> np.ndarray:
    """Hermitian form mapping generator-voltage covariance to radiated power.

    With x drawn with covariance R and fed through the source network,
    the radiated power is tr(power_coupling @ R) / source_resistance
    scaled consistently; the matrix itself is PSD.
    """
    n = system.n_tx
    a_inv = np.linalg.inv(system.z_tx + system.z_source * np.eye(n))
    r_tx = (0.5 * (system.z_tx + system.z_tx.conj().T)).real
    core = a_inv.conj().T @ r_tx @ a_inv
    return system.z_source.real * hermitize(core, tol=1e-6)


def power_coupling_root(system: ImpedanceSystem) -> np.ndarray:
    """Non-Hermitian root G with G @ G^H equal to the power coupling."""
    n = system.n_tx
    a_inv = np.linalg.inv(system.z_tx + system.z_source * np.eye(n))
    r_tx = 0.5 * (system.z_tx + system.z_tx.conj().T)
    return sqrt(system.z_source.real) * a_inv.conj().T @ principal_sqrt_psd(r_tx)


def decoupled_power_root(system: ImpedanceSystem) -> np.ndarray:
    """Per-port power root a designer ignoring transmit coupling would use.

    Each port is treated as an isolated voltage divider formed by the
    source impedance and that port's self impedance. Returns a 1-D
    complex vector; the corresponding matrix root is its diagonal.
    """
    z_self = np.diag(system.z_tx)
    if np.any(z_self.real <= 0.0):
        raise FactorizationError("port self resistances must be positive")
    return sqrt(system.z_source.real) * np.sqrt(z_self.real) / np.conj(z_self + system.z_source)


def port_noise_covariance(system: ImpedanceSystem, noise: NoiseConfig) -> np.ndarray:
    """Covariance of the total noise voltage at the loaded receive ports.

    Combines amplifier voltage noise, amplifier current noise driven
    through the receive impedance matrix, their cross terms, and the
    antenna thermal noise of the receive resistances.
    """
    m = system.n_rx
    z = system.z_rx
    sigma_u = sqrt(noise.voltage_noise_var)
    sigma_i = sqrt(noise.current_noise_var)
    rho = complex(noise.correlation)
    cross = np.conj(rho) * z
    thermal = (
        4.0
        * BOLTZMANN_J_PER_K
        * noise.antenna_temperature_k
        * noise.bandwidth_hz
        * 0.5
        * (z + z.conj().T)
    )
    q = (
        noise.voltage_noise_var * np.eye(m)
        + noise.current_noise_var * (z @ z.conj().T)
        - sigma_u * sigma_i * (cross + cross.conj().T)
        + thermal
    )
    return hermitize(q, tol=1e-6)


@dataclass(frozen=True)
class ChannelBundle:
    """All derived matrices of one link direction for one realization."""

    system: ImpedanceSystem = field(repr=False)
    voltage_transfer: np.ndarray = field(repr=False)
    power_coupling: np.ndarray = field(repr=False)
    power_coupling_root: np.ndarray = field(repr=False)
    decoupled_power_root: np.ndarray = field(repr=False)
    port_noise_covariance: np.ndarray = field(repr=False)
    output_noise_covariance: np.ndarray = field(repr=False)
    output_noise_root: np.ndarray = field(repr=False)
    noise_scale: float
    channel: np.ndarray = field(repr=False)
    channel_mismatched: np.ndarray = field(repr=False)
    channel_assumed: np.ndarray = field(repr=False)

    @property
    def n_tx(self) -> int:
        return self.channel.shape[1]

    @property
    def n_rx(self) -> int:
        return self.channel.shape[0]


def build_bundle(system: ImpedanceSystem, noise: NoiseConfig) -> ChannelBundle:
    """Map an impedance description to the normalized channel model.

    Raises FactorizationError when the receive-noise covariance cannot
    be factored (numerically indefinite realization).
    """
    n, m = system.n_tx, system.n_rx
    d = voltage_transfer(system)
    b = power_coupling(system)
    b_root = power_coupling_root(system)
    b_diag_root = decoupled_power_root(system)
    q = port_noise_covariance(system, noise)

    z_load = system.z_load
    r_load = z_load.real
    a_rx = system.z_rx + z_load * np.eye(m)
    if is_scalar_matrix(system.z_rx):
        # Scalar receive side: pick the real scalar root so the
        # normalized channel carries no spurious global phase.
        sigma_q = q[0, 0].real
        if not sigma_q > 0.0:
            raise FactorizationError("receive noise covariance is not positive definite")
        sigma_out = (
            abs(z_load) * sqrt(sigma_q) / (sqrt(r_load) * abs(system.z_rx[0, 0] + z_load))
        )
        noise_root = sigma_out * np.eye(m)
        r_out = (sigma_out * sigma_out) * np.eye(m)
    else:
        q_chol = cholesky_psd(q)
        noise_root = (z_load / sqrt(r_load)) * np.linalg.solve(a_rx, q_chol)
        r_out = noise_root @ noise_root.conj().T
    sigma_theta = sqrt(float(np.trace(r_out).real) / m)

    try:
        whitened = np.linalg.solve(noise_root, d)
        channel = sigma_theta * whitened @ np.linalg.inv(b_root.conj().T)
        channel_mismatched = sigma_theta * whitened / np.conj(b_diag_root)[None, :]
        diag_out_root = np.sqrt(np.diag(r_out).real)
        channel_assumed = (
            sigma_theta * (d / diag_out_root[:, None]) / np.conj(b_diag_root)[None, :]
        )
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(str(exc)) from exc

    return ChannelBundle(
        system=system,
        voltage_transfer=d,
        power_coupling=b,
        power_coupling_root=b_root,
        decoupled_power_root=b_diag_root,
        port_noise_covariance=q,
        output_noise_covariance=hermitize(r_out, tol=1e-6),
        output_noise_root=noise_root,
        noise_scale=sigma_theta,
        channel=channel,
        channel_mismatched=channel_mismatched,
        channel_assumed=channel_assumed,
    )


def reciprocal_channel(forward: ChannelBundle, reverse: ChannelBundle) -> np.ndarray:
    """Predict the forward channel from the reverse-direction bundle.

    Uses only reverse-link quantities plus the forward power and noise
    roots (known at the forward transmitter), exploiting reciprocity of
    the underlying network. With matching bundles the result equals
    ``forward.channel`` to machine precision.
    """
    ratio = forward.noise_scale / reverse.noise_scale
    core = (
        reverse.power_coupling_root.conj()
        @ reverse.channel.T
        @ reverse.output_noise_root.T
    )
    out = np.linalg.solve(forward.output_noise_root, core)
    return ratio * out @ np.linalg.inv(forward.power_coupling_root.conj().T)


def mismatch_power_matrix(bundle: ChannelBundle) -> np.ndarray:
    """Hermitian matrix giving true radiated power of naive precoding.

    For a transmit covariance R designed under the decoupled power
    model, the actually radiated power is tr(K @ R) with this K; it is
    the true power coupling conjugated by the inverse diagonal root.
    """
    inv_root = 1.0 / bundle.decoupled_power_root
    k = (inv_root[:, None] * bundle.power_coupling) * np.conj(inv_root)[None, :]
    return hermitize(k, tol=1e-6)
