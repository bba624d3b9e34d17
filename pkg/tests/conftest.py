"""Shared fixtures plus the acceptance-summary terminal hook."""

from __future__ import annotations

import numpy as np
import pytest

import multiport as mp

# Populated by tests/test_acceptance.py; printed after the run so every
# criterion gets one visible PASS/FAIL line regardless of capture mode.
ACCEPTANCE_RECORDS: list[tuple[str, bool, str]] = []


def record_acceptance(name: str, ok: bool, detail: str) -> None:
    ACCEPTANCE_RECORDS.append((name, bool(ok), detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RECORDS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RECORDS:
        verdict = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"{verdict} {name}: {detail}")


@pytest.fixture(scope="session")
def default_noise() -> mp.NoiseConfig:
    return mp.NoiseConfig.default()


@pytest.fixture(scope="session")
def termination() -> complex:
    return complex(mp.dipole_self_impedance().real)


def make_system(
    n_tx: int,
    rx_partition: tuple[int, ...],
    tx_spacing: float = 0.4,
    rx_spacing: float = 0.35,
    seed: int = 0,
    realization: int = 0,
) -> mp.ImpedanceSystem:
    """UCA transmit array, per-user UCA receive blocks, random coupling."""
    z_tx = mp.array_impedance_matrix(mp.uniform_circular_array(n_tx, tx_spacing))
    blocks = []
    for m in rx_partition:
        if m == 1:
            blocks.append(np.array([[mp.dipole_self_impedance()]]))
        else:
            blocks.append(
                mp.array_impedance_matrix(mp.uniform_circular_array(m, rx_spacing))
            )
    m_total = sum(rx_partition)
    z_rx = np.zeros((m_total, m_total), dtype=complex)
    offset = 0
    for b in blocks:
        z_rx[offset : offset + b.shape[0], offset : offset + b.shape[0]] = b
        offset += b.shape[0]
    z21 = mp.coupling_realization(
        seed, realization, 0, m_total, n_tx, mp.far_field_coupling_std()
    )
    term = complex(mp.dipole_self_impedance().real)
    return mp.ImpedanceSystem(
        z_tx=z_tx, z_rx=z_rx, z_coupling=z21, z_source=term, z_load=term
    )


def make_bundles(
    system: mp.ImpedanceSystem, noise: mp.NoiseConfig | None = None
) -> tuple[mp.ChannelBundle, mp.ChannelBundle]:
    noise = noise or mp.NoiseConfig.default()
    return (
        mp.build_bundle(system, noise),
        mp.build_bundle(mp.reversed_link(system), noise),
    )
