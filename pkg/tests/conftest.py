"""Shared fixtures: miniature extractor configs and compact synthetic scenarios."""

from __future__ import annotations

import numpy as np
import pytest

from cloudsentry.extractor import ExtractorConfig, init_extractor
from cloudsentry.ingest import FaultSpec, ProviderProfile, SyntheticScenario


@pytest.fixture
def mini_config() -> ExtractorConfig:
    """Tiny architecture (T=4, m=2, hidden=3) for gradient checks."""
    return ExtractorConfig(
        channels=2,
        window_len=4,
        kernel_sizes=(3, 5, 7),
        branch_channels=2,
        cnn_dim=4,
        lstm_hidden=3,
        lstm_layers=2,
        context_dim=3,
        key_dim=3,
        value_dim=4,
    )


@pytest.fixture
def mini_params(mini_config):
    return init_extractor(mini_config, seed=11)


def make_small_scenario(seed: int = 99) -> SyntheticScenario:
    """Two providers, 700 steps, six mixed faults; trains in seconds."""
    providers = (
        ProviderProfile(
            provider_id="aws",
            base_level=(0.5, 0.4),
            diurnal_amplitude=(0.02, 0.02),
            noise_std=(0.02, 0.015),
            log_rate=0.3,
        ),
        ProviderProfile(
            provider_id="gcp",
            base_level=(0.45, 0.35),
            diurnal_amplitude=(0.02, 0.025),
            noise_std=(0.018, 0.02),
            phase=0.4,
            log_rate=0.3,
        ),
    )
    faults = (
        FaultSpec(start_step=120, length=8, kind="spike", magnitude=9.0, provider_id="aws", channel=0),
        FaultSpec(start_step=260, length=8, kind="log-burst", magnitude=5.0, provider_id="aws"),
        FaultSpec(start_step=430, length=8, kind="spike", magnitude=9.0, provider_id="aws", channel=1),
        FaultSpec(start_step=600, length=8, kind="log-burst", magnitude=5.0, provider_id="aws"),
        FaultSpec(start_step=200, length=8, kind="spike", magnitude=9.0, provider_id="gcp", channel=1),
        FaultSpec(start_step=560, length=8, kind="spike", magnitude=9.5, provider_id="gcp", channel=0),
    )
    return SyntheticScenario(
        seed=seed, duration_steps=700, providers=providers, fault_specs=faults
    )


@pytest.fixture
def small_scenario() -> SyntheticScenario:
    return make_small_scenario()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
