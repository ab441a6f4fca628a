#!/usr/bin/env python3
# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

import pytest
from helpers import TEST_KEY
from prometheus_client import CollectorRegistry

from reviewer.core.calendar import load_calendar
from reviewer.core.config import ServiceConfig
from reviewer.core.models import ClassificationConfig
from reviewer.fixtures import PR129_COMMENT_TIMES, pr129_snapshot, scripted_clock
from reviewer.literals import ProviderKind
from reviewer.managers.host import Snapshot, SnapshotHost
from reviewer.managers.ledger import DeliveryLedger
from reviewer.managers.provider import MockProvider
from reviewer.managers.runner import ReviewMetrics, ReviewRunner


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ("LLM_API_KEY", "HOST_TOKEN", "WEBHOOK_SECRET"):
        monkeypatch.delenv(name, raising=False)


@pytest.fixture
def api_key(monkeypatch):
    monkeypatch.setenv("LLM_API_KEY", TEST_KEY)
    return TEST_KEY


@pytest.fixture
def config():
    return ServiceConfig.parse_obj(
        {"provider": {"kind": ProviderKind.MOCK.value, "backoff_seconds": 0}}
    )


@pytest.fixture
def cal_2024():
    return load_calendar("2024")


@pytest.fixture
def cal_2023():
    return load_calendar("2023")


@pytest.fixture
def rules():
    return ClassificationConfig()


@pytest.fixture
def provider():
    return MockProvider()


@pytest.fixture
def host():
    return SnapshotHost(Snapshot(), clock=scripted_clock(["2024-05-14T07:08:35Z"]))


@pytest.fixture
def pr129_host():
    return SnapshotHost(pr129_snapshot(), clock=scripted_clock(PR129_COMMENT_TIMES))


@pytest.fixture
def runner_factory(config, provider):
    def build(host, cfg=None, prov=None, ledger=None):
        return ReviewRunner(
            cfg or config,
            host,
            prov or provider,
            ledger if ledger is not None else DeliveryLedger(),
            ReviewMetrics(CollectorRegistry()),
        )

    return build
