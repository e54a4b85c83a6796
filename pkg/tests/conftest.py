from __future__ import annotations

import pytest

from chatserver import ChatServer


@pytest.fixture
def chat_server():
    server = ChatServer().start()
    yield server
    server.shutdown()
    server.server_close()


@pytest.fixture
def no_network(monkeypatch):
    """Make any outgoing HTTP attempt blow up loudly."""

    def forbidden(*args, **kwargs):
        raise AssertionError("network I/O attempted")

    monkeypatch.setattr("requests.sessions.Session.request", forbidden)
