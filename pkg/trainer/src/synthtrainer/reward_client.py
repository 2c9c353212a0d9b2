"""Clients for the external reward service (line-delimited JSON).

Two transports mirror the service's: a managed subprocess speaking over
stdio, and a TCP connection to an already-running server. Requests retry
once after a transport hiccup; a reply carrying a typed error raises.
"""

from __future__ import annotations

import json
import socket
import subprocess
import sys
from typing import Sequence

EXPECTED_SCHEMA_VERSION = 1


class RewardServiceError(RuntimeError):
    """Service unreachable, protocol mismatch, or an error reply."""


def default_service_command(mode: str = "basic", config_path: str | None = None) -> list[str]:
    command = [
        sys.executable, "-m", "synthkit.cli",
        "reward", "serve", "--mode", mode, "--transport", "stdio",
    ]
    if config_path:
        command += ["--config", config_path]
    return command


def make_request(
    synthesis_text: str,
    policy_logprobs: Sequence[float] | None = None,
    base_logprobs: Sequence[float] | None = None,
    criteria_scores: dict | None = None,
    request_id=None,
) -> dict:
    request: dict = {"synthesis_text": synthesis_text}
    if request_id is not None:
        request["id"] = request_id
    if policy_logprobs is not None:
        request["policy_logprobs"] = list(policy_logprobs)
        request["base_logprobs"] = list(base_logprobs or [])
    if criteria_scores is not None:
        request["criteria_scores"] = criteria_scores
    return request


def _check_response(response: dict) -> dict:
    version = response.get("schema_version")
    if version != EXPECTED_SCHEMA_VERSION:
        raise RewardServiceError(f"unexpected schema_version {version!r}")
    error = response.get("error")
    if error:
        raise RewardServiceError(f"service error {error.get('type')}: {error.get('message')}")
    return response


class StdioRewardClient:
    """Owns a reward-service subprocess and scores requests over its pipes."""

    def __init__(self, command: list[str] | None = None, retries: int = 1):
        self.command = command or default_service_command()
        self.retries = retries
        self._proc: subprocess.Popen | None = None

    def _ensure_process(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        return self._proc

    def score(self, request: dict) -> dict:
        last_error: Exception | None = None
        for _ in range(self.retries + 1):
            try:
                proc = self._ensure_process()
                proc.stdin.write(json.dumps(request) + "\n")
                proc.stdin.flush()
                line = proc.stdout.readline()
                if not line:
                    raise RewardServiceError("reward service closed its output")
                return _check_response(json.loads(line))
            except (BrokenPipeError, OSError, json.JSONDecodeError, RewardServiceError) as exc:
                if isinstance(exc, RewardServiceError) and "service error" in str(exc):
                    raise  # typed reply, not a transport problem
                last_error = exc
                self.close()
        raise RewardServiceError(f"reward service unavailable after retries: {last_error!r}")

    def close(self):
        if self._proc is not None:
            try:
                if self._proc.stdin:
                    self._proc.stdin.close()
                self._proc.terminate()
                self._proc.wait(timeout=5)
            except Exception:
                self._proc.kill()
            self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()


class SocketRewardClient:
    """Scores requests against a reward server listening on host:port."""

    def __init__(self, host: str, port: int, retries: int = 1, timeout: float = 30.0):
        self.host = host
        self.port = port
        self.retries = retries
        self.timeout = timeout
        self._fh = None
        self._sock = None

    def _ensure_connection(self):
        if self._fh is None:
            self._sock = socket.create_connection((self.host, self.port), timeout=self.timeout)
            self._fh = self._sock.makefile("rw", encoding="utf-8")
        return self._fh

    def score(self, request: dict) -> dict:
        last_error: Exception | None = None
        for _ in range(self.retries + 1):
            try:
                fh = self._ensure_connection()
                fh.write(json.dumps(request) + "\n")
                fh.flush()
                line = fh.readline()
                if not line:
                    raise RewardServiceError("reward server closed the connection")
                return _check_response(json.loads(line))
            except (OSError, json.JSONDecodeError, RewardServiceError) as exc:
                if isinstance(exc, RewardServiceError) and "service error" in str(exc):
                    raise
                last_error = exc
                self.close()
        raise RewardServiceError(f"reward server unavailable after retries: {last_error!r}")

    def close(self):
        if self._fh is not None:
            try:
                self._fh.close()
                self._sock.close()
            except Exception:
                pass
            self._fh = None
            self._sock = None

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()
