"""Reward service: line-delimited JSON scoring over stdio or a local socket.

Each request carries a synthesis text plus optional precomputed criteria
scores and an optional policy/base log-probability pair; the response
returns the mode's reward, the structure report, the preferred-value score
and the KL term. Responses depend only on their request, so connections can
be served concurrently, and every number serializes at full precision —
service output is bit-identical to in-process scoring.
"""

from __future__ import annotations

import json
import logging
import socketserver
import sys
from dataclasses import dataclass
from typing import Callable, TextIO

from .rewards import (
    CriteriaScores,
    RewardConfig,
    kl_term,
    penalized_reward,
    pvf_score,
    r_basic,
    r_basic_case,
    r_gpt4,
)
from .structure import PatternConfig, analyze, default_pattern_config

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
MODES = ("basic", "gpt4", "combined")


class RequestError(ValueError):
    """Malformed or incomplete reward request; carries a typed error code."""

    def __init__(self, code: str, message: str, retryable: bool = False, **extra):
        self.code = code
        self.retryable = retryable
        self.extra = extra
        super().__init__(message)


@dataclass
class RewardService:
    """Scores reward requests; pure per-request, safe for concurrent use."""

    mode: str = "basic"
    reward_config: RewardConfig | None = None
    pattern_config: PatternConfig | None = None
    # Called as evaluator(synthesis_text, sample_payload) -> CriteriaScores;
    # required for gpt4/combined requests that do not precompute scores.
    evaluator: Callable | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r} (expected one of {MODES})")
        self.reward_config = self.reward_config or RewardConfig()
        self.pattern_config = self.pattern_config or default_pattern_config()

    def handle_line(self, line: str) -> dict:
        """Parse and score one request line; errors become typed responses."""
        try:
            request = json.loads(line)
        except json.JSONDecodeError as exc:
            return _error_response(None, RequestError("malformed_request", f"invalid JSON: {exc}"))
        if not isinstance(request, dict):
            return _error_response(
                None, RequestError("malformed_request", "request must be a JSON object")
            )
        request_id = request.get("id")
        try:
            return self.handle(request)
        except RequestError as exc:
            return _error_response(request_id, exc)
        except Exception as exc:  # pragma: no cover - defensive catch-all
            logger.exception("unexpected service failure")
            return _error_response(
                request_id, RequestError("internal_error", repr(exc), retryable=True)
            )

    def handle(self, request: dict) -> dict:
        text = request.get("synthesis_text")
        if not isinstance(text, str) or not text.strip():
            raise RequestError("malformed_request", "synthesis_text must be a nonempty string")

        report = analyze(text, self.pattern_config)
        basic = r_basic(report.word_count, report.is_paper_structured, self.reward_config)
        case = r_basic_case(report.word_count, report.is_paper_structured, self.reward_config)

        scores = self._resolve_scores(request, text)
        pvf = gpt4 = None
        if scores is not None:
            pvf = pvf_score(scores, self.reward_config.preferred_value)
            gpt4 = r_gpt4(scores, self.reward_config)

        kl = self._resolve_kl(request)

        if self.mode == "basic":
            base_reward = basic
        elif self.mode == "gpt4":
            if gpt4 is None:
                raise RequestError(
                    "missing_scores",
                    "gpt4 mode needs criteria_scores or a sample payload for the evaluator",
                )
            base_reward = gpt4
        else:
            if gpt4 is None:
                raise RequestError(
                    "missing_scores",
                    "combined mode needs criteria_scores or a sample payload for the evaluator",
                )
            base_reward = basic + gpt4

        reward = penalized_reward(base_reward, kl, self.reward_config.kl_coefficient)
        return {
            "schema_version": SCHEMA_VERSION,
            "id": request.get("id"),
            "mode": self.mode,
            "reward": reward,
            "structure": report.to_dict(),
            "pvf": pvf,
            "kl": kl,
            "diagnostics": {
                "case": case,
                "r_basic": basic,
                "r_gpt4": gpt4,
                "base_reward": base_reward,
                "kl_coefficient": self.reward_config.kl_coefficient,
                "scores": scores.as_dict() if scores is not None else None,
            },
        }

    def _resolve_scores(self, request: dict, text: str) -> CriteriaScores | None:
        raw_scores = request.get("criteria_scores")
        if raw_scores is not None:
            if not isinstance(raw_scores, dict):
                raise RequestError("malformed_request", "criteria_scores must be an object")
            try:
                return CriteriaScores.from_mapping(raw_scores)
            except ValueError as exc:
                raise RequestError("malformed_request", f"bad criteria_scores: {exc}") from exc
        if self.mode == "basic":
            return None
        if self.evaluator is None:
            return None
        sample_payload = request.get("sample")
        if sample_payload is None:
            return None
        try:
            return self.evaluator(text, sample_payload)
        except RequestError:
            raise
        except Exception as exc:
            raise RequestError(
                "evaluator_failure", repr(exc), retryable=True, attempts=getattr(exc, "attempts", 1)
            ) from exc

    @staticmethod
    def _resolve_kl(request: dict) -> float:
        policy = request.get("policy_logprobs")
        base = request.get("base_logprobs")
        if policy is None and base is None:
            return 0.0
        if policy is None or base is None:
            raise RequestError(
                "malformed_request", "policy_logprobs and base_logprobs must come together"
            )
        if not isinstance(policy, list) or not isinstance(base, list):
            raise RequestError("malformed_request", "logprobs must be arrays of numbers")
        try:
            return kl_term(policy, base)
        except (TypeError, ValueError) as exc:
            raise RequestError("malformed_request", str(exc)) from exc


def _error_response(request_id, exc: RequestError) -> dict:
    error = {"type": exc.code, "message": str(exc), "retryable": exc.retryable}
    error.update(exc.extra)
    return {"schema_version": SCHEMA_VERSION, "id": request_id, "error": error}


def evaluator_from_gateway(gateway_config, prompt_config=None):
    """Build a service evaluator backed by a chat-completion endpoint.

    The returned callable scores a synthesis against the request's embedded
    sample payload ({research_problem, papers: [{title, abstract}, ...]});
    concurrent evaluator calls are capped at the gateway parallelism limit.
    """
    import threading

    from .corpus import Paper
    from .gateway import make_backend, parse_scores
    from .prompting import build_evaluation_prompt

    backend = make_backend(gateway_config)
    limiter = threading.Semaphore(gateway_config.parallelism)

    class _PayloadSample:
        def __init__(self, payload: dict):
            problem = payload.get("research_problem")
            papers = payload.get("papers")
            if not problem or not isinstance(papers, list) or not papers:
                raise RequestError(
                    "malformed_request",
                    "sample payload needs research_problem and a papers list",
                )
            self.research_problem = problem
            self.papers = [
                Paper(
                    title=p.get("title", ""),
                    abstract=p.get("abstract", ""),
                    doi=p.get("doi"),
                )
                for p in papers
            ]

    def evaluate_payload(synthesis_text: str, sample_payload: dict) -> CriteriaScores:
        sample = _PayloadSample(sample_payload)
        prompt = build_evaluation_prompt(sample, synthesis_text, config=prompt_config)
        with limiter:
            raw = backend.complete([{"role": "user", "content": prompt}])
        return parse_scores(raw)

    return evaluate_payload


def serve_stdio(service: RewardService, stdin: TextIO | None = None, stdout: TextIO | None = None):
    """Answer one JSON request per input line until EOF."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    for line in stdin:
        if not line.strip():
            continue
        response = service.handle_line(line)
        stdout.write(json.dumps(response) + "\n")
        stdout.flush()


class _LineHandler(socketserver.StreamRequestHandler):
    def handle(self):
        while True:
            line = self.rfile.readline()
            if not line:
                break
            text = line.decode("utf-8")
            if not text.strip():
                continue
            response = self.server.service.handle_line(text)  # type: ignore[attr-defined]
            self.wfile.write((json.dumps(response) + "\n").encode("utf-8"))


class RewardServer(socketserver.ThreadingTCPServer):
    """Local TCP transport for the reward service, one JSON line per request."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, service: RewardService, host: str = "127.0.0.1", port: int = 0):
        self.service = service
        super().__init__((host, port), _LineHandler)

    @property
    def address(self) -> tuple[str, int]:
        return self.server_address[0], self.server_address[1]


def serve_socket(service: RewardService, host: str = "127.0.0.1", port: int = 8642):
    server = RewardServer(service, host=host, port=port)
    logger.info("reward service listening on %s:%d (mode=%s)", *server.address, service.mode)
    try:
        server.serve_forever()
    finally:
        server.server_close()
