"""Shared fixtures: corpus builders and a local embedding-service stub."""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np
import pytest

from checkrank.corpus import Debate, SentenceRecord


def make_record(line_number, text, label=None, debate_id="d1", speaker="SPK"):
    return SentenceRecord(debate_id=debate_id, line_number=line_number,
                          speaker=speaker, text=text, label=label)


def make_debate(rows, debate_id="d1"):
    """Build a debate from (line_number, text, label) tuples."""
    records = tuple(
        make_record(line, text, label, debate_id=debate_id)
        for line, text, label in rows)
    return Debate(debate_id=debate_id, records=records)


def write_corpus_tsv(directory: Path, debate_id: str, rows,
                     labeled: bool = True) -> Path:
    """Write rows of (line, speaker, text[, label]) as a debate TSV."""
    lines = []
    for row in rows:
        cols = [str(row[0]), row[1], row[2]]
        if labeled:
            cols.append(str(row[3]))
        lines.append("\t".join(cols))
    path = directory / f"{debate_id}.tsv"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


CHECKWORTHY_VOCAB = [
    "deficit", "tariff", "unemployment", "billion", "revenue", "inflation",
    "exports", "imports", "medicare", "pension", "subsidy", "surplus",
    "homicide", "immigration", "emission", "turnout", "wage", "premium",
    "enrollment", "tuition",
]

FILLER_VOCAB = [
    "well", "folks", "look", "really", "believe", "maybe", "truly",
    "honestly", "kind", "sort", "things", "stuff", "talk", "say", "tell",
    "great", "wonderful", "tremendous", "frankly", "listen",
]


def generate_synthetic_corpus(directory: Path, n_debates: int = 5,
                              n_lines: int = 100, seed: int = 0,
                              positive_rate: float = 0.2) -> None:
    """Write labeled debate TSVs with a plantable check-worthiness signal.

    Check-worthy sentences carry numeric tokens and words from a distinct
    vocabulary; the rest is generic filler.
    """
    import random

    rng = random.Random(seed)
    directory.mkdir(parents=True, exist_ok=True)
    for d in range(n_debates):
        rows = []
        for line in range(1, n_lines + 1):
            speaker = rng.choice(["SMITH", "JONES"])
            if rng.random() < positive_rate:
                words = (rng.choices(CHECKWORTHY_VOCAB, k=4)
                         + [str(rng.randint(2, 99)), "percent"]
                         + rng.choices(FILLER_VOCAB, k=2))
                rng.shuffle(words)
                rows.append((line, speaker, " ".join(words), 1))
            else:
                words = rng.choices(FILLER_VOCAB, k=rng.randint(5, 9))
                rows.append((line, speaker, " ".join(words), 0))
        write_corpus_tsv(directory, f"debate{d}", rows, labeled=True)


class StubEmbeddingHandler(BaseHTTPRequestHandler):
    """Answers POST /embed; behavior is steered by server attributes."""

    def do_POST(self):  # noqa: N802 (http.server API)
        server = self.server
        if self.path != "/embed":
            self.send_error(404)
            return
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length))
        texts = body["texts"]
        server.requests_seen.append(list(texts))

        mode = server.mode
        if mode == "http_500":
            self.send_response(500)
            self.end_headers()
            self.wfile.write(b"boom")
            return
        if mode == "malformed":
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.end_headers()
            self.wfile.write(b'{"not_vectors": []}')
            return

        dim = server.dim if mode != "wrong_dim" else server.dim - 1
        vectors = [stub_vector(text, dim) for text in texts]
        payload = json.dumps({"vectors": vectors}).encode("utf-8")
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


def stub_vector(text: str, dim: int) -> list[float]:
    """Deterministic per-text vector so order-preservation is checkable."""
    seed = sum(ord(c) for c in text) % 1000
    rng = np.random.default_rng(seed)
    return [float(x) for x in rng.standard_normal(dim)]


class StubServer:
    def __init__(self, dim: int = 8):
        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), StubEmbeddingHandler)
        self.httpd.dim = dim
        self.httpd.mode = "ok"
        self.httpd.requests_seen = []
        self.thread = threading.Thread(target=self.httpd.serve_forever,
                                       daemon=True)
        self.thread.start()

    @property
    def url(self) -> str:
        host, port = self.httpd.server_address
        return f"http://{host}:{port}"

    @property
    def dim(self) -> int:
        return self.httpd.dim

    @property
    def requests_seen(self):
        return self.httpd.requests_seen

    def set_mode(self, mode: str) -> None:
        self.httpd.mode = mode

    def close(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()


@pytest.fixture
def stub_service():
    server = StubServer(dim=8)
    yield server
    server.close()


def pytest_runtest_logreport(report):
    """One visible pass/fail line per acceptance criterion."""
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    outcome = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
    print(f"\nACCEPTANCE {name}: {outcome}", flush=True)
