"""Line-delimited JSON generation server (stdio or local TCP).

Requests: {"id", "query", "n", "beam", optional "swap": {"term", "vector"}}.
Responses: {"id", "intents": [{"text", "logprob"}]}. A malformed request
produces {"id": <id if recoverable>, "error": ...} and the server stays up.
"""

from __future__ import annotations

import json
import socketserver
import sys

from .generate import MAX_WORDS, SwapSpec, beam_generate
from .train import load_checkpoint
from .vocab import tokenize


class Engine:
    def __init__(self, checkpoint: str):
        self.model, self.chunk_vocab, self.word_vocab, self.config = (
            load_checkpoint(checkpoint)
        )

    def generate(self, query: str, n: int, beam: int, swap: dict | None):
        swap_spec = None
        if swap is not None:
            swap_spec = SwapSpec(
                term=str(swap["term"]),
                vector=swap["vector"],
                d_model=self.config["d_model"],
            )
        words = tokenize(query)
        if not words:
            raise ValueError("empty query")
        results = beam_generate(
            self.model, self.chunk_vocab, self.word_vocab, words,
            n=n, beam=beam, max_words=MAX_WORDS, swap=swap_spec,
        )
        return [
            {"text": " ".join(continuation), "logprob": lp}
            for continuation, lp in results
            if continuation
        ]

    def handle_line(self, line: str) -> dict:
        req_id = None
        try:
            request = json.loads(line)
            if not isinstance(request, dict):
                raise ValueError("request must be a JSON object")
            req_id = request.get("id")
            query = request["query"]
            if not isinstance(query, str):
                raise ValueError("query must be a string")
            n = int(request.get("n", 5))
            beam = int(request.get("beam", 10))
            if n < 1 or beam < 1:
                raise ValueError("n and beam must be >= 1")
            swap = request.get("swap")
            if swap is not None and (
                not isinstance(swap, dict) or "term" not in swap or "vector" not in swap
            ):
                raise ValueError("swap needs 'term' and 'vector'")
            intents = self.generate(query, n=n, beam=beam, swap=swap)
            return {"id": req_id, "intents": intents}
        except Exception as exc:  # stay alive whatever the input was
            return {"id": req_id, "error": str(exc)}


def serve_stdio(checkpoint: str, stdin=None, stdout=None) -> None:
    engine = Engine(checkpoint)
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    for line in stdin:
        if not line.strip():
            continue
        response = engine.handle_line(line)
        stdout.write(json.dumps(response, separators=(",", ":")) + "\n")
        stdout.flush()


def serve_tcp(checkpoint: str, host: str = "127.0.0.1", port: int = 8765) -> None:
    engine = Engine(checkpoint)

    class Handler(socketserver.StreamRequestHandler):
        def handle(self):
            for raw in self.rfile:
                line = raw.decode("utf-8", errors="replace")
                if not line.strip():
                    continue
                response = engine.handle_line(line)
                self.wfile.write(
                    (json.dumps(response, separators=(",", ":")) + "\n").encode()
                )

    with socketserver.ThreadingTCPServer((host, port), Handler) as server:
        server.serve_forever()
