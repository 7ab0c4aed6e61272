"""Line-delimited JSON client for out-of-process intent generators.

Requests: {"id", "query", "n", "beam"}. Responses: {"id", "intents":
[{"text", "logprob"}]} and may arrive out of order; they are matched by id.
The transport is either a child process (stdio pipes) or a local TCP socket.
"""

from __future__ import annotations

import json
import shlex
import socket
import subprocess

from .errors import DataError
from .intentgen import IntentSet, filter_intents
from .tokens import tokenize


class ExternalGenerator:
    def __init__(self, reader, writer, closer):
        self._reader = reader
        self._writer = writer
        self._closer = closer
        self._next_id = 0
        self._pending: dict[int, dict] = {}

    @classmethod
    def from_command(cls, command: str | list[str]) -> "ExternalGenerator":
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        proc = subprocess.Popen(
            argv,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            encoding="utf-8",
        )

        def close():
            if proc.stdin:
                proc.stdin.close()
            proc.wait(timeout=10)

        return cls(proc.stdout, proc.stdin, close)

    @classmethod
    def from_tcp(cls, host: str, port: int) -> "ExternalGenerator":
        sock = socket.create_connection((host, port))
        reader = sock.makefile("r", encoding="utf-8")
        writer = sock.makefile("w", encoding="utf-8")

        def close():
            reader.close()
            writer.close()
            sock.close()

        return cls(reader, writer, close)

    def request(self, query: str, n: int, beam: int) -> list[tuple[str, float]]:
        """Send one generation request and wait for its response."""
        req_id = self._next_id
        self._next_id += 1
        self._writer.write(
            json.dumps(
                {"id": req_id, "query": query, "n": n, "beam": beam},
                separators=(",", ":"),
            )
            + "\n"
        )
        self._writer.flush()
        response = self._read_response(req_id)
        if "error" in response:
            raise DataError(f"generator error for {query!r}: {response['error']}")
        try:
            return [
                (str(item["text"]), float(item["logprob"]))
                for item in response["intents"]
            ]
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed generator response: {response!r}") from exc

    def _read_response(self, req_id: int) -> dict:
        if req_id in self._pending:
            return self._pending.pop(req_id)
        while True:
            line = self._reader.readline()
            if not line:
                raise DataError("generator closed the stream before responding")
            line = line.strip()
            if not line:
                continue
            try:
                response = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"generator sent invalid JSON: {line!r}") from exc
            rid = response.get("id")
            if rid == req_id:
                return response
            if rid is not None:
                self._pending[int(rid)] = response

    def close(self) -> None:
        self._closer()

    def __enter__(self) -> "ExternalGenerator":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def generate_external(
    gen: ExternalGenerator, query: str, n: int, beam: int
) -> IntentSet:
    """Request candidates from an external generator, then apply local filtering."""
    raw = gen.request(query, n=n, beam=beam)
    query_tokens = tokenize(query)
    return filter_intents([(tokenize(text), lp) for text, lp in raw], query_tokens, n=n)
