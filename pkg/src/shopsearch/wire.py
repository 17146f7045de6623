"""External policy bridge: line-delimited JSON over child stdio or a socket.

Frames, engine to policy:
  {"type": "hello", "protocol": "jobshop-policy", "version": 1}
  {"type": "reset", "instance": {"id", "num_jobs", "num_machines",
      "lower_bound", "initial_makespan"}, "action_set", "episode_len",
      "rtg", "context_length"}
  {"type": "act", "step", "rtg", "features": [11 raw numbers],
      "window": {"rtg", "features", "actions", "mask"}, "action_set"}

Frames, policy to engine:
  {"type": "action", "action_id": <int>}
  {"type": "error", "message": <str>}

hello and reset are one-way notifications; every act frame expects exactly
one response frame, so act/action pairs alternate strictly. Feature vectors
travel raw; the reset frame carries lower_bound and episode_len so the
policy side can normalize.
"""

from __future__ import annotations

import json
import queue
import shlex
import socket
import subprocess
import threading
from typing import IO

from .engine import ActRequest, EpisodeInfo

PROTOCOL_NAME = "jobshop-policy"
PROTOCOL_VERSION = 1
DEFAULT_TIMEOUT = 10.0


class ProtocolError(RuntimeError):
    """Timeout, malformed frame, declared policy error, or invalid action."""


def hello_frame() -> dict:
    return {"type": "hello", "protocol": PROTOCOL_NAME, "version": PROTOCOL_VERSION}


def reset_frame(info: EpisodeInfo) -> dict:
    return {
        "type": "reset",
        "instance": {
            "id": info.instance_id,
            "num_jobs": info.num_jobs,
            "num_machines": info.num_machines,
            "lower_bound": info.lower_bound,
            "initial_makespan": info.initial_makespan,
        },
        "action_set": info.action_set.value,
        "episode_len": info.episode_len,
        "rtg": info.rtg,
        "context_length": info.context_length,
    }


def act_frame(request: ActRequest) -> dict:
    return {
        "type": "act",
        "step": request.step,
        "rtg": request.rtg,
        "features": request.features.as_list(),
        "window": request.window.to_json(),
        "action_set": request.action_set.value,
    }


class ExternalPolicy:
    """Drives one policy process or socket peer through the frame protocol.

    One connection serves episodes sequentially; parallel episodes need
    separate ExternalPolicy instances.
    """

    def __init__(
        self,
        command: str | list[str] | None = None,
        *,
        host: str | None = None,
        port: int | None = None,
        timeout: float = DEFAULT_TIMEOUT,
    ):
        if (command is None) == (host is None):
            raise ValueError("give exactly one of command or host/port")
        self.timeout = timeout
        self._proc: subprocess.Popen | None = None
        self._sock: socket.socket | None = None
        if command is not None:
            argv = shlex.split(command) if isinstance(command, str) else list(command)
            self._proc = subprocess.Popen(
                argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                text=True, bufsize=1,
            )
            self._writer: IO[str] = self._proc.stdin
            reader: IO[str] = self._proc.stdout
        else:
            if port is None:
                raise ValueError("socket mode needs a port")
            self._sock = socket.create_connection((host, port), timeout=timeout)
            self._writer = self._sock.makefile("w", encoding="utf-8")
            reader = self._sock.makefile("r", encoding="utf-8")
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._reader_thread = threading.Thread(
            target=self._pump, args=(reader,), daemon=True
        )
        self._reader_thread.start()
        self._send(hello_frame())

    def _pump(self, reader: IO[str]) -> None:
        try:
            for line in reader:
                self._lines.put(line)
        except (OSError, ValueError):
            pass
        self._lines.put(None)

    def _send(self, frame: dict) -> None:
        try:
            self._writer.write(json.dumps(frame, separators=(",", ":")) + "\n")
            self._writer.flush()
        except (OSError, ValueError) as exc:
            raise ProtocolError(f"policy connection closed while sending: {exc}") from exc

    def _receive(self) -> dict:
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            raise ProtocolError(f"policy timed out after {self.timeout}s") from None
        if line is None:
            raise ProtocolError("policy closed the stream")
        try:
            frame = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"malformed frame: {line.strip()!r}") from exc
        if not isinstance(frame, dict) or "type" not in frame:
            raise ProtocolError(f"frame without type: {line.strip()!r}")
        return frame

    def begin_episode(self, info: EpisodeInfo) -> None:
        self._send(reset_frame(info))

    def act(self, request: ActRequest) -> int:
        self._send(act_frame(request))
        frame = self._receive()
        if frame["type"] == "error":
            raise ProtocolError(f"policy error: {frame.get('message', '')}")
        if frame["type"] != "action":
            raise ProtocolError(f"expected action frame, got {frame['type']!r}")
        action = frame.get("action_id")
        if not isinstance(action, int) or isinstance(action, bool) \
                or not 0 <= action < request.action_set.action_count:
            raise ProtocolError(f"invalid action {action!r}")
        return action

    def close(self) -> None:
        if self._proc is not None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=2.0)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
        if self._sock is not None:
            try:
                self._writer.close()
            except OSError:
                pass
            self._sock.close()

    def __enter__(self) -> "ExternalPolicy":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()
