"""Network bridge: drive a LaneDriveEnv remotely over newline-delimited JSON.

Protocol version 1. Client messages: reset (optional seed), step (action
index), close. Server messages: hello (sent once per connection), obs (one
per reset/step), error. Every message is a single JSON object on one line;
observation bytes travel base64-encoded (standard alphabet, padded). One
client is served at a time; the env survives disconnects and is handed to
the next client.
"""

from __future__ import annotations

import base64
import json
import logging
import socket
import threading
from dataclasses import dataclass

PROTOCOL_VERSION = 1
DEFAULT_PORT = 9090

log = logging.getLogger("lanedrive.bridge")


class ProtocolError(Exception):
    """Wire-level validation failure; code is one of bad_json, bad_type,
    bad_field, bad_state."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code
        self.message = message


@dataclass(frozen=True)
class Reset:
    seed: int | None = None


@dataclass(frozen=True)
class Step:
    action: int


@dataclass(frozen=True)
class Close:
    pass


@dataclass(frozen=True)
class Obs:
    frame_b64: str
    shape: tuple[int, int, int]
    reward: float
    done: bool
    info: dict


@dataclass(frozen=True)
class Error:
    code: str
    message: str


@dataclass(frozen=True)
class Hello:
    protocol_version: int
    action_count: int
    obs_shape: tuple[int, int, int]


def obs_message(observation, reward: float, done: bool, info: dict) -> Obs:
    """Wrap an observation tensor (uint8, row-major) for the wire."""
    data = observation.tobytes()
    return Obs(frame_b64=base64.b64encode(data).decode("ascii"),
               shape=tuple(observation.shape),
               reward=float(reward), done=bool(done), info=dict(info))


def encode_message(msg) -> str:
    """One newline-terminated JSON line, compact separators, no embedded
    newlines."""
    if isinstance(msg, Reset):
        d = {"type": "reset"}
        if msg.seed is not None:
            d["seed"] = msg.seed
    elif isinstance(msg, Step):
        d = {"type": "step", "action": msg.action}
    elif isinstance(msg, Close):
        d = {"type": "close"}
    elif isinstance(msg, Obs):
        d = {"type": "obs", "frame_b64": msg.frame_b64, "shape": list(msg.shape),
             "reward": msg.reward, "done": msg.done, "info": msg.info}
    elif isinstance(msg, Error):
        d = {"type": "error", "code": msg.code, "message": msg.message}
    elif isinstance(msg, Hello):
        d = {"type": "hello", "protocol_version": msg.protocol_version,
             "action_count": msg.action_count, "obs_shape": list(msg.obs_shape)}
    else:
        raise TypeError(f"not a wire message: {msg!r}")
    return json.dumps(d, separators=(",", ":")) + "\n"


def _require(d: dict, key: str, kinds, what: str):
    if key not in d:
        raise ProtocolError("bad_field", f"missing field {key!r} in {what}")
    v = d[key]
    if isinstance(v, bool) and bool not in (kinds if isinstance(kinds, tuple) else (kinds,)):
        raise ProtocolError("bad_field", f"field {key!r} has wrong type in {what}")
    if not isinstance(v, kinds):
        raise ProtocolError("bad_field", f"field {key!r} has wrong type in {what}")
    return v


def decode_message(line: str):
    """Parse and validate one line; unknown extra fields are ignored.

    Raises ProtocolError with code bad_json (malformed syntax), bad_type
    (unknown message type) or bad_field (missing/ill-typed/out-of-range
    field).
    """
    try:
        d = json.loads(line)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ProtocolError("bad_json", f"malformed JSON: {e}") from e
    if not isinstance(d, dict):
        raise ProtocolError("bad_json", "message must be a JSON object")
    mtype = d.get("type")
    if not isinstance(mtype, str):
        raise ProtocolError("bad_type", "missing or non-string 'type'")

    if mtype == "reset":
        seed = d.get("seed")
        if seed is not None:
            if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
                raise ProtocolError("bad_field", "seed must be a non-negative integer")
        return Reset(seed=seed)
    if mtype == "step":
        action = _require(d, "action", int, "step")
        if action < 0:
            raise ProtocolError("bad_field", "action must be non-negative")
        return Step(action=action)
    if mtype == "close":
        return Close()
    if mtype == "obs":
        frame_b64 = _require(d, "frame_b64", str, "obs")
        shape = _require(d, "shape", list, "obs")
        if len(shape) != 3 or not all(
                isinstance(v, int) and not isinstance(v, bool) and v > 0
                for v in shape):
            raise ProtocolError("bad_field", "shape must be three positive integers")
        reward = _require(d, "reward", (int, float), "obs")
        done = _require(d, "done", bool, "obs")
        info = _require(d, "info", dict, "obs")
        try:
            raw = base64.b64decode(frame_b64, validate=True)
        except Exception as e:
            raise ProtocolError("bad_field", f"frame_b64 is not base64: {e}") from e
        if len(raw) != shape[0] * shape[1] * shape[2]:
            raise ProtocolError(
                "bad_field",
                f"frame has {len(raw)} bytes, shape implies "
                f"{shape[0] * shape[1] * shape[2]}")
        return Obs(frame_b64=frame_b64, shape=tuple(shape),
                   reward=float(reward), done=done, info=info)
    if mtype == "error":
        return Error(code=_require(d, "code", str, "error"),
                     message=_require(d, "message", str, "error"))
    if mtype == "hello":
        pv = _require(d, "protocol_version", int, "hello")
        ac = _require(d, "action_count", int, "hello")
        shape = _require(d, "obs_shape", list, "hello")
        if len(shape) != 3 or not all(
                isinstance(v, int) and not isinstance(v, bool) and v > 0
                for v in shape):
            raise ProtocolError("bad_field", "obs_shape must be three positive integers")
        return Hello(protocol_version=pv, action_count=ac, obs_shape=tuple(shape))
    raise ProtocolError("bad_type", f"unknown message type {mtype!r}")


def _laps(env) -> int:
    total = env.track.total_length
    progress = env.last_info.get("lap_progress_total", 0.0)
    return max(0, int(progress // total))


class BridgeServer:
    """Serves one env to one client at a time over plain TCP.

    Request/response: each client line earns exactly one response line,
    except close, which ends the connection silently. Lifecycle errors
    (e.g. step before reset) are reported without touching env state and
    without ending the session.
    """

    def __init__(self, env, host: str = "127.0.0.1", port: int = DEFAULT_PORT):
        self.env = env
        self._sock = socket.create_server((host, port))
        self.address = self._sock.getsockname()[:2]
        self._shutdown = threading.Event()

    def shutdown(self) -> None:
        self._shutdown.set()
        try:
            self._sock.close()
        except OSError:
            pass

    def serve_forever(self) -> None:
        """Accept clients sequentially until shutdown() is called."""
        try:
            while not self._shutdown.is_set():
                try:
                    conn, peer = self._sock.accept()
                except OSError:
                    break
                log.info("client connected: %s", peer)
                try:
                    self._serve_client(conn)
                except (ConnectionError, BrokenPipeError, OSError) as e:
                    log.info("client i/o ended: %s", e)
                finally:
                    try:
                        conn.close()
                    except OSError:
                        pass
                log.info("client disconnected: %s", peer)
        finally:
            self.shutdown()

    def serve_one_client(self) -> None:
        """Accept and serve a single connection (test helper)."""
        conn, _ = self._sock.accept()
        try:
            self._serve_client(conn)
        finally:
            conn.close()

    def _serve_client(self, conn: socket.socket) -> None:
        episode_active = False
        f = conn.makefile("rb")
        hello = Hello(protocol_version=PROTOCOL_VERSION,
                      action_count=self.env.n_actions,
                      obs_shape=tuple(self.env.observation_shape))
        conn.sendall(encode_message(hello).encode("utf-8"))
        while True:
            raw = f.readline()
            if not raw:
                return
            try:
                msg = decode_message(raw.decode("utf-8", errors="strict"))
            except ProtocolError as e:
                self._send(conn, Error(code=e.code, message=e.message))
                continue
            if isinstance(msg, Close):
                return
            if isinstance(msg, Reset):
                if msg.seed is not None:
                    self.env.seed(msg.seed)
                obs = self.env.reset()
                episode_active = True
                self._send(conn, obs_message(
                    obs, reward=0.0, done=False,
                    info={"cte": float(self.env.last_info["cte"]),
                          "laps": _laps(self.env)}))
            elif isinstance(msg, Step):
                if not episode_active:
                    self._send(conn, Error(
                        code="bad_state",
                        message="step is only legal during an active episode"))
                    continue
                if msg.action >= self.env.n_actions:
                    self._send(conn, Error(
                        code="bad_field",
                        message=f"action {msg.action} outside "
                                f"[0, {self.env.n_actions})"))
                    continue
                result = self.env.step(msg.action)
                if result.done:
                    episode_active = False
                self._send(conn, obs_message(
                    result.observation, reward=result.reward, done=result.done,
                    info={"cte": float(result.info["cte"]),
                          "laps": _laps(self.env)}))
            else:
                self._send(conn, Error(code="bad_type",
                                       message="server-only message type"))

    @staticmethod
    def _send(conn: socket.socket, msg) -> None:
        conn.sendall(encode_message(msg).encode("utf-8"))


def serve_session(env, host: str = "127.0.0.1", port: int = DEFAULT_PORT,
                  ) -> BridgeServer:
    """Bind a BridgeServer and return it (call serve_forever to run)."""
    return BridgeServer(env, host=host, port=port)
