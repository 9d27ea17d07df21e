"""Serve the environment over TCP in a thread, then drive it as a remote
client speaking newline-delimited JSON — the same protocol any language can
use (see client/ for the TypeScript reference client).

Run from the repo root:  python3 demos/05_remote_bridge.py
"""

import base64
import json
import socket
import threading

import numpy as np

from lanedrive.bridge import BridgeServer
from lanedrive.env import EnvConfig, LaneDriveEnv

env = LaneDriveEnv(EnvConfig(observation_mode="lowres", seed=0,
                             max_episode_steps=200))
server = BridgeServer(env, host="127.0.0.1", port=0)
threading.Thread(target=server.serve_forever, daemon=True).start()
host, port = server.address
print(f"server listening on {host}:{port}")

sock = socket.create_connection((host, port))
reader = sock.makefile("rb")


def send(obj):
    sock.sendall((json.dumps(obj) + "\n").encode())


def recv():
    return json.loads(reader.readline())


hello = recv()
print(f"hello: protocol v{hello['protocol_version']}, "
      f"{hello['action_count']} actions, obs shape {hello['obs_shape']}")

send({"type": "reset", "seed": 7})
msg = recv()
obs = np.frombuffer(base64.b64decode(msg["frame_b64"]), dtype=np.uint8)
obs = obs.reshape(msg["shape"])
print(f"reset -> observation {obs.shape}, cte {msg['info']['cte']:+.3f}")

rng = np.random.default_rng(1)
total, steps = 0.0, 0
done = False
while not done:
    send({"type": "step", "action": int(rng.integers(0, hello["action_count"]))})
    msg = recv()
    total += msg["reward"]
    steps += 1
    done = msg["done"]
print(f"random episode over the wire: {steps} steps, total reward {total:.1f}")

# Lifecycle errors are reported without killing the session.
send({"type": "step", "action": 0})
print(f"step after done -> error code {recv()['code']!r} (session still open)")

send({"type": "close"})
sock.close()
server.shutdown()
print("closed cleanly")
