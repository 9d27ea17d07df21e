import base64
import json
import socket
import threading

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lanedrive import bridge as B
from lanedrive.env import EnvConfig, LaneDriveEnv


class TestEncode:
    def test_step_wire_format(self):
        assert B.encode_message(B.Step(action=2)) == '{"type":"step","action":2}\n'

    def test_single_line(self):
        msg = B.Error(code="bad_json", message="x")
        line = B.encode_message(msg)
        assert line.endswith("\n")
        assert "\n" not in line[:-1]

    def test_obs_base64_example(self):
        obs = np.array([0, 255, 0, 255], dtype=np.uint8).reshape(1, 1, 4)
        m = B.obs_message(obs, reward=0.5, done=False, info={"cte": 0.0, "laps": 0})
        assert m.frame_b64 == "AP8A/w=="


shapes = st.tuples(st.integers(1, 4), st.integers(1, 4), st.integers(1, 4))


@st.composite
def obs_messages(draw):
    shape = draw(shapes)
    n = shape[0] * shape[1] * shape[2]
    payload = bytes(draw(st.lists(st.integers(0, 255), min_size=n, max_size=n)))
    return B.Obs(frame_b64=base64.b64encode(payload).decode(),
                 shape=shape,
                 reward=draw(st.floats(allow_nan=False, allow_infinity=False)),
                 done=draw(st.booleans()),
                 info={"cte": draw(st.floats(-5, 5)), "laps": draw(st.integers(0, 9))})


wire_messages = st.one_of(
    st.builds(B.Reset, seed=st.one_of(st.none(), st.integers(0, 2**31))),
    st.builds(B.Step, action=st.integers(0, 100)),
    st.just(B.Close()),
    obs_messages(),
    st.builds(B.Error, code=st.sampled_from(["bad_json", "bad_type", "bad_field",
                                             "bad_state"]),
              message=st.text(max_size=40)),
    st.builds(B.Hello, protocol_version=st.integers(1, 5),
              action_count=st.integers(1, 16), obs_shape=shapes),
)


class TestRoundTrip:
    @settings(max_examples=200, deadline=None)
    @given(wire_messages)
    def test_decode_encode_identity(self, msg):
        assert B.decode_message(B.encode_message(msg)) == msg


class TestDecodeErrors:
    def test_reset_without_seed(self):
        assert B.decode_message('{"type":"reset"}') == B.Reset(seed=None)

    def test_step_missing_action(self):
        with pytest.raises(B.ProtocolError) as e:
            B.decode_message('{"type":"step"}')
        assert e.value.code == "bad_field"

    def test_truncated_line(self):
        with pytest.raises(B.ProtocolError) as e:
            B.decode_message('{"type":"step","act')
        assert e.value.code == "bad_json"

    def test_unknown_type(self):
        with pytest.raises(B.ProtocolError) as e:
            B.decode_message('{"type":"warp"}')
        assert e.value.code == "bad_type"

    def test_non_object(self):
        with pytest.raises(B.ProtocolError) as e:
            B.decode_message('[1,2,3]')
        assert e.value.code == "bad_json"

    def test_bool_action_rejected(self):
        with pytest.raises(B.ProtocolError) as e:
            B.decode_message('{"type":"step","action":true}')
        assert e.value.code == "bad_field"

    def test_frame_length_mismatch(self):
        with pytest.raises(B.ProtocolError) as e:
            B.decode_message(json.dumps({
                "type": "obs", "frame_b64": "AAAA", "shape": [2, 2, 2],
                "reward": 0.0, "done": False, "info": {}}))
        assert e.value.code == "bad_field"


class Client:
    def __init__(self, address):
        self.sock = socket.create_connection(address, timeout=10)
        self.reader = self.sock.makefile("rb")

    def send(self, obj):
        self.sock.sendall((json.dumps(obj) + "\n").encode())

    def send_raw(self, raw: bytes):
        self.sock.sendall(raw)

    def recv(self):
        line = self.reader.readline()
        assert line, "server closed unexpectedly"
        return json.loads(line)

    def close(self):
        self.sock.close()


@pytest.fixture
def server():
    env = LaneDriveEnv(EnvConfig(observation_mode="lowres", seed=0,
                                 max_episode_steps=40))
    srv = B.BridgeServer(env, host="127.0.0.1", port=0)
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    yield srv
    srv.shutdown()


class TestServer:
    def test_hello_handshake(self, server):
        c = Client(server.address)
        hello = c.recv()
        assert hello == {"type": "hello", "protocol_version": 1,
                         "action_count": 5, "obs_shape": [20, 20, 4]}
        c.close()

    def test_step_before_reset_keeps_session(self, server):
        c = Client(server.address)
        c.recv()
        c.send({"type": "step", "action": 1})
        err = c.recv()
        assert err["type"] == "error" and err["code"] == "bad_state"
        c.send({"type": "reset", "seed": 5})
        assert c.recv()["type"] == "obs"
        c.close()

    def test_one_response_per_request(self, server):
        c = Client(server.address)
        c.recv()
        c.send({"type": "reset", "seed": 1})
        c.recv()
        for a in (2, 2, 1):
            c.send({"type": "step", "action": a})
        replies = [c.recv() for _ in range(3)]
        assert all(r["type"] == "obs" for r in replies)
        # No extra pending line: a new request gets exactly the next reply.
        c.send({"type": "step", "action": 0})
        assert c.recv()["type"] == "obs"
        c.close()

    def test_errors_do_not_mutate_env(self, server):
        c = Client(server.address)
        c.recv()
        c.send({"type": "reset", "seed": 9})
        first = c.recv()
        c.send({"type": "step", "action": 99})       # out of range
        assert c.recv()["code"] == "bad_field"
        c.send_raw(b"this is not json\n")
        assert c.recv()["code"] == "bad_json"
        c.send({"type": "step", "action": 2})
        after_err = c.recv()
        c.close()

        env2 = LaneDriveEnv(EnvConfig(observation_mode="lowres", seed=0,
                                      max_episode_steps=40))
        env2.seed(9)
        env2.reset()
        expected = env2.step(2)
        got = base64.b64decode(after_err["frame_b64"])
        assert got == expected.observation.tobytes()
        assert after_err["reward"] == expected.reward

    def test_disconnect_then_next_client(self, server):
        c1 = Client(server.address)
        c1.recv()
        c1.send({"type": "close"})
        c1.close()
        c2 = Client(server.address)
        assert c2.recv()["type"] == "hello"
        c2.send({"type": "reset", "seed": 2})
        assert c2.recv()["type"] == "obs"
        c2.close()

    def test_step_after_done_is_bad_state(self, server):
        c = Client(server.address)
        c.recv()
        c.send({"type": "reset", "seed": 3})
        c.recv()
        done = False
        while not done:
            c.send({"type": "step", "action": 0})
            reply = c.recv()
            done = reply["done"]
        c.send({"type": "step", "action": 0})
        assert c.recv()["code"] == "bad_state"
        c.close()


class TestProtocolTransparency:
    def test_remote_matches_local(self, server):
        rng = np.random.default_rng(7)
        actions = [int(a) for a in rng.integers(0, 5, size=100)]

        c = Client(server.address)
        c.recv()
        c.send({"type": "reset", "seed": 1234})
        first = c.recv()
        remote = [(base64.b64decode(first["frame_b64"]), first["reward"],
                   first["done"])]
        for a in actions:
            c.send({"type": "step", "action": a})
            m = c.recv()
            remote.append((base64.b64decode(m["frame_b64"]), m["reward"],
                           m["done"]))
            if m["done"]:
                c.send({"type": "reset", "seed": 999})
                m = c.recv()
                remote.append((base64.b64decode(m["frame_b64"]), m["reward"],
                               m["done"]))
        c.close()

        env = LaneDriveEnv(EnvConfig(observation_mode="lowres", seed=0,
                                     max_episode_steps=40))
        env.seed(1234)
        local = [(env.reset().tobytes(), 0.0, False)]
        for a in actions:
            r = env.step(a)
            local.append((r.observation.tobytes(), r.reward, r.done))
            if r.done:
                env.seed(999)
                local.append((env.reset().tobytes(), 0.0, False))
        assert remote == local
