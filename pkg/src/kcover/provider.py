"""Client for external gain providers speaking the stdio protocol.

The provider runs as a child process.  All framing is newline-terminated
JSON headers followed by raw little-endian float32 tensors:

* handshake:  ``{"proto":1,"grid":[H,W],"k":k}`` -> ``{"ok":true}``
* request:    ``{"id":n,"channels":1+k}`` + (1+k)*H*W floats
  (channel 0 = terrain / z_ceil, channels 1..k = cumulative layers / z_ceil)
* response:   ``{"id":n}`` + H*W floats (predicted gain map, nonnegative,
  arbitrary scale - the planner only uses relative values)

Closing the child's stdin signals end of session; a conforming provider
exits 0.
"""

import json
import shlex
import subprocess

import numpy as np

from .coverage import CumulativeVisibility, normalized_channels
from .env import Environment
from .errors import ProviderError

PROTO_VERSION = 1


class SubprocessGainProvider:
    """Spawns a provider command and serializes dense gain-map requests to it."""

    def __init__(self, cmd):
        self._cmd = shlex.split(cmd) if isinstance(cmd, str) else list(cmd)
        self._proc = None
        self._grid = None
        self._k = None
        self._next_id = 0

    def _send_header(self, obj) -> None:
        line = json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"
        self._proc.stdin.write(line.encode("utf-8"))

    def _read_header(self) -> dict:
        line = self._proc.stdout.readline()
        if not line:
            raise ProviderError("provider closed its output stream")
        try:
            return json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ProviderError(f"provider sent a malformed header: {line[:80]!r}") from exc

    def _read_exact(self, n: int) -> bytes:
        chunks = []
        remaining = n
        while remaining > 0:
            chunk = self._proc.stdout.read(remaining)
            if not chunk:
                raise ProviderError(f"provider output ended {remaining} bytes short")
            chunks.append(chunk)
            remaining -= len(chunk)
        return b"".join(chunks)

    def _ensure_started(self, shape: tuple[int, int], k: int) -> None:
        if self._proc is None:
            try:
                self._proc = subprocess.Popen(
                    self._cmd, stdin=subprocess.PIPE, stdout=subprocess.PIPE
                )
            except OSError as exc:
                raise ProviderError(f"cannot start provider {self._cmd!r}: {exc}") from exc
            self._send_header({"proto": PROTO_VERSION, "grid": [shape[0], shape[1]], "k": k})
            self._proc.stdin.flush()
            reply = self._read_header()
            if reply.get("ok") is not True:
                raise ProviderError(f"provider rejected the handshake: {reply}")
            self._grid = shape
            self._k = k
        elif self._grid != shape or self._k != k:
            raise ProviderError(
                f"provider session is bound to grid {self._grid} k={self._k}, "
                f"got grid {shape} k={k}"
            )

    def predict(self, env: Environment, C: CumulativeVisibility) -> np.ndarray:
        """One dense gain-map prediction for the current coverage state."""
        H, W = env.shape
        self._ensure_started((H, W), C.k)
        obs, cum = normalized_channels(env, C)
        payload = np.concatenate([obs[None], cum], axis=0).astype("<f4").tobytes()
        rid = self._next_id
        self._next_id += 1
        try:
            self._send_header({"channels": 1 + C.k, "id": rid})
            self._proc.stdin.write(payload)
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise ProviderError("provider pipe broke while sending a request") from exc
        header = self._read_header()
        if header.get("id") != rid:
            raise ProviderError(f"response id {header.get('id')} does not match request {rid}")
        raw = self._read_exact(H * W * 4)
        return np.frombuffer(raw, dtype="<f4").reshape(H, W).astype(np.float64)

    def close(self) -> None:
        if self._proc is None:
            return
        try:
            self._proc.stdin.close()
        except OSError:
            pass
        try:
            self._proc.wait(timeout=10)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            self._proc.wait()
        self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        self.close()
