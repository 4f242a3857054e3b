"""Wire-protocol conformance for the gain-provider transport.

The stub provider in fixtures/ implements a documented deterministic
prediction rule, so both directions of the protocol are checked byte for
byte against independently constructed transcripts.
"""

import json
import struct
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from kcover.coverage import CumulativeVisibility, normalized_channels, update_cumvis
from kcover.env import sensor_position
from kcover.errors import ProviderError
from kcover.planner import PlannerConfig, gain_map, run_placement, SensorSet
from kcover.provider import SubprocessGainProvider
from kcover.visibility import visibility_field

from conftest import urban_env

STUB = [sys.executable, str(Path(__file__).parent / "fixtures" / "stub_provider.py")]


def stub_expectation(obs: np.ndarray, cum: np.ndarray) -> np.ndarray:
    """Recompute the stub's documented prediction rule."""
    h, w = obs.shape
    ramp = (np.arange(h * w, dtype=np.float64).reshape(h, w)) * 1e-7
    val = cum.astype(np.float64).sum(axis=0) * (1.0 - obs.astype(np.float64)) + ramp
    return np.maximum(val, 0.0)


class TestTranscript:
    def test_handshake_and_single_request_bytes(self):
        h = w = 4
        k = 2
        rng = np.random.default_rng(0)
        obs = rng.random((h, w)).astype("<f4")
        cum = rng.random((k, h, w)).astype("<f4")
        request = (
            json.dumps({"proto": 1, "grid": [h, w], "k": k}).encode() + b"\n"
            + json.dumps({"channels": 1 + k, "id": 0}).encode() + b"\n"
            + np.concatenate([obs[None], cum], axis=0).tobytes()
        )
        proc = subprocess.run(STUB, input=request, stdout=subprocess.PIPE, timeout=30)
        assert proc.returncode == 0
        expect_vals = stub_expectation(obs, cum).astype("<f4")
        expected = b'{"ok":true}\n' + b'{"id":0}\n' + expect_vals.tobytes()
        assert proc.stdout == expected

    def test_sequential_ids_match(self):
        h = w = 3
        k = 1
        payloads = []
        rng = np.random.default_rng(1)
        body = [json.dumps({"proto": 1, "grid": [h, w], "k": k}).encode() + b"\n"]
        for rid in range(100):
            chans = rng.random((1 + k, h, w)).astype("<f4")
            payloads.append(chans)
            body.append(json.dumps({"channels": 1 + k, "id": rid}).encode() + b"\n")
            body.append(chans.tobytes())
        proc = subprocess.run(STUB, input=b"".join(body), stdout=subprocess.PIPE, timeout=60)
        assert proc.returncode == 0
        out = proc.stdout
        assert out.startswith(b'{"ok":true}\n')
        out = out[len(b'{"ok":true}\n') :]
        frame = h * w * 4
        for rid in range(100):
            nl = out.index(b"\n")
            header = json.loads(out[:nl])
            assert header == {"id": rid}
            out = out[nl + 1 + frame :]
        assert out == b""

    def test_malformed_request_nonzero_exit(self):
        h = w = 3
        body = (
            json.dumps({"proto": 1, "grid": [h, w], "k": 2}).encode() + b"\n"
            + json.dumps({"channels": 1, "id": 0}).encode() + b"\n"
            + b"\x00" * (h * w * 4)
        )
        proc = subprocess.run(STUB, input=body, stdout=subprocess.PIPE, timeout=30)
        assert proc.returncode != 0


class TestClient:
    def test_predict_matches_stub_rule(self):
        env = urban_env(0, size=8)
        C = CumulativeVisibility.empty(env, 2)
        C = update_cumvis(C, visibility_field(env, sensor_position(env, (0, 0))))
        with SubprocessGainProvider(STUB) as prov:
            got = prov.predict(env, C)
            obs, cum = normalized_channels(env, C)
            assert np.allclose(got, stub_expectation(obs, cum), atol=1e-6)
            # session stays open across requests
            got2 = prov.predict(env, C)
            assert np.array_equal(got, got2)

    def test_grid_change_rejected(self):
        env8 = urban_env(0, size=8)
        env16 = urban_env(0, size=16)
        with SubprocessGainProvider(STUB) as prov:
            prov.predict(env8, CumulativeVisibility.empty(env8, 2))
            with pytest.raises(ProviderError):
                prov.predict(env16, CumulativeVisibility.empty(env16, 2))

    def test_unstartable_command(self):
        env = urban_env(0, size=8)
        prov = SubprocessGainProvider("/nonexistent/provider-binary")
        with pytest.raises(ProviderError):
            prov.predict(env, CumulativeVisibility.empty(env, 2))

    def test_protocol_garbage_raises(self):
        env = urban_env(0, size=8)
        prov = SubprocessGainProvider([sys.executable, "-c", "print('not json')"])
        with pytest.raises(ProviderError):
            prov.predict(env, CumulativeVisibility.empty(env, 2))


class TestPlannerIntegration:
    def test_gain_map_masks_noncandidates(self):
        env = urban_env(2, size=8)
        C = CumulativeVisibility.empty(env, 2)
        with SubprocessGainProvider(STUB) as prov:
            gm = gain_map(env, C, SensorSet(), provider=prov)
            assert np.all(np.isnan(gm.values[~gm.valid]))
            assert np.all(gm.values[gm.valid] >= 0.0)

    def test_full_run_with_stub_terminates(self):
        env = urban_env(3, size=8)
        cfg = PlannerConfig(k=2, delta=0.9, seed=0, first_sensor="random")
        with SubprocessGainProvider(STUB) as prov:
            result = run_placement(env, cfg, provider=prov)
        assert result.status in ("reached", "budget")
        assert result.psi > 0.0
        # provider swap keeps every planner invariant: monotone psi
        psis = [s.psi for s in result.steps]
        assert all(b >= a for a, b in zip(psis, psis[1:]))
