import json
import threading
from contextlib import contextmanager
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from ecsp.backend_io import (
    BackendDescriptor,
    load_backend_outputs,
    request_many,
    request_prediction,
    wait_ready,
    write_backend_outputs,
)
from ecsp.core import ProbabilityVector
from ecsp.errors import BadRow, NotOnSimplex, ProtocolError, Timeout
from ecsp.promptgen import PromptArtifact, PromptVariant
from ecsp.tta import TtaVariant


def prompt(sample_id="s1", text="hello there"):
    return PromptArtifact(sample_id=sample_id, variant=PromptVariant.SP, text=text)


@contextmanager
def mock_server(reply):
    """Serve /healthz and /predict; `reply(body) -> (status, payload)`."""
    requests_seen = []

    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):
            pass

        def do_GET(self):
            if self.path == "/healthz":
                self.send_response(200)
                self.end_headers()
            else:
                self.send_response(404)
                self.end_headers()

        def do_POST(self):
            if self.path != "/predict":
                self.send_response(404)
                self.end_headers()
                return
            length = int(self.headers.get("Content-Length", 0))
            body = json.loads(self.rfile.read(length))
            requests_seen.append(body)
            status, payload = reply(body)
            blob = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(blob)))
            self.end_headers()
            self.wfile.write(blob)

    server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield f"http://127.0.0.1:{server.server_port}", requests_seen
    finally:
        server.shutdown()
        thread.join(timeout=5)


def uniform_reply(body):
    return 200, {"probs": [1.0 / 9.0] * 9}


class TestLoadBackendOutputs:
    def write(self, tmp_path, rows):
        p = tmp_path / "probs.jsonl"
        p.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
        return p

    def row(self, probs, sample="s1", backend="b", variant="identity"):
        return {"sample_id": sample, "backend_id": backend, "variant_id": variant, "probs": probs}

    def test_small_drift_renormalized(self, tmp_path):
        probs = [1.0 / 9.0] * 8 + [1.0 / 9.0 + 4e-7]
        p = self.write(tmp_path, [self.row(probs)])
        vectors = load_backend_outputs(p)
        assert sum(vectors[0].probs) == pytest.approx(1.0, abs=1e-15)

    def test_large_deviation_rejected(self, tmp_path):
        p = self.write(tmp_path, [self.row([0.8 / 9.0] * 9)])
        with pytest.raises(NotOnSimplex) as err:
            load_backend_outputs(p)
        assert err.value.line == 1

    def test_wrong_arity_rejected(self, tmp_path):
        p = self.write(tmp_path, [self.row([0.125] * 8)])
        with pytest.raises(BadRow):
            load_backend_outputs(p)

    def test_missing_key_rejected(self, tmp_path):
        p = self.write(tmp_path, [{"sample_id": "s", "probs": [1.0 / 9.0] * 9}])
        with pytest.raises(BadRow):
            load_backend_outputs(p)

    def test_non_numeric_rejected(self, tmp_path):
        p = self.write(tmp_path, [self.row(["x"] + [1.0 / 9.0] * 8)])
        with pytest.raises(BadRow):
            load_backend_outputs(p)

    def test_exact_rows_pass_unchanged(self, tmp_path):
        probs = [0.5, 0.5, 0, 0, 0, 0, 0, 0, 0]
        p = self.write(tmp_path, [self.row(probs)])
        assert load_backend_outputs(p)[0].probs == tuple(float(x) for x in probs)

    def test_parse_serialize_parse_stable(self, tmp_path):
        import numpy as np

        rng = np.random.default_rng(3)
        vectors = [
            ProbabilityVector(
                f"s{i}", "b", "identity", probs=tuple(float(p) for p in rng.dirichlet(np.ones(9)))
            )
            for i in range(5)
        ]
        # The first parse renormalizes ulp-level drift; the canonical form
        # is then byte-stable under parse -> serialize -> parse.
        p0 = tmp_path / "v0.jsonl"
        p1 = tmp_path / "v1.jsonl"
        p2 = tmp_path / "v2.jsonl"
        write_backend_outputs(vectors, p0)
        write_backend_outputs(load_backend_outputs(p0), p1)
        write_backend_outputs(load_backend_outputs(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()


class TestRemoteProtocol:
    def descriptor(self, url):
        return BackendDescriptor(
            backend_id="mock", mode="remote", location=url, max_tokens=90, expects_image=False
        )

    def test_uniform_server_gives_uniform_vector(self):
        with mock_server(uniform_reply) as (url, _):
            assert wait_ready(url, timeout=5)
            vector = request_prediction(self.descriptor(url), prompt())
            assert vector.probs == (1.0 / 9.0,) * 9 or sum(vector.probs) == pytest.approx(1.0)
            assert vector.backend_id == "mock"
            assert vector.variant_id == "identity"

    def test_eight_values_is_protocol_error(self):
        with mock_server(lambda body: (200, {"probs": [0.125] * 8})) as (url, _):
            with pytest.raises(ProtocolError):
                request_prediction(self.descriptor(url), prompt())

    def test_non_200_is_protocol_error(self):
        with mock_server(lambda body: (503, {"error": "busy"})) as (url, _):
            with pytest.raises(ProtocolError) as err:
                request_prediction(self.descriptor(url), prompt())
            assert err.value.status == 503

    def test_unreachable_times_out_after_three_attempts(self, monkeypatch):
        import ecsp.backend_io as bio

        sleeps = []
        monkeypatch.setattr(bio.time, "sleep", lambda s: sleeps.append(s))
        descriptor = self.descriptor("http://127.0.0.1:9")  # discard port, refuses
        with pytest.raises(Timeout) as err:
            request_prediction(descriptor, prompt(), timeout=0.2)
        assert err.value.attempts == 3
        assert sleeps == [0.25, 0.5]  # exponential backoff between the 3 attempts

    def test_crop_and_image_ref_forwarded(self):
        with mock_server(uniform_reply) as (url, seen):
            variant = TtaVariant("crop", crop_params=(1, 2, 30, 40))
            descriptor = BackendDescriptor(
                backend_id="mm", mode="remote", location=url, max_tokens=100, expects_image=True
            )
            request_prediction(descriptor, prompt(), tta_variant=variant, image_ref="img/x.ppm")
            body = seen[0]
            assert body["crop"] == [1, 2, 30, 40]
            assert body["image_ref"] == "img/x.ppm"
            assert body["variant_id"] == "crop"
            assert body["prompt"] == "hello there"

    def test_request_many_preserves_input_order(self):
        with mock_server(uniform_reply) as (url, _):
            items = [(prompt(sample_id=f"s{i}"), None, None) for i in range(10)]
            vectors = request_many(self.descriptor(url), items, max_in_flight=4)
            assert [v.sample_id for v in vectors] == [f"s{i}" for i in range(10)]

    def test_file_mode_descriptor_rejected_for_remote_call(self):
        descriptor = BackendDescriptor(backend_id="f", mode="file", location="x.jsonl")
        with pytest.raises(ValueError):
            request_prediction(descriptor, prompt())


class TestDescriptorValidation:
    def test_bad_mode_rejected(self):
        with pytest.raises(ValueError):
            BackendDescriptor(backend_id="b", mode="carrier-pigeon", location="x")

    def test_bad_token_budget_rejected(self):
        with pytest.raises(ValueError):
            BackendDescriptor(backend_id="b", mode="file", location="x", max_tokens=0)
