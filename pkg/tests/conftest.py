import json
import os
import threading

# Pin BLAS pools before numpy loads anywhere: the engine owns parallelism at
# the batch level, and timing tests assume single-threaded kernels.
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("MKL_NUM_THREADS", "1")

from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer  # noqa: E402

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from localmt.demo import build_demo_package  # noqa: E402
from localmt.model import ModelConfig, init_random_model  # noqa: E402
from localmt.registry import ModelStore  # noqa: E402


DESK_CONFIG = ModelConfig(
    vocab_size=256,
    emb_dim=64,
    enc_layers=2,
    dec_layers=2,
    heads=4,
    ffn_dim=128,
    max_src_len=64,
    max_len_factor=1.5,
    eos_id=2,
    unk_id=1,
    pad_id=0,
)


@pytest.fixture(scope="session")
def desk_config():
    return DESK_CONFIG


@pytest.fixture(scope="session")
def desk_model(desk_config):
    return init_random_model(desk_config, seed=1234)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture(scope="session")
def demo_archive(tmp_path_factory):
    """A complete installable package archive; returns (path, sha256)."""
    path = tmp_path_factory.mktemp("archives") / "demo-en-xx-1.0.0.tar.gz"
    sha = build_demo_package(path, model_id="demo-en-xx", version="1.0.0", seed=5)
    return path, sha


@pytest.fixture
def store(tmp_path):
    return ModelStore(tmp_path / "data")


class StubHTTPServer:
    """Local loopback server with canned routes and request capture."""

    def __init__(self):
        self.routes = {}      # path -> (status, content_type, bytes)
        self.requests = []    # (path, headers dict)
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def do_GET(self):
                outer.requests.append((self.path, dict(self.headers)))
                route = outer.routes.get(self.path)
                if route is None:
                    self.send_error(404)
                    return
                status, ctype, body = route
                self.send_response(status)
                self.send_header("Content-Type", ctype)
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def log_message(self, *args):
                pass

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.port = self._server.server_address[1]
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    def url(self, path: str) -> str:
        return f"http://127.0.0.1:{self.port}{path}"

    def add_json(self, path: str, payload) -> str:
        self.routes[path] = (200, "application/json", json.dumps(payload).encode())
        return self.url(path)

    def add_bytes(self, path: str, body: bytes) -> str:
        self.routes[path] = (200, "application/octet-stream", body)
        return self.url(path)

    def close(self):
        self._server.shutdown()
        self._server.server_close()


@pytest.fixture
def stub_server():
    server = StubHTTPServer()
    yield server
    server.close()
