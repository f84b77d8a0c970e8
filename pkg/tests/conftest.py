import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from toolchat.invocation import ToolInvocation
from toolchat.registry import (
    ArgSpec,
    QAPair,
    ToolCard,
    ToolCatalog,
    ToolDocument,
    register_tool,
)


def make_card(name, category="perception", seen=True, args=None):
    if args is None:
        args = (ArgSpec(name="image", kind="file_ref"),)
    return ToolCard(
        name=name,
        description=f"{name} is a tool to do {name.lower()}. Useful when you need it. Like: use {name.lower()}",
        args=tuple(args),
        category=category,
        seen=seen,
    )


def make_doc(name, queries):
    return ToolDocument(
        tool_name=name,
        qa_pairs=tuple(
            QAPair(query=q, gold=ToolInvocation(use_tool=True, action=name, raw_input="example.jpg"))
            for q in queries
        ),
    )


@pytest.fixture
def small_catalog():
    catalog = ToolCatalog()
    catalog = register_tool(
        catalog,
        make_card("Body Pose Estimation"),
        make_doc("Body Pose Estimation", ["estimate the pose", "what is the posture"]),
    )
    catalog = register_tool(
        catalog,
        make_card(
            "Instruct Image Using Text",
            category="generation",
            args=(ArgSpec(name="image", kind="file_ref"), ArgSpec(name="instruction", kind="text")),
        ),
    )
    catalog = register_tool(
        catalog,
        make_card("Image Caption", args=(ArgSpec(name="image", kind="file_ref"),)),
        make_doc("Image Caption", ["caption this image", "describe the photo"]),
    )
    return catalog


class StubHandler(BaseHTTPRequestHandler):
    """Programmable JSON endpoint: the server's ``script`` maps a path to a
    callable(body_dict) -> (status, payload) with an optional delay."""

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length) or b"{}")
        handler = self.server.script.get(self.path)
        if handler is None:
            self.send_response(404)
            self.end_headers()
            return
        delay = getattr(self.server, "delay", 0.0)
        if delay:
            time.sleep(delay)
        status, payload = handler(body)
        data = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


class StubServer:
    def __init__(self, script, delay=0.0):
        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), StubHandler)
        self.httpd.script = script
        self.httpd.delay = delay
        self.thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self.thread.start()

    @property
    def url(self):
        host, port = self.httpd.server_address
        return f"http://{host}:{port}"

    def close(self):
        self.httpd.shutdown()
        self.httpd.server_close()


@pytest.fixture
def stub_server():
    servers = []

    def factory(script, delay=0.0):
        server = StubServer(script, delay=delay)
        servers.append(server)
        return server

    yield factory
    for server in servers:
        server.close()
