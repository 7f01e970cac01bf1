"""HTTP surface and the `server` CLI.

Routes:
  GET  /login, /register        pages with the attestation headers
  POST /api/register, /api/login  encrypted-credential endpoints
  POST /ias/verify              verifier: base64 quote in, base64 report out
  GET  /ias/sigrl               verifier: base64 revocation list
  POST /proxy/verify            caching proxy in front of /ias/verify
  GET  /client-config.json      whitelist + pinned verifier root key
  GET  /demo/...                six demo page classes plus ground truth

One process hosts website, verifier, and proxy side by side; they only
talk through the same byte formats remote deployments would use.
"""

from __future__ import annotations

import argparse
import atexit
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from random import Random

from fastapi import FastAPI, Request, Response
from fastapi.responses import HTMLResponse, JSONResponse, PlainTextResponse

from . import codec
from .attestation import (
    AttestationProxy,
    QuotingAuthority,
    SigRLClient,
    VerificationService,
)
from .client import ClientConfig, Whitelist
from .clock import Clock, SimClock, WallClock
from .crypto import EncryptedCredential
from .enclave import (
    Enclave,
    EnclaveConfig,
    EnclaveError,
    UnsealError,
)
from .records import RecordStore
from .server import AuthService, DuplicateUserError, LoginResult


@dataclass
class StackConfig:
    attempts_max: int = 144
    window_seconds: int = 86400
    sigrl_refresh_seconds: int = 3600
    proxy_url: str | None = None
    whitelist_file: str | None = None
    db_path: str | None = None
    sealed_state_path: str | None = None

    @classmethod
    def from_file(cls, path: str | Path) -> "StackConfig":
        raw = json.loads(Path(path).read_text())
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)


@dataclass
class Stack:
    """Everything one running service needs, wired together."""

    clock: Clock
    rng: Random | None
    authority: QuotingAuthority
    service: VerificationService
    proxy: AttestationProxy
    enclave: Enclave
    store: RecordStore
    auth: AuthService
    client_config: ClientConfig
    sigrl_client: SigRLClient

    def tick(self) -> None:
        """Window bookkeeping; cheap enough to run per request."""
        if self.clock.now() >= self.enclave.next_reset_at:
            self.enclave.reset_attempts()
        self.sigrl_client.maybe_refresh()


def build_stack(
    config: StackConfig,
    clock: Clock | None = None,
    rng: Random | None = None,
    enclave: Enclave | None = None,
    code_identity: str | None = None,
) -> Stack:
    clock = clock if clock is not None else SimClock()
    authority = QuotingAuthority(rng)
    service = VerificationService(authority.public_key, clock, rng)
    proxy = AttestationProxy(
        service, clock, sigrl_refresh=config.sigrl_refresh_seconds
    )
    if enclave is None:
        from .platform import VirtualTeePlatform

        platform = VirtualTeePlatform(clock, rng, authority)
        kwargs = {} if code_identity is None else {"code_identity": code_identity}
        enclave = Enclave.init(
            platform,
            EnclaveConfig(config.attempts_max, config.window_seconds),
            **kwargs,
        )
    store = RecordStore(config.db_path)
    auth = AuthService(enclave, store, rng)
    client_config = ClientConfig(
        whitelist=Whitelist(1, frozenset({enclave.measurement})),
        ias_root_public_key=service.root_public_key,
    )
    sigrl_client = SigRLClient(service, clock, config.sigrl_refresh_seconds)
    return Stack(
        clock=clock,
        rng=rng,
        authority=authority,
        service=service,
        proxy=proxy,
        enclave=enclave,
        store=store,
        auth=auth,
        client_config=client_config,
        sigrl_client=sigrl_client,
    )


def _parse_credential(body: dict) -> EncryptedCredential:
    return EncryptedCredential(
        client_public_key=codec.b64d(body["client_dh_public_key"]),
        nonce=codec.b64d(body["nonce"]),
        ciphertext=codec.b64d(body["ciphertext"]),
    )


def build_app(stack: Stack, demo_assets_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="safekeeper", docs_url=None, redoc_url=None)

    def page_response(path: str, protected: tuple[str, ...]) -> HTMLResponse:
        stack.tick()
        page = stack.auth.serve_page(path, protected)
        headers = {}
        if page.quote is not None:
            headers["X-SafeKeeper-Quote"] = codec.b64e(page.quote)
            headers["X-SafeKeeper-Key"] = codec.b64e(stack.enclave.dh_public_key)
        return HTMLResponse(page.html, headers=headers)

    @app.get("/login")
    def login_page() -> HTMLResponse:
        return page_response("/login", ("password",))

    @app.get("/register")
    def register_page() -> HTMLResponse:
        return page_response("/register", ("password",))

    @app.post("/api/register")
    async def api_register(request: Request) -> JSONResponse:
        stack.tick()
        body = await request.json()
        try:
            cred = _parse_credential(body)
            stack.auth.register(str(body["user_id"]), cred)
        except DuplicateUserError:
            return JSONResponse({"status": "error", "reason": "user exists"})
        except (KeyError, ValueError):
            return JSONResponse({"status": "error", "reason": "bad request"})
        except EnclaveError as exc:
            return JSONResponse(
                {"status": "error", "reason": type(exc).__name__}
            )
        return JSONResponse({"status": "accepted"})

    @app.post("/api/login")
    async def api_login(request: Request) -> JSONResponse:
        stack.tick()
        body = await request.json()
        try:
            cred = _parse_credential(body)
            result = stack.auth.login(str(body["user_id"]), cred)
        except (KeyError, ValueError):
            return JSONResponse({"status": "error", "reason": "bad request"})
        except EnclaveError as exc:
            return JSONResponse(
                {"status": "error", "reason": type(exc).__name__}
            )
        return JSONResponse({"status": result.value})

    # --- verifier endpoints ---

    @app.post("/ias/verify")
    async def ias_verify(request: Request) -> PlainTextResponse:
        quote_b64 = (await request.body()).decode("ascii", "replace").strip()
        try:
            quote = codec.b64d(quote_b64)
        except Exception:
            return PlainTextResponse("bad base64", status_code=400)
        return PlainTextResponse(codec.b64e(stack.service.verify(quote)))

    @app.get("/ias/sigrl")
    def ias_sigrl() -> PlainTextResponse:
        return PlainTextResponse(
            codec.b64e(stack.service.current_sigrl().to_bytes())
        )

    @app.post("/proxy/verify")
    async def proxy_verify(request: Request) -> PlainTextResponse:
        quote_b64 = (await request.body()).decode("ascii", "replace").strip()
        try:
            quote = codec.b64d(quote_b64)
        except Exception:
            return PlainTextResponse("bad base64", status_code=400)
        return PlainTextResponse(codec.b64e(stack.proxy.request(quote)))

    @app.get("/client-config.json")
    def client_config() -> Response:
        return Response(
            stack.client_config.to_json(), media_type="application/json"
        )

    # --- demo pages for the browser overlay ---

    @app.get("/demo/ground-truth.json")
    def ground_truth() -> JSONResponse:
        return JSONResponse(DEMO_GROUND_TRUTH)

    @app.get("/demo/assets/overlay.js")
    def overlay_js() -> Response:
        candidates = []
        if demo_assets_dir is not None:
            candidates.append(Path(demo_assets_dir) / "overlay.js")
        candidates.append(
            Path(__file__).resolve().parents[2] / "frontend" / "dist" / "overlay.js"
        )
        for path in candidates:
            if path.exists():
                return Response(
                    path.read_text(), media_type="application/javascript"
                )
        return PlainTextResponse(
            "// overlay bundle not built; run npm run build in frontend/",
            status_code=404,
        )

    @app.get("/demo/{page_class}")
    def demo_page(page_class: str, delay: int = 300) -> Response:
        stack.tick()
        spec = DEMO_PAGES.get(page_class)
        if spec is None:
            return PlainTextResponse("no such demo page", status_code=404)
        html = _demo_html(page_class, spec, delay)
        headers = {}
        if spec["attested"]:
            headers["X-SafeKeeper-Quote"] = codec.b64e(stack.enclave.quote_bytes())
            headers["X-SafeKeeper-Key"] = codec.b64e(stack.enclave.dh_public_key)
        return HTMLResponse(html, headers=headers)

    @app.post("/replication/msg")
    async def replication_msg(request: Request) -> JSONResponse:
        # Single-node deployments have no peer to deliver to; the
        # endpoint exists so multi-process setups share a wire format.
        return JSONResponse({"status": "no peer configured"}, status_code=501)

    return app


# Six page classes the overlay demo runs against. "attested" controls
# the quote headers; "meta" is the protected-field claim in the page;
# "spoof" is whatever trick the page plays to look protected.
DEMO_PAGES: dict[str, dict] = {
    "class1": {"attested": True, "meta": ("password",), "spoof": None},
    "class2": {"attested": True, "meta": ("password",), "spoof": "fake-username"},
    "class3": {"attested": False, "meta": (), "spoof": None},
    "class4": {"attested": False, "meta": ("password",), "spoof": "fake-password"},
    "class5": {"attested": True, "meta": ("username",), "spoof": "fake-password"},
    "class6": {"attested": False, "meta": (), "spoof": "delayed-fake-password"},
}

# What a correct overlay must conclude for each page class, per field.
DEMO_GROUND_TRUTH: dict[str, dict[str, str]] = {
    "class1": {"password": "PROTECTED", "username": "UNPROTECTED"},
    "class2": {"password": "PROTECTED", "username": "UNPROTECTED"},
    "class3": {"password": "UNPROTECTED", "username": "UNPROTECTED"},
    "class4": {"password": "UNPROTECTED", "username": "UNPROTECTED"},
    "class5": {"password": "UNPROTECTED", "username": "PROTECTED"},
    "class6": {"password": "UNPROTECTED", "username": "UNPROTECTED"},
}

_SPOOF_SNIPPETS = {
    "fake-username": """
<script>
  // Page-controlled imitation of the overlay styling on a field the
  // enclave never protects.
  addEventListener("DOMContentLoaded", () => {
    const el = document.getElementById("username");
    el.classList.add("sk-fake");
    el.style.outline = "3px solid #27ae60";
  });
</script>
""",
    "fake-password": """
<script>
  addEventListener("DOMContentLoaded", () => {
    const el = document.getElementById("password");
    el.classList.add("sk-fake");
    el.style.outline = "3px solid #27ae60";
  });
</script>
""",
    "delayed-fake-password": """
<script>
  addEventListener("DOMContentLoaded", () => {
    setTimeout(() => {
      const el = document.getElementById("password");
      el.classList.add("sk-fake");
      el.style.outline = "3px solid #27ae60";
    }, __DELAY__);
  });
</script>
""",
}


def _demo_html(page_class: str, spec: dict, delay: int) -> str:
    meta = ""
    if spec["meta"]:
        meta = f'<meta name="safekeeper" content="{",".join(spec["meta"])}">\n'
    spoof = ""
    if spec["spoof"]:
        spoof = _SPOOF_SNIPPETS[spec["spoof"]].replace("__DELAY__", str(delay))
    return f"""<!doctype html>
<html>
<head>
<meta charset="utf-8">
{meta}<title>Demo {page_class}</title>
</head>
<body>
<h1>Demo page {page_class}</h1>
<form id="auth-form" action="/api/login" method="post">
  <label>Username <input type="text" name="username" id="username"></label>
  <label>Password <input type="password" name="password" id="password"></label>
  <button type="submit">Sign in</button>
</form>
{spoof}<script src="/demo/assets/overlay.js" defer></script>
</body>
</html>
"""


def _provision_enclave(config: StackConfig, clock: Clock, authority) -> Enclave:
    """Boot the enclave for a real server process.

    First launch seals immediately so a later crash-without-seal still
    finds a blob holding the key (it will eat the counter penalty, not
    lose the database). The platform state file keeps the virtual
    machine itself stable across restarts; without it every process
    would be a different machine and could never unseal old blobs.
    """
    from .platform import VirtualTeePlatform

    path = Path(config.sealed_state_path) if config.sealed_state_path else None
    platform_path = path.with_name(path.name + ".platform") if path else None
    platform = VirtualTeePlatform(clock, None, authority, state_path=platform_path)
    econf = EnclaveConfig(config.attempts_max, config.window_seconds)
    if path is not None and path.exists():
        return Enclave.init(platform, econf, sealed=path.read_bytes())
    enclave = Enclave.init(platform, econf)
    if path is not None:
        blob = enclave.shutdown()
        path.write_bytes(blob)
        enclave = Enclave.init(platform, econf, sealed=blob)
    return enclave


def _host_fabric_keys(config: StackConfig) -> tuple[bytes, tuple[bytes, bytes]]:
    """Quoting-authority and verifier keys for one deployment.

    These model infrastructure that exists outside the server process
    (hardware vendor, attestation service); pinned client configs only
    stay valid across restarts if the keys do, so they live next to the
    sealed state.
    """
    from . import crypto

    fabric_path = (
        Path(config.sealed_state_path + ".fabric.json")
        if config.sealed_state_path
        else None
    )
    if fabric_path is not None and fabric_path.exists():
        data = json.loads(fabric_path.read_text())
        return (
            bytes.fromhex(data["authority_key"]),
            (bytes.fromhex(data["root_key"]), bytes.fromhex(data["report_key"])),
        )
    scalars = [crypto.ec_scalar_bytes(crypto.generate_private_key(None)) for _ in range(3)]
    if fabric_path is not None:
        fabric_path.write_text(
            json.dumps(
                {
                    "authority_key": scalars[0].hex(),
                    "root_key": scalars[1].hex(),
                    "report_key": scalars[2].hex(),
                }
            )
        )
    return scalars[0], (scalars[1], scalars[2])


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="server", description="run the password-hardening web service"
    )
    parser.add_argument("--config", required=True, help="JSON config file")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8400)
    args = parser.parse_args(argv)

    config = StackConfig.from_file(args.config)
    clock = WallClock()
    authority_scalar, service_scalars = _host_fabric_keys(config)
    authority = QuotingAuthority(private_scalar=authority_scalar)
    try:
        enclave = _provision_enclave(config, clock, authority)
    except UnsealError as exc:
        print(f"sealed state rejected: {exc}", file=sys.stderr)
        print(
            "remove the sealed_state_path file to start over with a new key",
            file=sys.stderr,
        )
        return 1
    # build_stack would create its own authority/platform; hand it ours.
    service = VerificationService(authority.public_key, clock, key_scalars=service_scalars)
    proxy = AttestationProxy(service, clock, sigrl_refresh=config.sigrl_refresh_seconds)
    store = RecordStore(config.db_path)
    auth = AuthService(enclave, store)
    client_config = ClientConfig(
        whitelist=Whitelist(1, frozenset({enclave.measurement})),
        ias_root_public_key=service.root_public_key,
    )
    stack = Stack(
        clock=clock,
        rng=None,
        authority=authority,
        service=service,
        proxy=proxy,
        enclave=enclave,
        store=store,
        auth=auth,
        client_config=client_config,
        sigrl_client=SigRLClient(service, clock, config.sigrl_refresh_seconds),
    )

    if config.whitelist_file:
        wl_path = Path(config.whitelist_file)
        if not wl_path.exists():
            client_config.save(wl_path)
            print(f"wrote client config to {wl_path}")

    if config.sealed_state_path:

        def _seal_on_exit() -> None:
            if not stack.enclave.closed:
                Path(config.sealed_state_path).write_bytes(stack.enclave.shutdown())

        atexit.register(_seal_on_exit)

    import uvicorn

    app = build_app(stack)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
