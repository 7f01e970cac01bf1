"""Attack and operations scenarios for the harness CLI.

Each scenario builds a fresh stack on a virtual clock from its seed,
plays one story (an honest login, a guessing campaign, a rollback
attempt, a failover...), and returns a report of events, checks, and
metrics. Event traces are deterministic for a given seed; they never
include signature bytes, which are the one nondeterministic output of
the crypto layer.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from random import Random

from fastapi.testclient import TestClient

from . import codec, crypto
from .client import (
    ClientChannel,
    KeyBindingMismatch,
    SignatureError,
    UntrustedMeasurement,
    VerificationError,
    establish_channel,
    encrypt_field,
    verify_and_bind,
)
from .clock import SimClock
from .cmac import aes_cmac
from .crypto import EncryptedCredential, PlainCredential
from .enclave import (
    Enclave,
    EnclaveConfig,
    RateLimitedError,
)
from .legacy import legacy_hash
from .records import PasswordRecord, Scheme
from .replication import (
    EnclaveIdentity,
    GroupConfig,
    HostCoordinator,
    ReplicationEngine,
    RevocationAuthority,
    Role,
)
from .server import LoginResult
from .webapp import Stack, StackConfig, build_app, build_stack


@dataclass
class Check:
    name: str
    ok: bool
    detail: str = ""


@dataclass
class ScenarioReport:
    scenario: str
    seed: int
    events: list[str] = field(default_factory=list)
    checks: list[Check] = field(default_factory=list)
    metrics: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def log(self, event: str) -> None:
        self.events.append(event)

    def expect(self, name: str, ok: bool, detail: str = "") -> None:
        self.checks.append(Check(name, bool(ok), detail))

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "ok": self.ok,
            "events": self.events,
            "checks": [
                {"name": c.name, "ok": c.ok, "detail": c.detail}
                for c in self.checks
            ],
            "metrics": self.metrics,
        }

    def to_text(self) -> str:
        lines = [f"scenario {self.scenario} (seed {self.seed})"]
        lines += [f"  | {e}" for e in self.events]
        for c in self.checks:
            mark = "PASS" if c.ok else "FAIL"
            suffix = f"  [{c.detail}]" if c.detail else ""
            lines.append(f"  {mark} {c.name}{suffix}")
        for k, v in self.metrics.items():
            lines.append(f"  {k} = {v}")
        lines.append(f"  result: {'ok' if self.ok else 'FAILED'}")
        return "\n".join(lines)


class Tap:
    """Records every byte crossing a named boundary."""

    def __init__(self):
        self.records: list[tuple[str, bytes]] = []

    def record(self, channel: str, data: bytes) -> None:
        self.records.append((channel, data))

    def channels_containing(self, needle: bytes) -> list[str]:
        return [ch for ch, data in self.records if needle in data]

    def total_bytes(self) -> int:
        return sum(len(d) for _, d in self.records)


class TappedEnclave:
    """Wraps an enclave; records what the host hands to process()."""

    def __init__(self, inner: Enclave, tap: Tap):
        self._inner = inner
        self._tap = tap

    def __getattr__(self, name):
        return getattr(self._inner, name)

    def process(self, credential, salt, legacy_prehash: bool = False) -> bytes:
        if isinstance(credential, EncryptedCredential):
            wire = codec.write_fields(
                credential.client_public_key, credential.nonce, credential.ciphertext
            )
        else:
            wire = b"<plain-credential>" + crypto.sha256(credential.password)
        self._tap.record("server->enclave", wire + salt)
        return self._inner.process(credential, salt, legacy_prehash)


def sim_stack(
    seed: int,
    attempts_max: int = 144,
    window_seconds: int = 86400,
    code_identity: str | None = None,
) -> Stack:
    return build_stack(
        StackConfig(attempts_max=attempts_max, window_seconds=window_seconds),
        clock=SimClock(),
        rng=Random(seed),
        code_identity=code_identity,
    )


def rogue_stack(honest: Stack, seed: int, code_identity: str) -> Stack:
    """A second website running different enclave code on the same real
    hardware and attestation fabric: genuine quotes, rogue measurement."""
    from .client import ClientConfig, Whitelist
    from .platform import VirtualTeePlatform
    from .records import RecordStore
    from .server import AuthService
    from .attestation import SigRLClient

    rng = Random(seed)
    platform = VirtualTeePlatform(honest.clock, rng, honest.authority)
    enclave = Enclave.init(platform, EnclaveConfig(), code_identity=code_identity)
    store = RecordStore()
    return Stack(
        clock=honest.clock,
        rng=rng,
        authority=honest.authority,
        service=honest.service,
        proxy=honest.proxy,
        enclave=enclave,
        store=store,
        auth=AuthService(enclave, store, rng),
        client_config=ClientConfig(
            whitelist=Whitelist(1, frozenset({enclave.measurement})),
            ias_root_public_key=honest.service.root_public_key,
        ),
        sigrl_client=SigRLClient(honest.service, honest.clock),
    )


def _http(tap: Tap | None, client: TestClient, method: str, path: str, **kw):
    if tap is not None and "json" in kw:
        tap.record("client->server", json.dumps(kw["json"]).encode())
    if tap is not None and "content" in kw:
        body = kw["content"]
        tap.record(
            "client->server", body if isinstance(body, bytes) else body.encode()
        )
    response = client.request(method, path, **kw)
    if tap is not None:
        tap.record("server->client", response.content)
    return response


def _attested_channel(
    stack: Stack, client: TestClient, page: str, rng: Random, tap: Tap | None = None
) -> tuple[ClientChannel, str]:
    """Browser-side half of a login: fetch the page, verify the quote
    against the pinned config, open a channel. Returns the channel and
    the raw page body."""
    response = _http(tap, client, "GET", page)
    quote_b64 = response.headers["X-SafeKeeper-Quote"]
    key_b64 = response.headers["X-SafeKeeper-Key"]
    report_b64 = _http(
        tap, client, "POST", "/proxy/verify", content=quote_b64
    ).text
    verified = verify_and_bind(
        codec.b64d(quote_b64),
        codec.b64d(report_b64),
        stack.client_config.whitelist,
        codec.b64d(key_b64),
        ias_root_public_key=stack.client_config.ias_root_public_key,
    )
    return establish_channel(verified, rng), response.text


def _credential_body(
    user_id: str, channel: ClientChannel, password: bytes, rng: Random
) -> dict:
    cred = encrypt_field(channel, password, rng)
    return {
        "user_id": user_id,
        "client_dh_public_key": codec.b64e(cred.client_public_key),
        "nonce": codec.b64e(cred.nonce),
        "ciphertext": codec.b64e(cred.ciphertext),
    }


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------


def scenario_honest_login(seed: int) -> ScenarioReport:
    """Register and sign in over HTTP with everything honest, while a
    tap watches every boundary for the plaintext password."""
    report = ScenarioReport("honest-login", seed)
    rng = Random(seed)
    tap = Tap()
    stack = sim_stack(seed)
    stack.auth._enclave = TappedEnclave(stack.enclave, tap)
    app = build_app(stack)
    password = b"correct horse battery staple"

    with TestClient(app) as client:
        channel, page_html = _attested_channel(stack, client, "/register", rng, tap)
        report.log("register page verified: quote, report, key binding all good")
        report.expect(
            "register page carries the protection metatag",
            'name="safekeeper"' in page_html and "password" in page_html,
        )

        r = _http(
            tap, client, "POST", "/api/register",
            json=_credential_body("alice", channel, password, rng),
        )
        report.log(f"register alice -> {r.json()['status']}")
        report.expect("registration accepted", r.json()["status"] == "accepted")

        channel, _ = _attested_channel(stack, client, "/login", rng, tap)
        r = _http(
            tap, client, "POST", "/api/login",
            json=_credential_body("alice", channel, password, rng),
        )
        report.log(f"login alice correct password -> {r.json()['status']}")
        report.expect("correct password accepted", r.json()["status"] == "accepted")

        r = _http(
            tap, client, "POST", "/api/login",
            json=_credential_body("alice", channel, b"wrong password", rng),
        )
        report.log(f"login alice wrong password -> {r.json()['status']}")
        report.expect("wrong password rejected", r.json()["status"] == "rejected")

        r = _http(
            tap, client, "POST", "/api/login",
            json=_credential_body("nobody", channel, password, rng),
        )
        report.log(f"login unknown user -> {r.json()['status']}")
        report.expect("unknown user rejected", r.json()["status"] == "rejected")

    tap.record("database", stack.store.raw_bytes())
    leaks = tap.channels_containing(password)
    report.expect(
        "plaintext password absent from all tapped boundaries",
        not leaks,
        f"leaked on {leaks}" if leaks else f"{len(tap.records)} records clean",
    )
    report.metrics["tapped_records"] = len(tap.records)
    report.metrics["tapped_bytes"] = tap.total_bytes()
    return report


def analytic_windows(space: int, rate: int) -> int:
    """Windows to sweep an entire guess space at `rate` guesses per
    window (the worst case for the attacker's patience)."""
    return math.ceil(space / rate)


def simulate_time_to_success(
    seed: int, space: int = 1024, rate: int = 16, window_seconds: int = 3600
) -> int:
    """One guessing campaign against a real enclave: secret drawn from
    `space`, attacker sweeps guesses rate-limited to `rate` per window.
    Returns windows elapsed until the tag matched."""
    rng = Random(seed)
    clock = SimClock()
    from .platform import VirtualTeePlatform

    platform = VirtualTeePlatform(clock, rng)
    enclave = Enclave.init(
        platform, EnclaveConfig(attempts_max=rate, window_seconds=window_seconds)
    )
    salt = rng.randbytes(8)
    secret_index = rng.randrange(space)
    target = enclave.process(
        PlainCredential(b"pw%d" % secret_index), salt
    )
    # That setup call consumed one attempt; give the attacker a clean
    # first window like a real post-breach start.
    clock.advance(window_seconds)
    enclave.reset_attempts()

    order = list(range(space))
    rng.shuffle(order)
    windows = 1
    for guess in order:
        try:
            tag = enclave.process(PlainCredential(b"pw%d" % guess), salt)
        except RateLimitedError:
            clock.advance(window_seconds)
            enclave.reset_attempts()
            windows += 1
            tag = enclave.process(PlainCredential(b"pw%d" % guess), salt)
        if tag == target:
            return windows
    raise AssertionError("secret not in space")


def scenario_rogue_online_guesser(seed: int) -> ScenarioReport:
    """A fully compromised server guessing through its own enclave:
    per-window exactness plus the arithmetic this forces on a realistic
    password space."""
    report = ScenarioReport("rogue-online-guesser", seed)
    rng = Random(seed)
    stack = sim_stack(seed)
    enclave = stack.enclave
    window = enclave.window_seconds
    salt = rng.randbytes(8)

    for w in range(3):
        made = 0
        throttled = False
        for i in range(enclave.attempts_max + 5):
            try:
                enclave.process(PlainCredential(b"guess%d" % i), salt)
                made += 1
            except RateLimitedError:
                throttled = True
                break
        report.log(f"window {w}: {made} guesses then throttled={throttled}")
        report.expect(
            f"window {w} allows exactly {enclave.attempts_max}",
            made == enclave.attempts_max and throttled,
        )
        stack.clock.advance(window)
        enclave.reset_attempts()

    report.metrics["attempts_per_window"] = enclave.attempts_max
    report.metrics["windows_to_sweep_2^19"] = analytic_windows(2**19, 144)
    windows = simulate_time_to_success(seed)
    report.log(
        f"scaled campaign (space 2^10, rate 16) hit after {windows} windows"
    )
    report.metrics["scaled_windows_to_success"] = windows
    report.expect(
        "sweeping 2^19 guesses at 144/window needs 3641 windows",
        analytic_windows(2**19, 144) == 3641,
    )
    return report


def offline_theft_trials(seed: int, trials: int) -> tuple[int, int]:
    """Attacker with the stolen database and the true password tries to
    confirm guesses offline. Returns (verified, trials). A guess counts
    as verified only if some key-less computation reproduces a stored
    tag."""
    # The attacker's randomness must not share a stream with the seed
    # that generated the defender's keys.
    rng = Random(f"offline-attacker-{seed}")
    stack = sim_stack(seed)
    passwords = {}
    for i in range(20):
        user = f"user{i}"
        pw = b"pw-%d-%d" % (i, rng.randrange(10**6))
        stack.auth.register(user, PlainCredential(pw))
        passwords[user] = pw

    records = stack.store.all()
    verified = 0
    for t in range(trials):
        record = records[t % len(records)]
        pw = passwords[record.user_id]
        mode = t % 4
        if mode == 0:
            candidate = aes_cmac(rng.randbytes(16), pw + record.salt)
        elif mode == 1:
            candidate = crypto.sha256(pw + record.salt)[:16]
        elif mode == 2:
            candidate = legacy_hash(pw, record.salt)
        else:
            candidate = aes_cmac(rng.randbytes(16), pw + record.salt)
        if candidate == record.tag:
            verified += 1
    return verified, trials


def scenario_offline_db_theft(seed: int) -> ScenarioReport:
    report = ScenarioReport("offline-db-theft", seed)
    trials = 20_000
    verified, ran = offline_theft_trials(seed, trials)
    report.log(
        f"attacker holds the database and the true passwords; "
        f"{ran} offline verification attempts without the key"
    )
    report.expect("no offline attempt verified a guess", verified == 0,
                  f"{verified}/{ran} matched")
    report.metrics["trials"] = ran
    report.metrics["verified"] = verified
    return report


def run_rollback_schedule(seed: int, events: int = 50) -> dict:
    """Randomized persistence-abuse schedule.

    The attacker controls crashes, restores (including stale blobs),
    and time-source resets, and greedily burns attempts between events.
    Returns attacker guesses vs. what an untouched enclave would have
    allowed over the same elapsed time.
    """
    rng = Random(seed)
    clock = SimClock()
    from .platform import VirtualTeePlatform

    platform = VirtualTeePlatform(clock, rng)
    config = EnclaveConfig(attempts_max=12, window_seconds=1000)
    enclave = Enclave.init(platform, config)
    salt = rng.randbytes(8)
    blobs = [enclave.shutdown()]
    enclave = Enclave.init(platform, config, sealed=blobs[-1])

    start = clock.now()
    attacker_guesses = 0
    trace = []

    def burn():
        nonlocal attacker_guesses
        made = 0
        while True:
            try:
                enclave.process(PlainCredential(b"g%d" % made), salt)
                made += 1
            except RateLimitedError:
                break
        attacker_guesses += made
        return made

    trace.append(f"initial burn {burn()}")
    for i in range(events):
        action = rng.choice(
            ["advance", "advance", "seal_restore", "stale_restore", "crash",
             "time_reset"]
        )
        if action == "advance":
            clock.advance(rng.randrange(100, 1500))
            enclave.reset_attempts()
        elif action == "seal_restore":
            blobs.append(enclave.shutdown())
            enclave = Enclave.init(platform, config, sealed=blobs[-1])
        elif action == "stale_restore":
            blob = rng.choice(blobs)
            if not enclave.closed:
                enclave.shutdown()
            enclave = Enclave.init(platform, config, sealed=blob)
        elif action == "crash":
            # no seal written; reboot from whatever blob is on disk
            enclave = Enclave.init(platform, config, sealed=blobs[-1])
        elif action == "time_reset":
            platform.reset_time_source()
            enclave.reset_attempts()
        made = burn()
        trace.append(f"event {i} {action}: +{made} guesses")

    elapsed = clock.now() - start
    # An untouched enclave refills once per full window boundary.
    baseline = config.attempts_max * (1 + elapsed // config.window_seconds)
    return {
        "attacker_guesses": attacker_guesses,
        "baseline_guesses": baseline,
        "elapsed": elapsed,
        "events": events,
        "trace": trace,
    }


def scenario_rollback_replay(seed: int) -> ScenarioReport:
    report = ScenarioReport("rollback-replay", seed)
    rng = Random(seed)
    clock = SimClock()
    from .platform import VirtualTeePlatform

    platform = VirtualTeePlatform(clock, rng)
    config = EnclaveConfig(attempts_max=10, window_seconds=1000)
    enclave = Enclave.init(platform, config)
    salt = rng.randbytes(8)

    for i in range(4):
        enclave.process(PlainCredential(b"a%d" % i), salt)
    report.log(f"spent 4 attempts, {enclave.remaining_attempts(salt)} remain")
    blob = enclave.shutdown()
    enclave = Enclave.init(platform, config, sealed=blob)
    report.expect(
        "clean restore keeps the counters",
        enclave.remaining_attempts(salt) == 6,
        f"remaining={enclave.remaining_attempts(salt)}",
    )
    report.log("clean shutdown/restore kept 6 remaining attempts")

    # Replay the very same blob: the monotonic counter has moved on.
    enclave.shutdown()
    replayed = Enclave.init(platform, config, sealed=blob)
    report.expect(
        "replayed blob takes the maximum penalty",
        replayed.remaining_attempts(salt) == 0,
        f"remaining={replayed.remaining_attempts(salt)}",
    )
    report.log("replaying the stale blob left 0 attempts for the salt")
    penalty_reset = replayed.next_reset_at
    report.expect(
        "penalty postpones the refill a full window",
        penalty_reset == clock.now() + config.window_seconds,
    )

    # Refill happens only after the penalty window passes.
    clock.advance(config.window_seconds)
    replayed.reset_attempts()
    report.expect(
        "attempts return after the penalty window",
        replayed.remaining_attempts(salt) == config.attempts_max,
    )
    report.log("after the penalty window the salt is usable again")

    schedule = run_rollback_schedule(seed)
    report.metrics["schedule_attacker_guesses"] = schedule["attacker_guesses"]
    report.metrics["schedule_baseline_guesses"] = schedule["baseline_guesses"]
    report.expect(
        "50-event abuse schedule never beats the crash-free baseline",
        schedule["attacker_guesses"] <= schedule["baseline_guesses"],
        f"{schedule['attacker_guesses']} <= {schedule['baseline_guesses']}",
    )
    return report


def scenario_crash_no_seal(seed: int) -> ScenarioReport:
    """Crash without writing a fresh seal: reboot lands on the old blob
    and pays for it with an empty budget, but the key survives."""
    report = ScenarioReport("crash-no-seal", seed)
    rng = Random(seed)
    clock = SimClock()
    from .platform import VirtualTeePlatform

    platform = VirtualTeePlatform(clock, rng)
    config = EnclaveConfig(attempts_max=10, window_seconds=1000)
    enclave = Enclave.init(platform, config)
    provision_blob = enclave.shutdown()
    enclave = Enclave.init(platform, config, sealed=provision_blob)

    salt = rng.randbytes(8)
    password = b"hunter2"
    tag = enclave.process(PlainCredential(password), salt)
    report.log("registered one credential, then the process dies (no seal)")

    rebooted = Enclave.init(platform, config, sealed=provision_blob)
    report.expect(
        "reboot from the stale provisioning blob is penalized",
        rebooted.remaining_attempts(salt) == 0,
    )
    try:
        rebooted.process(PlainCredential(password), salt)
        throttled = False
    except RateLimitedError:
        throttled = True
    report.expect("logins throttle during the penalty window", throttled)
    report.log("penalty window: the salt is unusable")

    clock.advance(config.window_seconds)
    rebooted.reset_attempts()
    tag2 = rebooted.process(PlainCredential(password), salt)
    report.expect(
        "the SafeKey survived the crash (tags still verify)", tag2 == tag
    )
    report.log("after the window, the old record verifies against the same key")
    return report


def _corrupt(data: bytes, index: int) -> bytes:
    out = bytearray(data)
    out[index % len(out)] ^= 0x01
    return bytes(out)


def scenario_mitm_key_swap(seed: int) -> ScenarioReport:
    """An active network attacker rewrites the page's key material and
    tampers with proxied reports."""
    report = ScenarioReport("mitm-key-swap", seed)
    rng = Random(seed)
    stack = sim_stack(seed)
    app = build_app(stack)

    with TestClient(app) as client:
        r = client.get("/login")
        quote = codec.b64d(r.headers["X-SafeKeeper-Quote"])
        report_bytes = codec.b64d(
            client.post(
                "/proxy/verify", content=r.headers["X-SafeKeeper-Quote"]
            ).text
        )

    wl = stack.client_config.whitelist
    root = stack.client_config.ias_root_public_key

    attacker_key = crypto.public_bytes(crypto.generate_private_key(rng))
    try:
        verify_and_bind(quote, report_bytes, wl, attacker_key,
                        ias_root_public_key=root)
        report.expect("swapped DH key rejected", False, "accepted!")
    except KeyBindingMismatch:
        report.expect("swapped DH key rejected", True)
        report.log("substituted key -> KeyBindingMismatch, no password sent")
    except VerificationError as exc:
        report.expect("swapped DH key rejected", False, f"wrong error {exc!r}")

    # The attacker also tries swapping in a whole rogue enclave running
    # on genuine hardware.
    rogue = rogue_stack(stack, seed + 1, "payload-harvester/0.1")
    rogue_quote = rogue.enclave.quote_bytes()
    rogue_report = stack.proxy.request(rogue_quote)
    try:
        verify_and_bind(
            rogue_quote, rogue_report, wl, rogue.enclave.dh_public_key,
            ias_root_public_key=root,
        )
        report.expect("rogue enclave quote rejected", False, "accepted!")
    except UntrustedMeasurement:
        report.expect("rogue enclave quote rejected", True)
        report.log("attacker's own enclave -> UntrustedMeasurement")
    except VerificationError as exc:
        report.expect("rogue enclave quote rejected", False, f"wrong error {exc!r}")

    tampered = _corrupt(report_bytes, len(report_bytes) // 2)
    try:
        verify_and_bind(quote, tampered, wl, stack.enclave.dh_public_key,
                        ias_root_public_key=root)
        report.expect("tampered proxy report rejected", False, "accepted!")
    except SignatureError:
        report.expect("tampered proxy report rejected", True)
        report.log("proxy-tampered report -> SignatureError")
    except VerificationError as exc:
        report.expect(
            "tampered proxy report rejected", False, f"wrong error {exc!r}"
        )
    return report


def scenario_phishing_wrong_measurement(seed: int) -> ScenarioReport:
    """A lookalike site runs real TEE hardware with its own code. The
    attestation all checks out except the measurement, which is the
    entire point of the whitelist."""
    report = ScenarioReport("phishing-wrong-measurement", seed)
    rng = Random(seed)
    honest = sim_stack(seed)
    phisher = rogue_stack(honest, seed + 99, "totally-safekeeper/9.9")
    app = build_app(phisher)

    with TestClient(app) as client:
        r = client.get("/login")
        quote_b64 = r.headers["X-SafeKeeper-Quote"]
        report.log("phishing page serves a quote header and metatag like the real site")
        report.expect(
            "page looks attested on the surface",
            'name="safekeeper"' in r.text and quote_b64 != "",
        )
        report_b64 = client.post("/proxy/verify", content=quote_b64).text

    password_sent = False
    try:
        verified = verify_and_bind(
            codec.b64d(quote_b64),
            codec.b64d(report_b64),
            honest.client_config.whitelist,
            phisher.enclave.dh_public_key,
            ias_root_public_key=honest.client_config.ias_root_public_key,
        )
        channel = establish_channel(verified, rng)
        encrypt_field(channel, b"secret", rng)
        password_sent = True
    except UntrustedMeasurement:
        report.log("client whitelist refuses the measurement; channel never opens")
    except VerificationError as exc:
        report.log(f"rejected with {type(exc).__name__}")
    report.expect("no password material was ever encrypted", not password_sent)
    return report


def _make_group(seed: int, count: int):
    """count enclaves on one attestation fabric plus group scaffolding."""
    rng = Random(seed)
    clock = SimClock()
    from .attestation import AttestationProxy, QuotingAuthority, VerificationService
    from .client import Whitelist
    from .platform import VirtualTeePlatform

    authority = QuotingAuthority(rng)
    service = VerificationService(authority.public_key, clock, rng)
    proxy = AttestationProxy(service, clock)
    registry = RevocationAuthority(rng)
    enclaves = [
        Enclave.init(
            VirtualTeePlatform(clock, rng, authority), EnclaveConfig(attempts_max=144)
        )
        for _ in range(count)
    ]
    config = GroupConfig(
        total_rate=144,
        peer_whitelist=Whitelist(1, frozenset({enclaves[0].measurement})),
        ias_root_public_key=service.root_public_key,
        revocation_authority_public=registry.public_key,
    )
    engines = [ReplicationEngine(e, config, registry) for e in enclaves]
    host = HostCoordinator(proxy)
    return clock, rng, registry, engines, host


def _ident(engine: ReplicationEngine, role: Role, rate: int) -> EnclaveIdentity:
    return EnclaveIdentity(
        engine.signing_public_key, engine.enclave.measurement, role, rate
    )


def scenario_failover(seed: int) -> ScenarioReport:
    """Primary dies; the backup is promoted and keeps verifying tags
    minted before the crash."""
    report = ScenarioReport("failover", seed)
    clock, rng, registry, (p0, b0), host = _make_group(seed, 2)

    p0.bootstrap_primary()
    host.admit(
        [p0], b0, (_ident(p0, Role.PRIMARY, 144), _ident(b0, Role.BACKUP, 0)),
        Role.BACKUP,
    )
    report.log("group: primary at 144, backup at 0, same SafeKey")
    report.expect("backup holds the key", b0.enclave._safe_key == p0.enclave._safe_key)
    report.expect("backup enforces rate 0", b0.enclave.attempts_max == 0)

    salt = rng.randbytes(8)
    tag = p0.enclave.process(PlainCredential(b"pw"), salt)
    report.log("one credential registered through the primary")

    # Primary crashes; nothing of it survives.
    report.log("primary crashes")
    stmt = registry.revoke(p0.signing_public_key)
    b0.revoke(stmt)
    report.log("authority revokes the dead primary; survivor updates roster")
    report.expect(
        "survivor roster no longer lists the primary",
        len(b0.roster.members) == 1,
    )

    host.change_rates([b0], (_ident(b0, Role.PRIMARY, 144),))
    report.expect(
        "backup promoted to primary at the full budget",
        b0.my_rate() == 144 and b0.enclave.attempts_max == 144,
    )
    report.log("backup promoted to primary at rate 144")

    tag2 = b0.enclave.process(PlainCredential(b"pw"), salt)
    report.expect("old tags verify on the promoted holder", tag2 == tag)
    throttle_check = b0.enclave.remaining_attempts(salt)
    report.metrics["promoted_remaining_attempts"] = throttle_check
    report.log("existing records keep verifying after failover")
    return report


def scenario_multi_primary_rates(seed: int) -> ScenarioReport:
    """The canonical rate-budget walk: split 72/72 across two primaries
    with a backup, revoke one primary, raise the survivor to 144."""
    report = ScenarioReport("multi-primary-rates", seed)
    clock, rng, registry, (p0, p1, b0), host = _make_group(seed, 3)

    p0.bootstrap_primary()
    host.admit(
        [p0], b0, (_ident(p0, Role.PRIMARY, 144), _ident(b0, Role.BACKUP, 0)),
        Role.BACKUP,
    )
    host.admit(
        [p0, b0],
        p1,
        (
            _ident(p0, Role.PRIMARY, 72),
            _ident(p1, Role.PRIMARY, 72),
            _ident(b0, Role.BACKUP, 0),
        ),
        Role.PRIMARY,
    )
    rates = sorted(m.rate for m in p0.roster.members)
    report.log(f"roster rates after split: {rates}")
    report.expect("split roster is 0/72/72", rates == [0, 72, 72])
    report.expect(
        "enforced rates match the roster",
        p0.enclave.attempts_max == 72
        and p1.enclave.attempts_max == 72
        and b0.enclave.attempts_max == 0,
    )
    report.expect(
        "live rate sum is the full budget",
        sum(m.rate for m in p0.roster.members) == 144,
    )

    stmt = registry.revoke(p0.signing_public_key)
    for engine in (p0, p1, b0):
        engine.revoke(stmt)
    report.log("revocation statement delivered to every holder")
    report.expect("revoked primary halts", p0.enclave.halted)
    survivor_rates = sorted(m.rate for m in p1.roster.members)
    report.log(f"survivor rates: {survivor_rates} (sum {sum(survivor_rates)})")
    report.expect(
        "survivors keep their old rates (sum may undershoot)",
        survivor_rates == [0, 72],
    )

    host.change_rates(
        [p1, b0], (_ident(p1, Role.PRIMARY, 144), _ident(b0, Role.BACKUP, 0))
    )
    final = sorted(m.rate for m in p1.roster.members)
    report.log(f"after unanimous raise: {final}")
    report.expect("final roster is 0/144", final == [0, 144])
    report.expect("survivor enforces 144", p1.enclave.attempts_max == 144)
    report.expect("backup stays at 0", b0.enclave.attempts_max == 0)

    try:
        p0.enclave.process(PlainCredential(b"x"), rng.randbytes(8))
        report.expect("revoked enclave refuses to process", False)
    except Exception:
        report.expect("revoked enclave refuses to process", True)
    report.metrics["final_rates"] = final
    return report


def scenario_migration(seed: int) -> ScenarioReport:
    """Wrap a legacy iterated-MD5 database and keep every user's
    password working through the encrypted path."""
    report = ScenarioReport("migration", seed)
    rng = Random(seed)
    stack = sim_stack(seed)
    app = build_app(stack)

    users = {}
    for i in range(5):
        user = f"legacy{i}"
        pw = b"oldpw-%d" % i
        salt = rng.randbytes(8)
        stack.store.put(
            PasswordRecord(user, salt, legacy_hash(pw, salt), Scheme.LEGACY_MD5)
        )
        users[user] = pw
    report.log("database starts with 5 iterated-MD5 records")

    # One user logs in before the batch migration: inline upgrade.
    early = stack.auth.login("legacy0", PlainCredential(users["legacy0"]))
    report.expect(
        "legacy plaintext login works pre-migration",
        early == LoginResult.ACCEPTED,
    )
    report.expect(
        "successful legacy login upgrades the record inline",
        stack.store.get("legacy0").scheme == Scheme.ONION,
    )
    report.log("legacy0 logged in; record wrapped inline")

    result = stack.auth.migrate_database()
    report.log(
        f"batch migration wrapped {len(result.migrated)} records, "
        f"skipped {len(result.skipped)}"
    )
    report.expect("batch wraps the remaining 4", len(result.migrated) == 4)
    report.expect(
        "no plain legacy records remain",
        all(r.scheme == Scheme.ONION for r in stack.store.all()),
    )

    with TestClient(app) as client:
        ok = 0
        for user, pw in users.items():
            channel, _ = _attested_channel(stack, client, "/login", rng)
            r = client.post(
                "/api/login", json=_credential_body(user, channel, pw, rng)
            )
            ok += r.json()["status"] == "accepted"
        report.expect(
            "all migrated users log in over the encrypted path", ok == len(users)
        )
        report.log(f"{ok}/{len(users)} encrypted logins accepted after migration")

        channel, _ = _attested_channel(stack, client, "/login", rng)
        r = client.post(
            "/api/login",
            json=_credential_body("legacy3", channel, b"not-the-password", rng),
        )
        report.expect(
            "wrong password still rejected post-migration",
            r.json()["status"] == "rejected",
        )

    stolen = stack.store.raw_bytes()
    leaked = [pw for pw in users.values() if pw in stolen]
    report.expect("no plaintext or raw legacy hash leaks in the stolen db",
                  not leaked)
    report.metrics["migrated"] = len(result.migrated)
    return report


SCENARIOS = {
    "honest-login": scenario_honest_login,
    "rogue-online-guesser": scenario_rogue_online_guesser,
    "offline-db-theft": scenario_offline_db_theft,
    "rollback-replay": scenario_rollback_replay,
    "crash-no-seal": scenario_crash_no_seal,
    "mitm-key-swap": scenario_mitm_key_swap,
    "phishing-wrong-measurement": scenario_phishing_wrong_measurement,
    "failover": scenario_failover,
    "multi-primary-rates": scenario_multi_primary_rates,
    "migration": scenario_migration,
}


def run_scenario(name: str, seed: int) -> ScenarioReport:
    if name not in SCENARIOS:
        raise KeyError(f"unknown scenario {name!r}; see `harness list`")
    return SCENARIOS[name](seed)
