"""Bounded exploration of the replication protocol.

Drives the real engine/enclave objects (not an abstraction) through
every interleaving of admissions, promotions, rate changes, partial
deliveries, revocations, and forged handoffs, up to a step bound, and
checks two safety properties in every reachable state:

  I1  the enforced per-salt rates of all live SafeKey holders sum to
      at most the configured total, and
  I2  the SafeKey never reaches an enclave that was not admitted
      through a fully-approved handoff.

State de-duplication works on a canonical projection (who holds, who
halted, rates, rosters); branches restore engine snapshots instead of
replaying action prefixes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .attestation import AttestationProxy, QuotingAuthority, VerificationService
from .clock import SimClock
from .client import Whitelist
from .enclave import Enclave, EnclaveConfig, EnclaveError
from .platform import VirtualTeePlatform
from .replication import (
    EnclaveIdentity,
    GroupConfig,
    HostCoordinator,
    ReplicationEngine,
    ReplicationError,
    RevocationAuthority,
    Role,
    RosterProposal,
    admit_backup,
)

TOTAL_RATE = 144


@dataclass
class ModelCheckResult:
    states_explored: int
    transitions: int
    max_depth: int
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


class _World:
    """Three enclaves plus the shared attestation/revocation fabric."""

    def __init__(self, enclave_count: int, seed: int):
        import random

        rng = random.Random(seed)
        self.clock = SimClock()
        authority = QuotingAuthority(rng)
        self.service = VerificationService(authority.public_key, self.clock, rng)
        proxy = AttestationProxy(self.service, self.clock, report_ttl=2**62)
        self.registry = RevocationAuthority(rng)
        self.engines: list[ReplicationEngine] = []
        config = None
        for _ in range(enclave_count):
            platform = VirtualTeePlatform(self.clock, rng, authority)
            enclave = Enclave.init(platform, EnclaveConfig(attempts_max=TOTAL_RATE))
            if config is None:
                config = GroupConfig(
                    total_rate=TOTAL_RATE,
                    peer_whitelist=Whitelist(1, frozenset({enclave.measurement})),
                    ias_root_public_key=self.service.root_public_key,
                    revocation_authority_public=self.registry.public_key,
                )
            self.engines.append(ReplicationEngine(enclave, config, self.registry))
        self.host = HostCoordinator(proxy)
        self.engines[0].bootstrap_primary()
        self.key0 = self.engines[0].enclave._safe_key
        self._legit_holders: set[int] = {0}
        # Warm the quote/report path once so snapshots never miss them.
        for e in self.engines:
            self.host.report_for(e)

    # --- snapshot / restore  ---

    def snapshot(self):
        return (
            tuple(e.snapshot() for e in self.engines),
            frozenset(self.registry._revoked),
            frozenset(self._legit_holders),
        )

    def restore(self, snap) -> None:
        engine_snaps, revoked, legit = snap
        for engine, s in zip(self.engines, engine_snaps):
            engine.restore(s)
        self.registry._revoked = set(revoked)
        self._legit_holders = set(legit)

    # --- canonical projection for dedup ---

    def canonical(self):
        key_index = {e.signing_public_key: i for i, e in enumerate(self.engines)}
        out = []
        for e in self.engines:
            enc = e.enclave
            roster = e.roster
            if roster is None:
                view = None
            else:
                view = (
                    roster.epoch,
                    tuple(
                        sorted(
                            (
                                key_index.get(m.signing_public_key, -1),
                                int(m.role),
                                m.rate,
                            )
                            for m in roster.members
                        )
                    ),
                )
            out.append(
                (
                    enc._safe_key == self.key0,
                    enc._revoked,
                    enc._attempts_max,
                    view,
                )
            )
        return tuple(out)

    # --- invariants ---

    def check_invariants(self) -> list[str]:
        problems = []
        live_sum = 0
        for i, e in enumerate(self.engines):
            enc = e.enclave
            holds = enc._safe_key == self.key0
            if holds and not enc._revoked:
                live_sum += enc._attempts_max
            if holds and i not in self._legit_holders:
                problems.append(f"enclave {i} got the key without approval")
        if live_sum > TOTAL_RATE:
            problems.append(f"live rate sum {live_sum} exceeds {TOTAL_RATE}")
        return problems

    # --- actions ---

    def holders(self) -> list[int]:
        return [
            i
            for i, e in enumerate(self.engines)
            if e.is_holder and not e.enclave._revoked
        ]

    def enabled_actions(self):
        """(label, thunk) pairs legal-looking enough to try from here.
        Thunks may raise; the resulting state still counts."""
        actions = []
        holders = self.holders()
        holder_engines = [self.engines[i] for i in holders]
        outsiders = [
            i
            for i, e in enumerate(self.engines)
            if not e.is_holder and not e.enclave._revoked
        ]

        def identity(i: int, role: Role, rate: int) -> EnclaveIdentity:
            e = self.engines[i]
            return EnclaveIdentity(
                e.signing_public_key, e.enclave.measurement, role, rate
            )

        def current_members(i: int):
            return self.engines[i].roster.members

        if holders and outsiders:
            lead = holders[0]
            for j in outsiders:
                members = tuple(current_members(lead)) + (
                    identity(j, Role.BACKUP, 0),
                )
                actions.append(
                    (
                        f"admit_backup({j})",
                        self._legal_admission(holder_engines, j, members, Role.BACKUP),
                    )
                )
            lead_rate = self.engines[lead].my_rate()
            if lead_rate >= 2:
                for j in outsiders:
                    members = tuple(
                        m
                        if m.signing_public_key
                        != self.engines[lead].signing_public_key
                        else EnclaveIdentity(
                            m.signing_public_key,
                            m.measurement,
                            m.role,
                            lead_rate - lead_rate // 2,
                        )
                        for m in current_members(lead)
                    ) + (identity(j, Role.PRIMARY, lead_rate // 2),)
                    actions.append(
                        (
                            f"admit_primary({j})",
                            self._legal_admission(
                                holder_engines, j, members, Role.PRIMARY
                            ),
                        )
                    )

        # Unanimous promotion: hand a backup half the biggest rate.
        if holders:
            lead = holders[0]
            roster = self.engines[lead].roster
            backups = [m for m in roster.members if m.role == Role.BACKUP]
            primaries = sorted(
                (m for m in roster.members if m.role == Role.PRIMARY),
                key=lambda m: (-m.rate, m.signing_public_key),
            )
            if backups and primaries and primaries[0].rate >= 2:
                donor = primaries[0]
                target = backups[0]
                share = donor.rate // 2
                members = tuple(
                    EnclaveIdentity(
                        m.signing_public_key, m.measurement, Role.PRIMARY, share
                    )
                    if m.signing_public_key == target.signing_public_key
                    else (
                        EnclaveIdentity(
                            m.signing_public_key,
                            m.measurement,
                            m.role,
                            donor.rate - share,
                        )
                        if m.signing_public_key == donor.signing_public_key
                        else m
                    )
                    for m in roster.members
                )
                actions.append(
                    (
                        "promote_backup",
                        lambda m=members, h=tuple(holder_engines): self.host.change_rates(
                            list(h), m
                        ),
                    )
                )

        # Unilateral decrease, with and without full delivery.
        for i in holders:
            rate = self.engines[i].my_rate()
            if rate >= 2:
                actions.append((f"decrease_all({i})", self._decrease(i, deliver=True)))
                actions.append(
                    (f"decrease_partial({i})", self._decrease(i, deliver=False))
                )

        # Revocation of any live holder.
        for i in holders:
            actions.append((f"revoke({i})", self._revoke(i)))

        # Adversarial handoff with an incomplete signature set: a lone
        # holder "admits" someone while other holders exist.
        if len(holders) >= 2 and outsiders:
            actions.append(
                (
                    f"forged_admit({holders[0]}->{outsiders[0]})",
                    self._forged_admission(holders[0], outsiders[0]),
                )
            )
        return actions

    def _legal_admission(self, holder_engines, j, members, role):
        def run():
            self.host.admit(holder_engines, self.engines[j], members, role)
            self._legit_holders.add(j)

        return run

    def _decrease(self, i: int, deliver: bool):
        def run():
            lst = self.engines[i].decrease_rate(self.engines[i].my_rate() // 2)
            if deliver:
                for k in self.holders():
                    if k != i:
                        self.engines[k].apply_peer_decrease(lst)

        return run

    def _revoke(self, i: int):
        def run():
            stmt = self.registry.revoke(self.engines[i].signing_public_key)
            for k, e in enumerate(self.engines):
                if e.is_holder and not e.enclave._revoked:
                    e.revoke(stmt)

        return run

    def _forged_admission(self, i: int, j: int):
        def run():
            sender = self.engines[i]
            newcomer = self.engines[j]
            members = tuple(sender.roster.members) + (
                EnclaveIdentity(
                    newcomer.signing_public_key,
                    newcomer.enclave.measurement,
                    Role.BACKUP,
                    0,
                ),
            )
            proposal = RosterProposal(sender.roster.epoch + 1, members)
            lone_list = sender.sign_roster(proposal)
            transfer = sender.build_key_transfer(
                newcomer.enclave.quote_bytes(),
                self.host.report_for(newcomer),
                newcomer.enclave.dh_public_key,
                self.host.report_for(sender),
                [lone_list],
            )
            try:
                admit_backup(newcomer, [lone_list], transfer)
            except ReplicationError:
                return
            raise AssertionError("forged admission was accepted")

        return run


def run_model_check(
    enclave_count: int = 3, max_depth: int = 8, seed: int = 7
) -> ModelCheckResult:
    world = _World(enclave_count, seed)
    start_snap = world.snapshot()
    start_canon = world.canonical()
    seen = {start_canon}
    frontier = [(start_snap, 0)]
    result = ModelCheckResult(states_explored=1, transitions=0, max_depth=0)

    problems = world.check_invariants()
    for p in problems:
        result.violations.append(f"initial state: {p}")

    while frontier:
        snap, depth = frontier.pop()
        if depth >= max_depth:
            continue
        world.restore(snap)
        actions = world.enabled_actions()
        for label, thunk in actions:
            world.restore(snap)
            try:
                thunk()
            except AssertionError as exc:
                result.violations.append(f"depth {depth} action {label}: {exc}")
                continue
            except (ReplicationError, EnclaveError):
                # Rejected action; whatever partial state resulted is a
                # real reachable state and still gets checked below.
                pass
            result.transitions += 1
            for p in world.check_invariants():
                result.violations.append(f"depth {depth+1} after {label}: {p}")
            canon = world.canonical()
            if canon not in seen:
                seen.add(canon)
                result.states_explored += 1
                result.max_depth = max(result.max_depth, depth + 1)
                frontier.append((world.snapshot(), depth + 1))
    return result
