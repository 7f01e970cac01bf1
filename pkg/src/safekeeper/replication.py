"""Replicated key holders with a global guessing-rate budget.

Every enclave holding the SafeKey carries a signed roster naming all
holders with their enforced per-salt rates. Anything that could raise
the total guessing rate (admitting a holder, promoting one, raising a
rate) needs byte-identical rosters signed by every current holder:
unanimity means a single honest enclave suffices to block a runaway
roster. Lowering a rate is unilateral, and a separate revocation
authority can remove holders outright; both of those only shrink the
attack budget, so they need no quorum.

The enclave-to-enclave key transfer rides the same attestation
machinery clients use, in both directions.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Sequence

from . import codec, crypto
from .client import Whitelist, verify_and_bind, VerificationError
from .enclave import Enclave

ROSTER_CONTEXT = b"replication-roster"
REVOKE_CONTEXT = b"replication-revoke"
TRANSFER_CONTEXT = b"replication-transfer"


class ReplicationError(Exception):
    pass


class MissingApproval(ReplicationError):
    """Signature set does not cover every current key holder."""


class ListMismatch(ReplicationError):
    """Submitted rosters are not byte-identical."""


class RateSumViolation(ReplicationError):
    """Member rates do not respect the configured total."""


class BadSignature(ReplicationError):
    pass


class RoleError(ReplicationError):
    """Member's role/rate combination is not allowed."""


class Role(IntEnum):
    BACKUP = 0
    PRIMARY = 1


@dataclass(frozen=True)
class EnclaveIdentity:
    signing_public_key: bytes
    measurement: bytes
    role: Role
    rate: int

    def to_bytes(self) -> bytes:
        return codec.write_fields(
            self.signing_public_key,
            self.measurement,
            bytes([int(self.role)]),
            codec.u32(self.rate),
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "EnclaveIdentity":
        key, measurement, role, rate = codec.read_fields(data, 4)
        if len(role) != 1:
            raise ValueError("bad role field")
        return cls(key, measurement, Role(role[0]), codec.read_u32(rate))


def _members_blob(members: Sequence[EnclaveIdentity]) -> bytes:
    ordered = sorted(members, key=lambda m: m.signing_public_key)
    return codec.write_seq([m.to_bytes() for m in ordered])


@dataclass(frozen=True)
class RosterProposal:
    epoch: int
    members: tuple[EnclaveIdentity, ...]

    def payload(self) -> bytes:
        return codec.write_fields(
            ROSTER_CONTEXT, codec.u64(self.epoch), _members_blob(self.members)
        )


@dataclass(frozen=True)
class KeyHolderList:
    epoch: int
    members: tuple[EnclaveIdentity, ...]
    signer_public_key: bytes
    signature: bytes

    def payload(self) -> bytes:
        return RosterProposal(self.epoch, self.members).payload()

    def to_bytes(self) -> bytes:
        return codec.write_fields(
            codec.u64(self.epoch),
            _members_blob(self.members),
            self.signer_public_key,
            self.signature,
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "KeyHolderList":
        epoch, blob, signer, sig = codec.read_fields(data, 4)
        members = tuple(
            EnclaveIdentity.from_bytes(item) for item in codec.read_seq(blob)
        )
        return cls(codec.read_u64(epoch), members, signer, sig)

    def member_keys(self) -> frozenset[bytes]:
        return frozenset(m.signing_public_key for m in self.members)

    def find(self, signing_key: bytes) -> EnclaveIdentity | None:
        for m in self.members:
            if m.signing_public_key == signing_key:
                return m
        return None

    def rate_sum(self) -> int:
        return sum(m.rate for m in self.members)


@dataclass(frozen=True)
class RevocationStatement:
    revoked_signing_key: bytes
    signature: bytes

    def payload(self) -> bytes:
        return codec.write_fields(REVOKE_CONTEXT, self.revoked_signing_key)

    def to_bytes(self) -> bytes:
        return codec.write_fields(self.revoked_signing_key, self.signature)

    @classmethod
    def from_bytes(cls, data: bytes) -> "RevocationStatement":
        key, sig = codec.read_fields(data, 2)
        return cls(key, sig)


class RevocationAuthority:
    """Out-of-band authority that can only shrink the holder set."""

    def __init__(self, rng=None):
        self._key = crypto.generate_private_key(rng)
        self._revoked: set[bytes] = set()

    @property
    def public_key(self) -> bytes:
        return crypto.public_bytes(self._key)

    def revoke(self, signing_public_key: bytes) -> RevocationStatement:
        stmt = RevocationStatement(signing_public_key, b"")
        stmt = RevocationStatement(
            signing_public_key, crypto.sign(self._key, stmt.payload())
        )
        self._revoked.add(signing_public_key)
        return stmt

    def is_revoked(self, signing_public_key: bytes) -> bool:
        return signing_public_key in self._revoked


@dataclass(frozen=True)
class KeyTransfer:
    """Encrypted SafeKey handoff, mutually attested and bound to a
    specific roster set via the AEAD associated data."""

    sender_quote: bytes
    sender_report: bytes
    sender_dh_public: bytes
    receiver_dh_public: bytes
    nonce: bytes
    ciphertext: bytes

    def to_bytes(self) -> bytes:
        return codec.write_fields(
            self.sender_quote,
            self.sender_report,
            self.sender_dh_public,
            self.receiver_dh_public,
            self.nonce,
            self.ciphertext,
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "KeyTransfer":
        f = codec.read_fields(data, 6)
        return cls(*f)


def transfer_aad(
    sender_dh: bytes, receiver_dh: bytes, lists: Sequence[KeyHolderList]
) -> bytes:
    return codec.write_fields(
        TRANSFER_CONTEXT,
        sender_dh,
        receiver_dh,
        codec.write_seq([l.to_bytes() for l in lists]),
    )


@dataclass(frozen=True)
class GroupConfig:
    total_rate: int
    peer_whitelist: Whitelist
    ias_root_public_key: bytes
    revocation_authority_public: bytes


class ReplicationEngine:
    """The replication state machine of one enclave.

    Logically this code runs inside the trusted boundary; it uses the
    enclave's internal signing/sealing hooks and is the only writer of
    the enclave's enforced rate.
    """

    def __init__(
        self,
        enclave: Enclave,
        config: GroupConfig,
        registry: RevocationAuthority | None = None,
    ):
        self._enclave = enclave
        self._config = config
        self._roster: KeyHolderList | None = None
        if registry is not None:
            key = enclave.signing_public_key
            enclave.set_revocation_check(lambda: registry.is_revoked(key))

    # --- identity / introspection ---

    @property
    def enclave(self) -> Enclave:
        return self._enclave

    @property
    def signing_public_key(self) -> bytes:
        return self._enclave.signing_public_key

    @property
    def roster(self) -> KeyHolderList | None:
        return self._roster

    def my_identity(self) -> EnclaveIdentity | None:
        if self._roster is None:
            return None
        return self._roster.find(self.signing_public_key)

    @property
    def is_holder(self) -> bool:
        return self.my_identity() is not None

    def my_rate(self) -> int:
        me = self.my_identity()
        return 0 if me is None else me.rate

    # --- bootstrap ---

    def bootstrap_primary(self, rate: int | None = None) -> KeyHolderList:
        if self._roster is not None:
            raise ReplicationError("already a key holder")
        rate = self._config.total_rate if rate is None else rate
        member = EnclaveIdentity(
            self.signing_public_key, self._enclave.measurement, Role.PRIMARY, rate
        )
        self._roster = self._sign(RosterProposal(1, (member,)))
        self._enclave.set_enforced_rate_inside(rate)
        return self._roster

    def _sign(self, proposal: RosterProposal) -> KeyHolderList:
        sig = self._enclave.sign_inside(proposal.payload())
        return KeyHolderList(
            proposal.epoch, proposal.members, self.signing_public_key, sig
        )

    # --- static validation helpers ---

    def _check_member_shape(self, members: Sequence[EnclaveIdentity]) -> None:
        seen: set[bytes] = set()
        for m in members:
            if m.signing_public_key in seen:
                raise ListMismatch("duplicate member key")
            seen.add(m.signing_public_key)
            if m.role == Role.BACKUP and m.rate != 0:
                raise RoleError("backup must have rate 0")
            if not self._config.peer_whitelist.allows(m.measurement):
                raise RoleError("member measurement not whitelisted")

    def _check_signature(self, lst: KeyHolderList) -> None:
        if not crypto.verify(lst.signer_public_key, lst.payload(), lst.signature):
            raise BadSignature("roster signature invalid")

    # --- unanimous path ---

    def sign_roster(self, proposal: RosterProposal) -> KeyHolderList:
        """A holder's approval. Refuses anything that drops an existing
        member (that is revocation's job), breaks the rate budget, or
        brings in code off the whitelist."""
        if self._roster is None:
            raise ReplicationError("not a key holder")
        if proposal.epoch != self._roster.epoch + 1:
            raise ListMismatch(
                f"expected epoch {self._roster.epoch + 1}, got {proposal.epoch}"
            )
        self._check_member_shape(proposal.members)
        proposed_keys = {m.signing_public_key for m in proposal.members}
        if not self._roster.member_keys() <= proposed_keys:
            raise MissingApproval("proposal drops a current member")
        if self.signing_public_key not in proposed_keys:
            raise MissingApproval("refusing to sign ourselves out")
        if sum(m.rate for m in proposal.members) != self._config.total_rate:
            raise RateSumViolation(
                "unanimous roster must allocate the whole budget"
            )
        return self._sign(proposal)

    def _validate_unanimous(
        self,
        lists: Sequence[KeyHolderList],
        required_signers: frozenset[bytes],
    ) -> KeyHolderList:
        if not lists:
            raise MissingApproval("no lists submitted")
        head = lists[0]
        payload = head.payload()
        for lst in lists[1:]:
            if lst.payload() != payload:
                raise ListMismatch("submitted rosters differ")
        signers = set()
        for lst in lists:
            self._check_signature(lst)
            if lst.signer_public_key in signers:
                raise ListMismatch("duplicate signer")
            signers.add(lst.signer_public_key)
        if signers != set(required_signers):
            raise MissingApproval("signature set must be exactly the current holders")
        self._check_member_shape(head.members)
        if head.rate_sum() != self._config.total_rate:
            raise RateSumViolation("unanimous roster must allocate the whole budget")
        return head

    def apply_unanimous(self, lists: Sequence[KeyHolderList]) -> None:
        """Existing holder adopts a roster approved by every current
        holder (rate raises, role changes, admissions)."""
        if self._roster is None:
            raise ReplicationError("not a key holder")
        head = self._validate_unanimous(lists, self._roster.member_keys())
        if head.epoch != self._roster.epoch + 1:
            raise ListMismatch("unexpected epoch")
        me = head.find(self.signing_public_key)
        if me is None:
            raise MissingApproval("new roster omits this enclave")
        self._roster = self._sign(RosterProposal(head.epoch, head.members))
        self._enclave.set_enforced_rate_inside(me.rate)

    # --- key transfer ---

    def build_key_transfer(
        self,
        peer_quote: bytes,
        peer_report: bytes,
        peer_dh_public: bytes,
        own_report: bytes,
        lists: Sequence[KeyHolderList],
    ) -> KeyTransfer:
        """Sender side: attest the receiver, encrypt the SafeKey to its
        attested DH key, bind the ciphertext to the roster set. The
        host supplies both verification reports; they prove themselves.
        """
        if self._roster is None:
            raise ReplicationError("not a key holder")
        try:
            verified = verify_and_bind(
                peer_quote,
                peer_report,
                self._config.peer_whitelist,
                peer_dh_public,
                ias_root_public_key=self._config.ias_root_public_key,
            )
        except VerificationError as exc:
            raise BadSignature(f"receiver failed attestation: {exc}") from exc
        sender_dh = self._enclave.dh_public_key
        aad = transfer_aad(sender_dh, verified.enclave_public_key, lists)
        nonce, ct = self._enclave.peer_seal(
            verified.enclave_public_key, self._enclave_safe_key(), aad
        )
        return KeyTransfer(
            sender_quote=self._enclave.quote_bytes(),
            sender_report=own_report,
            sender_dh_public=sender_dh,
            receiver_dh_public=verified.enclave_public_key,
            nonce=nonce,
            ciphertext=ct,
        )

    def _enclave_safe_key(self) -> bytes:
        # Key extraction is scoped to the transfer path; outside the
        # trusted boundary nothing calls this.
        return self._enclave._safe_key

    def _receive_handoff(
        self,
        lists: Sequence[KeyHolderList],
        transfer: KeyTransfer,
        expect_role: Role,
    ) -> None:
        if self._roster is not None:
            raise ReplicationError("already a key holder")
        if transfer.receiver_dh_public != self._enclave.dh_public_key:
            raise BadSignature("transfer addressed to a different enclave")
        try:
            verify_and_bind(
                transfer.sender_quote,
                transfer.sender_report,
                self._config.peer_whitelist,
                transfer.sender_dh_public,
                ias_root_public_key=self._config.ias_root_public_key,
            )
        except VerificationError as exc:
            raise BadSignature(f"sender failed attestation: {exc}") from exc

        my_key = self.signing_public_key
        if not lists:
            raise MissingApproval("no lists submitted")
        head = lists[0]
        required = frozenset(head.member_keys() - {my_key})
        head = self._validate_unanimous(lists, required)
        me = head.find(my_key)
        if me is None:
            raise MissingApproval("roster does not admit this enclave")
        if me.measurement != self._enclave.measurement:
            raise RoleError("roster lists wrong measurement for this enclave")
        if me.role != expect_role:
            raise RoleError(f"expected admission as {expect_role.name}")
        if expect_role == Role.PRIMARY and me.rate <= 0:
            raise RoleError("primary admission needs a positive rate")

        aad = transfer_aad(
            transfer.sender_dh_public, transfer.receiver_dh_public, lists
        )
        safe_key = self._enclave.peer_open(
            transfer.sender_dh_public, transfer.nonce, transfer.ciphertext, aad
        )
        if len(safe_key) != 16:
            raise BadSignature("transfer payload malformed")
        self._enclave.adopt_safe_key_inside(safe_key)
        self._roster = self._sign(RosterProposal(head.epoch, head.members))
        self._enclave.set_enforced_rate_inside(me.rate)

    # --- unilateral rate decrease ---

    def decrease_rate(self, new_rate: int) -> KeyHolderList:
        if self._roster is None:
            raise ReplicationError("not a key holder")
        me = self.my_identity()
        assert me is not None
        if not 0 <= new_rate < me.rate:
            raise RateSumViolation("decrease must strictly lower our own rate")
        members = tuple(
            EnclaveIdentity(m.signing_public_key, m.measurement, m.role, new_rate)
            if m.signing_public_key == self.signing_public_key
            else m
            for m in self._roster.members
        )
        self._roster = self._sign(RosterProposal(self._roster.epoch + 1, members))
        self._enclave.set_enforced_rate_inside(new_rate)
        return self._roster

    def apply_peer_decrease(self, lst: KeyHolderList) -> None:
        """Adopt a single-signer roster in which the signer lowered its
        own rate and changed nothing else."""
        if self._roster is None:
            raise ReplicationError("not a key holder")
        if lst.epoch != self._roster.epoch + 1:
            raise ListMismatch("unexpected epoch")
        self._check_signature(lst)
        if lst.member_keys() != self._roster.member_keys():
            raise MissingApproval("membership changes need unanimity or revocation")
        changed = 0
        for new in lst.members:
            old = self._roster.find(new.signing_public_key)
            assert old is not None
            if new.measurement != old.measurement or new.role != old.role:
                raise MissingApproval("only a rate decrease is unilateral")
            if new.rate != old.rate:
                if (
                    new.signing_public_key != lst.signer_public_key
                    or new.rate > old.rate
                ):
                    raise MissingApproval("only the signer's own decrease is allowed")
                changed += 1
        if changed == 0:
            raise ListMismatch("no change")
        self._roster = self._sign(RosterProposal(lst.epoch, lst.members))
        me = self._roster.find(self.signing_public_key)
        assert me is not None
        self._enclave.set_enforced_rate_inside(me.rate)

    # --- revocation ---

    def revoke(self, statement: RevocationStatement) -> None:
        """Apply an authority statement: drop the named holder, or halt
        if the named holder is us."""
        if not crypto.verify(
            self._config.revocation_authority_public,
            statement.payload(),
            statement.signature,
        ):
            raise BadSignature("revocation statement signature invalid")
        if statement.revoked_signing_key == self.signing_public_key:
            self._enclave.halt_inside()
            return
        if self._roster is None:
            return
        if self._roster.find(statement.revoked_signing_key) is None:
            return
        members = tuple(
            m
            for m in self._roster.members
            if m.signing_public_key != statement.revoked_signing_key
        )
        self._roster = self._sign(
            RosterProposal(self._roster.epoch + 1, members)
        )

    # --- model-check support ---

    def snapshot(self) -> tuple:
        enc = self._enclave
        return (
            self._roster,
            enc._attempts_max,
            enc._revoked,
            enc._safe_key,
            dict(enc._attempts),
            enc._t_reset,
            enc._lockout,
        )

    def restore(self, state: tuple) -> None:
        roster, attempts_max, revoked, safe_key, attempts, t_reset, lockout = state
        enc = self._enclave
        self._roster = roster
        enc._attempts_max = attempts_max
        enc._revoked = revoked
        if enc._safe_key != safe_key:
            enc.adopt_safe_key_inside(safe_key)
        enc._attempts = dict(attempts)
        enc._t_reset = t_reset
        enc._lockout = lockout


def admit_backup(
    new_enclave: ReplicationEngine,
    lists: Sequence[KeyHolderList],
    key_transfer: KeyTransfer,
) -> None:
    new_enclave._receive_handoff(lists, key_transfer, Role.BACKUP)


def promote_primary(
    new_enclave: ReplicationEngine,
    lists: Sequence[KeyHolderList],
    key_transfer: KeyTransfer,
) -> None:
    new_enclave._receive_handoff(lists, key_transfer, Role.PRIMARY)


class HostCoordinator:
    """Untrusted plumbing that moves quotes, reports, rosters, and key
    transfers between enclaves. It has no authority of its own; every
    payload it carries proves itself to the receiving enclave."""

    def __init__(self, report_source):
        # report_source: anything with request(quote_bytes) -> report bytes
        self._reports = report_source

    def report_for(self, engine: ReplicationEngine) -> bytes:
        return self._reports.request(engine.enclave.quote_bytes())

    def admit(
        self,
        holders: Sequence[ReplicationEngine],
        newcomer: ReplicationEngine,
        members: Sequence[EnclaveIdentity],
        role: Role,
    ) -> list[KeyHolderList]:
        """Unanimous admission: every current holder signs the new
        roster, one of them transfers the key, everyone adopts."""
        assert holders, "admission needs at least one current holder"
        proposal = RosterProposal(holders[0].roster.epoch + 1, tuple(members))
        lists = [h.sign_roster(proposal) for h in holders]
        sender = holders[0]
        transfer = sender.build_key_transfer(
            newcomer.enclave.quote_bytes(),
            self.report_for(newcomer),
            newcomer.enclave.dh_public_key,
            self.report_for(sender),
            lists,
        )
        if role == Role.BACKUP:
            admit_backup(newcomer, lists, transfer)
        else:
            promote_primary(newcomer, lists, transfer)
        for h in holders:
            h.apply_unanimous(lists)
        return lists

    def change_rates(
        self,
        holders: Sequence[ReplicationEngine],
        members: Sequence[EnclaveIdentity],
    ) -> list[KeyHolderList]:
        proposal = RosterProposal(holders[0].roster.epoch + 1, tuple(members))
        lists = [h.sign_roster(proposal) for h in holders]
        for h in holders:
            h.apply_unanimous(lists)
        return lists
