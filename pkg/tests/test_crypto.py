"""Identities, challenges, and sealed messages."""

import hashlib
from random import Random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from optoutswarm import crypto

SHA256_EMPTY = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"


def identity(tag: str) -> crypto.ClientIdentity:
    return crypto.generate_identity(Random(tag))


class TestHashing:
    def test_empty_input_matches_standard_vector(self):
        assert crypto.hash_bytes(b"").hex() == SHA256_EMPTY

    def test_deterministic(self):
        assert crypto.hash_bytes(b"abc") == crypto.hash_bytes(b"abc")

    def test_one_byte_difference_changes_digest(self):
        assert crypto.hash_bytes(b"abc") != crypto.hash_bytes(b"abd")


class TestIdentity:
    def test_public_key_is_32_bytes(self):
        assert len(identity("a").public_key) == 32

    def test_seeded_generation_is_stable(self):
        assert identity("a").public_key == identity("a").public_key
        assert identity("a").public_key != identity("b").public_key

    def test_repr_hides_private_key(self):
        ident = identity("a")
        assert ident.private_key.hex() not in repr(ident)


class TestChallenge:
    def test_degenerate_interval_forces_zero(self):
        ch, expected = crypto.generate_challenge(identity("a"), 0, Random(1))
        assert ch.rand1 == 0 and expected == 0

    def test_seeded_replay_is_identical(self):
        a1, e1 = crypto.generate_challenge(identity("a"), 1000, Random(7))
        a2, e2 = crypto.generate_challenge(identity("a"), 1000, Random(7))
        assert (a1.rand1, e1) == (a2.rand1, e2)
        assert a1.target_hash == a2.target_hash

    def test_values_stay_inside_interval(self):
        rng = Random(3)
        for _ in range(50):
            ch, expected = crypto.generate_challenge(identity("a"), 1000, rng)
            assert 0 <= ch.rand1 <= 1000
            assert 0 <= expected <= 1000

    def test_negative_interval_rejected(self):
        with pytest.raises(ValueError):
            crypto.generate_challenge(identity("a"), -1, Random(1))

    def test_target_binds_issuer_key(self):
        issuer = identity("a")
        preimage = (
            issuer.public_key
            + (5).to_bytes(8, "little")
            + (9).to_bytes(8, "little")
        )
        assert crypto.challenge_target(issuer.public_key, 5, 9) == hashlib.sha256(
            preimage
        ).digest()


class TestSolve:
    def test_planted_zero_solution_costs_one_hash(self):
        issuer = identity("a")
        ch = crypto.Challenge(
            issuer_public_key=issuer.public_key,
            rand1=77,
            target_hash=crypto.challenge_target(issuer.public_key, 77, 0),
        )
        assert crypto.solve_challenge(ch, 100) == (0, 1)

    def test_round_trip_recovers_expected_answer(self):
        rng = Random(11)
        issuer = identity("a")
        for _ in range(20):
            ch, expected = crypto.generate_challenge(issuer, 500, rng)
            solution, work = crypto.solve_challenge(ch, 500)
            assert solution == expected
            assert work == expected + 1

    def test_foreign_issuer_key_has_no_solution(self):
        # the target was computed over a different key, so the scan must fail:
        # this is exactly what a relayed challenge looks like after rewriting
        ch, _ = crypto.generate_challenge(identity("a"), 200, Random(2))
        forged = crypto.Challenge(
            issuer_public_key=identity("b").public_key,
            rand1=ch.rand1,
            target_hash=ch.target_hash,
        )
        with pytest.raises(crypto.NoSolution):
            crypto.solve_challenge(forged, 200)

    def test_verify_solution(self):
        ch, expected = crypto.generate_challenge(identity("a"), 300, Random(4))
        assert crypto.verify_solution(ch, expected)
        assert not crypto.verify_solution(ch, (expected + 1) % 301)

    @given(planted=st.integers(min_value=0, max_value=400))
    @settings(max_examples=40, deadline=None)
    def test_solver_finds_any_planted_value(self, planted):
        issuer = identity("prop")
        ch = crypto.Challenge(
            issuer_public_key=issuer.public_key,
            rand1=1,
            target_hash=crypto.challenge_target(issuer.public_key, 1, planted),
        )
        assert crypto.solve_challenge(ch, 400) == (planted, planted + 1)


def test_mean_work_tracks_interval_size():
    # linear hardness: uniform answers make the average scan half the interval
    rng = Random(5)
    issuer = identity("a")
    max_rand = 200
    total = 0
    trials = 200
    for _ in range(trials):
        ch, _ = crypto.generate_challenge(issuer, max_rand, rng)
        _, work = crypto.solve_challenge(ch, max_rand)
        total += work
    mean = total / trials
    assert 0.4 * (max_rand + 1) <= mean <= 0.6 * (max_rand + 1)


class TestSealedMessages:
    def test_round_trip(self):
        bob = identity("bob")
        msg = crypto.seal(bob.public_key, b"meet at dawn")
        assert crypto.open_sealed(bob, msg) == b"meet at dawn"

    def test_wrong_identity_is_not_addressee(self):
        bob, eve = identity("bob"), identity("eve")
        msg = crypto.seal(bob.public_key, b"secret")
        with pytest.raises(crypto.NotAddressee):
            crypto.open_sealed(eve, msg)

    def test_empty_plaintext_round_trips(self):
        bob = identity("bob")
        assert crypto.open_sealed(bob, crypto.seal(bob.public_key, b"")) == b""

    def test_tampered_ciphertext_fails_authentication(self):
        bob = identity("bob")
        msg = crypto.seal(bob.public_key, b"payload")
        flipped = bytearray(msg.ciphertext)
        flipped[-1] ^= 0x01
        broken = crypto.SealedMessage(msg.recipient_key_hash, bytes(flipped))
        with pytest.raises(crypto.DecryptionFailure):
            crypto.open_sealed(bob, broken)

    def test_wire_round_trip(self):
        bob = identity("bob")
        msg = crypto.seal(bob.public_key, b"x" * 100)
        again = crypto.SealedMessage.from_bytes(msg.to_bytes())
        assert again == msg
        with pytest.raises(ValueError):
            crypto.SealedMessage.from_bytes(b"too short")

    def test_sealing_is_deterministic(self):
        bob = identity("bob")
        assert (
            crypto.seal(bob.public_key, b"same").to_bytes()
            == crypto.seal(bob.public_key, b"same").to_bytes()
        )

    @given(plaintext=st.binary(max_size=200))
    @settings(max_examples=30, deadline=None)
    def test_any_plaintext_round_trips(self, plaintext):
        bob = identity("prop-bob")
        assert crypto.open_sealed(bob, crypto.seal(bob.public_key, plaintext)) == plaintext
