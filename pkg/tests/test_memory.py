from datetime import date

import pytest

from replaysim import errors
from replaysim.memory import (
    Budget,
    DayGate,
    MemoryStore,
    MetaInsight,
    charge,
)

TODAY = date(2026, 1, 5)


class TestNotes:
    def setup_method(self):
        self.store = MemoryStore(known_qids={"q1", "q2"})

    def test_add_and_update(self):
        self.store.mem_add("q1", "Who wins?", "leaning Alice", "election", TODAY)
        self.store.mem_update("q1", "Alice confirmed front-runner", date(2026, 1, 6))
        note = self.store.notes["q1"]
        assert note.memory == "Alice confirmed front-runner"
        assert note.last_updated == date(2026, 1, 6)

    def test_duplicate_add_rejected(self):
        self.store.mem_add("q1", "t", "m", "c", TODAY)
        with pytest.raises(errors.DuplicateNote):
            self.store.mem_add("q1", "t", "m2", "c", TODAY)

    def test_unknown_qid_rejected(self):
        with pytest.raises(errors.UnknownQid):
            self.store.mem_add("q9", "t", "m", "c", TODAY)
        with pytest.raises(errors.UnknownQid):
            self.store.mem_update("q2", "m", TODAY)
        with pytest.raises(errors.UnknownQid):
            self.store.mem_delete("q2")

    def test_char_cap_boundary(self):
        self.store.mem_add("q1", "t", "x" * 1000, "c", TODAY)
        with pytest.raises(errors.NoteTooLong):
            self.store.mem_add("q2", "t", "x" * 1001, "c", TODAY)
        with pytest.raises(errors.NoteTooLong):
            self.store.mem_update("q1", "x" * 1001, TODAY)

    def test_delete(self):
        self.store.mem_add("q1", "t", "m", "c", TODAY)
        self.store.mem_delete("q1")
        assert "q1" not in self.store.notes


class TestMetaInsights:
    def test_indices_are_stable_across_deletes(self):
        store = MemoryStore()
        i1 = store.meta_new("first", TODAY)
        i2 = store.meta_new("second", TODAY)
        store.meta_delete(i1)
        i3 = store.meta_new("third", TODAY)
        assert (i1, i2, i3) == (1, 2, 3)
        assert store.meta_retrieve([i2, i3]) == ["second", "third"]

    def test_entry_cap(self):
        store = MemoryStore(meta_cap=3)
        for i in range(3):
            store.meta_new(f"insight {i}", TODAY)
        with pytest.raises(errors.CapExceeded):
            store.meta_new("overflow", TODAY)

    def test_update_and_unknown_index(self):
        store = MemoryStore()
        i = store.meta_new("draft", TODAY)
        store.meta_update(i, "final", date(2026, 1, 7))
        assert store.insights[i].text == "final"
        assert store.insights[i].updated == date(2026, 1, 7)
        with pytest.raises(errors.UnknownIndex):
            store.meta_update(99, "x", TODAY)
        with pytest.raises(errors.UnknownIndex):
            store.meta_retrieve([i, 99])


class TestDisableWritesAblation:
    def test_writes_raise_but_retrieval_works(self):
        seed = MemoryStore()
        seed.mem_add("q1", "t", "m", "c", TODAY)
        idx = seed.meta_new("kept", TODAY)
        frozen = MemoryStore(writes_disabled=True)
        frozen.notes = seed.notes
        frozen.insights = seed.insights
        assert frozen.meta_retrieve([idx]) == ["kept"]
        assert frozen.notes["q1"].memory == "m"
        for call in (
            lambda: frozen.mem_add("q2", "t", "m", "c", TODAY),
            lambda: frozen.mem_update("q1", "m2", TODAY),
            lambda: frozen.mem_delete("q1"),
            lambda: frozen.meta_new("x", TODAY),
            lambda: frozen.meta_update(idx, "x", TODAY),
            lambda: frozen.meta_delete(idx),
        ):
            with pytest.raises(errors.MemoryDisabled):
                call()


class TestPersistence:
    def _populated(self):
        store = MemoryStore()
        store.mem_add("q1", "Who wins?", "notes, with commas\nand newlines", "politics", TODAY)
        store.mem_add("q2", "Score?", "short", "sports", TODAY)
        store.meta_new("base rates matter", TODAY)
        store.meta_new("check source dates", TODAY)
        return store

    def test_round_trip(self, tmp_path):
        store = self._populated()
        snapshot = store.persist(tmp_path, TODAY)
        assert snapshot == tmp_path / "memory" / "2026-01-05"
        loaded = MemoryStore()
        loaded.load_snapshot(snapshot)
        assert loaded.notes == store.notes
        assert loaded.insights == store.insights
        assert loaded.meta_new("next", TODAY) == 3

    def test_persisted_files_byte_stable(self, tmp_path):
        store = self._populated()
        a = store.persist(tmp_path / "a", TODAY)
        b = store.persist(tmp_path / "b", TODAY)
        assert (a / "mem.csv").read_bytes() == (b / "mem.csv").read_bytes()
        assert (a / "meta.yaml").read_bytes() == (b / "meta.yaml").read_bytes()

    def test_daily_snapshots_are_separate(self, tmp_path):
        store = self._populated()
        store.persist(tmp_path, TODAY)
        store.mem_update("q2", "changed", date(2026, 1, 6))
        store.persist(tmp_path, date(2026, 1, 6))
        assert (tmp_path / "memory" / "2026-01-05" / "mem.csv").exists()
        assert (tmp_path / "memory" / "2026-01-06" / "mem.csv").exists()


class TestBudget:
    def test_charge_decrements(self):
        b = Budget(actions_remaining=2, context_tokens_remaining=100)
        advisory = charge(b, action_cost=1, token_cost=30)
        assert (b.actions_remaining, b.context_tokens_remaining) == (1, 70)
        assert not advisory.session_end

    def test_exhaustion_flags(self):
        b = Budget(actions_remaining=1, context_tokens_remaining=10)
        advisory = charge(b, action_cost=1, token_cost=5)
        assert advisory.session_end

    def test_force_submit_threshold(self):
        b = Budget(
            actions_remaining=10,
            context_tokens_remaining=100,
            submit_reserve=50,
            force_submit_threshold=40,
        )
        assert not charge(b, token_cost=50).force_submit
        assert charge(b, token_cost=20).force_submit

    def test_threshold_must_fit_reserve(self):
        with pytest.raises(ValueError):
            Budget(1, 1, submit_reserve=5, force_submit_threshold=6)

    def test_counters_never_negative(self):
        b = Budget(actions_remaining=1, context_tokens_remaining=1)
        charge(b, action_cost=5, token_cost=5)
        assert b.actions_remaining == 0
        assert b.context_tokens_remaining == 0


class TestDayGate:
    def test_two_call_protocol(self):
        gate = DayGate(enabled=True)
        assert gate.request_advance() == "memory-phase"
        assert gate.request_advance() == "advance"
        assert gate.request_advance() == "memory-phase"

    def test_disabled_always_advances(self):
        gate = DayGate(enabled=False)
        assert gate.request_advance() == "advance"
        assert gate.request_advance() == "advance"
