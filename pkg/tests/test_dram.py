import pytest
from hypothesis import given, strategies as st

from chargesim.advisor import ReductionTable
from chargesim.dram import (ACT, ACTIVATED, ACTIVATING, PRE, PRECHARGED, PRECHARGING, READ,
                            REF, WRITE, BankState, DramCommand, DramGeometry, RefreshEngine,
                            TimingParams, apply, can_issue, earliest_issue, rank_can_refresh)
from chargesim.errors import ConfigError, TimingProtocolError

from oracles import refresh_gaps

STD = TimingParams()


def cmd(kind, row=None, col=None, bank=0):
    return DramCommand(kind, 0, 0, bank, row, col, 0)


def activated(at=0, row=42, timing=STD):
    return apply(BankState(), cmd(ACT, row), at, timing)


class TestGeometry:
    def test_defaults(self):
        g = DramGeometry()
        assert (g.banks_per_rank, g.rows_per_bank, g.row_buffer_bytes) == (8, 65536, 8192)  # [PAPER]
        assert g.columns_per_row == 128  # [DERIVED]

    def test_non_power_of_two_rejected_all_at_once(self):
        with pytest.raises(ConfigError) as exc:
            DramGeometry(banks_per_rank=6, rows_per_bank=1000).validate()
        assert len(exc.value.problems) == 2

    def test_zero_count_rejected(self):
        assert DramGeometry(channels=0).problems()


class TestTimingParams:
    def test_standard_defaults(self):
        assert (STD.tRCD, STD.tRAS, STD.tRP) == (11, 28, 11)  # [PAPER]
        assert STD.tck_ns == 1.25  # [DERIVED]

    def test_ns_conversion_rounds_up(self):
        assert STD.ns_to_cycles(13.75) == 11  # [DERIVED] exact, no float drift
        assert STD.ns_to_cycles(8.0) == 7  # [DERIVED]
        assert STD.ns_to_cycles(22.0) == 18  # [DERIVED]
        assert STD.ns_to_cycles(1.25) == 1  # [DERIVED]
        assert STD.ns_to_cycles(1.26) == 2

    def test_reduction_table_variants(self):
        v = ReductionTable().variants(STD)
        assert [(t.tRCD, t.tRAS) for t in v] == [(11, 28), (7, 18), (8, 20), (9, 23)]  # [DERIVED]
        assert all(t.tRAS >= t.tRCD for t in v)
        assert v[1].tRP == STD.tRP and v[1].tREFI == STD.tREFI

    def test_tras_below_trcd_rejected(self):
        assert TimingParams(tRCD=12, tRAS=10).problems()


class TestCanIssue:
    def test_read_after_trcd(self):
        b = activated(0)
        assert not can_issue(b, cmd(READ, 42), 10, STD)
        assert can_issue(b, cmd(READ, 42), 11, STD)

    def test_pre_after_tras(self):
        b = activated(0)
        assert not can_issue(b, cmd(PRE), 27, STD)
        assert can_issue(b, cmd(PRE), 28, STD)

    def test_fresh_bank_accepts_act(self):
        assert can_issue(BankState(), cmd(ACT, 1), 0, STD)

    def test_reduced_variant_latched_at_act(self):
        fast = ReductionTable().variants(STD)[1]
        b = activated(0, timing=fast)
        assert can_issue(b, cmd(READ, 42), 7, STD)
        assert can_issue(b, cmd(PRE), 18, STD)
        assert not can_issue(b, cmd(PRE), 17, STD)

    def test_act_needs_trp(self):
        b = apply(activated(0), cmd(PRE), 28, STD)
        assert not can_issue(b, cmd(ACT, 1), 38, STD)
        assert can_issue(b, cmd(ACT, 1), 39, STD)

    def test_row_mismatch_and_closed(self):
        assert not can_issue(activated(0), cmd(READ, 7), 20, STD)
        assert not can_issue(BankState(), cmd(WRITE, 7), 20, STD)
        assert not can_issue(BankState(), cmd(PRE), 20, STD)
        assert not can_issue(activated(0), cmd(ACT, 7), 50, STD)

    def test_earliest_issue_agrees_with_can_issue(self):
        b = activated(5)
        for kind, row in ((READ, 42), (PRE, None)):
            t = earliest_issue(b, kind, STD)
            assert not can_issue(b, cmd(kind, row), t - 1, STD)
            assert can_issue(b, cmd(kind, row), t, STD)


class TestApply:
    def test_act_transition(self):
        b = apply(BankState(), cmd(ACT, 42), 100, STD)
        assert b.open_row == 42 and b.last_act == 100  # [TRIVIAL]
        assert b.phase(100, STD) == ACTIVATING
        assert b.phase(111, STD) == ACTIVATED

    def test_pre_transition(self):
        b = apply(activated(100), cmd(PRE), 130, STD)
        assert b.open_row is None and b.phase(130, STD) == PRECHARGING
        assert b.phase(141, STD) == PRECHARGED

    def test_read_records_cycle(self):
        b = apply(activated(100), cmd(READ, 42, 3), 112, STD)
        assert b.last_rdwr == 112 and b.open_row == 42  # [DERIVED]

    def test_violation_carries_constraint_and_deficit(self):
        with pytest.raises(TimingProtocolError) as exc:
            apply(activated(0), cmd(PRE), 20, STD)
        assert exc.value.constraint == "tRAS" and exc.value.deficit == 8  # [DERIVED]
        with pytest.raises(TimingProtocolError) as exc:
            apply(activated(0), cmd(READ, 42), 9, STD)
        assert exc.value.constraint == "tRCD" and exc.value.deficit == 2

    def test_ref_blocks_for_trfc(self):
        b = apply(BankState(), DramCommand(REF, 0, 0, -1, None, None, 0), 0, STD)
        assert not can_issue(b, cmd(ACT, 1), STD.tRFC - 1, STD)
        assert can_issue(b, cmd(ACT, 1), STD.tRFC, STD)

    @given(st.integers(0, 10_000), st.integers(0, 65535))
    def test_deterministic(self, t, row):
        assert apply(BankState(), cmd(ACT, row), t, STD) == apply(BankState(), cmd(ACT, row), t, STD)


class TestRefresh:
    def test_eight_rows_per_ref(self):
        eng = RefreshEngine(65536, STD)
        assert eng.rows_per_ref == 8  # [DERIVED]

    def test_nothing_due_at_zero(self):
        eng = RefreshEngine(65536, STD)
        assert eng.refresh_tick([BankState()] * 8, 0) is None

    def test_deferred_until_banks_precharged(self):
        eng = RefreshEngine(65536, STD)
        t = STD.tREFI
        banks = [BankState()] * 8
        banks[3] = activated(t - 5)
        assert not rank_can_refresh(banks, t, STD)
        assert eng.refresh_tick(banks, t) is None
        pre_at = t - 5 + STD.tRAS
        banks[3] = apply(banks[3], cmd(PRE, bank=3), pre_at, STD)
        assert eng.refresh_tick(banks, pre_at + STD.tRP - 1) is None
        ref = eng.refresh_tick(banks, pre_at + STD.tRP)
        assert ref is not None and ref.kind == REF and ref.cycle == pre_at + STD.tRP
        # the schedule does not slip: next REF is still due one tREFI after the first
        assert eng.next_due == 2 * t  # [DERIVED]

    def test_every_row_refreshed_within_retention_over_200ms(self):
        eng = RefreshEngine(65536, STD)
        banks = [BankState()] * 8
        horizon = 200 * 800_000  # 200 ms of 800 MHz cycles
        refs = []
        t = eng.next_due
        while t < horizon:
            refs.append(eng.refresh_tick(banks, t).cycle)
            t = eng.next_due
        worst, _ = refresh_gaps(refs, 8192, 65536, eng.initial_stamps())
        assert len(refs) == horizon // STD.tREFI
        assert worst <= 64 * 800_000  # [DERIVED]
        assert eng.late_refreshes == 0

    def test_postponed_refresh_flagged_beyond_bound(self):
        eng = RefreshEngine(65536, STD, max_postpone=2)
        banks = [BankState()] * 8
        eng.refresh_tick(banks, STD.tREFI + 2 * STD.tREFI)
        assert eng.late_refreshes == 0
        eng.refresh_tick(banks, 2 * STD.tREFI + 2 * STD.tREFI + 1 + STD.tRFC)
        assert eng.late_refreshes == 1  # [DERIVED]

    def test_last_refresh_tracks_groups(self):
        eng = RefreshEngine(65536, STD)
        banks = [BankState()] * 8
        eng.refresh_tick(banks, STD.tREFI)
        assert eng.last_refresh(0) == eng.last_refresh(7) == STD.tREFI
        assert eng.last_refresh(8) == eng.initial_stamps()[1] == (2 - 8192) * STD.tREFI  # [DERIVED]
