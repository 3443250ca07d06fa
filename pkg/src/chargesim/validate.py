"""Replay a channel's command log and report every timing violation.

Deliberately shares no state-machine code with the controller: it keeps
its own per-bank bookkeeping from scratch.
"""

from __future__ import annotations

from typing import Iterable, NamedTuple, Optional

from .dram import TimingParams


class Violation(NamedTuple):
    constraint: str
    cycle: int
    deficit: int
    command: tuple

    def __str__(self):
        return f"{self.constraint} at cycle {self.cycle} (short by {self.deficit}): {self.command}"


def validate_log(log: Iterable, timing: TimingParams, allowed_variants=None,
                 ranks: int = 1, banks: int = 8, max_postpone: int = 8) -> list[Violation]:
    """Check tRCD/tRAS (per the variant latched at each ACT), tRP, tRFC,
    refresh postponement against tREFI, data-bus overlap and the
    one-command-per-cycle rule."""
    out: list[Violation] = []
    big = 1 << 60
    open_row: dict = {}
    act_at: dict = {}
    latched: dict = {}
    pre_at = {(r, b): -big for r in range(ranks) for b in range(banks)}
    ref_at = {r: -big for r in range(ranks)}
    n_refs = {r: 0 for r in range(ranks)}
    last_cycle = None
    bus_end = -big

    def bad(name, cyc, deficit, cmd):
        out.append(Violation(name, cyc, deficit, tuple(cmd)))

    for cmd in log:
        kind, cyc = cmd.kind, cmd.cycle
        if last_cycle is not None:
            if cyc < last_cycle:
                bad("order", cyc, last_cycle - cyc, cmd)
            elif cyc == last_cycle:
                bad("command-bus", cyc, 1, cmd)
        last_cycle = cyc
        key = (cmd.rank, cmd.bank)

        if kind == "ACT":
            if key in open_row:
                bad("row-open", cyc, 0, cmd)
            if cyc - pre_at[key] < timing.tRP:
                bad("tRP", cyc, timing.tRP - (cyc - pre_at[key]), cmd)
            if cyc - ref_at[cmd.rank] < timing.tRFC:
                bad("tRFC", cyc, timing.tRFC - (cyc - ref_at[cmd.rank]), cmd)
            pair = (cmd.trcd, cmd.tras)
            if allowed_variants is not None and pair not in allowed_variants:
                bad("variant", cyc, 0, cmd)
            if cmd.trcd is None or cmd.tras is None or cmd.tras < cmd.trcd:
                bad("variant", cyc, 0, cmd)
                pair = (timing.tRCD, timing.tRAS)
            open_row[key] = cmd.row
            act_at[key] = cyc
            latched[key] = pair
        elif kind in ("READ", "WRITE"):
            if open_row.get(key) != cmd.row:
                bad("row-mismatch", cyc, 0, cmd)
                continue
            trcd = latched[key][0]
            if cyc - act_at[key] < trcd:
                bad("tRCD", cyc, trcd - (cyc - act_at[key]), cmd)
            lead = timing.tCL if kind == "READ" else timing.tCWL
            if cyc + lead < bus_end:
                bad("data-bus", cyc, bus_end - cyc - lead, cmd)
            bus_end = cyc + lead + timing.tBL
        elif kind in ("PRE", "PREA"):
            targets = ([key] if kind == "PRE" else
                       [(cmd.rank, b) for b in range(banks) if (cmd.rank, b) in open_row])
            if kind == "PRE" and key not in open_row:
                bad("row-closed", cyc, 0, cmd)
            for k in targets:
                tras = latched[k][1]
                if cyc - act_at[k] < tras:
                    bad("tRAS", cyc, tras - (cyc - act_at[k]), cmd)
                del open_row[k]
                pre_at[k] = cyc
        elif kind == "REF":
            r = cmd.rank
            for b in range(banks):
                if (r, b) in open_row:
                    bad("row-open", cyc, 0, cmd)
                elif cyc - pre_at[(r, b)] < timing.tRP:
                    bad("tRP", cyc, timing.tRP - (cyc - pre_at[(r, b)]), cmd)
            if cyc - ref_at[r] < timing.tRFC:
                bad("tRFC", cyc, timing.tRFC - (cyc - ref_at[r]), cmd)
            n_refs[r] += 1
            deadline = (n_refs[r] + max_postpone) * timing.tREFI
            if cyc > deadline:
                bad("tREFI", cyc, cyc - deadline, cmd)
            ref_at[r] = cyc
        else:
            bad("unknown-command", cyc, 0, cmd)

    if last_cycle is not None:
        for r in range(ranks):
            owed = last_cycle // timing.tREFI - max_postpone
            if n_refs[r] < owed:
                bad("tREFI", last_cycle, owed - n_refs[r], ("REF-missing", r))
    return out
