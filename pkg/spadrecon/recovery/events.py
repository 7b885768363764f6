"""
Recovery-time photon events

Each photon of a run is tagged with a symbol:
    ARMED (★)     arrives while the detector is fully armed and clicks
    TWILIGHT (●)  arrives during a recovery period and yields a click at its end
    LOST (∘)      arrives during a recovery period and is absorbed

Brackets group photons that share one recovery period, so "[★●][∘]" is a
click, a twilight photon in its recovery period, and a lost photon in the
recovery period started by the twilight click.
"""

import itertools
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterator, List, Sequence, Tuple

from spadrecon.errors import InputError


class EventSymbol(str, Enum):
    """Photon outcome symbol"""
    LOST = "∘"
    TWILIGHT = "●"
    ARMED = "★"


# ASCII spellings accepted by parse_event
_ALIASES: Dict[str, EventSymbol] = {
    "∘": EventSymbol.LOST, "o": EventSymbol.LOST,
    "●": EventSymbol.TWILIGHT, "@": EventSymbol.TWILIGHT,
    "★": EventSymbol.ARMED, "*": EventSymbol.ARMED,
}

Group = Tuple[EventSymbol, ...]


@dataclass(frozen=True)
class EventString:
    """A disambiguated photon event: ordered groups of symbols"""
    groups: Tuple[Group, ...]

    def __post_init__(self):
        groups = tuple(tuple(EventSymbol(s) for s in group) for group in self.groups)
        if not groups or any(len(group) == 0 for group in groups):
            raise InputError("EventString needs at least one group and no empty groups")
        if groups[0][0] != EventSymbol.ARMED:
            raise InputError("The first photon of an event must be ARMED")
        for index, group in enumerate(groups):
            if EventSymbol.ARMED in group[1:]:
                raise InputError(f"ARMED must open its group: {format_groups(groups)}")
            # a recovery period without an ARMED lead is opened by a twilight click
            if group[0] != EventSymbol.ARMED and EventSymbol.TWILIGHT not in groups[index - 1]:
                raise InputError(f"Group {index} needs a twilight photon in the group before it: "
                                 f"{format_groups(groups)}")
        object.__setattr__(self, "groups", groups)

    @property
    def symbols(self) -> Tuple[EventSymbol, ...]:
        return tuple(itertools.chain.from_iterable(self.groups))

    @property
    def photon_count(self) -> int:
        return sum(len(group) for group in self.groups)

    @property
    def non_armed_count(self) -> int:
        return sum(1 for s in self.symbols if s != EventSymbol.ARMED)

    def __str__(self) -> str:
        return format_groups(self.groups)


def format_groups(groups: Sequence[Group]) -> str:
    return "".join("[" + "".join(s.value for s in group) + "]" for group in groups)


def format_event(event: EventString) -> str:
    return str(event)


def parse_event(text: str) -> EventString:
    """
    Parse a bracketed event such as "[★●][∘]" (or "[*@][o]")

    Raises:
        InputError: On unknown symbols or unbalanced brackets
    """
    groups: List[Group] = []
    current: List[EventSymbol] = []
    inside = False
    for position, char in enumerate(text.replace(" ", "")):
        if char == "[":
            if inside:
                raise InputError(f"Nested '[' at position {position} in {text!r}")
            inside, current = True, []
        elif char == "]":
            if not inside:
                raise InputError(f"Unmatched ']' at position {position} in {text!r}")
            inside = False
            groups.append(tuple(current))
        elif char in _ALIASES and inside:
            current.append(_ALIASES[char])
        else:
            raise InputError(f"Unexpected character {char!r} at position {position} in {text!r}")
    if inside:
        raise InputError(f"Unclosed '[' in {text!r}")
    return EventString(tuple(groups))


def symbol_strings(n_photons: int, order: int) -> Iterator[Tuple[EventSymbol, ...]]:
    """All strings of length n_photons starting with ARMED with at most `order` non-ARMED symbols"""
    if n_photons < 1:
        return
    positions = range(1, n_photons)
    for k in range(0, min(order, n_photons - 1) + 1):
        for slots in itertools.combinations(positions, k):
            for outcome in itertools.product((EventSymbol.LOST, EventSymbol.TWILIGHT), repeat=k):
                symbols = [EventSymbol.ARMED] * n_photons
                for slot, symbol in zip(slots, outcome):
                    symbols[slot] = symbol
                yield tuple(symbols)


def _substring_splittings(substring: Sequence[EventSymbol]) -> List[Tuple[int, ...]]:
    """Group-boundary choices for one ARMED-led substring

    A boundary b means a new group starts at index b. After each TWILIGHT, up
    to and including the next TWILIGHT (or the substring end), at most one
    boundary may be placed between two photons.
    """
    twilight = [i for i, s in enumerate(substring) if s == EventSymbol.TWILIGHT]
    per_span: List[List[Tuple[int, ...]]] = []
    for k, position in enumerate(twilight):
        span_end = twilight[k + 1] if k + 1 < len(twilight) else len(substring) - 1
        options: List[Tuple[int, ...]] = [()]
        options.extend((b,) for b in range(position + 1, span_end + 1))
        per_span.append(options)
    return [tuple(itertools.chain.from_iterable(choice)) for choice in itertools.product(*per_span)]


def expand_string(symbols: Sequence[EventSymbol]) -> List[EventString]:
    """Every disambiguated event for one symbol string"""
    symbols = tuple(symbols)
    starts = [i for i, s in enumerate(symbols) if s == EventSymbol.ARMED]
    if not starts or starts[0] != 0:
        raise InputError("Symbol strings must start with ARMED")
    substrings = [symbols[a:b] for a, b in zip(starts, starts[1:] + [len(symbols)])]

    per_substring: List[List[Tuple[Group, ...]]] = []
    for substring in substrings:
        variants = []
        for boundaries in _substring_splittings(substring):
            cuts = [0, *boundaries, len(substring)]
            variants.append(tuple(substring[a:b] for a, b in zip(cuts, cuts[1:])))
        per_substring.append(variants)

    return [EventString(tuple(itertools.chain.from_iterable(choice)))
            for choice in itertools.product(*per_substring)]


def enumerate_events(n_photons: int, order: int) -> List[EventString]:
    """
    All events for n_photons with at most `order` photons in recovery periods

    Args:
        n_photons: Photon number (>= 1)
        order: Recovery order o_R (>= 0)

    Returns:
        Events in a deterministic order, no duplicates

    Examples:
        >>> [str(e) for e in enumerate_events(2, 1)]
        ['[★][★]', '[★∘]', '[★●]']
    """
    if n_photons < 1:
        raise InputError(f"n_photons must be >= 1, got {n_photons}")
    if order < 0:
        raise InputError(f"order must be >= 0, got {order}")
    events: List[EventString] = []
    for symbols in symbol_strings(n_photons, order):
        events.extend(expand_string(symbols))
    return events


def click_count(event: EventString) -> int:
    """Clicks registered for an event: one per group plus the twilight caveats"""
    clicks = len(event.groups)
    flat = [(symbol, g) for g, group in enumerate(event.groups) for symbol in group]

    last_armed = 0
    for index, (symbol, group_index) in enumerate(flat):
        if symbol != EventSymbol.ARMED:
            continue
        last_armed = index
        for previous, previous_group in reversed(flat[:index]):
            if previous == EventSymbol.LOST:
                continue
            if previous == EventSymbol.TWILIGHT and previous_group == group_index - 1:
                clicks += 1
            break

    last_group = len(event.groups) - 1
    if any(symbol == EventSymbol.TWILIGHT and group_index == last_group
           for symbol, group_index in flat[last_armed + 1:]):
        clicks += 1
    return clicks
