"""Single-strike fault injection against a golden trace.

One sample = one drain site, one strike cycle k, one strike time t within
the cycle.  The engine plays the resulting disturbance through the
combinational fanout with three masking mechanisms:

* logical   - a pulse passes a gate only while every side input holds a
              non-controlling golden value;
* electrical - a pulse narrower than the gate delay (scaled by the filter
              threshold) is swallowed; widths between d and 2d shrink to
              2*(w - d), wider pulses pass unchanged;
* latching-window - a disturbance only matters if the capturing flop sees it
              across the clock edge (or, under the window-random policy,
              probabilistically when it grazes the setup/hold window).

Observation convention: flips_e1 compares the register file immediately
before the capture edge that ends the strike cycle against golden, flips_e2
compares the state captured at that edge (i.e. the state during cycle k+1)
against golden.  Under this convention a gate strike can never appear at e1,
and a register strike contributes at most its own flop at e1.
"""

from collections import deque
from dataclasses import dataclass, field

from .errors import ConfigError, InvariantError
from .netlist import CONTROLLING
from .techmodel import clock_period, settle_bound

_MAX_EVENTS = 200_000


@dataclass(frozen=True)
class CapturePolicy:
    """How a disturbance that straddles the setup/hold window resolves.

    ``instant`` captures whatever value the data net holds just before the
    edge.  ``window-random`` additionally captures a grazing disturbance
    with probability ``p`` drawn from the sample's own RNG stream, as a
    crude stand-in for metastable resolution.
    """

    kind: str = "instant"
    p: float = 0.5

    def __post_init__(self):
        if self.kind not in ("instant", "window-random"):
            raise ConfigError(f"unknown capture policy '{self.kind}'")
        if self.kind == "window-random" and not 0.0 <= self.p <= 1.0:
            raise ConfigError("window-random probability must be in [0, 1]")

    @property
    def label(self):
        if self.kind == "instant":
            return "instant"
        return f"window-random:{self.p:g}"


INSTANT = CapturePolicy("instant")


def parse_policy(text):
    if text == "instant":
        return INSTANT
    if text.startswith("window-random:"):
        try:
            p = float(text.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"bad capture policy '{text}'") from None
        return CapturePolicy("window-random", p)
    raise ConfigError(f"unknown capture policy '{text}' "
                      "(expected 'instant' or 'window-random:<p>')")


@dataclass(frozen=True)
class StrikeSample:
    """One sampled strike: where (drain), when (cycle k, time t)."""

    drain: object            # techmodel.DrainSite
    k: int
    t: float

    @property
    def strike_class(self):
        return self.drain.strike_class


@dataclass(frozen=True)
class PulseEvent:
    """A disturbance interval [start, start+width) on one net.

    ``value`` is the disturbed value, always the complement of the net's
    golden value in the strike cycle.  ``step`` marks register-strike
    disturbances that persist until the capture edge: they propagate by pure
    delay shift and are not subject to electrical attenuation, because both
    their edges are full-swing transitions rather than a narrow glitch.
    """

    net: str
    start: float
    width: float
    value: int
    step: bool = False

    @property
    def end(self):
        return self.start + self.width


@dataclass(frozen=True)
class SampleResult:
    flips_e1: frozenset
    flips_e2: frozenset
    strike_class: str
    window_hits: int = 0

    @property
    def flip_counts(self):
        return (len(self.flips_e1), len(self.flips_e2))


@dataclass(frozen=True)
class SimContext:
    """Per-(circuit, profile) precomputation shared by every sample."""

    circuit: object
    profile: object
    period: float
    settle: float
    gate_delays: dict        # gate id -> ps
    flop_ids_by_data: dict   # data net -> tuple of flop ids

    @classmethod
    def build(cls, circuit, profile):
        period = clock_period(circuit, profile)
        settle = settle_bound(circuit, profile)
        if settle >= period:
            raise ConfigError(
                f"circuit '{circuit.name}' never settles inside the clock "
                f"period ({settle:.1f} ps >= {period:.1f} ps); increase the "
                f"clock margin")
        delays = {g.id: profile.delay(g.kind, len(g.inputs))
                  for g in circuit.gates}
        return cls(circuit=circuit, profile=profile, period=period,
                   settle=settle, gate_delays=delays,
                   flop_ids_by_data=circuit.flops_by_data)


def _covers(start, end, edge):
    # The flop samples the data value immediately before the edge, so an
    # interval ending exactly at the edge still lands and one starting
    # exactly at the edge does not.
    return start < edge <= end


def _grazes(start, end, edge, setup, hold):
    return start <= edge + hold and end > edge - setup and not _covers(
        start, end, edge)


def capture_at_edge(golden, disturbance, edge, profile, policy=INSTANT,
                    rng=None):
    """Resolve one flop capture: (captured_bit, window_hit).

    ``disturbance`` is a (start, end) interval during which the data net
    holds the complement of ``golden``, or None for a clean capture.
    """
    if disturbance is None:
        return golden, False
    start, end = disturbance
    if _covers(start, end, edge):
        return 1 - golden, False
    if _grazes(start, end, edge, profile.ff_setup, profile.ff_hold):
        if policy.kind == "window-random":
            if rng is None:
                raise ConfigError("window-random capture needs an RNG stream")
            if rng.random() < policy.p:
                return 1 - golden, True
        return golden, True
    return golden, False


def _attenuate(width, delay, theta):
    """Electrical masking: surviving width of a pulse crossing one gate."""
    if width <= theta * delay or width <= delay:
        return None
    if width >= 2.0 * delay:
        return width
    return 2.0 * (width - delay)


def _propagate(ctx, settled, seed_event, debug=None):
    """Event-wise propagation through the combinational fanout.

    Returns {data net -> [PulseEvent, ...]} for nets that feed flops.
    Reconvergent arrivals are propagated independently; duplicate
    (net, start, width) events are collapsed.
    """
    circuit = ctx.circuit
    theta = ctx.profile.filter_threshold
    at_flops = {}
    seen = set()
    queue = deque([seed_event])
    emitted = 0
    while queue:
        ev = queue.popleft()
        key = (ev.net, ev.start, ev.width)
        if key in seen:
            continue
        seen.add(key)
        emitted += 1
        if emitted > _MAX_EVENTS:
            raise InvariantError(
                f"pulse propagation exceeded {_MAX_EVENTS} events on "
                f"'{circuit.name}'")
        if debug is not None:
            debug.append(f"pulse net={ev.net} start={ev.start:.2f} "
                         f"width={ev.width:.2f} value={ev.value}"
                         + (" step" if ev.step else ""))
        if ev.net in ctx.flop_ids_by_data:
            at_flops.setdefault(ev.net, []).append(ev)
        for gate in circuit.gate_fanout.get(ev.net, ()):
            ctrl = CONTROLLING[gate.kind]
            if ctrl is not None:
                side = [n for n in gate.inputs if n != ev.net]
                if any(settled[n] == ctrl for n in side):
                    if debug is not None:
                        debug.append(f"  masked at {gate.id} (logical)")
                    continue
            d = ctx.gate_delays[gate.id]
            if ev.step:
                new_width = ev.width
            else:
                new_width = _attenuate(ev.width, d, theta)
                if new_width is None:
                    if debug is not None:
                        debug.append(f"  masked at {gate.id} (electrical)")
                    continue
            queue.append(PulseEvent(
                net=gate.output, start=ev.start + d, width=new_width,
                value=1 - settled[gate.output], step=ev.step))
    return at_flops


def _capture_all(ctx, settled, at_flops, policy, rng, debug=None,
                 forced=None):
    """Evaluate every flop's capture at the edge ending the strike cycle.

    ``forced`` optionally maps a flop id to a forced captured bit (used for
    capture-node strikes).  Returns (flips_e2, window_hits).
    """
    edge = ctx.period
    setup, hold = ctx.profile.ff_setup, ctx.profile.ff_hold
    flips, hits = set(), 0
    for flop in ctx.circuit.flops:
        golden_next = settled[flop.data]
        if forced and flop.id in forced:
            captured = forced[flop.id]
        else:
            events = at_flops.get(flop.data, ())
            captured = golden_next
            grazing = False
            for ev in events:
                if _covers(ev.start, ev.end, edge):
                    captured = 1 - golden_next
                    grazing = False
                    break
                if _grazes(ev.start, ev.end, edge, setup, hold):
                    grazing = True
            if grazing:
                hits += 1
                if policy.kind == "window-random" and rng.random() < policy.p:
                    captured = 1 - golden_next
        if captured != golden_next:
            flips.add(flop.id)
            if debug is not None:
                debug.append(f"capture flop={flop.id} edge={edge:.2f} "
                             f"captured={captured} golden={golden_next}")
    return frozenset(flips), hits


def _empty(strike_class):
    return SampleResult(frozenset(), frozenset(), strike_class, 0)


def _polarity_matches(polarity, value):
    return value == (1 if polarity == "pulls-low" else 0)


def disturb_gate(ctx, trace, sample, policy=INSTANT, rng=None, debug=None):
    """Inject a glitch at a gate output drain; returns the SampleResult.

    A gate strike can never alter the register file within the strike cycle,
    so flips_e1 is structurally empty here.
    """
    settled = trace.settled_map(sample.k)
    drain = sample.drain
    golden = settled[drain.net]
    if not _polarity_matches(drain.polarity, golden):
        if debug is not None:
            debug.append(f"polarity mismatch at {drain.id} "
                         f"(net={drain.net} value={golden})")
        return _empty("gate")
    seed = PulseEvent(net=drain.net, start=sample.t,
                      width=ctx.profile.glitch_width, value=1 - golden)
    at_flops = _propagate(ctx, settled, seed, debug)
    flips_e2, hits = _capture_all(ctx, settled, at_flops, policy, rng, debug)
    return SampleResult(frozenset(), flips_e2, "gate", hits)


def disturb_register(ctx, trace, sample, policy=INSTANT, rng=None,
                     debug=None):
    """Inject at a flop drain (state-node or capture-node)."""
    settled = trace.settled_map(sample.k)
    drain = sample.drain
    flop = ctx.circuit.flop_by_id[drain.cell]
    if drain.ff_node_class == "state-node":
        golden = settled[flop.output]
        if not _polarity_matches(drain.polarity, golden):
            return _empty("register")
        # The stored bit flips at t and holds until the capture edge, where
        # the flop recaptures its (possibly disturbed) data input.
        seed = PulseEvent(net=flop.output, start=sample.t,
                          width=ctx.period - sample.t, value=1 - golden,
                          step=True)
        at_flops = _propagate(ctx, settled, seed, debug)
        flips_e2, hits = _capture_all(ctx, settled, at_flops, policy, rng,
                                      debug)
        return SampleResult(frozenset([flop.id]), flips_e2, "register", hits)
    if drain.ff_node_class == "capture-node":
        incoming = settled[flop.data]
        if not _polarity_matches(drain.polarity, incoming):
            return _empty("register")
        # The value being latched is corrupted: the flop captures the
        # complement of its golden next state, which always differs.
        forced = {flop.id: 1 - incoming}
        flips_e2, hits = _capture_all(ctx, settled, {}, policy, rng, debug,
                                      forced=forced)
        return SampleResult(frozenset(), flips_e2, "register", hits)
    raise InvariantError(
        f"register strike on drain {drain.id} with ff_node_class "
        f"'{drain.ff_node_class}'")


def run_sample(circuit, profile, trace, sample, policy=INSTANT, rng=None,
               ctx=None, debug=None):
    """Run one strike end to end; returns the raw flip sets.

    Classification into outcome classes is the campaign's job.  ``ctx`` may
    carry a prebuilt SimContext to amortize setup across a campaign;
    ``debug`` may be a list collecting human-readable event lines.
    """
    if ctx is None:
        ctx = SimContext.build(circuit, profile)
    if not 0.0 <= sample.t < ctx.period:
        raise InvariantError(
            f"strike time {sample.t} outside the clock period "
            f"[0, {ctx.period})")
    if not 1 <= sample.k <= trace.cycle_count - 2:
        raise InvariantError(
            f"strike cycle {sample.k} out of range "
            f"[1, {trace.cycle_count - 2}]")
    if policy.kind == "window-random" and rng is None:
        raise ConfigError("window-random policy needs an RNG stream")
    if debug is not None:
        debug.append(f"sample drain={sample.drain.id} "
                     f"class={sample.strike_class} k={sample.k} "
                     f"t={sample.t:.2f} polarity={sample.drain.polarity}")
    if sample.drain.ff_node_class == "none":
        return disturb_gate(ctx, trace, sample, policy, rng, debug)
    return disturb_register(ctx, trace, sample, policy, rng, debug)
