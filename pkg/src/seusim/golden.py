"""Golden (fault-free) reference simulation.

Zero-delay, cycle-based, two-valued logic: within a cycle every net settles
to the boolean function of the current primary inputs and flop states; at
the clock edge every flop captures the settled value of its data net.  The
resulting Trace is the baseline every injected sample is compared against,
so it stores the settled value of every net for every cycle.

Stimulus file format (one of):

    random <cycles> <seed>

or one line per cycle of 0/1 characters, one column per primary input in
declaration order, e.g. ``01101`` for a 5-input circuit.
"""

import random
from dataclasses import dataclass
from functools import cached_property

from .errors import InvariantError, StimulusError
from .netlist import levelize


def eval_gate(kind, values):
    if kind == "AND":
        return 1 if all(values) else 0
    if kind == "NAND":
        return 0 if all(values) else 1
    if kind == "OR":
        return 1 if any(values) else 0
    if kind == "NOR":
        return 0 if any(values) else 1
    if kind == "XOR":
        return sum(values) & 1
    if kind == "XNOR":
        return 1 - (sum(values) & 1)
    if kind == "NOT":
        return 1 - values[0]
    if kind == "BUF":
        return values[0]
    raise InvariantError(f"cannot evaluate gate kind '{kind}'")


@dataclass(frozen=True)
class Stimulus:
    """Input schedule for a golden run.

    ``mode`` is "explicit" (vectors given) or "random" (vectors derived
    deterministically from ``rng_seed``).  ``initial_state`` optionally fixes
    the per-flop starting bits in circuit flop order; the default is all
    zeros.
    """

    mode: str
    cycle_count: int
    vectors: tuple = None
    rng_seed: int = None
    initial_state: tuple = None

    def __post_init__(self):
        if self.mode not in ("explicit", "random"):
            raise StimulusError(f"unknown stimulus mode '{self.mode}'")
        if self.cycle_count < 3:
            raise StimulusError(
                f"need at least 3 cycles for the two observation edges, "
                f"got {self.cycle_count}")
        if self.mode == "explicit" and self.vectors is None:
            raise StimulusError("explicit stimulus requires vectors")
        if self.mode == "random" and self.rng_seed is None:
            raise StimulusError("random stimulus requires a seed")

    @classmethod
    def explicit(cls, vectors, initial_state=None):
        vecs = tuple(tuple(int(b) for b in v) for v in vectors)
        return cls(mode="explicit", cycle_count=len(vecs), vectors=vecs,
                   initial_state=initial_state)

    @classmethod
    def random(cls, cycles, seed, initial_state=None):
        return cls(mode="random", cycle_count=int(cycles), rng_seed=int(seed),
                   initial_state=initial_state)

    def resolve_vectors(self, n_inputs):
        """Concrete per-cycle input tuples for a circuit with n_inputs PIs."""
        if self.mode == "explicit":
            for i, v in enumerate(self.vectors):
                if len(v) != n_inputs:
                    raise StimulusError(
                        f"cycle {i}: vector has {len(v)} bits, circuit has "
                        f"{n_inputs} primary inputs")
                if any(b not in (0, 1) for b in v):
                    raise StimulusError(f"cycle {i}: vector bits must be 0/1")
            return self.vectors
        rng = random.Random(self.rng_seed)
        return tuple(
            tuple(rng.getrandbits(1) for _ in range(n_inputs))
            for _ in range(self.cycle_count))


def parse_stimulus(text):
    """Parse the stimulus file format described in the module docstring."""
    lines = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append(line)
    if not lines:
        raise StimulusError("empty stimulus")
    first = lines[0].split()
    if first[0] == "random":
        if len(lines) != 1 or len(first) != 3:
            raise StimulusError("random directive must be the only line: "
                                "'random <cycles> <seed>'")
        try:
            cycles, seed = int(first[1]), int(first[2])
        except ValueError:
            raise StimulusError(
                "random directive needs integer cycles and seed") from None
        return Stimulus.random(cycles, seed)
    vectors = []
    for i, line in enumerate(lines):
        if any(ch not in "01" for ch in line):
            raise StimulusError(f"line {i + 1}: expected only 0/1 characters")
        vectors.append(tuple(int(ch) for ch in line))
    return Stimulus.explicit(vectors)


@dataclass(frozen=True)
class Trace:
    """Golden simulation result.

    ``settled[c][i]`` is the value of net ``net_ids[i]`` during cycle ``c``;
    ``flop_states[c][j]`` is the state of flop ``flop_ids[j]`` during cycle
    ``c`` (captured at the edge that started the cycle).
    """

    circuit_name: str
    pi_ids: tuple
    flop_ids: tuple
    net_ids: tuple
    pi_vectors: tuple
    flop_states: tuple
    settled: tuple

    @property
    def cycle_count(self):
        return len(self.pi_vectors)

    @cached_property
    def _net_index(self):
        return {n: i for i, n in enumerate(self.net_ids)}

    @cached_property
    def _flop_index(self):
        return {f: i for i, f in enumerate(self.flop_ids)}

    @cached_property
    def _settled_maps(self):
        return [dict(zip(self.net_ids, row)) for row in self.settled]

    def settled_map(self, cycle):
        """net -> value mapping for one cycle (shared dict; do not mutate)."""
        return self._settled_maps[cycle]

    def net_value(self, cycle, net):
        return self.settled[cycle][self._net_index[net]]

    def flop_value(self, cycle, flop_id):
        return self.flop_states[cycle][self._flop_index[flop_id]]

    def to_csv(self):
        lines = ["cycle,flop,bit"]
        for c, row in enumerate(self.flop_states):
            for fid, bit in zip(self.flop_ids, row):
                lines.append(f"{c},{fid},{bit}")
        return "\n".join(lines) + "\n"


def simulate_reference(circuit, stimulus):
    """Run the fault-free simulation and return the full Trace."""
    vectors = stimulus.resolve_vectors(len(circuit.primary_inputs))
    n_flops = len(circuit.flops)
    if stimulus.initial_state is None:
        state = tuple(0 for _ in range(n_flops))
    else:
        state = tuple(int(b) for b in stimulus.initial_state)
        if len(state) != n_flops:
            raise StimulusError(
                f"initial state has {len(state)} bits, circuit has "
                f"{n_flops} flops")

    order = levelize(circuit)
    gate_by_id = circuit.gate_by_id
    net_ids = (tuple(circuit.primary_inputs)
               + tuple(f.output for f in circuit.flops)
               + tuple(g.output for g in circuit.gates))

    states, settled_rows = [], []
    for vec in vectors:
        values = dict(zip(circuit.primary_inputs, vec))
        for f, bit in zip(circuit.flops, state):
            values[f.output] = bit
        for gid in order:
            g = gate_by_id[gid]
            values[g.output] = eval_gate(
                g.kind, [values[n] for n in g.inputs])
        states.append(state)
        settled_rows.append(tuple(values[n] for n in net_ids))
        state = tuple(values[f.data] for f in circuit.flops)

    return Trace(
        circuit_name=circuit.name,
        pi_ids=tuple(circuit.primary_inputs),
        flop_ids=tuple(f.id for f in circuit.flops),
        net_ids=net_ids,
        pi_vectors=tuple(vectors),
        flop_states=tuple(states),
        settled=tuple(settled_rows),
    )


def cycle_snapshot(trace, k):
    """(flop_state, pi_values, settled_nets) dicts for strike cycle ``k``.

    ``k`` must leave room for the observation edges: 1 <= k <= cycles - 2.
    """
    if not 1 <= k <= trace.cycle_count - 2:
        raise InvariantError(
            f"strike cycle {k} out of range [1, {trace.cycle_count - 2}] "
            f"for a {trace.cycle_count}-cycle trace")
    flop_state = dict(zip(trace.flop_ids, trace.flop_states[k]))
    pi_values = dict(zip(trace.pi_ids, trace.pi_vectors[k]))
    return flop_state, pi_values, dict(trace.settled_map(k))
