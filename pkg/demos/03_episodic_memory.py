"""The episodic memory: max-update writes, LRU eviction, kNN reads, argmax.

Run:  python3 demos/03_episodic_memory.py
"""

import tempfile
from pathlib import Path

import numpy as np

from poem import Action, Embedding, EpisodicMemory, StateRecord, action_key

A_FWD = Action((1, 2))
A_REV = Action((2, 1))


def rec(text, x, y):
    return StateRecord.from_text(text, Embedding(np.array([x, y])))


mem = EpisodicMemory(capacity=3, m=2)

# Writes keep the best reward seen per (state, action): a worse revisit
# cannot overwrite a good one.
alpha = rec("alpha", 1.0, 0.0)
mem.write(alpha, A_FWD, 0.5)
mem.write(alpha, A_FWD, 0.3)
mem.write(alpha, A_FWD, 0.9)
print("stored after 0.5 / 0.3 / 0.9:", mem.read(alpha, A_FWD, k=1))

# Exact hits return the stored value; novel states get a similarity-weighted
# average over the k nearest stored states that have tried the action.
near = rec("near alpha", 0.8, 0.6)      # cosine 0.8 to the probe below
far = rec("far", 0.2, np.sqrt(0.96))    # cosine 0.2
mem.write(near, A_FWD, 1.0)
mem.write(far, A_FWD, 0.0)
probe = rec("probe", 1.0, 0.0)
print("kNN estimate for a novel state:", mem.read(probe, A_FWD, k=2))
print("(weights 0.8/0.2 over rewards 1.0/0.0 -> 0.8)")

# best_action scans all m! actions through the same reading path.
mem.write(near, A_REV, 0.1)
mem.write(far, A_REV, 2.0)
chosen = mem.best_action(probe, k=2)
print("argmax action for the probe:", action_key(chosen))

# Capacity is bounded: inserting a fourth state evicts the least recently
# used one (reads that consult a state count as use).
print("\nstates before insert:", [r.source_text for r, _ in mem.entries()])
mem.write(rec("newcomer", 0.0, 1.0), A_FWD, 0.7)
print("states after insert: ", [r.source_text for r, _ in mem.entries()])

# Snapshots are versioned JSON and round-trip bit-exactly.
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "memory.json"
    mem.snapshot(path)
    restored = EpisodicMemory.restore(path)
    print("\nsnapshot round-trip states:", len(restored), "of", len(mem))
    print("restored estimate:", restored.read(probe, A_FWD, k=2))
