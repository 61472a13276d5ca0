"""Synthetic datasets with known signal structure.

``make_signal_dataset`` plants informative features (and exact duplicates of
them) among pure noise so feature-selection output can be checked against
ground truth.  ``make_flow_tables`` produces a small UNSW-NB15-shaped pair of
train/test tables (numeric + categorical columns, ``attack_cat`` and binary
``label``) for exercising the full preprocessing chain and the CLI.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tabular import CATEGORICAL, LABEL, NUMERIC, EncodedMatrix, Schema, Table


@dataclass(frozen=True)
class SignalDataset:
    train: EncodedMatrix
    val: EncodedMatrix
    test: EncodedMatrix
    informative: tuple
    duplicates: tuple
    noise: tuple

    @property
    def signal_groups(self) -> list[set]:
        """One {informative, duplicate} pair per planted signal."""
        return [{a, b} for a, b in zip(self.informative, self.duplicates)]


def make_signal_dataset(n_rows=5000, n_informative=5, n_noise=10, n_classes=3, seed=0,
                        fractions=(0.6, 0.2, 0.2)) -> SignalDataset:
    """Label = tertile of the sum of the informative features.

    Columns are interleaved in a seeded random order and named ``inf{i}``,
    ``dup{i}`` (exact copy of ``inf{i}``) and ``noise{j}``.  Values already lie
    in [0, 1].
    """
    rng = np.random.default_rng(seed)
    inf = rng.uniform(size=(n_rows, n_informative))
    noise = rng.uniform(size=(n_rows, n_noise))
    s = inf.sum(axis=1)
    edges = np.quantile(s, np.arange(1, n_classes) / n_classes)
    y = np.searchsorted(edges, s, side="right")

    inf_names = [f"inf{i}" for i in range(n_informative)]
    dup_names = [f"dup{i}" for i in range(n_informative)]
    noise_names = [f"noise{j}" for j in range(n_noise)]
    names = inf_names + dup_names + noise_names
    cols = np.hstack([inf, inf, noise])
    order = rng.permutation(len(names))
    names = [names[i] for i in order]
    cols = cols[:, order]

    rows = rng.permutation(n_rows)
    cut1 = int(round(fractions[0] * n_rows))
    cut2 = cut1 + int(round(fractions[1] * n_rows))
    classes = tuple(f"c{c}" for c in range(n_classes))
    gmap = {n: [i] for i, n in enumerate(names)}

    def part(idx):
        return EncodedMatrix(tuple(names), cols[idx], y[idx], gmap, classes)

    return SignalDataset(part(rows[:cut1]), part(rows[cut1:cut2]), part(rows[cut2:]),
                         tuple(inf_names), tuple(dup_names), tuple(noise_names))


FLOW_CLASSES = ("Normal", "Generic", "Exploits", "Fuzzers", "DoS", "Reconnaissance", "Worms")
FLOW_NUMERIC = ("dur", "sbytes", "dbytes", "sttl", "dttl", "rate", "smean", "ct_state_ttl",
                "ct_srv_src", "noise_a", "noise_b", "noise_c")
FLOW_CATEGORICAL = ("proto", "service", "state")


def flow_schema() -> Schema:
    pairs = [("dur", NUMERIC), ("proto", CATEGORICAL), ("service", CATEGORICAL),
             ("state", CATEGORICAL)]
    pairs += [(n, NUMERIC) for n in FLOW_NUMERIC if n != "dur"]
    pairs += [("attack_cat", LABEL), ("label", NUMERIC)]
    return Schema.from_pairs(pairs, FLOW_CLASSES, ignored=("id",))


def _flow_table(n, rng, weights, n_missing):
    y = rng.choice(len(FLOW_CLASSES), size=n, p=weights)
    centre = np.linspace(0.0, 1.0, len(FLOW_CLASSES))[y]
    num = np.empty((n, len(FLOW_NUMERIC)))
    for j, name in enumerate(FLOW_NUMERIC):
        if name.startswith("noise"):
            num[:, j] = rng.exponential(1.0, n)
        else:
            strength = 0.15 + 0.1 * (j % 3)
            num[:, j] = np.round(100 * np.abs(centre + rng.normal(0, strength, n)), 3)
    num[:, FLOW_NUMERIC.index("sttl")] = np.round(num[:, FLOW_NUMERIC.index("sttl")])
    protos = np.array(["tcp", "udp", "arp", "ospf"])
    services = np.array(["-", "http", "dns", "ftp", "smtp"])
    states = np.array(["FIN", "INT", "CON", "REQ"])
    cat = np.empty((n, 3), dtype=object)
    cat[:, 0] = protos[(y + rng.integers(0, 2, n)) % len(protos)]
    cat[:, 1] = services[rng.integers(0, len(services), n)]
    cat[:, 2] = states[(y // 2 + rng.integers(0, 2, n)) % len(states)]
    binary = (y != 0).astype(np.float64)
    miss = rng.choice(n, size=n_missing, replace=False)
    for r in miss:
        num[r, rng.integers(0, num.shape[1])] = np.nan
    schema = flow_schema()
    order = [schema.numeric_names.index(n) for n in FLOW_NUMERIC]
    numeric = np.empty((n, len(schema.numeric_names)))
    numeric[:, order] = num
    numeric[:, schema.numeric_names.index("label")] = binary
    return Table(schema, numeric, cat, y)


def make_flow_tables(n_train=1200, n_test=800, seed=0, n_missing=(3, 2)) -> tuple[Table, Table]:
    """Train/test tables shaped like the UNSW-NB15 files.

    ``Worms`` is a rare class to exercise minority removal; ``n_missing`` rows
    of each table carry a blank numeric cell.
    """
    rng = np.random.default_rng(seed)
    w_train = np.array([0.30, 0.22, 0.18, 0.12, 0.08, 0.08, 0.02])
    w_test = np.array([0.42, 0.20, 0.14, 0.09, 0.06, 0.07, 0.02])
    return (_flow_table(n_train, rng, w_train, n_missing[0]),
            _flow_table(n_test, rng, w_test, n_missing[1]))
