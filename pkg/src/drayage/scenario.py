"""Enumeration, sampling, and weighting of exogenous realizations.

Stagewise independence holds throughout: the same per-period marginals apply
at every period, and scenario probabilities are products of the per-component
marginals. Sampling uses numpy's Philox generator, a seedable counter-based
64-bit generator with a documented algorithm, so sample sets reproduce across
platforms and runs.
"""

import itertools
import json
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .model import ExogenousRealization, Instance, Lane, Scenario

SUPPORT_CAP = 10**6


class SupportTooLarge(Exception):
    pass


def _components(instance: Instance) -> List[Tuple[str, object, List, List[float]]]:
    """Ordered component list: (kind, key, values, probabilities)."""
    comps = []
    u = instance.uncertainty
    for i in instance.network.entries:
        vals = sorted(u.inflow_dist[i])
        comps.append(("q", i, vals, [u.inflow_dist[i][v] for v in vals]))
    for j in instance.network.exits:
        vals = sorted(u.outflow_dist[j])
        comps.append(("d", j, vals, [u.outflow_dist[j][v] for v in vals]))
    for s in instance.spot_sources:
        for lane in s.lanes:
            dist = u.lane_rate_dist(s.id, lane)
            vals = sorted(dist)
            comps.append(("w", (s.id, lane), vals, [dist[v] for v in vals]))
    return comps


def _assemble(instance: Instance, comps, values, probability) -> ExogenousRealization:
    inflow: Dict[int, int] = {}
    outflow: Dict[int, int] = {}
    rates: Dict[int, Dict[Lane, float]] = {}
    for (kind, key, _, _), v in zip(comps, values):
        if kind == "q":
            inflow[key] = v
        elif kind == "d":
            outflow[key] = v
        else:
            sid, lane = key
            rates.setdefault(sid, {})[lane] = v
    return ExogenousRealization(inflow, outflow, rates, probability)


def enumerate_support(
    instance: Instance, cap: int = SUPPORT_CAP
) -> List[Tuple[ExogenousRealization, float]]:
    """Full per-period support as (realization, probability) pairs.

    Probabilities are products of the component marginals and sum to 1.
    Raises SupportTooLarge when the product of support sizes exceeds cap.
    """
    comps = _components(instance)
    size = 1
    for _, _, vals, _ in comps:
        size *= len(vals)
    if size > cap:
        raise SupportTooLarge(f"support size {size} exceeds cap {cap}")
    out = []
    for combo in itertools.product(*[list(zip(c[2], c[3])) for c in comps]):
        values = [v for v, _ in combo]
        p = 1.0
        for _, q in combo:
            p *= q
        out.append((_assemble(instance, comps, values, p), p))
    return out


def realization_probability(z: ExogenousRealization, instance: Instance) -> float:
    """Product of component marginals; zero for out-of-support values."""
    p = 1.0
    u = instance.uncertainty
    for i in instance.network.entries:
        p *= u.inflow_dist[i].get(z.inflow[i], 0.0)
    for j in instance.network.exits:
        p *= u.outflow_dist[j].get(z.outflow[j], 0.0)
    for s in instance.spot_sources:
        for lane in s.lanes:
            p *= u.lane_rate_dist(s.id, lane).get(z.spot_rates[s.id][lane], 0.0)
    return p


def realization_key(z: ExogenousRealization, instance: Instance) -> Tuple:
    """Hashable identity of a realization (for deduplication and caching)."""
    return (
        tuple(z.inflow[i] for i in instance.network.entries),
        tuple(z.outflow[j] for j in instance.network.exits),
        tuple(
            z.spot_rates[s.id][lane] for s in instance.spot_sources for lane in s.lanes
        ),
    )


def scenario_probability(scenario: Scenario, instance: Instance) -> float:
    """Product over periods of the per-period realization probabilities."""
    p = 1.0
    for z in scenario.realizations:
        p *= realization_probability(z, instance)
    return p


def _draw_columns(instance: Instance, count: int, rng: np.random.Generator):
    """Draw count values for every component; returns comps and value columns."""
    comps = _components(instance)
    cols = []
    for _, _, vals, probs in comps:
        idx = rng.choice(len(vals), size=count, p=np.asarray(probs) / sum(probs))
        cols.append([vals[k] for k in idx])
    return comps, cols


def sample_scenarios(instance: Instance, count: int, seed: int) -> List[Scenario]:
    """count i.i.d. scenarios of length horizon; deterministic given seed."""
    rng = np.random.Generator(np.random.Philox(seed))
    tau = instance.horizon
    per_period = []
    for _ in range(tau):
        comps, cols = _draw_columns(instance, count, rng)
        zs = []
        for n in range(count):
            values = [col[n] for col in cols]
            z = _assemble(instance, comps, values, 0.0)
            zs.append(
                ExogenousRealization(
                    z.inflow, z.outflow, z.spot_rates, realization_probability(z, instance)
                )
            )
        per_period.append(zs)
    out = []
    for n in range(count):
        reals = tuple(per_period[t][n] for t in range(tau))
        p = 1.0
        for z in reals:
            p *= z.probability
        out.append(Scenario(reals, p))
    return out


@dataclass(frozen=True)
class SampleSet:
    """Per-period draws with normalized weights (SAA input).

    mode "iid": N draws per period from the exogenous marginals, each
    carrying empirical weight 1/N. Duplicates keep separate entries, so a
    value drawn k times contributes k/N of the Bellman sum and the weighted
    operator is the standard sample-average estimate of the expectation.
    (Re-weighting draws by their model probability and normalizing looks
    harmless but squares the density: the folded weight of value z tends to
    p(z)^2 / sum p^2, a biased operator that never converges to the exact
    one. Weights here are the empirical measure precisely so that N -> inf
    recovers the enumerate mode answer.)
    mode "enumerate": the full support with exact probabilities as weights,
    which turns the approximate Bellman operator into the exact one.
    """

    realizations: Tuple[Tuple[ExogenousRealization, ...], ...]  # [period][sample]
    weights: Tuple[Tuple[float, ...], ...]
    seed: int
    mode: str

    @property
    def periods(self) -> int:
        return len(self.realizations)


def build_sample_set(
    instance: Instance, per_period_count: int, seed: int, mode: str = "iid"
) -> SampleSet:
    if mode not in ("iid", "enumerate"):
        raise ValueError(f"unknown sample mode {mode!r}, expected 'iid' or 'enumerate'")
    if mode == "enumerate":
        support = enumerate_support(instance)
        reals = tuple(z for z, _ in support)
        probs = tuple(p for _, p in support)
        return SampleSet(
            realizations=tuple([reals] * instance.horizon),
            weights=tuple([probs] * instance.horizon),
            seed=seed,
            mode=mode,
        )
    if per_period_count < 1:
        raise ValueError("need at least one sample per period")
    rng = np.random.Generator(np.random.Philox(seed))
    reals_all = []
    weights_all = []
    for _ in range(instance.horizon):
        comps, cols = _draw_columns(instance, per_period_count, rng)
        zs = []
        for n in range(per_period_count):
            values = [col[n] for col in cols]
            z = _assemble(instance, comps, values, 0.0)
            zs.append(
                ExogenousRealization(
                    z.inflow, z.outflow, z.spot_rates, realization_probability(z, instance)
                )
            )
        reals_all.append(tuple(zs))
        weights_all.append(tuple([1.0 / per_period_count] * per_period_count))
    return SampleSet(tuple(reals_all), tuple(weights_all), seed, mode)


# ---------------------------------------------------------------------------
# scenarios.json


def _realization_to_dict(z: ExogenousRealization) -> Dict:
    return {
        "inflow": {str(k): v for k, v in z.inflow.items()},
        "outflow": {str(k): v for k, v in z.outflow.items()},
        "spot_rates": {
            str(sid): {f"{i}-{j}": r for (i, j), r in lanes.items()}
            for sid, lanes in z.spot_rates.items()
        },
        "probability": z.probability,
    }


def _realization_from_dict(d: Dict) -> ExogenousRealization:
    rates = {}
    for sid, lanes in d["spot_rates"].items():
        parsed = {}
        for key, r in lanes.items():
            a, b = key.split("-")
            parsed[(int(a), int(b))] = float(r)
        rates[int(sid)] = parsed
    return ExogenousRealization(
        inflow={int(k): int(v) for k, v in d["inflow"].items()},
        outflow={int(k): int(v) for k, v in d["outflow"].items()},
        spot_rates=rates,
        probability=float(d.get("probability", 1.0)),
    )


def save_scenarios(scenarios: Sequence[Scenario], path: str, seed: int = 0) -> None:
    doc = {
        "seed": seed,
        "count": len(scenarios),
        "scenarios": [
            {
                "probability": s.probability,
                "realizations": [_realization_to_dict(z) for z in s.realizations],
            }
            for s in scenarios
        ],
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def load_scenarios(path: str) -> List[Scenario]:
    with open(path) as f:
        doc = json.load(f)
    out = []
    for rec in doc["scenarios"]:
        reals = tuple(_realization_from_dict(r) for r in rec["realizations"])
        out.append(Scenario(reals, float(rec.get("probability", 1.0))))
    return out
