"""Scenario files: build a simulated world, its provers and a verifier, then run.

A scenario is a JSON object::

    {
      "scenario_id": "demo",
      "network": {"delta_ms": 13, "bandwidth_mbps": 290, "arity": 300,
                  "alpha": 4, "u": 2, "nu": 1, "seed": 7},
      "ledger": {"length": 1000, "model": "account", "invalid_fraction": 0.1,
                 "conflict_fraction": 0.05, "seed": 1, "block_size": 8},
      "provers": [
        {"id": "honest", "strategy": {"type": "Honest"}, "lag": 0},
        {"id": "bad", "strategy": {"type": "CorruptLeaf", "index": 17, "field": "tx"}}
      ],
      "random_corruptions": {"count": 16, "seed": 3},
      "per_game_rows": false
    }

``lag`` shortens an honest prover's view by that many entries. With
``random_corruptions`` the listed provers are joined by ``count`` provers each
holding one randomly corrupted entry. ``model`` may be ``account``, ``utxo``
or ``counter``; the counter model is what makes very long ledgers practical.
"""

from __future__ import annotations

import csv
import io
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .adversary import CorruptLeaf, Strategy, strategy_from_dict
from .errors import InvalidScenario
from .games import Outcome, Referee
from .ledger import LedgerConfig
from .prover import Prover
from .simnet import NetworkConfig, SimNet, events_to_jsonl
from .tournament import TournamentResult, run_tournament
from .world import World, counter_world, desk_world

CSV_COLUMNS = (
    "scenario_id",
    "n_provers",
    "ledger_len",
    "m",
    "games",
    "rounds",
    "bytes",
    "sim_seconds",
    "winner",
    "honest_won",
)
GAME_COLUMNS = (
    "scenario_id",
    "game",
    "challenger",
    "responder",
    "result",
    "reason",
    "pinpoint",
    "exchanges",
    "openings",
    "bytes",
    "sim_seconds",
)


def network_from_dict(spec: dict) -> NetworkConfig:
    return NetworkConfig(
        delta=spec.get("delta_ms", 13) / 1000,
        bandwidth=spec.get("bandwidth_mbps", 290) * 1e6,
        arity=spec.get("arity", 2),
        alpha=spec.get("alpha", 1),
        u=spec.get("u", 0),
        nu=spec.get("nu", 0),
        seed=spec.get("seed", 0),
    )


def world_from_dict(spec: dict, m: int) -> World:
    model = spec.get("model", "account")
    if model == "counter":
        return counter_world(spec["length"], m, spec.get("seed", 0))
    cfg = LedgerConfig(
        length=spec["length"],
        invalid_fraction=spec.get("invalid_fraction", 0.0),
        conflict_fraction=spec.get("conflict_fraction", 0.0),
        seed=spec.get("seed", 0),
        model=model,
        depth=spec.get("depth", 32),
    )
    return desk_world(cfg, m, spec.get("block_size", 4))


@dataclass
class ProverSpec:
    pid: str
    strategy: Strategy
    lag: int = 0

    @property
    def honest(self) -> bool:
        return self.strategy.name == "Honest"


@dataclass
class Simulation:
    scenario_id: str
    world: World
    net: SimNet
    referee: Referee
    provers: dict[str, Prover]
    specs: list[ProverSpec]
    per_game_rows: bool = False
    result: Optional[TournamentResult] = field(default=None)

    @property
    def honest_ids(self) -> set[str]:
        return {s.pid for s in self.specs if s.honest}

    def run(self) -> TournamentResult:
        self.result = run_tournament(self.referee, [s.pid for s in self.specs])
        return self.result

    def honest_won(self) -> bool:
        """True iff the surviving commitment is the state of some honest prover's claim."""
        assert self.result is not None
        honest_states = {self.provers[p].claim().st_commit for p in self.honest_ids}
        return self.result.st_commit in honest_states

    def metrics_row(self) -> dict[str, Any]:
        r = self.result
        assert r is not None
        return {
            "scenario_id": self.scenario_id,
            "n_provers": len(self.specs),
            "ledger_len": self.world.length - 1,
            "m": self.net.config.arity,
            "games": r.games_played,
            "rounds": r.total_rounds,
            "bytes": r.bytes,
            "sim_seconds": f"{r.seconds:.9f}",
            "winner": r.winner,
            "honest_won": int(self.honest_won()),
        }

    def game_rows(self) -> list[dict[str, Any]]:
        assert self.result is not None
        return [game_row(self.scenario_id, k, o) for k, o in enumerate(self.result.games, start=1)]

    def transcript(self) -> str:
        return events_to_jsonl(self.net.events)


def game_row(scenario_id: str, k: int, o: Outcome) -> dict[str, Any]:
    return {
        "scenario_id": scenario_id,
        "game": k,
        "challenger": o.challenger,
        "responder": o.responder,
        "result": o.result.value,
        "reason": o.reason.label,
        "pinpoint": "" if o.pinpoint is None else o.pinpoint,
        "exchanges": o.exchanges,
        "openings": o.openings,
        "bytes": o.bytes,
        "sim_seconds": f"{o.seconds:.9f}",
    }


def build_simulation(spec: dict) -> Simulation:
    try:
        config = network_from_dict(spec.get("network", {}))
        world = world_from_dict(spec["ledger"], config.arity)
        specs = [
            ProverSpec(p["id"], strategy_from_dict(p.get("strategy", {})), p.get("lag", 0))
            for p in spec.get("provers", [])
        ]
        extra = spec.get("random_corruptions")
        if extra:
            rng = random.Random(extra.get("seed", 0))
            for k in range(extra["count"]):
                index = rng.randrange(1, world.length)
                field_ = rng.choice(("tx", "state"))
                specs.append(ProverSpec(f"adv{k + 1:02d}", CorruptLeaf(index, field_, rng.randrange(1 << 30))))
            if extra.get("shuffle", True):
                rng.shuffle(specs)
    except InvalidScenario:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidScenario(f"bad scenario: {exc}") from exc
    if not specs:
        raise InvalidScenario("scenario lists no provers")
    if len({s.pid for s in specs}) != len(specs):
        raise InvalidScenario("prover ids must be unique")
    net = SimNet(config)
    provers = {}
    for s in specs:
        try:
            data = s.strategy.build(world, world.length - s.lag)
        except (IndexError, ValueError) as exc:
            raise InvalidScenario(f"prover {s.pid}: {exc}") from exc
        provers[s.pid] = Prover(s.pid, data, s.strategy)
        net.register(s.pid, provers[s.pid].handle)
    referee = Referee(net, world.genesis_commit, world.consensus, world.model, bystanders=sorted(provers))
    return Simulation(
        spec.get("scenario_id", "scenario"),
        world,
        net,
        referee,
        provers,
        specs,
        bool(spec.get("per_game_rows", False)),
    )


def load_scenario(path: str | Path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidScenario(f"cannot read scenario {path}: {exc}") from exc


def rows_to_csv(rows: list[dict[str, Any]], columns=CSV_COLUMNS) -> str:
    out = io.StringIO()
    writer = csv.DictWriter(out, fieldnames=list(columns), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return out.getvalue()
