"""Succinct light-client verification of lazy-blockchain state by refereed challenge games.

Provers commit to an augmented dirty ledger (every transaction paired with the
state commitment after executing it) through a Merkle mountain range. A
verifier referees pairwise challenge games that pinpoint the first disputed
entry and check it with a consensus oracle and an execution oracle; a
tournament over all provers leaves a state commitment that an honest prover
holds.
"""

from .errors import LazyLightError
from .games import Outcome, Reason, Referee, Result
from .scenario import Simulation, build_simulation
from .tournament import TournamentResult, run_tournament

__version__ = "0.1.0"

__all__ = [
    "LazyLightError",
    "Outcome",
    "Reason",
    "Referee",
    "Result",
    "Simulation",
    "TournamentResult",
    "build_simulation",
    "run_tournament",
]
