"""Coordinated anti-spam opt-out campaigns over a DHT, plus a deterministic simulator.

Clients that receive the same spam rendezvous through hashed DHT keys,
agree on a start time, verify one another with hashcash challenges, and
then collectively send opt-out traffic to the advertised website. The
package provides the protocol pieces (crypto, DHT, URL evaluation,
coordination, trust) and a seeded minute-stepped simulation for studying
honest behavior, economics, and the classic attacks against the scheme.
"""

from optoutswarm.scenario import InvalidScenario, Scenario, load_file
from optoutswarm.simulation import MetricsReport, Simulation, convergence, run

__version__ = "0.1.0"

__all__ = [
    "InvalidScenario",
    "MetricsReport",
    "Scenario",
    "Simulation",
    "convergence",
    "load_file",
    "run",
    "__version__",
]
