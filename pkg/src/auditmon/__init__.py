"""Runtime monitoring with auditable evidence for simulated distributed systems.

The package wires five layers together:

* ``speclang`` — attestation-Datalog parsing, safety, stratification
* ``engine`` — stratified semi-naive evaluation over a revisioned fact store
* ``cryptoid`` / ``merklelog`` — signed events and a tamper-evident common log
* ``monitor`` / ``partition`` — per-component monitors and rule partitioning
* ``sim`` / ``audit`` / ``cli`` — deterministic scenario runs, offline replay
"""

__version__ = "0.1.0"
