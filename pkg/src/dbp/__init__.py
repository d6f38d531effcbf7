"""Verification of depth-bounded cryptographic protocol models.

The package decides reachability properties (secrecy, control-state
unreachability, authentication markers) by inferring or checking inductive
invariants that are downward-closed sets of configurations, represented
finitely as limits.
"""

__version__ = "0.1.0"
