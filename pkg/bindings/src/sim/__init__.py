"""Environment bindings: a gym-like batched simulator over the session
service's wire protocol. The bindings hold no game logic; every step is a
`batch_step` request, and trajectory digests match native runs exactly."""

from .build import build_simulator, shutdown_all_services

__all__ = ["build_simulator", "shutdown_all_services"]
