"""Non-clairvoyant kill-and-restart and preemptive scheduling toolkit."""

__version__ = "0.1.0"
