"""qcslab: a simulation and analysis laboratory for quantum computational
sensing protocols and their conventional-sensing baselines."""

__version__ = "0.1.0"
