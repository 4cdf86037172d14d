"""dyndisc: discovery of ODE governing functions via linear multistep methods."""

__version__ = "0.1.0"
