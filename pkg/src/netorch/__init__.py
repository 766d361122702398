"""LLM-orchestrated wireless resource allocation: planning, model selection,
tool execution and the numerical solvers behind them."""

__version__ = "0.1.0"
