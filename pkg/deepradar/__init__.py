# Deep stochastic radar sensor models
__version__ = "1.0.0"
