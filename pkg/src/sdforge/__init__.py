"""sdforge: indexed SDF corpus integration, 2D descriptors, and
lipophilicity regression with diagnostics and exact Shapley explanations."""

__version__ = "0.1.0"
