"""Explainable tabletop planner.

Plans with a sorted action theory, repairs the theory from execution
failures by decision-tree induction, and answers why-questions about its
plans and beliefs through proof traces.
"""

__version__ = "0.1.0"
