"""Joint control and active-perception policy synthesis for labeled POMDPs.

The library builds a product of a labeled POMDP with a DFA task monitor,
evaluates trajectory likelihoods and secret/success posteriors through
action-indexed observable operators, and optimizes a finite-state softmax
policy by gradient descent on (conditional entropy of the secret) minus
alpha times (task-success probability).
"""

__version__ = "0.1.0"
