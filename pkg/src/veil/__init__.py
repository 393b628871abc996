"""veil: user-centered adversarial stylometry toolkit.

Train substitute text classifiers, rank token importance by omission
scores, propose and rank lexical substitutions, run targeted obfuscation
or untargeted augmentation, and evaluate obfuscation strength and
transferability — locally, without your text leaving the machine.
"""

__version__ = "0.1.0"
