"""oforge_bindings: in-process entry points for the oforge toolkit.

Exposes augment(), evaluate_om() and extract_entities() so training
pipelines can run the copy-paste augmenter and the occlusion metric
without shelling out. Versioned in lockstep with oforge.
"""
from .bridge import BoundSample, bind_augment, bind_evaluate_om, extract_entities

# canonical surface names; the bind_* spellings stay available
augment = bind_augment
evaluate_om = bind_evaluate_om

__version__ = "0.1.0"
