"""Inference-pattern poisoning attacks: symmetry, inversion and composition."""

from .decoys import (
    DecoyChoice,
    Unattackable,
    decoy_candidates,
    decoy_triple,
    select_adversarial_entity_com,
    select_decoy_cos,
    select_decoy_rank,
    select_decoy_truth,
)
from .generate import (
    AdversarialEdit,
    AttackConfig,
    AttackResult,
    entity_centroids,
    generate_attack,
    generate_random_baseline,
    read_decoys,
    read_edits,
    write_decoys,
    write_edits,
)
from .kmeans import CLUSTER_PRESETS, ELBOW_GRID, elbow_scan, kmeans
from .logic import ground_score, implies, soft_truth_atom, t_and, t_not, t_or
from .relations import composition_distances, find_composition_pair, find_inverse_relation, inverse_criterion

__all__ = [
    "AdversarialEdit", "AttackConfig", "AttackResult", "CLUSTER_PRESETS", "DecoyChoice",
    "ELBOW_GRID", "Unattackable", "composition_distances", "decoy_candidates", "decoy_triple", "elbow_scan",
    "entity_centroids", "find_composition_pair", "find_inverse_relation", "generate_attack",
    "generate_random_baseline", "ground_score", "implies", "inverse_criterion", "kmeans", "read_decoys", "read_edits",
    "select_adversarial_entity_com", "select_decoy_cos", "select_decoy_rank", "select_decoy_truth",
    "soft_truth_atom", "t_and", "t_not", "t_or", "write_decoys", "write_edits",
]
