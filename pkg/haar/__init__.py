from haar.expansion import (
    DyadicIndex,
    HaarExpansion,
    choose_j_star,
    coefficient_bounds_check,
    gram_matrix,
    haar_eval,
    haar_expand,
    haar_reconstruct,
    interval_index,
    j_star_required,
    parseval_check,
    residual_check,
    tree_indices,
)

__all__ = [
    "DyadicIndex",
    "HaarExpansion",
    "choose_j_star",
    "coefficient_bounds_check",
    "gram_matrix",
    "haar_eval",
    "haar_expand",
    "haar_reconstruct",
    "interval_index",
    "j_star_required",
    "parseval_check",
    "residual_check",
    "tree_indices",
]
