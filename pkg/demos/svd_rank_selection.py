"""Validation accuracy across the SVD rank grid.

The class difference lives in five directions of the 384-wide design
matrix. Small k keeps those directions and drops most of the noise; large k
hands the network hundreds of noise coordinates, and accuracy falls toward
chance. select_k picks the peak and breaks ties toward the smaller rank.
"""
from medstate import SynthParams, carve_validation, generate_cohort
from medstate.pipelines import select_k_for_fold

if __name__ == "__main__":
    params = SynthParams(n_subjects=3, minutes_per_condition=3.0, planting="lowrank", n_sources=5,
                         n_discriminative=5, class_variance_ratio=6.0, noise_power=0.1)
    cohort = generate_cohort(params)
    pooled = cohort.subjects[0].epochs(128)
    for s in cohort.subjects[1:]:
        pooled = pooled + s.epochs(128)
    train, val = carve_validation(pooled, 0.2, seed=0)
    k, scores = select_k_for_fold(train, val)
    for kk, acc in sorted(scores.items()):
        bar = "#" * int(round(40 * acc))
        print(f"k={kk:4d}  {100 * acc:5.1f}%  {bar}")
    print(f"selected k = {k}")
