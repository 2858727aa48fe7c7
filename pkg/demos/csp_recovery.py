"""CSP finds the planted source.

With no subject jitter, the leading CSP filter of one subject points along
the mixing column of the discriminative source. Shrinking rho lowers the
objective J and loosens the alignment. The Tikhonov term adds alpha to the
denominator, which favors directions with large meditation-class power;
here those are the planted direction, so regularization tightens the
alignment while it lowers J.
"""
import numpy as np

from medstate import SynthParams, class_covariance, fit_csp, generate_subject, slice_epochs
from medstate.synth import base_mixing


def alignment(noise, rho, alpha=0.0, seed=3):
    params = SynthParams(n_subjects=2, minutes_per_condition=2.0, subject_jitter=0.0,
                         noise_power=noise, class_variance_ratio=rho)
    med, rest = generate_subject(params, seed)
    cov1 = class_covariance(slice_epochs(med, 256).data)
    cov0 = class_covariance(slice_epochs(rest, 256).data)
    bank = fit_csp(cov1, cov0, alpha, 1)
    a = base_mixing(params)[:, 0]
    return abs(a @ bank.filters[:, 0]), bank.objective_values[0]


if __name__ == "__main__":
    print(f"{'noise':>6}{'rho':>5}{'alpha':>8}{'|cos|':>8}{'J':>8}")
    for noise in (0.05, 0.5, 2.0):
        for rho in (6.0, 2.0):
            for alpha in (0.0, 0.1):
                cos, J = alignment(noise, rho, alpha)
                print(f"{noise:6.2f}{rho:5.1f}{alpha:8.2g}{cos:8.3f}{J:8.2f}")
