"""The core guarantee: thresholding NFA <= eps bounds false alarms by eps.

Draw pure-noise images, compute the per-pixel NFA map, and count how
many pixels fall below each threshold.  The expected count per image is
eps -- whatever the image size, because the number of tests eta is part
of the statistic.  Both the known-model and the estimated-model variants
are shown.
"""

import math

import numpy as np

from nfadetect import estimate_background, gen_noise_image, make_model, \
    nfa_gaussian_map

TRIALS = 60
EPSILONS = [0.1, 1.0, 10.0]


def false_alarm_table(size, known_model):
    eta = size * size
    truth = make_model([0.0], [[1.0]], eta_test=eta)
    counts = {eps: [] for eps in EPSILONS}
    for t in range(TRIALS):
        img = gen_noise_image(size, size, 1, 0.0, np.eye(1), seed=9000 + t)
        model = truth if known_model else estimate_background(img)
        nfa = nfa_gaussian_map(img, model, eta_test=eta)
        for eps in EPSILONS:
            counts[eps].append(np.sum(nfa.log10_values <= math.log10(eps)))
    return {eps: (np.mean(v), np.std(v, ddof=1) / math.sqrt(TRIALS))
            for eps, v in counts.items()}


print(f"{TRIALS} noise images per row; mean false alarms per image vs eps\n")
print(f"{'size':>6} {'model':>10} | " +
      " | ".join(f"eps={eps:<4g}" for eps in EPSILONS))
for size in (128, 256):
    for known in (True, False):
        table = false_alarm_table(size, known)
        cells = " | ".join(f"{m:6.3f}+-{3 * se:4.2f}" for m, se in table.values())
        print(f"{size:>6} {'known' if known else 'estimated':>10} | {cells}")

print("""
Every mean sits inside its 3-standard-error band around eps, and the
128x128 and 256x256 rows agree: growing the image does not grow the
number of false alarms, unlike a fixed per-pixel probability threshold
(for which the count would quadruple here).
""")
