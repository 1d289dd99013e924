"""Detectability is a closed-form affair: NFA = eta * erfc(a / sqrt(2)).

A point target of amplitude a (in background-sigma units) raises its
pixel's Mahalanobis distance to exactly a under the true model, so its
NFA is known before running anything.  Detected at eps means
NFA <= eps.  Below, the prediction is checked against the pipeline, then
the same targets are buried in actual noise with an estimated background.
"""

import numpy as np

from nfadetect import DetectConfig, detect, erfc, gen_noise_image, \
    inject_target, make_model

H = W = 256
ETA = H * W
model = make_model([0.0], [[1.0]], eta_test=ETA)

print("clean background, true model, eps = 1")
print(f"{'amplitude':>10} {'predicted NFA':>16} {'detected':>9}")
for amplitude in [2.0, 3.0, 4.0, 4.5, 5.0, 6.0]:
    img, _ = inject_target(np.zeros((H, W)), (128, 128), amplitude, sigma=1.0)
    predicted = ETA * erfc(amplitude / np.sqrt(2.0))
    dets = detect(img, DetectConfig(model=model))
    hit = any(d.peak == (128, 128) for d in dets)
    print(f"{amplitude:>10.1f} {predicted:>16.4f} {'yes' if hit else 'no':>9}")

print("""
The 4.5-sigma boundary is exactly where eta * erfc(a/sqrt2) crosses 1
for eta = 65536: the threshold adapts to the number of tests, there is
no hand-tuned constant anywhere.
""")

print("same targets on real noise, background estimated from the image")
rng_seeds = range(20)
for amplitude in [4.0, 5.0, 7.0, 9.0]:
    hits = 0
    for seed in rng_seeds:
        img = gen_noise_image(H, W, 1, 500.0, np.array([[25.0]]), seed=seed)
        img, gt = inject_target(img, (60, 180), amplitude, radius=2,
                                profile="gaussian_blob", sigma=5.0)
        dets = detect(img, DetectConfig())
        x0, y0, x1, y1 = gt.box
        hits += any(x0 <= d.peak[1] <= x1 and y0 <= d.peak[0] <= y1
                    for d in dets)
    print(f"  amplitude {amplitude:>4.1f} sigma blob: "
          f"detected in {hits:2d}/{len(rng_seeds)} noisy images at eps=1")

print("""
Noise both helps and hurts a peak sitting near the threshold, which is
why blobs near the 4.5-sigma boundary are hit-or-miss while 7-sigma and
up are near-certain; the closed form above tells you in advance which
regime you are in.
""")
