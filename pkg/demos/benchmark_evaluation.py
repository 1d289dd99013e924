"""Object-level scoring end to end: detections vs ground truth boxes.

A detection is a true positive when its box overlaps a ground-truth box
with IoU >= 5% (tiny targets make stricter thresholds meaningless);
matching is greedy in score order and one-to-one.  F1 scores a single
operating point, AP integrates precision over the score sweep.

The operating point interacts with target strength in a way the NFA
makes explicit: eps buys recall at a known, bounded false-alarm price.
"""

import time

from nfadetect import DetectConfig, detect, evaluate_detections, gen_dataset

N_IMAGES = 100


def run_benchmark(amplitude, epsilon):
    scenes = gen_dataset(N_IMAGES, h=256, w=256, mean=1000.0, sigma=100.0,
                         targets_per_image=1, amplitude=amplitude, radius=2,
                         profile="gaussian_blob", seed=20240901)
    cfg = DetectConfig(epsilon=epsilon)
    dets, gts = [], []
    for scene in scenes:
        image_id = scene.gts[0].image_id
        for d in detect(scene.image, cfg):
            dets.append((image_id, d.box, d.score))
        gts.extend(scene.gts)
    return evaluate_detections(dets, gts, iou_min=0.05)


print(f"{N_IMAGES} images, one gaussian blob (radius 2) per image\n")
print(f"{'amplitude':>9} {'eps':>6} | {'TP':>4} {'FP':>4} {'FN':>4} | "
      f"{'P':>6} {'R':>6} {'F1':>6} {'AP':>6}")
start = time.perf_counter()
for amplitude, epsilon in [(4.0, 1.0), (6.0, 1.0), (9.0, 1.0), (9.0, 0.05)]:
    r = run_benchmark(amplitude, epsilon)
    print(f"{amplitude:>9.1f} {epsilon:>6.2f} | {r.tp:>4} {r.fp:>4} {r.fn:>4} | "
          f"{r.precision:>6.3f} {r.recall:>6.3f} {r.f1:>6.3f} {r.ap:>6.3f}")
print(f"\n({time.perf_counter() - start:.0f}s total)")

print("""
Reading the table:
 * 4-sigma blobs sit below the eps=1 threshold (a clean 4-sigma pixel
   has NFA = 4.15 > 1), so recall is poor no matter what -- and at eps=1
   the guarantee itself concedes about one false component per image,
   which caps precision near 1/2.  Low F1 here is the statistic being
   honest, not the pipeline being broken.
 * strong targets + a tight eps give both high recall and high
   precision: at 9 sigma and eps=0.05 the false-alarm budget is 0.05
   per image and every target is found.
""")

best = run_benchmark(9.0, 0.05)
print("PR sweep at the strong operating point (first samples):")
for recall, precision in best.pr_samples[:8]:
    print(f"  recall {recall:5.3f}  precision {precision:5.3f}")
