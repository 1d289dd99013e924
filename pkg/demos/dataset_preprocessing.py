"""Dataset plumbing: manifests, masks to boxes, extent filter, resizing.

Everything a mask-annotated small-target corpus needs before detection:
object boxes extracted from binary masks, images with oversized targets
dropped, bicubic upsampling with boxes rescaled outward, and a seeded
train/val/test split.  Runs on a synthetic corpus written to a temp dir.
"""

import os
import tempfile

import numpy as np

from nfadetect import (
    DatasetRecord,
    bicubic_resize,
    cubic_kernel,
    filter_by_extent,
    load_image,
    mask_to_boxes,
    read_manifest,
    rescale_box,
    save_image_png,
    split_dataset,
    write_manifest,
)

root = tempfile.mkdtemp(prefix="nfadetect_demo_")
print(f"writing a toy corpus under {root}\n")

# ten images, each with one square target of growing size
records = []
rng = np.random.default_rng(0)
for i in range(10):
    side = 3 + i  # 9..144 pixels of extent
    img = rng.uniform(0, 4000, (96, 96))
    mask = np.zeros((96, 96))
    mask[10:10 + side, 20:20 + side] = 1
    ipath = os.path.join(root, f"im{i}.png")
    mpath = os.path.join(root, f"im{i}_mask.png")
    save_image_png(ipath, img)
    save_image_png(mpath, mask * 65535)
    records.append(DatasetRecord(f"im{i}", ipath, mpath, ""))

write_manifest(os.path.join(root, "manifest.tsv"), records)
records = read_manifest(os.path.join(root, "manifest.tsv"))

# masks -> object boxes with pixel extents
boxes = mask_to_boxes(load_image(records[4].mask_path)[:, :, 0], "im4")
print(f"im4 mask -> {boxes[0].box}, extent {boxes[0].extent} px")

# drop images whose targets exceed the small-target bound
kept, fraction = filter_by_extent(records, max_extent=90)
print(f"extent filter at 90 px: kept {len(kept)}/10, dropped {fraction:.0%}")

# upsample to 640x640 and carry the boxes along
img = load_image(kept[0].image_path)
up = bicubic_resize(img, 640, 640)
scale = 640 / 96
box = mask_to_boxes(load_image(kept[0].mask_path)[:, :, 0])[0].box
print(f"bicubic 96->640: image {img.shape[:2]} -> {up.shape[:2]}, "
      f"box {box} -> {rescale_box(box, scale, scale)}")
print(f"  kernel tap weights at phase 0.5: "
      f"{cubic_kernel(1.5):+.4f} {cubic_kernel(0.5):+.4f} "
      f"{cubic_kernel(0.5):+.4f} {cubic_kernel(1.5):+.4f} (sum 1)")

# seeded 60:20:20 split
split = split_dataset(kept, seed=7)
counts = {s: sum(r.split == s for r in split) for s in ("train", "val", "test")}
print(f"seeded split of the kept images: {counts}")
