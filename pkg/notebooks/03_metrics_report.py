# %% [markdown]
# # Metrics and the robustness table
#
# Task metrics on toy inputs, then the relative performance drop for a model
# whose per-corruption accuracies are known.

# %%
import numpy as np

from eocorrupt import (OrientedBox, OrientedBoxes, accuracy, miou, polygon_iou, r_tp, render_report)
from eocorrupt.metrics import Detection, mean_ap

print("accuracy", accuracy({"a": "x", "b": "y"}, {"a": "x", "b": "x"}))
pred = {"t": np.array([[0, 1], [1, 1]])}
gt = {"t": np.array([[0, 0], [1, 1]])}
print("mIoU", round(miou(pred, gt, num_classes=2), 2))

# %%
square = [(0, 0), (2, 0), (2, 2), (0, 2)]
diamond = [(1, -1), (3, 1), (1, 3), (-1, 1)]
print("polygon IoU", round(polygon_iou(square, diamond), 4))

gts = {"img": OrientedBoxes([OrientedBox(square, "ship")])}
dets = [Detection("img", OrientedBox(square, "ship"), "ship", 0.9),
        Detection("img", OrientedBox(diamond, "ship"), "ship", 0.5)]
print("mAP@0.5", mean_ap(dets, gts))

# %% [markdown]
# A model that scores 90 on clean data and loses a little on each corruption.

# %%
scores = {"gaussian_noise": 85, "salt_pepper": 82, "gaussian_blur": 80, "motion_blur": 83,
          "brightness_contrast": 75, "cloud": 60, "haze": 70, "data_gaps": 84,
          "compression_artifacts": 86, "rotate": 55, "scale": 65, "translate": 88}
report = r_tp(90.0, scores, model="toy")
print(render_report([report], format="markdown"))
