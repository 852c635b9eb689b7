# Copyright (c) 2026, The chartground Authors
# SPDX-License-Identifier: Apache-2.0
#
# Seed example: two subplots with shared styling that also writes element locations.
import json

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def get_bbox_pixels_flipped(artist, renderer, img_height):
    bbox = artist.get_window_extent(renderer)
    width = renderer.width
    # renderer origin is bottom-left; image origin is top-left
    x0, x1 = max(0.0, bbox.x0), min(float(width), bbox.x1)
    y0, y1 = max(0.0, img_height - bbox.y1), min(float(img_height), img_height - bbox.y0)
    return [x0, y0, x1, y1]


def labeled(artist, renderer, img_height):
    box = get_bbox_pixels_flipped(artist, renderer, img_height)
    if box[0] >= box[2] or box[1] >= box[3]:
        return None  # clipped away entirely
    return {"text": artist.get_text(), "bbox": box}


def boxes(artists, renderer, img_height):
    found = (labeled(a, renderer, img_height) for a in artists if a.get_visible() and a.get_text())
    return [b for b in found if b is not None]


def save_locations(fig, path):
    fig.canvas.draw()
    renderer = fig.canvas.get_renderer()
    width, height = fig.canvas.get_width_height()
    subplots = []
    for index, ax in enumerate(fig.axes):
        x_name = ax.xaxis.label.get_text() or "x-axis"
        y_name = ax.yaxis.label.get_text() or "y-axis"
        title = ax.title if ax.title.get_text() else None
        legend = ax.get_legend()
        subplots.append({
            "subplot_index": index,
            "title": labeled(title, renderer, height) if title else None,
            "x_axis_names": boxes([ax.xaxis.label], renderer, height),
            "y_axis_names": boxes([ax.yaxis.label], renderer, height),
            "x_axis_ticks": {x_name: boxes(ax.get_xticklabels(), renderer, height)},
            "y_axis_ticks": {y_name: boxes(ax.get_yticklabels(), renderer, height)},
            "legend_items": boxes(legend.get_texts(), renderer, height) if legend else [],
            "other": {},
        })
    with open(path, "w") as f:
        json.dump({"image_id": "chart", "image_width": width, "image_height": height,
                   "subplots": subplots}, f, indent=2)


fig, (left, right) = plt.subplots(1, 2, figsize=(9.6, 4.8), dpi=100)
labels = ["A", "B", "C"]
left.bar(labels, [5, 7, 3], color="#55a868")
left.set_title("Counts")
left.set_xlabel("Group")
right.plot([0, 1, 2, 3], [0.2, 0.5, 0.4, 0.9], label="ratio")
right.set_title("Trend")
right.set_ylabel("Ratio")
right.legend()
fig.tight_layout()
fig.savefig("chart.png")
save_locations(fig, "locations.json")
