"""Smoke test for the skymark extension module."""

import os
import tempfile

import skymark

names = skymark.techniques()
assert len(names) == 14 and names[0] == "Sobel_50" and names[-1] == "sobel-floodfill", names

# a clean sky/ground step is recovered exactly by mean-shift
w, h, horizon = 40, 30, 18
data = bytearray()
for y in range(h):
    for _ in range(w):
        data += bytes((70, 130, 225) if y < horizon else (60, 45, 30))
step = skymark.Raster(w, h, bytes(data))
truth = skymark.SkyMask(w, h, [y < horizon for y in range(h) for _ in range(w)])
mask = skymark.apply("Mean_7_6_100", step)
assert mask == truth, mask
stats = skymark.confusion(mask, truth)
assert stats["f1"] == 1.0 and stats["fn"] == 0, stats

try:
    skymark.apply("Sobel_75", step)
except ValueError as e:
    assert "sobel-floodfill" in str(e)
else:
    raise AssertionError("unknown technique accepted")

rmse, r2, d = skymark.series_stats([0.2, 0.5, 0.9], [0.2, 0.5, 0.9])
assert rmse == 0.0 and d == 1.0

features = skymark.extract_features(step)
assert len(features) == 74

# train on a handful of synthetic scenes and route a new one
scenes = [skymark.synth_scene(c, seed) for seed in range(3) for c in ("clear", "overcast", "trees")]
model = skymark.SelectorModel.train([s[0] for s in scenes], [s[1] for s in scenes], seed=17)
image, truth = skymark.synth_scene("trees", 99)
routed, technique = model.adaptive(image)
assert technique in names
assert model.rank(image)[0] == technique
assert abs(routed.sky_fraction() - truth.sky_fraction()) <= 1.0

with tempfile.TemporaryDirectory() as tmp:
    path = os.path.join(tmp, "model.json")
    model.save(path)
    assert skymark.SelectorModel.load(path).rank(image) == model.rank(image)
    png = os.path.join(tmp, "scene.png")
    encoded = skymark.encode_mask(image, truth, "blue")
    encoded.save(png)
    assert skymark.decode_mask(skymark.Raster.load(png), "blue") == truth

print(f"ok: {len(names)} techniques, routed trees scene to {technique}, "
      f"sky fraction {routed.sky_fraction():.3f} vs truth {truth.sky_fraction():.3f}")
