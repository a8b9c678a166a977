# %% [markdown]
# # Fréchet distance over severities
#
# Embed clean and corrupted copies of a small image set with the built-in pixel
# statistics embedding and measure how far each severity drifts.

# %%
from _scene import scene
from eocorrupt import CorruptionSpec, apply_corruption, derive_stream, severity_sweep
from eocorrupt.fidelity import embed_images

images = [scene(64, seed=i) for i in range(120)]
clean = embed_images(images)

for kind in ("gaussian_noise", "haze", "gaussian_blur"):
    corrupted = {}
    for sev in range(1, 6):
        spec = CorruptionSpec.parse(f"{kind}:{sev}")
        out = [apply_corruption(im, None, spec, derive_stream(0, str(i), kind, sev))[0]
               for i, im in enumerate(images)]
        corrupted[sev] = embed_images(out)
    rows = severity_sweep(clean, corrupted)
    print(f"{kind:16s}", "  ".join(f"S{s}={d:.3f}" for s, d in rows))

# %% [markdown]
# The distance is a summary of distribution shift in embedding space; with a
# learned encoder in place of the pixel statistics the same sweep applies.
