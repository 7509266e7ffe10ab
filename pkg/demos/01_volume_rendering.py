#!/usr/bin/env python3
"""Volume rendering basics: ray sampling, compositing weights, feature pixels.

Walks through the core math one piece at a time on hand-sized inputs.
"""

import math

import torch

from stylefield import Ray, compositing_weights, render_pixel_feature, sample_ray

print("=" * 60)
print("1. Stratified ray sampling")
print("=" * 60)
ray = Ray(origin=torch.zeros(3), direction=torch.tensor([0.0, 0.0, 1.0]),
          near=0.0, far=1.0)
batch = sample_ray(ray, n_samples=4)
print(f"depths: {batch.depths.tolist()}")
print(f"deltas: {batch.deltas.tolist()}  (last delta closes out to far)")

jittered = sample_ray(ray, n_samples=4, jitter=True, seed=42)
print(f"jittered depths (seed 42): {[f'{d:.4f}' for d in jittered.depths.tolist()]}")

print()
print("=" * 60)
print("2. Compositing weights")
print("=" * 60)
sigmas = torch.tensor([0.0, 2.0, 8.0, 2.0])
deltas = torch.full((4,), 0.25)
weights = compositing_weights(sigmas, deltas)
print(f"densities: {sigmas.tolist()}")
print(f"weights:   {[f'{w:.4f}' for w in weights.tolist()]}")
print(f"sum of weights: {float(weights.sum()):.6f}")
print(f"closed form 1 - exp(-sum sigma*delta): "
      f"{1 - math.exp(-float((sigmas * deltas).sum())):.6f}")

print()
print("=" * 60)
print("3. Feature compositing is a weighted sum")
print("=" * 60)
point_features = torch.tensor([[1.0, 0.0], [0.0, 1.0], [2.0, 2.0], [5.0, -1.0]])
pixel = render_pixel_feature(weights, point_features)
print(f"point features:\n{point_features}")
print(f"pixel feature: {[f'{v:.4f}' for v in pixel.tolist()]}")

print()
print("A single opaque sample takes all the weight:")
solo = compositing_weights(torch.tensor([0.0, 100.0, 5.0]), torch.full((3,), 0.5))
print(f"weights: {[f'{w:.4f}' for w in solo.tolist()]}")
