#!/usr/bin/env python3
"""Fit the strong-scaling runtime model to measured training times.

The bundled measurements are single-node LLM training runtimes at 8, 16
and 32 GPUs. T(n) = a + b/n splits the work into a serial floor and a
perfectly parallel part; the fit quantifies how close the measurements
come to ideal halving.
"""

from fabricsim import fit_scaling, load_scenario, predict_runtime, speedup

points = load_scenario("fig8_measurements").measurements.scaling_points
print("measured runtimes:")
for n, minutes in points:
    print(f"  {n:>2} GPUs: {minutes:7.1f} min ({minutes / 60:.2f} h)")

model = fit_scaling(points)
print(f"\nfit: T(n) = {model.serial_minutes:.2f} + "
      f"{model.parallel_minutes:.2f}/n minutes")
print(f"max relative residual: {model.max_rel_residual * 100:.2f}%")

print("\nmodel vs measurement:")
for n, minutes in points:
    predicted = predict_runtime(model, n)
    print(f"  n={n:>2}: predicted {predicted:7.1f}, measured {minutes:7.1f} "
          f"({100 * (predicted - minutes) / minutes:+.1f}%)")

print("\nextrapolation:")
for n in (64, 128, 1024):
    print(f"  n={n:>4}: {predict_runtime(model, n):6.1f} min")
print(f"  n->inf: {model.serial_minutes:6.1f} min (serial floor)")

print("\nmeasured speedups:")
print(f"  8 -> 16 GPUs: {speedup(points, 8, 16):.3f}x")
print(f"  8 -> 32 GPUs: {speedup(points, 8, 32):.3f}x "
      f"(ideal would be 4.000x)")

print("\ntwo-point fit on (8, 16) predicts the 32-GPU run:")
partial = fit_scaling(points[:2])
print(f"  predicted {predict_runtime(partial, 32):.2f} min, "
      f"measured {points[2][1]:.1f} min")
